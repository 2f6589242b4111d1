#!/usr/bin/env python3
"""How the 48-bit BSSID space collapses into something you can enumerate.

A BSSID is a MAC address: 24 bits of vendor prefix (OUI) + 24 bits of
device suffix. Registered prefixes are a tiny, public subset of the prefix
space, and every registered prefix has a locally-administered twin that
access points also use. Seed those, and random guessing becomes viable.
"""

from wpslab.mac import (
    build_seed_set,
    load_oui_registry,
    normalized_oui,
    parse_mac,
    parse_oui,
    random_bssids,
)

# ---- MAC anatomy ------------------------------------------------------------

mac = parse_mac("08:4A:93:2F:B1:07")
print(f"parsed {mac} -> multicast={mac.is_multicast}, local={mac.is_locally_administered}")

local_twin = parse_mac("0a:4a:93:2f:b1:07")
print(f"{local_twin} has the U/L bit set -> local={local_twin.is_locally_administered}")
print(f"vendor-lookup key for {local_twin} is {normalized_oui(local_twin)} (U/L cleared)")

# ---- Registry and seed set ---------------------------------------------------

registry = load_oui_registry("tests/data/oui_sample.txt")
print(f"\nloaded {len(registry)} registered prefixes")
for oui, vendor in list(registry.entries.items())[:3]:
    print(f"  {oui} -> {vendor}")

seeds = build_seed_set(registry)
print(f"seed set doubles the registry: {len(registry)} prefixes -> {len(seeds)} seeds")
print(f"  e.g. {seeds[0]} (registered) and {seeds[1]} (its locally-administered twin)")

# With a full registry snapshot (~34k prefixes) the seed set is ~68k prefixes,
# versus 2^24 = 16.7M possible prefixes: a 99.6% cut of the search space.
fraction = 2 * 34322 / (1 << 24)
print(f"at full-registry scale that is {fraction:.1%} of the 24-bit prefix space")

# ---- Deterministic guess generation -------------------------------------------

oui = parse_oui("74:24:9f")
guesses = random_bssids(oui, 5, rng_seed=2024)
print(f"\nfirst guesses under {oui} (seeded, distinct, reproducible):")
for g in guesses:
    print(f"  {g}")
again = random_bssids(oui, 5, rng_seed=2024)
print(f"same seed, same guesses: {guesses == again}")
