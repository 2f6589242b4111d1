#!/usr/bin/env python3
"""What each mitigation does to the attack, measured head to head.

The same sweep runs against the same world four times: unmitigated, with
the nearby list turned off, with a per-client rate limit, and against a
population that opts out or randomizes its BSSID on every boot.
"""

import time
from datetime import date

from wpslab.crawl import global_sweep
from wpslab.mac import Oui
from wpslab.protocol import ClientConfig, WpsClient
from wpslab.sim import (
    ChurnSpec,
    ClusterSpec,
    LocalTransport,
    MitigationSpec,
    WorldConfig,
    generate_world,
)

OUI = Oui.parse("74:24:9f")
SEEDS = [OUI, OUI.with_local_bit(True)]
PER_OUI = 1 << 15


def build_world(**overrides):
    config = WorldConfig(
        seed=88,
        clusters=(ClusterSpec(40.0, -75.0, 0.8, 2500),),
        vendor_mix=((OUI, 1.0),),
        **overrides,
    )
    return generate_world(config)


def sweep(world, rate=10000.0):
    client = WpsClient(ClientConfig(rate_per_s=rate, in_flight=1),
                       transport=LocalTransport(world))
    started = time.perf_counter()
    state = global_sweep(client, SEEDS, per_oui=PER_OUI, rng_seed=5,
                         observed_date=date(2024, 1, 1))
    elapsed = time.perf_counter() - started
    return state, elapsed


# ---- baseline: no mitigations -----------------------------------------------------

state, elapsed = sweep(build_world())
print(f"baseline:          {state.direct_hits:3d} hits -> {len(state.discovered):5d} "
      f"discovered ({state.amplification:.0f}x) in {elapsed:.1f}s")

# ---- mitigation 1: stop volunteering nearby BSSIDs --------------------------------

state, elapsed = sweep(build_world(mitigations=MitigationSpec(nearby_cap=0)))
print(f"nearby cap 0:      {state.direct_hits:3d} hits -> {len(state.discovered):5d} "
      f"discovered (amplification gone)")

# ---- mitigation 2: per-client rate limiting ----------------------------------------

world = build_world(mitigations=MitigationSpec(rate_limit_per_key=60.0))
state, elapsed = sweep(world, rate=10000.0)
print(f"rate limit 60/s:   {state.direct_hits:3d} hits -> {len(state.discovered):5d} "
      f"discovered, but the sweep now takes {elapsed:.1f}s "
      f"({state.requests_sent} requests incl. 429 retries)")

# ---- mitigation 3: opt-out and boot-time randomization -----------------------------

world = build_world(nomap_fraction=0.3, randomize_on_boot_fraction=0.5,
                    churn=ChurnSpec(daily_off_p=0.2, daily_on_p=0.8))
for _ in range(14):  # let churn cycle devices so randomization rotates identities
    world.advance()
state, elapsed = sweep(world)
stable_prefix = sum(1 for m in state.discovered if m.oui in SEEDS)
print(f"opt-out+randomize: {state.direct_hits:3d} hits -> {len(state.discovered):5d} "
      f"discovered; only {stable_prefix} still carry a stable vendor prefix")
print("\nrotated identities are locally administered and change every power")
print("cycle, so yesterday's corpus no longer names today's devices.")
