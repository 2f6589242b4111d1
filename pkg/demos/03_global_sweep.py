#!/usr/bin/env python3
"""The core attack loop, end to end over real HTTP on localhost.

Generate a synthetic city, serve it through the locate API, then sweep it
with random guesses under the seeded prefixes. Direct hits are rare by
design; the unrequested "nearby" records the service volunteers are where
the corpus actually comes from.
"""

from datetime import date

from wpslab.crawl import global_sweep
from wpslab.mac import SUFFIX_SPACE, Oui, load_oui_registry
from wpslab.protocol import ClientConfig, WpsClient
from wpslab.report import render_vendor_report, vendor_report
from wpslab.sim import ClusterSpec, MitigationSpec, SimServer, WorldConfig, generate_world

OUI = Oui.parse("74:24:9f")

config = WorldConfig(
    seed=33,
    clusters=(ClusterSpec(40.0, -75.0, 0.8, 1500),),
    vendor_mix=((OUI, 0.8), (Oui.parse("1c:3b:f3"), 0.2)),
    mitigations=MitigationSpec(nearby_cap=400),
)
world = generate_world(config)
print(f"world: {len(world.aps)} APs, {len(world.view)} servable on day {world.day}")

with SimServer(world, port=0) as server:
    print(f"locate service listening on {server.url}")
    client = WpsClient(ClientConfig(endpoint=server.url, rate_per_s=2000, in_flight=4))

    seeds = [OUI, OUI.with_local_bit(True)]
    per_oui = 1 << 15
    expected_hits = per_oui * 1500 * 0.8 / SUFFIX_SPACE
    print(f"sweeping {len(seeds)} prefixes x {per_oui} guesses "
          f"(expected direct hits ~ {expected_hits:.1f})")

    state = global_sweep(client, seeds, per_oui=per_oui, rng_seed=7,
                         observed_date=date(2024, 1, 1))

print(f"\nrequests sent:    {state.requests_sent}")
print(f"direct hits:      {state.direct_hits}")
print(f"nearby-learned:   {state.nearby_learned}")
print(f"total discovered: {len(state.discovered)}")
print(f"amplification:    {state.amplification:.0f}x over direct guessing")

registry = load_oui_registry("tests/data/oui_sample.txt")
print("\nvendor attribution of the discovered corpus:")
print(render_vendor_report(vendor_report(state.discovered.keys(), registry, top_k=3)))
