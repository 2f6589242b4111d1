#!/usr/bin/env python3
"""Zooming into a region: breadth-first expansion from a single seed.

One known BSSID inside the target area is enough. Each response names up to
400 neighbors; feeding the in-region ones back as queries walks outward in
waves until everything the service knows about the area is learned.
Out-of-region records are kept (flagged) but never expanded.
"""

from datetime import date

from wpslab.crawl import region_crawl
from wpslab.geo import BoxRegion
from wpslab.mac import Oui
from wpslab.protocol import ClientConfig, WpsClient
from wpslab.sim import ClusterSpec, LocalTransport, MitigationSpec, WorldConfig, generate_world

OUI = Oui.parse("74:24:9f")

# a dense "city" the region boundary cuts through, plus a second town far
# enough north that no response can bridge the gap
config = WorldConfig(
    seed=44,
    clusters=(
        ClusterSpec(40.00, -75.0, 1.5, 800),
        ClusterSpec(40.45, -75.0, 1.0, 300),
    ),
    vendor_mix=((OUI, 1.0),),
    mitigations=MitigationSpec(nearby_cap=60),
)
world = generate_world(config)
region = BoxRegion(39.7, 40.004, -75.6, -74.4)

in_region_truth = sum(1 for ap in world.aps if region.contains(ap.true_pos))
print(f"world: {len(world.aps)} APs, {in_region_truth} truly inside the region")

seed = next(ap.bssid for ap in world.aps if region.contains(ap.true_pos))
print(f"crawling outward from a single seed: {seed}")

client = WpsClient(ClientConfig(rate_per_s=5000), transport=LocalTransport(world))
state = region_crawl(client, [seed], region, observed_date=date(2024, 1, 1))

got_in = sum(1 for rec in state.discovered.values() if rec.in_region)
got_out = sum(1 for rec in state.discovered.values() if rec.in_region is False)
far_town = sum(
    1 for rec in state.discovered.values() if rec.pos.lat > 40.3
)
print(f"\nrequests sent:        {state.requests_sent}")
print(f"discovered in-region: {got_in} / {in_region_truth}")
print(f"recorded just over the border (flagged, never expanded): {got_out}")
print(f"records from the disconnected northern town: {far_town} (unreachable)")
print(f"frontier drained: {len(state.frontier) == 0}")
