#!/usr/bin/env python3
"""Two regional analyses: what vanished, and where arrivals came from.

Scenario one scripts a blackout over part of a region and reads the
disappearance report off the daily snapshots. Scenario two scripts a
convoy of movers entering the region and recovers their origins.
"""

from wpslab.geo import BoxRegion, GeoPosition, destination, geohash
from wpslab.mac import Oui
from wpslab.protocol import ClientConfig, WpsClient
from wpslab.sim import LocalTransport, SimAp, WorldConfig, WorldModel
from wpslab.track import disappearance, inflows, resample

OUI = Oui.parse("74:24:9f")
REGION = BoxRegion(39.5, 40.5, -75.5, -74.5)


def snapshot_run(world, sample, days):
    client = WpsClient(ClientConfig(rate_per_s=10000), transport=LocalTransport(world))
    out = []
    for _ in range(days + 1):
        out.append(resample(client, sample, world.today))
        world.advance()
    return out


# ---- scenario 1: blackout ---------------------------------------------------------

aps = []
for i in range(1, 161):
    pos = GeoPosition(40.0 + (i % 16) * 0.01, -75.0 + (i // 16) * 0.01)
    powered_off = i % 5 in (0, 1)  # 40% of the region loses power on day 1
    aps.append(SimAp(bssid=OUI.bssid(i), true_pos=pos,
                     power_schedule=[[0, 1]] if powered_off else [[0, None]]))
world = WorldModel(WorldConfig(seed=66, noise_sigma_m=10.0), aps)
sample = [ap.bssid for ap in aps]
snaps = snapshot_run(world, sample, days=12)

report = disappearance(snaps, REGION, snaps[0].date, snaps[-1].date)
frac = len(report.vanished) / len(report.present_at_t0)
print(f"present at {report.t0}: {len(report.present_at_t0)}")
print(f"present at {report.t1}: {len(report.present_at_t1)}")
print(f"vanished: {len(report.vanished)} ({frac:.0%}) -- the scripted outage was 40%")
print("hardest-hit cells:")
for cell in sorted(report.vanished_bins, key=report.vanished_bins.get, reverse=True)[:3]:
    print(f"  {cell}: {report.vanished_bins[cell]} gone")

# ---- scenario 2: arrivals ---------------------------------------------------------

origin = GeoPosition(50.0, -70.0)
migrators = []
for i in range(1, 21):
    start = destination(origin, bearing_deg=i * 17.0, distance_km=0.5 + i * 0.1)
    dest = destination(GeoPosition(40.0, -75.0), bearing_deg=i * 31.0, distance_km=3.0)
    migrators.append(SimAp(bssid=OUI.bssid(500 + i), true_pos=start,
                           moves=[(4 + i % 3, dest)]))
world2 = WorldModel(WorldConfig(seed=67, noise_sigma_m=0.0), migrators)
snaps2 = snapshot_run(world2, [ap.bssid for ap in migrators], days=10)

inflow = inflows(snaps2, REGION)
print(f"\nBSSIDs that entered the region from outside: {len(inflow.origins)}")
print(f"their origins bin to: {inflow.origin_bins}")
print(f"(the scripted staging area is geohash {geohash(origin, 4)!r})")
