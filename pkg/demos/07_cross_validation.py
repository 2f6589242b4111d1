#!/usr/bin/env python3
"""Validating one position source against another.

A wardriving-style reference set is compared against what the locate
service answers for the same BSSIDs: drop corrupt (0,0) fixes, count what
the service does not know, and check how much of the rest agrees within
1 km.
"""

import random

from wpslab.geo import GeoPosition, destination
from wpslab.mac import Oui
from wpslab.track import cross_validate

OUI = Oui.parse("74:24:9f")
rng = random.Random(77)

reference: dict = {}
candidate: dict = {}
for i in range(1, 6001):
    mac = OUI.bssid(i)
    if i <= 18:  # broken GPS fixes pinned at the zero coordinate
        reference[mac] = GeoPosition(0.0, 0.0)
        continue
    pos = GeoPosition(round(rng.uniform(-60, 60), 6), round(rng.uniform(-170, 170), 6))
    reference[mac] = pos
    roll = rng.random()
    if roll < 0.10:
        candidate[mac] = GeoPosition(-180.0, -180.0)  # service does not know it
    elif roll < 0.98:
        candidate[mac] = destination(pos, rng.uniform(0, 360), rng.uniform(0.01, 0.8))
    else:
        candidate[mac] = destination(pos, rng.uniform(0, 360), rng.uniform(3.0, 40.0))

stats = cross_validate(reference, candidate, agreement_km=1.0)
print(f"reference rows:               {stats.reference_total}")
print(f"dropped at the zero fix:      {stats.null_island_dropped}")
print(f"compared:                     {stats.compared}")
print(f"unknown to the service:       {stats.unknown} ({stats.unknown_fraction:.1%})")
print(f"known to the service:         {stats.known} ({stats.known_fraction:.1%})")
print(f"within 1 km of the reference: {stats.within} ({stats.within_fraction:.1%} of known)")
