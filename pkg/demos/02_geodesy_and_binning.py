#!/usr/bin/env python3
"""Distance, geohash bins, and region membership: the measuring tape for
everything downstream (mover thresholds, heatmap bins, region filters)."""

import random

from wpslab.geo import (
    BoxRegion,
    GeoPosition,
    NOT_FOUND,
    PolygonRegion,
    bin_counts,
    contains,
    destination,
    geohash,
    haversine_km,
)

# ---- Great-circle distance -----------------------------------------------------

paris = GeoPosition(48.8566, 2.3522)
kyiv = GeoPosition(50.4501, 30.5234)
print(f"Paris -> Kyiv: {haversine_km(paris, kyiv):.1f} km")

one_km_east = destination(paris, bearing_deg=90.0, distance_km=1.0)
print(f"1 km east of Paris: {haversine_km(paris, one_km_east):.6f} km (round trip)")

# The service's not-found sentinel is never a position:
try:
    haversine_km(paris, NOT_FOUND)
except ValueError as e:
    print(f"sentinel rejected as expected: {e}")

# ---- Geohash bins ---------------------------------------------------------------

print(f"\ngeohash of {paris.lat:.4f},{paris.lon:.4f}:")
for precision in (1, 2, 4, 8):
    print(f"  precision {precision}: {geohash(paris, precision)}")

rng = random.Random(7)
cloud = [
    GeoPosition(paris.lat + rng.gauss(0, 0.2), paris.lon + rng.gauss(0, 0.2))
    for _ in range(500)
]
bins = bin_counts(cloud, precision=4)
print(f"\n500 points around Paris fall into {len(bins)} four-character cells:")
for cell in sorted(bins, key=bins.get, reverse=True)[:5]:
    print(f"  {cell}: {bins[cell]}")
print(f"counts conserve the total: {sum(bins.values())} = 500")

# ---- Regions --------------------------------------------------------------------

box = BoxRegion(48.0, 49.5, 1.0, 3.5)
triangle = PolygonRegion(((48.0, 1.0), (50.0, 2.5), (48.0, 4.0)))
print(f"\nParis in box: {contains(box, paris)}")
print(f"Paris in triangle: {contains(triangle, paris)}")
print(f"Kyiv in box: {contains(box, kyiv)}")
