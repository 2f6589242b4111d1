"""Geodesic distance, geohash binning, and region membership.

Positions are WGS-ish lat/lon degrees on a sphere of mean Earth radius;
the reserved pair (-180, -180) is the service's "not found" sentinel and is
never a valid position.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

EARTH_RADIUS_KM = 6371.0088

GEOHASH_ALPHABET = "0123456789bcdefghjkmnpqrstuvwxyz"

_SENTINEL_COORD = -180.0


@dataclass(frozen=True)
class GeoPosition:
    """Latitude/longitude in degrees, or the reserved not-found sentinel."""

    lat: float
    lon: float

    def __post_init__(self):
        if self.lat == _SENTINEL_COORD and self.lon == _SENTINEL_COORD:
            return
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")

    @property
    def is_sentinel(self) -> bool:
        return self.lat == _SENTINEL_COORD and self.lon == _SENTINEL_COORD

    def rounded(self, decimals: int = 8) -> GeoPosition:
        return GeoPosition(round(self.lat, decimals), round(self.lon, decimals))


NOT_FOUND = GeoPosition(_SENTINEL_COORD, _SENTINEL_COORD)


def _require_valid(pos: GeoPosition) -> GeoPosition:
    if pos.is_sentinel:
        raise ValueError("not-found sentinel is not a valid position")
    return pos


def haversine_km(a: GeoPosition, b: GeoPosition) -> float:
    """Great-circle distance in km on a sphere of radius 6371.0088 km."""
    _require_valid(a)
    _require_valid(b)
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_km_arrays(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorized haversine from one point to arrays of points (degrees in, km out)."""
    phi1 = math.radians(lat)
    phis = np.radians(lats)
    dphi = np.radians(lats - lat)
    dlam = np.radians(lons - lon)
    h = np.sin(dphi / 2) ** 2 + math.cos(phi1) * np.cos(phis) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def destination(pos: GeoPosition, bearing_deg: float, distance_km: float) -> GeoPosition:
    """Point reached by travelling `distance_km` along an initial bearing."""
    _require_valid(pos)
    delta = distance_km / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    phi1 = math.radians(pos.lat)
    lam1 = math.radians(pos.lon)
    phi2 = math.asin(
        math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    )
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    lon = math.degrees(lam2)
    lon = (lon + 180.0) % 360.0 - 180.0
    return GeoPosition(math.degrees(phi2), lon)


def geohash(pos: GeoPosition, precision: int) -> str:
    """Base-32 geohash of a position; geohash(p, k) is a prefix of geohash(p, k+1)."""
    _require_valid(pos)
    if not 1 <= precision <= 12:
        raise ValueError(f"precision must be in [1, 12], got {precision}")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    chars: list[str] = []
    use_lon = True
    val = 0
    bit = 0
    while len(chars) < precision:
        if use_lon:
            mid = (lon_lo + lon_hi) / 2
            if pos.lon >= mid:
                val = (val << 1) | 1
                lon_lo = mid
            else:
                val = val << 1
                lon_hi = mid
        else:
            mid = (lat_lo + lat_hi) / 2
            if pos.lat >= mid:
                val = (val << 1) | 1
                lat_lo = mid
            else:
                val = val << 1
                lat_hi = mid
        use_lon = not use_lon
        bit += 1
        if bit == 5:
            chars.append(GEOHASH_ALPHABET[val])
            val = 0
            bit = 0
    return "".join(chars)


def geohash_bounds(gh: str) -> tuple[float, float, float, float]:
    """Cell bounds (lat_lo, lat_hi, lon_lo, lon_hi) of a geohash string."""
    if not gh:
        raise ValueError("empty geohash")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    use_lon = True
    for c in gh:
        try:
            val = GEOHASH_ALPHABET.index(c)
        except ValueError:
            raise ValueError(f"invalid geohash character {c!r}") from None
        for shift in range(4, -1, -1):
            bit = (val >> shift) & 1
            if use_lon:
                mid = (lon_lo + lon_hi) / 2
                if bit:
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) / 2
                if bit:
                    lat_lo = mid
                else:
                    lat_hi = mid
            use_lon = not use_lon
    return lat_lo, lat_hi, lon_lo, lon_hi


def bin_counts(positions: Iterable[GeoPosition], precision: int) -> dict[str, int]:
    """Count positions per geohash cell. Totals are conserved; sentinels rejected."""
    counts: dict[str, int] = {}
    for pos in positions:
        cell = geohash(pos, precision)
        counts[cell] = counts.get(cell, 0) + 1
    return counts


@dataclass(frozen=True)
class BoxRegion:
    """Inclusive lat/lon bounding box. Antimeridian-crossing boxes are rejected;
    express them as two boxes."""

    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if not (-90.0 <= self.min_lat <= self.max_lat <= 90.0):
            raise ValueError("box latitude bounds must satisfy -90 <= min <= max <= 90")
        if not (-180.0 <= self.min_lon <= self.max_lon <= 180.0):
            raise ValueError("box longitude bounds must satisfy -180 <= min <= max <= 180")

    def contains(self, pos: GeoPosition) -> bool:
        _require_valid(pos)
        return (
            self.min_lat <= pos.lat <= self.max_lat
            and self.min_lon <= pos.lon <= self.max_lon
        )


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    if _orient(ax, ay, bx, by, px, py) != 0.0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_cross(a, b, c, d) -> bool:
    """True if open segments ab and cd properly intersect or overlap collinearly."""
    o1 = _orient(*a, *b, *c)
    o2 = _orient(*a, *b, *d)
    o3 = _orient(*c, *d, *a)
    o4 = _orient(*c, *d, *b)
    if o1 == o2 == o3 == o4 == 0.0:
        # collinear: overlapping extents means the ring touches itself
        if max(min(a[0], b[0]), min(c[0], d[0])) < min(max(a[0], b[0]), max(c[0], d[0])):
            return True
        if max(min(a[1], b[1]), min(c[1], d[1])) < min(max(a[1], b[1]), max(c[1], d[1])):
            return True
        return False
    return (o1 * o2 < 0) and (o3 * o4 < 0)


@dataclass(frozen=True)
class PolygonRegion:
    """Closed polygon over (lat, lon) vertices; membership by the even-odd rule,
    boundary counting as inside."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        for lat, lon in self.vertices:
            GeoPosition(lat, lon)  # range check
        n = len(self.vertices)
        edges = [
            (self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)
        ]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue  # adjacent edges share a vertex
                a, b = edges[i]
                c, d = edges[j]
                if _segments_cross(
                    (a[1], a[0]), (b[1], b[0]), (c[1], c[0]), (d[1], d[0])
                ):
                    raise ValueError(f"polygon is self-intersecting at edges {i} and {j}")

    def contains(self, pos: GeoPosition) -> bool:
        _require_valid(pos)
        px, py = pos.lon, pos.lat
        n = len(self.vertices)
        inside = False
        for i in range(n):
            lat1, lon1 = self.vertices[i]
            lat2, lon2 = self.vertices[(i + 1) % n]
            if _on_segment(px, py, lon1, lat1, lon2, lat2):
                return True
            if (lat1 > py) != (lat2 > py):
                x_cross = lon1 + (py - lat1) * (lon2 - lon1) / (lat2 - lat1)
                if px < x_cross:
                    inside = not inside
        return inside


GeoRegion = Union[BoxRegion, PolygonRegion]


def contains(region: GeoRegion, pos: GeoPosition) -> bool:
    return region.contains(pos)


def parse_region(obj: dict) -> GeoRegion:
    """Build a region from its JSON form.

    Schema:
      {"type": "box", "min_lat": .., "max_lat": .., "min_lon": .., "max_lon": ..}
      {"type": "polygon", "vertices": [[lat, lon], ...]}
    """
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("region object must have a 'type' field")
    kind = obj["type"]
    if kind == "box":
        try:
            return BoxRegion(
                float(obj["min_lat"]), float(obj["max_lat"]),
                float(obj["min_lon"]), float(obj["max_lon"]),
            )
        except KeyError as e:
            raise ValueError(f"box region missing field {e.args[0]!r}") from None
    if kind == "polygon":
        verts = obj.get("vertices")
        if not isinstance(verts, list):
            raise ValueError("polygon region needs a 'vertices' list")
        return PolygonRegion(tuple((float(v[0]), float(v[1])) for v in verts))
    raise ValueError(f"unknown region type {kind!r}")


def region_to_dict(region: GeoRegion) -> dict:
    if isinstance(region, BoxRegion):
        return {
            "type": "box",
            "min_lat": region.min_lat, "max_lat": region.max_lat,
            "min_lon": region.min_lon, "max_lon": region.max_lon,
        }
    return {"type": "polygon", "vertices": [[lat, lon] for lat, lon in region.vertices]}


def load_region(path: str | Path) -> GeoRegion:
    return parse_region(json.loads(Path(path).read_text(encoding="utf-8")))
