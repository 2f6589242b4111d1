"""Independent oracles used by the test suite.

Each function here re-derives an expected result by a different route than
the implementation under test: bit interleaving instead of successive
halving for geohash, pure-python scans instead of the KD-tree for nearby
lists, exact dynamic programming for the churn process, and run-length
replay for the ingestion/expunge state machine.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque

from wpslab.geo import EARTH_RADIUS_KM, GEOHASH_ALPHABET, GeoPosition, contains

M_PER_DEG = 111194.92664455873


class FakeClock:
    """Virtual wall clock: sleep() advances time instead of waiting."""

    def __init__(self, start: float = 0.0):
        self.t = start

    def __call__(self) -> float:
        return self.t

    def sleep(self, dt: float) -> None:
        assert dt >= 0
        self.t += dt


def geohash_oracle(lat: float, lon: float, precision: int) -> str:
    """Geohash by index scaling + bit interleaving (not successive halving)."""
    nbits = 5 * precision
    nlon = (nbits + 1) // 2
    nlat = nbits // 2
    lon_idx = min((1 << nlon) - 1, int((lon + 180.0) / 360.0 * (1 << nlon)))
    lat_idx = min((1 << nlat) - 1, int((lat + 90.0) / 180.0 * (1 << nlat)))
    bits = []
    li, ai = nlon, nlat
    for i in range(nbits):
        if i % 2 == 0:
            li -= 1
            bits.append((lon_idx >> li) & 1)
        else:
            ai -= 1
            bits.append((lat_idx >> ai) & 1)
    chars = []
    for i in range(0, nbits, 5):
        val = 0
        for b in bits[i : i + 5]:
            val = (val << 1) | b
        chars.append(GEOHASH_ALPHABET[val])
    return "".join(chars)


def haversine_oracle(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance via the spherical law of cosines + atan2 form."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dlam = math.radians(lon2 - lon1)
    y = math.sqrt(
        (math.cos(phi2) * math.sin(dlam)) ** 2
        + (math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)) ** 2
    )
    x = math.sin(phi1) * math.sin(phi2) + math.cos(phi1) * math.cos(phi2) * math.cos(dlam)
    return EARTH_RADIUS_KM * math.atan2(y, x)


def listed_identities(world) -> list[tuple]:
    """(mac, reported position) for every servable identity, recomputed from
    ground truth alias fields rather than through the world's view."""
    redactions = world.config.mitigations.redactions
    rows = []
    for alias in world.aliases.values():
        if not alias.listed:
            continue
        ap = world.aps[alias.ap_index]
        lat = max(-90.0, min(90.0, ap.true_pos.lat + alias.noise_dlat))
        lon = ap.true_pos.lon + alias.noise_dlon
        lon = (lon + 180.0) % 360.0 - 180.0
        pos = GeoPosition(round(lat, 8), round(lon, 8))
        if any(r.contains(pos) for r in redactions):
            continue
        rows.append((alias.mac, pos))
    rows.sort(key=lambda r: r[0])
    return rows


def brute_force_response(world, requested_macs, cap: int):
    """Expected (requested_found, nearby) by pure-python scans.

    nearby is assembled exactly per the service contract: per found BSSID,
    its `cap` nearest servable identities by great-circle distance with
    byte-order tie-breaking, excluding all requested BSSIDs, deduplicated
    across the response in found order.
    """
    rows = listed_identities(world)
    index = {mac: pos for mac, pos in rows}
    requested_set = set(requested_macs)
    found = [(mac, index[mac]) for mac in requested_macs if mac in index]
    nearby = []
    seen = set()
    for mac, pos in found:
        ranked = sorted(
            (
                (haversine_oracle(pos.lat, pos.lon, p.lat, p.lon), m, p)
                for m, p in rows
                if m not in requested_set
            ),
            key=lambda t: (t[0], t[1]),
        )
        for _, m, p in ranked[:cap]:
            if m not in seen:
                seen.add(m)
                nearby.append((m, p))
    return dict(found), nearby


def reachable_in_region(world, seeds, region, cap: int):
    """All identities a region-limited breadth-first crawl can learn.

    Returns (discovered_macs, in_region_macs): every record that appears in
    some reachable response, and the subset whose position is in the region
    (only those are ever expanded).
    """
    rows = listed_identities(world)
    index = {mac: pos for mac, pos in rows}
    discovered: dict = {}
    queried = set()
    queue = deque(seeds)
    while queue:
        mac = queue.popleft()
        if mac in queried:
            continue
        queried.add(mac)
        found, nearby = brute_force_response(world, [mac], cap)
        for m, pos in list(found.items()) + nearby:
            discovered[m] = pos
            if contains(region, pos) and m not in queried:
                queue.append(m)
    in_region = {m for m, pos in discovered.items() if contains(region, pos)}
    return set(discovered), in_region


def listed_after_schedule(powered_days: list[bool], ingestion_days: int, expunge_days: int,
                          prewarmed: bool = False) -> list[bool]:
    """Run-length replay of the ingest/expunge rule over a power trace.

    Element t of the result is whether the identity is servable at day t,
    i.e. after days 0..t-1 have been folded in. Day 0 reflects the initial
    (possibly prewarmed) state.
    """
    listed = prewarmed
    on_run = ingestion_days if prewarmed else 0
    off_run = 0
    out = [listed]
    for powered in powered_days:
        if powered:
            on_run += 1
            off_run = 0
        else:
            off_run += 1
            on_run = 0
        if not listed and on_run >= ingestion_days:
            listed = True
        elif listed and off_run >= expunge_days:
            listed = False
        out.append(listed)
    return out


def churn_survival_dp(days: int, p_off: float, p_on: float,
                      ingestion_days: int, expunge_days: int) -> list[float]:
    """Exact P(servable at day t) for a prewarmed, initially-powered identity
    under daily off/on churn, by dynamic programming over the streak state."""
    cap_i, cap_e = ingestion_days, expunge_days
    probs = {(True, cap_i, 0, True): 1.0}
    out = [1.0]
    for _ in range(days):
        nxt = defaultdict(float)
        for (powered, on_s, off_s, listed), p in probs.items():
            if powered:
                on2, off2 = min(cap_i, on_s + 1), 0
            else:
                on2, off2 = 0, min(cap_e, off_s + 1)
            listed2 = listed
            if not listed2 and on2 >= cap_i:
                listed2 = True
            elif listed2 and off2 >= cap_e:
                listed2 = False
            if powered:
                nxt[(True, on2, off2, listed2)] += p * (1.0 - p_off)
                nxt[(False, on2, off2, listed2)] += p * p_off
            else:
                nxt[(True, on2, off2, listed2)] += p * p_on
                nxt[(False, on2, off2, listed2)] += p * (1.0 - p_on)
        probs = dict(nxt)
        out.append(sum(p for (_, _, _, listed), p in probs.items() if listed))
    return out


def offset_position(lat: float, lon: float, north_m: float, east_m: float) -> GeoPosition:
    """Small flat-earth offset helper for building scripted fixtures."""
    dlat = north_m / M_PER_DEG
    dlon = east_m / (M_PER_DEG * math.cos(math.radians(lat)))
    return GeoPosition(lat + dlat, lon + dlon)
