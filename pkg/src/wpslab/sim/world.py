"""Synthetic ground-truth world behind the simulated locate service.

The world holds access points with true positions, power schedules, and
per-identity database state. A BSSID becomes servable only after being
continuously powered for `ingestion_days`, stays servable until it has been
off for `expunge_days`, and never appears if the operator opted out. Each
found BSSID in a query is amplified with its nearest servable neighbors,
capped per found BSSID.

One writer advances the day; queries are answered from an immutable per-day
view that the writer swaps in after each advance.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ..geo import (
    GeoPosition,
    GeoRegion,
    NOT_FOUND,
    destination,
    haversine_km_arrays,
    parse_region,
    region_to_dict,
)
from ..mac import LOCAL_BIT, MULTICAST_BIT, MacAddress, Oui, SUFFIX_SPACE
from ..protocol import LocateRequest, LocateResponse, WpsRecord
from ..ratelimit import TokenBucket

logger = logging.getLogger(__name__)

WORLD_FORMAT = "wps-world/1"

# meters per degree of latitude on the sphere used by the geo module
_M_PER_DEG = 111194.92664455873


@dataclass(frozen=True)
class ClusterSpec:
    lat: float
    lon: float
    stddev_km: float
    count: int


@dataclass(frozen=True)
class ChurnSpec:
    daily_off_p: float = 0.0
    daily_on_p: float = 0.0


@dataclass(frozen=True)
class MoverSpec:
    fraction: float = 0.0
    min_km: float = 1.5
    max_km: float = 200.0
    from_day: int = 1
    to_day: int = 25


@dataclass(frozen=True)
class MitigationSpec:
    rate_limit_per_key: float | None = None
    nearby_cap: int = 400
    redactions: tuple[GeoRegion, ...] = ()


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 0
    epoch: date = date(2024, 1, 1)
    ingestion_days: int = 7
    expunge_days: int = 7
    noise_sigma_m: float = 10.0
    prewarm: bool = True
    clusters: tuple[ClusterSpec, ...] = ()
    vendor_mix: tuple[tuple[Oui, float], ...] = ()
    churn: ChurnSpec = field(default_factory=ChurnSpec)
    movers: MoverSpec = field(default_factory=MoverSpec)
    nomap_fraction: float = 0.0
    randomize_on_boot_fraction: float = 0.0
    mitigations: MitigationSpec = field(default_factory=MitigationSpec)

    def __post_init__(self):
        if self.ingestion_days < 1 or self.expunge_days < 1:
            raise ValueError("ingestion_days and expunge_days must be at least 1")
        if self.mitigations.nearby_cap < 0:
            raise ValueError("nearby_cap must be non-negative")
        for _, w in self.vendor_mix:
            if w < 0:
                raise ValueError("vendor mix weights must be non-negative")
        if self.vendor_mix and sum(w for _, w in self.vendor_mix) <= 0:
            raise ValueError("vendor mix weights must sum to a positive value")
        for frac in (self.nomap_fraction, self.randomize_on_boot_fraction, self.movers.fraction):
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"fractions must be in [0, 1], got {frac}")


@dataclass
class SimAp:
    """One access point: ground truth the service only sees indirectly."""

    bssid: MacAddress
    true_pos: GeoPosition
    power_schedule: list[list[int | None]] = field(default_factory=lambda: [[0, None]])
    nomap: bool = False
    randomize_on_boot: bool = False
    churn_exempt: bool = False
    moves: list[tuple[int, GeoPosition]] = field(default_factory=list)

    def __post_init__(self):
        prev_end = -1
        for on_day, off_day in self.power_schedule:
            if off_day is not None and off_day <= on_day:
                raise ValueError(f"empty power interval [{on_day}, {off_day})")
            if on_day < prev_end:
                raise ValueError("power intervals must be ordered and disjoint")
            prev_end = (1 << 62) if off_day is None else off_day
        self.moves = sorted(self.moves, key=lambda m: m[0])

    def powered_on(self, day: int) -> bool:
        for on_day, off_day in self.power_schedule:
            if on_day <= day and (off_day is None or day < off_day):
                return True
        return False


@dataclass
class AliasState:
    """Service-side state for one broadcast identity of an access point."""

    mac: MacAddress
    ap_index: int
    active: bool
    on_streak: int = 0
    off_streak: int = 0
    listed: bool = False
    noise_dlat: float = 0.0
    noise_dlon: float = 0.0


@dataclass(frozen=True)
class RateLimited:
    retry_after_s: float


class WorldView:
    """Immutable per-day snapshot of servable identities with an exact k-NN index."""

    def __init__(self, day: int, macs: list[MacAddress], lats: np.ndarray, lons: np.ndarray):
        self.day = day
        self.macs = macs
        self.lats = lats
        self.lons = lons
        self._index = {mac: i for i, mac in enumerate(macs)}
        if macs:
            lat_r = np.radians(lats)
            lon_r = np.radians(lons)
            self._xyz = np.column_stack(
                (np.cos(lat_r) * np.cos(lon_r), np.cos(lat_r) * np.sin(lon_r), np.sin(lat_r))
            )
            self._tree = cKDTree(self._xyz)
        else:
            self._xyz = None
            self._tree = None

    def __len__(self) -> int:
        return len(self.macs)

    def lookup(self, mac: MacAddress) -> int | None:
        return self._index.get(mac)

    def position(self, i: int) -> GeoPosition:
        return GeoPosition(float(self.lats[i]), float(self.lons[i]))

    def nearest(self, i: int, k: int, exclude: set[int]) -> list[int]:
        """Indices of the k nearest identities to identity i by great-circle
        distance, ties broken by BSSID byte order, `exclude` (and i) omitted."""
        if k <= 0 or self._tree is None or len(self) <= 1:
            return []
        # Chord distance on the unit sphere is monotone in great-circle
        # distance, so KD-tree order is exact; slack covers exclusions and
        # float-level near-ties before the final re-rank.
        m = min(len(self), k + len(exclude) + 8)
        _, idxs = self._tree.query(self._xyz[i], k=m)
        idxs = np.atleast_1d(idxs)
        cand = [int(j) for j in idxs if j < len(self) and j != i and j not in exclude]
        if not cand:
            return []
        d = haversine_km_arrays(
            float(self.lats[i]), float(self.lons[i]), self.lats[cand], self.lons[cand]
        )
        order = sorted(range(len(cand)), key=lambda t: (d[t], self.macs[cand[t]]))
        return [cand[t] for t in order[:k]]


class WorldModel:
    """Mutable world: single-writer day advancement, concurrent read-only serving."""

    def __init__(
        self,
        config: WorldConfig,
        aps: list[SimAp],
        day: int = 0,
        aliases: dict[MacAddress, AliasState] | None = None,
    ):
        self.config = config
        self.aps = aps
        self.day = day
        self._limiters: dict[str, TokenBucket] = {}
        if aliases is None:
            aliases = {}
            rng = self._day_rng(day)
            for idx, ap in enumerate(aps):
                state = AliasState(mac=ap.bssid, ap_index=idx, active=True)
                if config.prewarm and ap.powered_on(day) and not ap.nomap:
                    state.on_streak = config.ingestion_days
                    state.listed = True
                    state.noise_dlat, state.noise_dlon = self._draw_noise(rng, ap)
                aliases[ap.bssid] = state
        self.aliases = aliases
        self._active_alias: dict[int, MacAddress] = {
            a.ap_index: a.mac for a in aliases.values() if a.active
        }
        self._rebuild_view()

    @property
    def ingestion_days(self) -> int:
        return self.config.ingestion_days

    @property
    def expunge_days(self) -> int:
        return self.config.expunge_days

    @property
    def nearby_cap(self) -> int:
        return self.config.mitigations.nearby_cap

    @property
    def view(self) -> WorldView:
        return self._view

    @property
    def today(self) -> date:
        return self.config.epoch + timedelta(days=self.day)

    def _day_rng(self, day: int) -> random.Random:
        return random.Random(self.config.seed * 1_000_003 + day)

    def _draw_noise(self, rng: random.Random, ap: SimAp) -> tuple[float, float]:
        sigma = self.config.noise_sigma_m
        if sigma <= 0:
            return 0.0, 0.0
        coslat = max(0.01, math.cos(math.radians(ap.true_pos.lat)))
        return rng.gauss(0.0, sigma / _M_PER_DEG), rng.gauss(0.0, sigma / (_M_PER_DEG * coslat))

    def advance(self) -> WorldModel:
        """Advance one day: fold the completed day into ingestion/expunge
        streaks, then apply scheduled moves, churn, and boot-time identity
        rotation for the new day."""
        d = self.day
        rng = self._day_rng(d + 1)
        for alias in list(self.aliases.values()):
            ap = self.aps[alias.ap_index]
            broadcasting = alias.active and ap.powered_on(d)
            if broadcasting:
                alias.on_streak += 1
                alias.off_streak = 0
            else:
                alias.off_streak += 1
                alias.on_streak = 0
            if not alias.listed and not ap.nomap and alias.on_streak >= self.ingestion_days:
                alias.listed = True
                alias.noise_dlat, alias.noise_dlon = self._draw_noise(rng, ap)
            elif alias.listed and alias.off_streak >= self.expunge_days:
                alias.listed = False
            if not alias.active and not alias.listed and alias.off_streak >= self.expunge_days:
                del self.aliases[alias.mac]
        self.day = d + 1
        for ap in self.aps:
            while ap.moves and ap.moves[0][0] <= self.day:
                _, new_pos = ap.moves.pop(0)
                ap.true_pos = new_pos
        churn = self.config.churn
        for idx, ap in enumerate(self.aps):
            was_on = ap.powered_on(self.day - 1)
            if not ap.churn_exempt and (churn.daily_off_p > 0 or churn.daily_on_p > 0):
                r = rng.random()
                if was_on and ap.powered_on(self.day):
                    if r < churn.daily_off_p:
                        self._close_interval(ap, self.day)
                elif not ap.powered_on(self.day):
                    if r < churn.daily_on_p:
                        ap.power_schedule.append([self.day, None])
            if ap.randomize_on_boot and not was_on and ap.powered_on(self.day):
                self._rotate_alias(idx, rng)
        self._rebuild_view()
        return self

    @staticmethod
    def _close_interval(ap: SimAp, day: int) -> None:
        for interval in ap.power_schedule:
            on_day, off_day = interval
            if on_day <= day and (off_day is None or day < off_day):
                interval[1] = day
                return

    def _rotate_alias(self, ap_index: int, rng: random.Random) -> None:
        old_mac = self._active_alias.get(ap_index)
        if old_mac is not None:
            self.aliases[old_mac].active = False
        while True:
            value = rng.getrandbits(48)
            value = (value | (LOCAL_BIT << 40)) & ~(MULTICAST_BIT << 40)
            mac = MacAddress(value)
            if mac not in self.aliases:
                break
        self.aliases[mac] = AliasState(mac=mac, ap_index=ap_index, active=True)
        self._active_alias[ap_index] = mac

    def _reported_position(self, alias: AliasState) -> GeoPosition:
        ap = self.aps[alias.ap_index]
        lat = max(-90.0, min(90.0, ap.true_pos.lat + alias.noise_dlat))
        lon = ap.true_pos.lon + alias.noise_dlon
        lon = (lon + 180.0) % 360.0 - 180.0
        return GeoPosition(round(lat, 8), round(lon, 8))

    def _rebuild_view(self) -> None:
        redactions = self.config.mitigations.redactions
        rows: list[tuple[MacAddress, GeoPosition]] = []
        for alias in self.aliases.values():
            if not alias.listed:
                continue
            pos = self._reported_position(alias)
            if any(region.contains(pos) for region in redactions):
                continue
            rows.append((alias.mac, pos))
        rows.sort(key=lambda r: r[0])
        macs = [mac for mac, _ in rows]
        lats = np.array([p.lat for _, p in rows], dtype=float)
        lons = np.array([p.lon for _, p in rows], dtype=float)
        self._view = WorldView(self.day, macs, lats, lons)

    def geolocatable(self, mac: MacAddress) -> bool:
        return self._view.lookup(mac) is not None

    def set_mitigations(self, mitigations: MitigationSpec) -> None:
        """Swap mitigation policy (rate limit, nearby cap, redactions) in place."""
        self.config = replace(self.config, mitigations=mitigations)
        self._limiters.clear()
        self._rebuild_view()

    def _limiter_for(self, client_key: str) -> TokenBucket | None:
        limit = self.config.mitigations.rate_limit_per_key
        if limit is None:
            return None
        limiter = self._limiters.get(client_key)
        if limiter is None:
            limiter = self._limiters.setdefault(
                client_key, TokenBucket(limit, capacity=max(1.0, limit))
            )
        return limiter

    def serve(self, request: LocateRequest, client_key: str = "anon") -> LocateResponse | RateLimited:
        """Answer one locate request against the current day's view."""
        limiter = self._limiter_for(client_key)
        if limiter is not None and not limiter.try_acquire():
            return RateLimited(max(0.001, limiter.retry_after()))
        view = self._view
        requested: list[WpsRecord] = []
        found_idx: list[int] = []
        exclude: set[int] = set()
        for mac in request.bssids:
            i = view.lookup(mac)
            if i is None:
                requested.append(WpsRecord(mac, NOT_FOUND))
            else:
                requested.append(WpsRecord(mac, view.position(i)))
                found_idx.append(i)
                exclude.add(i)
        nearby: list[WpsRecord] = []
        seen: set[MacAddress] = set()
        cap = self.nearby_cap
        for i in found_idx:
            for j in view.nearest(i, cap, exclude):
                mac = view.macs[j]
                if mac not in seen:
                    seen.add(mac)
                    nearby.append(WpsRecord(mac, view.position(j)))
        return LocateResponse(tuple(requested), tuple(nearby))


def advance_day(world: WorldModel) -> WorldModel:
    return world.advance()


def serve(world: WorldModel, request: LocateRequest, client_key: str = "anon"):
    return world.serve(request, client_key)


def generate_world(config: WorldConfig) -> WorldModel:
    """Sample a world from cluster, vendor-mix, churn, and mover specs.

    Deterministic for a fixed config: same config, same world.
    """
    rng = random.Random(config.seed)
    total = sum(c.count for c in config.clusters)
    if not config.vendor_mix:
        raise ValueError("world generation needs a non-empty vendor mix")
    distinct = len({o for o, _ in config.vendor_mix})
    if total > SUFFIX_SPACE * distinct:
        raise ValueError(
            f"{total} APs exceed the 24-bit suffix capacity of {distinct} prefix(es)"
        )
    positions: list[GeoPosition] = []
    for cluster in config.clusters:
        sigma_lat = cluster.stddev_km / (_M_PER_DEG / 1000.0)
        coslat = max(0.01, math.cos(math.radians(cluster.lat)))
        sigma_lon = sigma_lat / coslat
        for _ in range(cluster.count):
            lat = max(-89.99, min(89.99, rng.gauss(cluster.lat, sigma_lat)))
            lon = rng.gauss(cluster.lon, sigma_lon)
            lon = (lon + 180.0) % 360.0 - 180.0
            positions.append(GeoPosition(lat, lon))

    ouis = [o for o, _ in config.vendor_mix]
    weights = [w for _, w in config.vendor_mix]
    chosen = rng.choices(ouis, weights=weights, k=total)
    per_oui: dict[Oui, int] = {}
    for oui in chosen:
        per_oui[oui] = per_oui.get(oui, 0) + 1
    for oui, count in per_oui.items():
        if count > SUFFIX_SPACE:
            raise ValueError(f"{count} APs exceed the 24-bit suffix capacity of {oui}")
    suffix_pools = {oui: iter(rng.sample(range(SUFFIX_SPACE), count)) for oui, count in per_oui.items()}
    bssids = [oui.bssid(next(suffix_pools[oui])) for oui in chosen]

    aps = [SimAp(bssid=b, true_pos=p) for b, p in zip(bssids, positions)]

    def pick(fraction: float) -> set[int]:
        k = round(total * fraction)
        return set(rng.sample(range(total), k)) if k else set()

    for i in pick(config.nomap_fraction):
        aps[i].nomap = True
    for i in pick(config.randomize_on_boot_fraction):
        aps[i].randomize_on_boot = True
    movers = config.movers
    for i in pick(movers.fraction):
        move_day = rng.randint(movers.from_day, movers.to_day)
        dist = math.exp(rng.uniform(math.log(movers.min_km), math.log(movers.max_km)))
        bearing = rng.uniform(0.0, 360.0)
        aps[i].moves.append((move_day, destination(aps[i].true_pos, bearing, dist)))

    return WorldModel(config, aps)


# -- persistence ---------------------------------------------------------------


def config_to_dict(config: WorldConfig) -> dict:
    return {
        "seed": config.seed,
        "epoch": config.epoch.isoformat(),
        "ingestion_days": config.ingestion_days,
        "expunge_days": config.expunge_days,
        "noise_sigma_m": config.noise_sigma_m,
        "prewarm": config.prewarm,
        "clusters": [
            {"lat": c.lat, "lon": c.lon, "stddev_km": c.stddev_km, "count": c.count}
            for c in config.clusters
        ],
        "vendor_mix": {str(oui): w for oui, w in config.vendor_mix},
        "churn": {"daily_off_p": config.churn.daily_off_p, "daily_on_p": config.churn.daily_on_p},
        "movers": {
            "fraction": config.movers.fraction,
            "min_km": config.movers.min_km,
            "max_km": config.movers.max_km,
            "from_day": config.movers.from_day,
            "to_day": config.movers.to_day,
        },
        "nomap_fraction": config.nomap_fraction,
        "randomize_on_boot_fraction": config.randomize_on_boot_fraction,
        "mitigations": {
            "rate_limit_per_key": config.mitigations.rate_limit_per_key,
            "nearby_cap": config.mitigations.nearby_cap,
            "redactions": [region_to_dict(r) for r in config.mitigations.redactions],
        },
    }


def config_from_dict(obj: dict) -> WorldConfig:
    churn = obj.get("churn", {})
    movers = obj.get("movers", {})
    mit = obj.get("mitigations", {})
    return WorldConfig(
        seed=int(obj.get("seed", 0)),
        epoch=date.fromisoformat(obj.get("epoch", "2024-01-01")),
        ingestion_days=int(obj.get("ingestion_days", 7)),
        expunge_days=int(obj.get("expunge_days", 7)),
        noise_sigma_m=float(obj.get("noise_sigma_m", 10.0)),
        prewarm=bool(obj.get("prewarm", True)),
        clusters=tuple(
            ClusterSpec(float(c["lat"]), float(c["lon"]), float(c["stddev_km"]), int(c["count"]))
            for c in obj.get("clusters", [])
        ),
        vendor_mix=tuple(
            (Oui.parse(k), float(v)) for k, v in obj.get("vendor_mix", {}).items()
        ),
        churn=ChurnSpec(float(churn.get("daily_off_p", 0.0)), float(churn.get("daily_on_p", 0.0))),
        movers=MoverSpec(
            float(movers.get("fraction", 0.0)),
            float(movers.get("min_km", 1.5)),
            float(movers.get("max_km", 200.0)),
            int(movers.get("from_day", 1)),
            int(movers.get("to_day", 25)),
        ),
        nomap_fraction=float(obj.get("nomap_fraction", 0.0)),
        randomize_on_boot_fraction=float(obj.get("randomize_on_boot_fraction", 0.0)),
        mitigations=MitigationSpec(
            rate_limit_per_key=(
                None if mit.get("rate_limit_per_key") is None else float(mit["rate_limit_per_key"])
            ),
            nearby_cap=int(mit.get("nearby_cap", 400)),
            redactions=tuple(parse_region(r) for r in mit.get("redactions", [])),
        ),
    )


def world_to_dict(world: WorldModel) -> dict:
    return {
        "format": WORLD_FORMAT,
        "day": world.day,
        "config": config_to_dict(world.config),
        "aps": [
            {
                "bssid": str(ap.bssid),
                "lat": ap.true_pos.lat,
                "lon": ap.true_pos.lon,
                "schedule": [[on, off] for on, off in ap.power_schedule],
                "nomap": ap.nomap,
                "randomize_on_boot": ap.randomize_on_boot,
                "churn_exempt": ap.churn_exempt,
                "moves": [[d, p.lat, p.lon] for d, p in ap.moves],
            }
            for ap in world.aps
        ],
        "aliases": [
            {
                "mac": str(a.mac),
                "ap": a.ap_index,
                "active": a.active,
                "on_streak": a.on_streak,
                "off_streak": a.off_streak,
                "listed": a.listed,
                "noise_dlat": a.noise_dlat,
                "noise_dlon": a.noise_dlon,
            }
            for a in world.aliases.values()
        ],
    }


def world_from_dict(obj: dict) -> WorldModel:
    if not isinstance(obj, dict) or obj.get("format") != WORLD_FORMAT:
        raise ValueError(f"not a {WORLD_FORMAT} document")
    config = config_from_dict(obj["config"])
    aps = []
    for entry in obj["aps"]:
        aps.append(
            SimAp(
                bssid=MacAddress.parse(entry["bssid"]),
                true_pos=GeoPosition(float(entry["lat"]), float(entry["lon"])),
                power_schedule=[
                    [int(on), None if off is None else int(off)] for on, off in entry["schedule"]
                ],
                nomap=bool(entry.get("nomap", False)),
                randomize_on_boot=bool(entry.get("randomize_on_boot", False)),
                churn_exempt=bool(entry.get("churn_exempt", False)),
                moves=[
                    (int(d), GeoPosition(float(lat), float(lon)))
                    for d, lat, lon in entry.get("moves", [])
                ],
            )
        )
    aliases: dict[MacAddress, AliasState] = {}
    for entry in obj["aliases"]:
        mac = MacAddress.parse(entry["mac"])
        aliases[mac] = AliasState(
            mac=mac,
            ap_index=int(entry["ap"]),
            active=bool(entry["active"]),
            on_streak=int(entry["on_streak"]),
            off_streak=int(entry["off_streak"]),
            listed=bool(entry["listed"]),
            noise_dlat=float(entry["noise_dlat"]),
            noise_dlon=float(entry["noise_dlon"]),
        )
    return WorldModel(config, aps, day=int(obj["day"]), aliases=aliases)


def save_world(world: WorldModel, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(world_to_dict(world), indent=1), encoding="utf-8")
    tmp.replace(path)


def load_world(path: str | Path) -> WorldModel:
    return world_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
