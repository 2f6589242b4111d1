"""Longitudinal analyses over daily snapshots: decay, lifetimes, movement,
regional disappearance, inflow origins, and cross-dataset validation.

A snapshot is one day's answer for a fixed sample of BSSIDs. Three statuses
are distinguished: found (the service returned a position), notfound (the
service returned the sentinel), and error (the measurement failed, which is
missing data about the service rather than evidence of absence).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from .geo import GeoPosition, GeoRegion, NOT_FOUND, contains, geohash, haversine_km
from .mac import MacAddress, Oui, OuiRegistry, normalized_oui
from .protocol import WpsClient

logger = logging.getLogger(__name__)

STATUS_FOUND = "found"
STATUS_NOTFOUND = "notfound"
STATUS_ERROR = "error"


@dataclass(frozen=True)
class SnapshotEntry:
    status: str
    pos: GeoPosition | None  # set iff status == found


@dataclass
class Snapshot:
    date: date
    records: dict[MacAddress, SnapshotEntry]

    def geolocatable(self) -> set[MacAddress]:
        return {m for m, e in self.records.items() if e.status == STATUS_FOUND}

    def position(self, mac: MacAddress) -> GeoPosition | None:
        entry = self.records.get(mac)
        if entry is None or entry.status != STATUS_FOUND:
            return None
        return entry.pos


def resample(client: WpsClient, sample: Sequence[MacAddress], on_date: date) -> Snapshot:
    """Query the sample in its fixed order and record one snapshot.

    Sentinel answers become notfound; chunk-level failures mark their BSSIDs
    as error so later analyses can treat them as missing data.
    """
    entries: dict[MacAddress, SnapshotEntry] = {
        mac: SnapshotEntry(STATUS_ERROR, None) for mac in sample
    }
    for result in client.locate(sample):
        if not result.ok:
            logger.warning("resample chunk %d failed: %s", result.index, result.error)
            continue
        for rec in result.response.requested:
            if rec.found:
                entries[rec.bssid] = SnapshotEntry(STATUS_FOUND, rec.pos)
            else:
                entries[rec.bssid] = SnapshotEntry(STATUS_NOTFOUND, None)
    return Snapshot(on_date, entries)


def save_snapshot(snapshot: Snapshot, directory: str | Path) -> Path:
    """Write one `date,bssid,lat,lon,status` CSV per day, atomically."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{snapshot.date.isoformat()}.csv"
    tmp = path.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "bssid", "lat", "lon", "status"])
        day = snapshot.date.isoformat()
        for mac, entry in snapshot.records.items():
            if entry.status == STATUS_FOUND:
                writer.writerow([day, str(mac), f"{entry.pos.lat:.8f}", f"{entry.pos.lon:.8f}", entry.status])
            else:
                writer.writerow([day, str(mac), "", "", entry.status])
    tmp.replace(path)
    return path


def load_snapshot(path: str | Path) -> Snapshot:
    path = Path(path)
    records: dict[MacAddress, SnapshotEntry] = {}
    snap_date: date | None = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:5]] != ["date", "bssid", "lat", "lon", "status"]:
            raise ValueError(f"{path}: not a snapshot CSV")
        for row in reader:
            if not row:
                continue
            day, mac_text, lat, lon, status = row[:5]
            snap_date = date.fromisoformat(day)
            mac = MacAddress.parse(mac_text)
            if status == STATUS_FOUND:
                records[mac] = SnapshotEntry(STATUS_FOUND, GeoPosition(float(lat), float(lon)))
            elif status in (STATUS_NOTFOUND, STATUS_ERROR):
                records[mac] = SnapshotEntry(status, None)
            else:
                raise ValueError(f"{path}: unknown status {status!r}")
    if snap_date is None:
        raise ValueError(f"{path}: snapshot has no rows")
    return Snapshot(snap_date, records)


def load_snapshots(directory: str | Path) -> list[Snapshot]:
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise ValueError(f"no snapshot CSVs under {directory}")
    return [load_snapshot(p) for p in paths]


def decay_series(snapshots: Sequence[Snapshot], baseline_date: date) -> list[tuple[date, float]]:
    """Fraction of the baseline's geolocatable BSSIDs still geolocatable each day.

    Error entries are missing data: they leave both the day's numerator and
    denominator. Fractions can rise day over day when BSSIDs return.
    """
    by_date = {s.date: s for s in snapshots}
    if baseline_date not in by_date:
        raise ValueError(f"no snapshot at baseline date {baseline_date}")
    baseline = by_date[baseline_date].geolocatable()
    if not baseline:
        raise ValueError("baseline snapshot has no geolocatable BSSIDs")
    series: list[tuple[date, float]] = []
    for snap in sorted(snapshots, key=lambda s: s.date):
        if snap.date < baseline_date:
            continue
        num = 0
        denom = 0
        for mac in baseline:
            entry = snap.records.get(mac)
            if entry is None or entry.status == STATUS_ERROR:
                continue
            denom += 1
            if entry.status == STATUS_FOUND:
                num += 1
        series.append((snap.date, num / denom if denom else 0.0))
    return series


@dataclass(frozen=True)
class Lifetime:
    bssid: MacAddress
    days_geolocatable: int
    had_gap: bool


def lifetimes(snapshots: Sequence[Snapshot]) -> list[Lifetime]:
    """Per-BSSID count of geolocatable days over the window, gaps included.

    A gap is a notfound day strictly between two found days; error days are
    ignored on both counts.
    """
    if not snapshots:
        raise ValueError("lifetimes need at least one snapshot")
    ordered = sorted(snapshots, key=lambda s: s.date)
    sample: dict[MacAddress, None] = {}
    for snap in ordered:
        for mac in snap.records:
            sample.setdefault(mac, None)
    out: list[Lifetime] = []
    for mac in sample:
        statuses = [s.records[mac].status for s in ordered if mac in s.records]
        found_days = sum(1 for st in statuses if st == STATUS_FOUND)
        meaningful = [st for st in statuses if st != STATUS_ERROR]
        had_gap = False
        seen_found = False
        pending_gap = False
        for st in meaningful:
            if st == STATUS_FOUND:
                if seen_found and pending_gap:
                    had_gap = True
                seen_found = True
                pending_gap = False
            else:
                if seen_found:
                    pending_gap = True
        out.append(Lifetime(mac, found_days, had_gap))
    return out


def lifetime_cdf(lifes: Sequence[Lifetime]) -> list[tuple[int, int, float]]:
    """(days, count, cumulative fraction) rows; counts sum to the sample size."""
    if not lifes:
        return []
    counts: dict[int, int] = {}
    for lt in lifes:
        counts[lt.days_geolocatable] = counts.get(lt.days_geolocatable, 0) + 1
    total = len(lifes)
    rows = []
    cum = 0
    for days in sorted(counts):
        cum += counts[days]
        rows.append((days, counts[days], cum / total))
    return rows


@dataclass(frozen=True)
class MovementEvent:
    bssid: MacAddress
    trajectory: tuple[tuple[date, GeoPosition], ...]
    distance_km: float  # the metric that crossed the threshold
    max_displacement_km: float
    from_date: date
    from_pos: GeoPosition
    to_date: date
    to_pos: GeoPosition


def _trajectories(snapshots: Sequence[Snapshot]) -> dict[MacAddress, list[tuple[date, GeoPosition]]]:
    trajs: dict[MacAddress, list[tuple[date, GeoPosition]]] = {}
    for snap in sorted(snapshots, key=lambda s: s.date):
        for mac, entry in snap.records.items():
            if entry.status == STATUS_FOUND:
                trajs.setdefault(mac, []).append((snap.date, entry.pos))
    return trajs


def max_pairwise_displacement(
    trajectory: Sequence[tuple[date, GeoPosition]],
) -> tuple[float, int, int]:
    """Largest distance between any two points of a trajectory (km, i, j)."""
    best = (0.0, 0, 0)
    n = len(trajectory)
    for i in range(n):
        for j in range(i + 1, n):
            d = haversine_km(trajectory[i][1], trajectory[j][1])
            if d > best[0]:
                best = (d, i, j)
    return best


def path_length(trajectory: Sequence[tuple[date, GeoPosition]]) -> float:
    """Sum of consecutive displacements along a trajectory."""
    return sum(
        haversine_km(trajectory[i][1], trajectory[i + 1][1])
        for i in range(len(trajectory) - 1)
    )


def detect_movers(
    snapshots: Sequence[Snapshot],
    threshold_km: float = 1.0,
    mode: str = "max_displacement",
) -> list[MovementEvent]:
    """BSSIDs whose reported positions moved more than `threshold_km`.

    The default metric is the maximum pairwise displacement over the
    trajectory, which is robust to small per-day position updates; mode
    "path_length" sums consecutive displacements instead.
    """
    if len(snapshots) < 2:
        raise ValueError("mover detection needs at least two snapshots")
    if mode not in ("max_displacement", "path_length"):
        raise ValueError(f"unknown mover metric {mode!r}")
    events: list[MovementEvent] = []
    for mac, traj in _trajectories(snapshots).items():
        if len(traj) < 2:
            continue
        max_disp, i, j = max_pairwise_displacement(traj)
        metric = max_disp if mode == "max_displacement" else path_length(traj)
        if metric > threshold_km:
            events.append(
                MovementEvent(
                    bssid=mac,
                    trajectory=tuple(traj),
                    distance_km=metric,
                    max_displacement_km=max_disp,
                    from_date=traj[i][0],
                    from_pos=traj[i][1],
                    to_date=traj[j][0],
                    to_pos=traj[j][1],
                )
            )
    events.sort(key=lambda e: e.bssid)
    return events


def movement_cdf(
    events: Sequence[MovementEvent],
    vendor: str | None = None,
    oui: Oui | None = None,
    registry: OuiRegistry | None = None,
) -> list[tuple[float, float]]:
    """(distance_km, cumulative fraction) steps over mover displacements,
    optionally restricted to one vendor (requires a registry) or one prefix."""
    if vendor is not None and registry is None:
        raise ValueError("vendor filtering needs a registry")
    selected = []
    for ev in events:
        if oui is not None and normalized_oui(ev.bssid) != oui.with_local_bit(False):
            continue
        if vendor is not None and registry.vendor_of(ev.bssid) != vendor:
            continue
        selected.append(ev.distance_km)
    selected.sort()
    n = len(selected)
    return [(d, (i + 1) / n) for i, d in enumerate(selected)]


@dataclass
class DisappearanceReport:
    region: GeoRegion
    t0: date
    t1: date
    present_at_t0: set[MacAddress]
    present_at_t1: set[MacAddress]
    vanished: set[MacAddress]
    vanished_bins: dict[str, int]  # geohash of last-known position -> count


def disappearance(
    snapshots: Sequence[Snapshot],
    region: GeoRegion,
    t0: date,
    t1: date,
    precision: int = 4,
) -> DisappearanceReport:
    """BSSIDs present in the region at t0 that the service had forgotten by t1."""
    by_date = {s.date: s for s in snapshots}
    for d in (t0, t1):
        if d not in by_date:
            raise ValueError(f"no snapshot at {d}")
    s0, s1 = by_date[t0], by_date[t1]
    present_t0 = {
        mac
        for mac, entry in s0.records.items()
        if entry.status == STATUS_FOUND and contains(region, entry.pos)
    }
    present_t1 = {
        mac
        for mac, entry in s1.records.items()
        if entry.status == STATUS_FOUND and contains(region, entry.pos)
    }
    vanished = present_t0 - present_t1
    bins: dict[str, int] = {}
    for mac in vanished:
        cell = geohash(s0.records[mac].pos, precision)
        bins[cell] = bins.get(cell, 0) + 1
    return DisappearanceReport(region, t0, t1, present_t0, present_t1, vanished, bins)


@dataclass
class InflowReport:
    region: GeoRegion
    origins: dict[MacAddress, tuple[date, GeoPosition]]  # last out-of-region fix
    origin_bins: dict[str, int]


def inflows(snapshots: Sequence[Snapshot], region: GeoRegion, precision: int = 4) -> InflowReport:
    """Where BSSIDs that entered the region were last seen before entering.

    A BSSID counts when its first in-region appearance is preceded by an
    out-of-region appearance; the recorded origin is the latest such fix.
    """
    if len(snapshots) < 2:
        raise ValueError("inflow analysis needs at least two snapshots")
    origins: dict[MacAddress, tuple[date, GeoPosition]] = {}
    for mac, traj in _trajectories(snapshots).items():
        last_outside: tuple[date, GeoPosition] | None = None
        for day, pos in traj:
            if contains(region, pos):
                if last_outside is not None:
                    origins[mac] = last_outside
                break
            last_outside = (day, pos)
    bins: dict[str, int] = {}
    for day, pos in origins.values():
        cell = geohash(pos, precision)
        bins[cell] = bins.get(cell, 0) + 1
    return InflowReport(region, origins, bins)


@dataclass(frozen=True)
class ValidationStats:
    reference_total: int
    null_island_dropped: int
    compared: int
    unknown: int
    known: int
    within: int

    @property
    def unknown_fraction(self) -> float:
        return self.unknown / self.compared

    @property
    def known_fraction(self) -> float:
        return self.known / self.compared

    @property
    def within_fraction(self) -> float:
        return self.within / self.known if self.known else 0.0


def cross_validate(
    reference: dict[MacAddress, GeoPosition],
    candidate: dict[MacAddress, GeoPosition],
    agreement_km: float = 1.0,
) -> ValidationStats:
    """Compare a reference position set against a candidate service's answers.

    Reference rows pinned at exactly (0, 0) are dropped as corrupt fixes.
    A reference BSSID is unknown when the candidate lacks it or answers with
    the sentinel; of the known ones, agreement means within `agreement_km`.
    """
    null_island = sum(1 for p in reference.values() if p.lat == 0.0 and p.lon == 0.0)
    kept = {m: p for m, p in reference.items() if not (p.lat == 0.0 and p.lon == 0.0)}
    if not kept:
        raise ValueError("reference dataset is empty after dropping (0, 0) rows")
    unknown = 0
    known = 0
    within = 0
    for mac, ref_pos in kept.items():
        cand = candidate.get(mac)
        if cand is None or cand.is_sentinel:
            unknown += 1
            continue
        known += 1
        if haversine_km(ref_pos, cand) <= agreement_km:
            within += 1
    return ValidationStats(
        reference_total=len(reference),
        null_island_dropped=null_island,
        compared=len(kept),
        unknown=unknown,
        known=known,
        within=within,
    )


def load_position_csv(path: str | Path) -> dict[MacAddress, GeoPosition]:
    """Load a `bssid,lat,lon` CSV (header optional) into a position map."""
    out: dict[MacAddress, GeoPosition] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "bssid":
                continue
            mac = MacAddress.parse(row[0].strip())
            out[mac] = GeoPosition(float(row[1]), float(row[2]))
    return out
