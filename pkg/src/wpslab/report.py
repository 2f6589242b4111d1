"""Vendor attribution tables, rank CDFs, and deterministic exports.

Corpus-level accounting: group discovered BSSIDs by normalized vendor prefix
and by vendor name (with optional name aliasing), plus an OUI-rank CDF that
shows how concentrated the corpus is in a few prefixes. Exports are
byte-deterministic for a fixed input.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .crawl import CrawlState, DiscoveredRecord
from .geo import GeoPosition, bin_counts
from .mac import MacAddress, Oui, OuiRegistry, normalized_oui

logger = logging.getLogger(__name__)

UNLISTED = "Unlisted"


@dataclass
class VendorReport:
    total: int
    oui_counts: list[tuple[Oui, int]]  # descending count, ties by prefix
    vendor_counts: list[tuple[str, int]]  # descending count, ties by name; includes Unlisted
    unlisted: int
    oui_rank_cdf: list[tuple[int, float]]  # (rank, cumulative corpus fraction)
    top_k: int

    def top_ouis(self) -> list[tuple[Oui, int]]:
        return self.oui_counts[: self.top_k]

    def top_vendors(self) -> list[tuple[str, int]]:
        return self.vendor_counts[: self.top_k]


def vendor_report(
    bssids: Iterable[MacAddress], registry: OuiRegistry, top_k: int = 5
) -> VendorReport:
    """Count a corpus by normalized OUI and by vendor name.

    BSSIDs whose normalized prefix is not registered land in the Unlisted
    bucket. Both tables sum to the corpus size.
    """
    oui_counts: dict[Oui, int] = {}
    vendor_counts: dict[str, int] = {}
    total = 0
    for mac in bssids:
        total += 1
        key = normalized_oui(mac)
        oui_counts[key] = oui_counts.get(key, 0) + 1
        vendor = registry.vendor_of(mac) or UNLISTED
        vendor_counts[vendor] = vendor_counts.get(vendor, 0) + 1
    ouis_sorted = sorted(oui_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    vendors_sorted = sorted(vendor_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    cdf: list[tuple[int, float]] = []
    cum = 0
    for rank, (_, count) in enumerate(ouis_sorted, start=1):
        cum += count
        cdf.append((rank, cum / total))
    return VendorReport(
        total=total,
        oui_counts=ouis_sorted,
        vendor_counts=vendors_sorted,
        unlisted=vendor_counts.get(UNLISTED, 0),
        oui_rank_cdf=cdf,
        top_k=top_k,
    )


def render_vendor_report(report: VendorReport, show_all: bool = False) -> str:
    """Plain-text tables: top prefixes, top vendors, and totals."""
    lines = []
    oui_rows = report.oui_counts if show_all else report.top_ouis()
    vendor_rows = report.vendor_counts if show_all else report.top_vendors()
    lines.append("count      %      oui")
    for oui, count in oui_rows:
        lines.append(f"{count:>9,}  {100 * count / report.total:5.2f}  {oui}")
    rest = report.total - sum(c for _, c in oui_rows)
    if rest:
        lines.append(f"{rest:>9,}  {100 * rest / report.total:5.2f}  ({len(report.oui_counts) - len(oui_rows):,} others)")
    lines.append("")
    lines.append("count      %      vendor")
    for vendor, count in vendor_rows:
        lines.append(f"{count:>9,}  {100 * count / report.total:5.2f}  {vendor}")
    rest = report.total - sum(c for _, c in vendor_rows)
    if rest:
        lines.append(f"{rest:>9,}  {100 * rest / report.total:5.2f}  ({len(report.vendor_counts) - len(vendor_rows):,} others)")
    lines.append("")
    lines.append(f"{report.total:>9,}  total BSSIDs ({report.unlisted:,} unlisted)")
    return "\n".join(lines)


def _records(corpus: CrawlState | Mapping[MacAddress, DiscoveredRecord]) -> dict[MacAddress, DiscoveredRecord]:
    if isinstance(corpus, CrawlState):
        return corpus.discovered
    return dict(corpus)


def export_corpus_csv(corpus, path: str | Path) -> None:
    """`bssid,lat,lon,first_seen,last_seen`, sorted by BSSID; stable bytes."""
    records = _records(corpus)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bssid", "lat", "lon", "first_seen", "last_seen"])
        for mac in sorted(records):
            rec = records[mac]
            writer.writerow(
                [
                    str(mac),
                    f"{rec.pos.lat:.8f}",
                    f"{rec.pos.lon:.8f}",
                    rec.first_seen.isoformat(),
                    rec.last_seen.isoformat(),
                ]
            )


def export_corpus_geojson(corpus, path: str | Path) -> None:
    """GeoJSON FeatureCollection of points, sorted by BSSID; stable bytes."""
    records = _records(corpus)
    features = []
    for mac in sorted(records):
        rec = records[mac]
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [round(rec.pos.lon, 8), round(rec.pos.lat, 8)],
                },
                "properties": {
                    "bssid": str(mac),
                    "first_seen": rec.first_seen.isoformat(),
                    "last_seen": rec.last_seen.isoformat(),
                },
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def export_bins_csv(
    positions: Iterable[GeoPosition] | CrawlState | Mapping[MacAddress, DiscoveredRecord],
    path: str | Path,
    precision: int = 4,
) -> dict[str, int]:
    """`geohash,count` rows sorted lexicographically; returns the bin map."""
    if isinstance(positions, (CrawlState, Mapping)):
        positions = [rec.pos for rec in _records(positions).values()]
    bins = bin_counts(positions, precision)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["geohash", "count"])
        for cell in sorted(bins):
            writer.writerow([cell, bins[cell]])
    return bins


def export_bin_table(bins: Mapping[str, int], path: str | Path) -> None:
    """Write an existing geohash-count table, sorted lexicographically."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["geohash", "count"])
        for cell in sorted(bins):
            writer.writerow([cell, bins[cell]])


def export_cdf_csv(rows: Iterable[tuple], path: str | Path, header: tuple[str, ...]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def export_vendor_report_csv(report: VendorReport, path_prefix: str | Path) -> list[Path]:
    """Write <prefix>_ouis.csv, <prefix>_vendors.csv, <prefix>_oui_cdf.csv."""
    prefix = Path(path_prefix)
    paths = []
    p = prefix.with_name(prefix.name + "_ouis.csv")
    with open(p, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["oui", "count"])
        for oui, count in report.oui_counts:
            writer.writerow([str(oui), count])
    paths.append(p)
    p = prefix.with_name(prefix.name + "_vendors.csv")
    with open(p, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["vendor", "count"])
        for vendor, count in report.vendor_counts:
            writer.writerow([vendor, count])
    paths.append(p)
    p = prefix.with_name(prefix.name + "_oui_cdf.csv")
    export_cdf_csv(report.oui_rank_cdf, p, ("rank", "cumulative_fraction"))
    paths.append(p)
    return paths


def parse_corpus_csv(path: str | Path) -> dict[MacAddress, GeoPosition]:
    """Read back an exported corpus CSV as a position map."""
    out: dict[MacAddress, GeoPosition] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "bssid":
            raise ValueError(f"{path}: not a corpus CSV")
        for row in reader:
            if row:
                out[MacAddress.parse(row[0])] = GeoPosition(float(row[1]), float(row[2]))
    return out
