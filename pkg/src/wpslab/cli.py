"""Command-line front ends: wps-sim, wps-crawl, wps-track, wps-report.

Settings resolve as flag > config document (--config) > WPS_ENDPOINT env
var (endpoint only) > built-in default. Exit codes: 0 success, 2 usage
error (argparse), 3 data error, 4 network error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from datetime import date
from pathlib import Path

import requests

from .crawl import CheckpointError, CrawlState, global_sweep, region_crawl, resume
from .geo import load_region
from .mac import MacAddress, MacParseError, RegistryError, build_seed_set, load_oui_registry
from .protocol import DEFAULT_ENDPOINT, ClientConfig, WpsClient
from .report import (
    export_bin_table,
    export_bins_csv,
    export_corpus_csv,
    export_corpus_geojson,
    export_vendor_report_csv,
    render_vendor_report,
    vendor_report,
)
from .sim import config_from_dict, generate_world, load_world, save_world, SimServer
from .track import (
    cross_validate,
    decay_series,
    detect_movers,
    disappearance,
    inflows,
    lifetime_cdf,
    lifetimes,
    load_position_csv,
    load_snapshots,
    movement_cdf,
    resample,
    save_snapshot,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NETWORK = 4


class NetworkFailure(RuntimeError):
    pass


def _config_doc(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config document must be a JSON object")
    return doc


def _setting(args, doc: dict, name: str, default=None, env: str | None = None):
    """flag > config document > env var > default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in doc:
        return doc[name]
    if env is not None and os.environ.get(env):
        return os.environ[env]
    return default


def _endpoint(args, doc: dict) -> str:
    value = getattr(args, "endpoint", None)
    if value is not None:
        return value
    if os.environ.get("WPS_ENDPOINT"):
        return os.environ["WPS_ENDPOINT"]
    return doc.get("endpoint", DEFAULT_ENDPOINT)


def _client(args, doc: dict) -> WpsClient:
    endpoint = _endpoint(args, doc)
    cfg = ClientConfig(
        endpoint=endpoint,
        batch_size=int(_setting(args, doc, "batch_size", 100)),
        rate_per_s=float(_setting(args, doc, "rate", 30.0)),
        in_flight=int(_setting(args, doc, "in_flight", 4)),
        timeout_s=float(_setting(args, doc, "timeout", 10.0)),
    )
    _probe_endpoint(endpoint, cfg.timeout_s)
    return WpsClient(cfg)


def _probe_endpoint(endpoint: str, timeout_s: float) -> None:
    try:
        requests.get(endpoint.rstrip("/") + "/v1/status", timeout=timeout_s)
    except requests.RequestException as e:
        raise NetworkFailure(f"cannot reach {endpoint}: {e}") from e


def _parse_date(text: str) -> date:
    return date.fromisoformat(text)


def _read_bssid_column(path: str) -> list[MacAddress]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        cell = line.split(",")[0].strip()
        if not cell or cell.lower() == "bssid":
            continue
        out.append(MacAddress.parse(cell))
    return out


def _add_common(parser: argparse.ArgumentParser, endpoint: bool = False) -> None:
    parser.add_argument("--config", help="JSON settings document (flags win)")
    parser.add_argument("--seed", type=int, help="RNG seed")
    if endpoint:
        parser.add_argument("--endpoint", help="locate service base URL (or WPS_ENDPOINT)")


def _dispatch(handler, args) -> int:
    try:
        return handler(args) or EXIT_OK
    except NetworkFailure as e:
        print(f"network error: {e}", file=sys.stderr)
        return EXIT_NETWORK
    except (
        CheckpointError,
        RegistryError,
        MacParseError,
        ValueError,
        KeyError,
        OSError,
        json.JSONDecodeError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


# -- wps-sim --------------------------------------------------------------------


def main_sim(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="wps-sim", description="Synthetic world generator and locate service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a world from a config document")
    p.add_argument("--config", required=True, help="world config JSON")
    p.add_argument("--out", required=True, help="world file to write")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(handler=_sim_gen)

    p = sub.add_parser("tick", help="advance a world file by N days")
    p.add_argument("--world", required=True)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--out", help="write here instead of in place")
    p.set_defaults(handler=_sim_tick)

    p = sub.add_parser("serve", help="serve a world file over HTTP")
    p.add_argument("--world", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8340)
    p.add_argument("--rate-limit", type=float, dest="rate_limit",
                   help="per-client requests/s mitigation")
    p.add_argument("--nearby-cap", type=int, dest="nearby_cap",
                   help="override the nearby-record cap")
    p.add_argument("--redact", action="append", default=[],
                   help="region JSON file to redact (repeatable)")
    p.set_defaults(handler=_sim_serve)

    args = parser.parse_args(argv)
    return _dispatch(args.handler, args)


def _sim_gen(args) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config = config_from_dict(doc)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    world = generate_world(config)
    save_world(world, args.out)
    print(f"world of {len(world.aps)} APs written to {args.out} (day {world.day}, {len(world.view)} servable)")
    return EXIT_OK


def _sim_tick(args) -> int:
    world = load_world(args.world)
    if args.days < 0:
        raise ValueError("--days must be non-negative")
    for _ in range(args.days):
        world.advance()
    out = args.out or args.world
    save_world(world, out)
    print(f"world at day {world.day} ({len(world.view)} servable) written to {out}")
    return EXIT_OK


def _sim_serve(args) -> int:
    world = load_world(args.world)
    mitigations = world.config.mitigations
    if args.rate_limit is not None:
        mitigations = replace(mitigations, rate_limit_per_key=args.rate_limit)
    if args.nearby_cap is not None:
        mitigations = replace(mitigations, nearby_cap=args.nearby_cap)
    if args.redact:
        extra = tuple(load_region(p) for p in args.redact)
        mitigations = replace(mitigations, redactions=mitigations.redactions + extra)
    world.set_mitigations(mitigations)
    server = SimServer(world, host=args.host, port=args.port)
    server.start()
    print(f"serving day {world.day} ({len(world.view)} servable) on {server.url}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


# -- wps-crawl ------------------------------------------------------------------


def main_crawl(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="wps-crawl", description="BSSID discovery engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="random-guess sweep across all seed prefixes")
    _add_common(p, endpoint=True)
    p.add_argument("--oui-db", required=True, dest="oui_db", help="vendor registry file")
    p.add_argument("--per-oui", type=int, default=16384, dest="per_oui")
    p.add_argument("--out", required=True, help="state/checkpoint file")
    p.add_argument("--resume", action="store_true", help="continue from an existing state file")
    p.add_argument("--checkpoint-every", type=int, default=10000, dest="checkpoint_every")
    p.add_argument("--date", help="observation date label (default: today)")
    p.set_defaults(handler=_crawl_sweep)

    p = sub.add_parser("region", help="breadth-first expansion within a region")
    _add_common(p, endpoint=True)
    p.add_argument("--seeds", required=True, help="CSV of seed BSSIDs")
    p.add_argument("--region", required=True, help="region JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--checkpoint-every", type=int, default=10000, dest="checkpoint_every")
    p.add_argument("--date", help="observation date label (default: today)")
    p.set_defaults(handler=_crawl_region)

    p = sub.add_parser("export", help="export a crawl state")
    p.add_argument("--state", required=True)
    p.add_argument("--format", choices=["csv", "geojson", "bins"], default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--precision", type=int, default=4, help="geohash precision for bins")
    p.set_defaults(handler=_crawl_export)

    args = parser.parse_args(argv)
    return _dispatch(args.handler, args)


def _crawl_sweep(args) -> int:
    doc = _config_doc(args)
    registry = load_oui_registry(args.oui_db)
    seeds = build_seed_set(registry)
    state = resume(args.out) if args.resume else CrawlState()
    client = _client(args, doc)
    observed = _parse_date(args.date) if args.date else None
    rng_seed = _setting(args, doc, "seed", 0)
    state = global_sweep(
        client,
        seeds,
        per_oui=args.per_oui,
        rng_seed=rng_seed,
        state=state,
        observed_date=observed,
        checkpoint_path=args.out,
        checkpoint_every=args.checkpoint_every,
    )
    print(
        f"sweep done: {state.requests_sent} requests, {state.direct_hits} direct hits, "
        f"{len(state.discovered)} BSSIDs discovered ({state.amplification:.1f}x amplification)"
    )
    return EXIT_OK


def _crawl_region(args) -> int:
    doc = _config_doc(args)
    seeds = _read_bssid_column(args.seeds)
    region = load_region(args.region)
    state = resume(args.out) if args.resume else CrawlState()
    client = _client(args, doc)
    observed = _parse_date(args.date) if args.date else None
    state = region_crawl(
        client,
        seeds,
        region,
        state=state,
        observed_date=observed,
        checkpoint_path=args.out,
        checkpoint_every=args.checkpoint_every,
    )
    in_region = sum(1 for r in state.discovered.values() if r.in_region)
    print(
        f"region crawl done: {state.requests_sent} requests, {len(state.discovered)} BSSIDs "
        f"({in_region} in region)"
    )
    return EXIT_OK


def _crawl_export(args) -> int:
    state = resume(args.state)
    if args.format == "csv":
        export_corpus_csv(state, args.out)
    elif args.format == "geojson":
        export_corpus_geojson(state, args.out)
    else:
        export_bins_csv(state, args.out, precision=args.precision)
    print(f"{len(state.discovered)} records exported to {args.out}")
    return EXIT_OK


# -- wps-track ------------------------------------------------------------------


def main_track(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="wps-track", description="Longitudinal snapshot analyses")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("resample", help="query a fixed sample and store one snapshot")
    _add_common(p, endpoint=True)
    p.add_argument("--sample", required=True, help="CSV of BSSIDs, order preserved")
    p.add_argument("--snapshots", required=True, help="snapshot directory")
    p.add_argument("--date", required=True, help="snapshot date (YYYY-MM-DD)")
    p.set_defaults(handler=_track_resample)

    p = sub.add_parser("decay", help="fraction of a baseline still geolocatable per day")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--baseline", required=True, help="baseline date")
    p.add_argument("--out", help="CSV output (default: stdout)")
    p.set_defaults(handler=_track_decay)

    p = sub.add_parser("lifetimes", help="distribution of geolocatable-day counts")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--out", help="CSV output (default: stdout)")
    p.set_defaults(handler=_track_lifetimes)

    p = sub.add_parser("movers", help="BSSIDs that moved more than a threshold")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--threshold-km", type=float, default=1.0, dest="threshold_km")
    p.add_argument("--mode", choices=["max_displacement", "path_length"], default="max_displacement")
    p.add_argument("--vendor", help="restrict the CDF to one vendor name")
    p.add_argument("--oui-db", dest="oui_db", help="registry (needed with --vendor)")
    p.add_argument("--out", help="CSV output (default: stdout)")
    p.set_defaults(handler=_track_movers)

    p = sub.add_parser("disappear", help="region present/vanished accounting between two dates")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--t0", required=True)
    p.add_argument("--t1", required=True)
    p.add_argument("--precision", type=int, default=4)
    p.add_argument("--out", help="output prefix for vanished/bins CSVs")
    p.set_defaults(handler=_track_disappear)

    p = sub.add_parser("inflow", help="origins of BSSIDs that entered a region")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--precision", type=int, default=4)
    p.add_argument("--out", help="output prefix for origins/bins CSVs")
    p.set_defaults(handler=_track_inflow)

    p = sub.add_parser("validate", help="cross-validate a reference dataset against a candidate")
    p.add_argument("--reference", required=True, help="bssid,lat,lon CSV")
    p.add_argument("--candidate", required=True, help="bssid,lat,lon CSV (sentinel rows allowed)")
    p.add_argument("--agreement-km", type=float, default=1.0, dest="agreement_km")
    p.set_defaults(handler=_track_validate)

    args = parser.parse_args(argv)
    return _dispatch(args.handler, args)


def _track_resample(args) -> int:
    doc = _config_doc(args)
    sample = _read_bssid_column(args.sample)
    client = _client(args, doc)
    snap = resample(client, sample, _parse_date(args.date))
    path = save_snapshot(snap, args.snapshots)
    found = len(snap.geolocatable())
    print(f"snapshot {snap.date}: {found}/{len(sample)} geolocatable, written to {path}")
    return EXIT_OK


def _write_rows(rows, header, out_path) -> None:
    import csv as _csv

    if out_path:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            w = _csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        print(f"{len(rows)} rows written to {out_path}")
    else:
        w = _csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _track_decay(args) -> int:
    snaps = load_snapshots(args.snapshots)
    series = decay_series(snaps, _parse_date(args.baseline))
    rows = [[d.isoformat(), f"{frac:.6f}"] for d, frac in series]
    _write_rows(rows, ["date", "fraction"], args.out)
    return EXIT_OK


def _track_lifetimes(args) -> int:
    snaps = load_snapshots(args.snapshots)
    rows = [[days, count, f"{frac:.6f}"] for days, count, frac in lifetime_cdf(lifetimes(snaps))]
    _write_rows(rows, ["days", "count", "cumulative_fraction"], args.out)
    return EXIT_OK


def _track_movers(args) -> int:
    snaps = load_snapshots(args.snapshots)
    events = detect_movers(snaps, threshold_km=args.threshold_km, mode=args.mode)
    if args.vendor:
        if not args.oui_db:
            raise ValueError("--vendor needs --oui-db")
        registry = load_oui_registry(args.oui_db)
        cdf = movement_cdf(events, vendor=args.vendor, registry=registry)
        rows = [[f"{d:.3f}", f"{frac:.6f}"] for d, frac in cdf]
        _write_rows(rows, ["distance_km", "cumulative_fraction"], args.out)
        return EXIT_OK
    rows = [
        [
            str(ev.bssid),
            f"{ev.distance_km:.3f}",
            f"{ev.max_displacement_km:.3f}",
            ev.from_date.isoformat(),
            f"{ev.from_pos.lat:.8f}",
            f"{ev.from_pos.lon:.8f}",
            ev.to_date.isoformat(),
            f"{ev.to_pos.lat:.8f}",
            f"{ev.to_pos.lon:.8f}",
        ]
        for ev in events
    ]
    _write_rows(
        rows,
        ["bssid", "distance_km", "max_displacement_km",
         "from_date", "from_lat", "from_lon", "to_date", "to_lat", "to_lon"],
        args.out,
    )
    return EXIT_OK


def _track_disappear(args) -> int:
    snaps = load_snapshots(args.snapshots)
    region = load_region(args.region)
    report = disappearance(snaps, region, _parse_date(args.t0), _parse_date(args.t1), args.precision)
    frac = len(report.vanished) / len(report.present_at_t0) if report.present_at_t0 else 0.0
    print(
        f"present at {args.t0}: {len(report.present_at_t0)}; at {args.t1}: "
        f"{len(report.present_at_t1)}; vanished: {len(report.vanished)} ({100 * frac:.1f}%)"
    )
    if args.out:
        vanished_path = Path(args.out + "_vanished.csv")
        with open(vanished_path, "w", newline="", encoding="utf-8") as fh:
            import csv as _csv

            w = _csv.writer(fh, lineterminator="\n")
            w.writerow(["bssid"])
            for mac in sorted(report.vanished):
                w.writerow([str(mac)])
        export_bin_table(report.vanished_bins, args.out + "_bins.csv")
        print(f"details written to {vanished_path} and {args.out}_bins.csv")
    return EXIT_OK


def _track_inflow(args) -> int:
    snaps = load_snapshots(args.snapshots)
    region = load_region(args.region)
    report = inflows(snaps, region, args.precision)
    print(f"{len(report.origins)} BSSIDs entered the region from outside")
    if args.out:
        origins_path = Path(args.out + "_origins.csv")
        with open(origins_path, "w", newline="", encoding="utf-8") as fh:
            import csv as _csv

            w = _csv.writer(fh, lineterminator="\n")
            w.writerow(["bssid", "origin_date", "origin_lat", "origin_lon"])
            for mac in sorted(report.origins):
                d, pos = report.origins[mac]
                w.writerow([str(mac), d.isoformat(), f"{pos.lat:.8f}", f"{pos.lon:.8f}"])
        export_bin_table(report.origin_bins, args.out + "_bins.csv")
        print(f"details written to {origins_path} and {args.out}_bins.csv")
    return EXIT_OK


def _track_validate(args) -> int:
    reference = load_position_csv(args.reference)
    candidate = load_position_csv(args.candidate)
    stats = cross_validate(reference, candidate, agreement_km=args.agreement_km)
    print(f"reference rows:        {stats.reference_total}")
    print(f"dropped at (0,0):      {stats.null_island_dropped}")
    print(f"compared:              {stats.compared}")
    print(f"unknown to candidate:  {stats.unknown} ({100 * stats.unknown_fraction:.1f}%)")
    print(f"known to candidate:    {stats.known} ({100 * stats.known_fraction:.1f}%)")
    print(
        f"within {args.agreement_km:g} km:         {stats.within} "
        f"({100 * stats.within_fraction:.1f}% of known)"
    )
    return EXIT_OK


# -- wps-report -----------------------------------------------------------------


def main_report(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="wps-report", description="Corpus reporting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vendors", help="per-OUI and per-vendor attribution tables")
    p.add_argument("--state", required=True, help="crawl state file")
    p.add_argument("--oui-db", required=True, dest="oui_db")
    p.add_argument("--alias", help="vendor-name alias CSV")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--all", action="store_true", dest="show_all")
    p.add_argument("--out", help="output prefix for CSV tables")
    p.set_defaults(handler=_report_vendors)

    p = sub.add_parser("bins", help="geohash-cell counts of a corpus")
    p.add_argument("--state", required=True)
    p.add_argument("--precision", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_report_bins)

    args = parser.parse_args(argv)
    return _dispatch(args.handler, args)


def _report_vendors(args) -> int:
    state = resume(args.state)
    registry = load_oui_registry(args.oui_db, alias_path=args.alias)
    report = vendor_report(state.discovered.keys(), registry, top_k=args.top)
    print(render_vendor_report(report, show_all=args.show_all))
    if args.out:
        paths = export_vendor_report_csv(report, args.out)
        print("tables written to " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def _report_bins(args) -> int:
    state = resume(args.state)
    bins = export_bins_csv(state, args.out, precision=args.precision)
    print(f"{sum(bins.values())} records in {len(bins)} cells written to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main_sim())
