"""Attack engine: OUI-seeded global sweep and region-focused expansion.

The global sweep guesses a fixed number of random BSSIDs under every seed
prefix and banks whatever the service returns, requested hits and nearby
records alike. The region crawl is a breadth-first expansion: every newly
learned in-region BSSID goes back into the frontier until the frontier
drains. State checkpoints to disk and resumes idempotently.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from .geo import GeoPosition, GeoRegion, contains
from .mac import MacAddress, Oui, random_bssids
from .protocol import ChunkResult, LocateResponse, WpsClient

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "wps-crawl/1"
DEFAULT_CHECKPOINT_EVERY = 10_000


class CheckpointError(ValueError):
    """A crawl checkpoint file was missing, corrupt, or mislabeled."""


@dataclass
class DiscoveredRecord:
    """Everything learned about one BSSID, including its position history."""

    bssid: MacAddress
    pos: GeoPosition
    first_seen: date
    last_seen: date
    source: str  # "direct" or "nearby"
    in_region: bool | None = None
    history: list[tuple[date, GeoPosition]] = field(default_factory=list)

    def observe(self, pos: GeoPosition, on_date: date) -> None:
        """Record a re-observation; the position history grows only on change."""
        self.last_seen = max(self.last_seen, on_date)
        if pos != self.history[-1][1]:
            self.history.append((on_date, pos))
            self.pos = pos


@dataclass
class CrawlState:
    queried: set[MacAddress] = field(default_factory=set)
    discovered: dict[MacAddress, DiscoveredRecord] = field(default_factory=dict)
    frontier: deque[MacAddress] = field(default_factory=deque)
    requests_sent: int = 0
    direct_hits: int = 0
    nearby_learned: int = 0

    def __post_init__(self):
        self._fset: set[MacAddress] = set(self.frontier)

    def enqueue(self, mac: MacAddress) -> bool:
        """Add to the frontier unless already queried or already enqueued."""
        if mac in self.queried or mac in self._fset:
            return False
        self.frontier.append(mac)
        self._fset.add(mac)
        return True

    def pop_frontier(self) -> MacAddress:
        mac = self.frontier.popleft()
        self._fset.discard(mac)
        return mac

    def merge_record(
        self,
        bssid: MacAddress,
        pos: GeoPosition,
        on_date: date,
        source: str,
        in_region: bool | None = None,
    ) -> bool:
        """Fold one observed record in. Returns True when the BSSID is new."""
        if pos.is_sentinel:
            raise ValueError("sentinel positions are never merged into discoveries")
        rec = self.discovered.get(bssid)
        if rec is None:
            self.discovered[bssid] = DiscoveredRecord(
                bssid=bssid,
                pos=pos,
                first_seen=on_date,
                last_seen=on_date,
                source=source,
                in_region=in_region,
                history=[(on_date, pos)],
            )
            if source == "direct":
                self.direct_hits += 1
            else:
                self.nearby_learned += 1
            return True
        rec.observe(pos, on_date)
        if in_region is not None:
            rec.in_region = in_region
        return False

    def merge_response(
        self,
        chunk_bssids: Sequence[MacAddress],
        response: LocateResponse,
        on_date: date,
        region: GeoRegion | None = None,
        expand: bool = False,
    ) -> None:
        """Fold one response in and mark its request chunk as queried."""
        for rec in response.requested:
            if rec.found:
                in_region = contains(region, rec.pos) if region is not None else None
                self.merge_record(rec.bssid, rec.pos, on_date, "direct", in_region)
        for rec in response.nearby:
            in_region = contains(region, rec.pos) if region is not None else None
            self.merge_record(rec.bssid, rec.pos, on_date, "nearby", in_region)
            if expand and in_region:
                self.enqueue(rec.bssid)
        for bssid in chunk_bssids:
            self.queried.add(bssid)

    @property
    def amplification(self) -> float:
        """Discovered-per-direct-hit ratio; the value of unrequested records."""
        if self.direct_hits == 0:
            return 0.0
        return len(self.discovered) / self.direct_hits


def _client_batches(
    client: WpsClient,
    bssids: Sequence[MacAddress],
) -> tuple[list[ChunkResult], list[MacAddress]]:
    """Issue one pass over `bssids`; returns (successes, bssids needing requeue)."""
    ok: list[ChunkResult] = []
    failed: list[MacAddress] = []
    for result in client.locate(bssids):
        if result.ok:
            ok.append(result)
        else:
            logger.warning("chunk %d failed after %d attempts: %s",
                           result.index, result.attempts, result.error)
            failed.extend(result.bssids)
    return ok, failed


class _Checkpointer:
    def __init__(self, state: CrawlState, path: str | Path | None, every: int):
        self.state = state
        self.path = path
        self.every = max(1, every)
        self._last = state.requests_sent

    def maybe(self) -> None:
        if self.path is not None and self.state.requests_sent - self._last >= self.every:
            checkpoint(self.state, self.path)
            self._last = self.state.requests_sent

    def final(self) -> None:
        if self.path is not None:
            checkpoint(self.state, self.path)


def global_sweep(
    client: WpsClient,
    seed_set: Sequence[Oui],
    per_oui: int,
    rng_seed: int | str,
    state: CrawlState | None = None,
    observed_date: date | None = None,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
) -> CrawlState:
    """Guess `per_oui` random BSSIDs under every seed prefix and bank all records.

    Guess sequences are derived deterministically from `rng_seed`, so a run
    resumed from a checkpoint regenerates them, skips what was already
    queried, and converges on the same discovered set as an uninterrupted run.
    Nearby-learned BSSIDs are recorded but not re-queried in sweep mode.
    """
    state = state if state is not None else CrawlState()
    on_date = observed_date or date.today()
    ckpt = _Checkpointer(state, checkpoint_path, checkpoint_every)
    for oui in seed_set:
        guesses = [b for b in random_bssids(oui, per_oui, rng_seed) if b not in state.queried]
        if not guesses:
            continue
        results, failed = _client_batches(client, guesses)
        for result in results:
            state.merge_response(result.bssids, result.response, on_date)
            state.requests_sent += result.attempts
            ckpt.maybe()
        if failed:
            logger.info("requeueing %d BSSIDs once for %s", len(failed), oui)
            retry_results, still_failed = _client_batches(client, failed)
            for result in retry_results:
                state.merge_response(result.bssids, result.response, on_date)
                state.requests_sent += result.attempts
                ckpt.maybe()
            if still_failed:
                logger.error("%d BSSIDs under %s abandoned after requeue", len(still_failed), oui)
    ckpt.final()
    return state


def region_crawl(
    client: WpsClient,
    seeds: Sequence[MacAddress],
    region: GeoRegion,
    state: CrawlState | None = None,
    observed_date: date | None = None,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
) -> CrawlState:
    """Breadth-first expansion from seed BSSIDs through nearby-record responses.

    Every response record is kept (out-of-region ones flagged), but only
    newly seen in-region BSSIDs are enqueued for further querying. Terminates
    when the frontier drains.
    """
    if not seeds:
        raise ValueError("region crawl needs at least one seed BSSID")
    state = state if state is not None else CrawlState()
    on_date = observed_date or date.today()
    ckpt = _Checkpointer(state, checkpoint_path, checkpoint_every)
    for seed in seeds:
        state.enqueue(seed)
    while state.frontier:
        wave = []
        while state.frontier:
            mac = state.pop_frontier()
            if mac not in state.queried:
                wave.append(mac)
        if not wave:
            break
        results, failed = _client_batches(client, wave)
        if failed:
            retry_results, still_failed = _client_batches(client, failed)
            results.extend(retry_results)
            if still_failed:
                logger.error("%d frontier BSSIDs abandoned after requeue", len(still_failed))
        for result in results:
            state.merge_response(
                result.bssids, result.response, on_date, region=region, expand=True
            )
            state.requests_sent += result.attempts
            ckpt.maybe()
    ckpt.final()
    return state


# -- persistence ---------------------------------------------------------------


def state_to_dict(state: CrawlState) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "queried": sorted(str(m) for m in state.queried),
        "frontier": [str(m) for m in state.frontier],
        "counters": {
            "requests_sent": state.requests_sent,
            "direct_hits": state.direct_hits,
            "nearby_learned": state.nearby_learned,
        },
        "discovered": {
            str(mac): {
                "lat": rec.pos.lat,
                "lon": rec.pos.lon,
                "first_seen": rec.first_seen.isoformat(),
                "last_seen": rec.last_seen.isoformat(),
                "source": rec.source,
                "in_region": rec.in_region,
                "history": [[d.isoformat(), p.lat, p.lon] for d, p in rec.history],
            }
            for mac, rec in sorted(state.discovered.items())
        },
    }


def state_from_dict(obj: dict) -> CrawlState:
    if not isinstance(obj, dict) or obj.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not a {CHECKPOINT_FORMAT} document")
    try:
        state = CrawlState(
            queried={MacAddress.parse(m) for m in obj["queried"]},
            frontier=deque(MacAddress.parse(m) for m in obj["frontier"]),
            requests_sent=int(obj["counters"]["requests_sent"]),
            direct_hits=int(obj["counters"]["direct_hits"]),
            nearby_learned=int(obj["counters"]["nearby_learned"]),
        )
        for mac_text, entry in obj["discovered"].items():
            mac = MacAddress.parse(mac_text)
            history = [
                (date.fromisoformat(d), GeoPosition(float(lat), float(lon)))
                for d, lat, lon in entry["history"]
            ]
            if not history:
                raise CheckpointError(f"record {mac_text} has an empty history")
            state.discovered[mac] = DiscoveredRecord(
                bssid=mac,
                pos=GeoPosition(float(entry["lat"]), float(entry["lon"])),
                first_seen=date.fromisoformat(entry["first_seen"]),
                last_seen=date.fromisoformat(entry["last_seen"]),
                source=entry["source"],
                in_region=entry.get("in_region"),
                history=history,
            )
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint: {e}") from e
    return state


def checkpoint(state: CrawlState, path: str | Path) -> None:
    """Atomically write the crawl state; a killed process leaves the previous file."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(state_to_dict(state)), encoding="utf-8")
    tmp.replace(path)


def resume(path: str | Path) -> CrawlState:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not text.strip():
        raise CheckpointError(f"checkpoint {path} is empty")
    try:
        obj = json.loads(text)
    except ValueError as e:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {e}") from e
    return state_from_dict(obj)
