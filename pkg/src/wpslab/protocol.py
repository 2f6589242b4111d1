"""Wire schema and batching client for the locate service.

The service speaks JSON over HTTP POST /v1/locate. A request carries up to
100 BSSIDs; the response carries one record per requested BSSID in request
order (unknown BSSIDs get the -180/-180 sentinel) plus an opportunistic list
of nearby geolocated BSSIDs. Coordinates are serialized with 8 decimals.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Iterable, Iterator, Sequence

import requests

from .geo import NOT_FOUND, GeoPosition
from .mac import MacAddress, MacParseError
from .ratelimit import TokenBucket

logger = logging.getLogger(__name__)

MAX_BATCH = 100
NEARBY_CAP = 400
COORD_DECIMALS = 8
LOCATE_PATH = "/v1/locate"
DEFAULT_ENDPOINT = "http://127.0.0.1:8340"


class DecodeError(ValueError):
    """A wire payload violated the schema; `pointer` locates the fault."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


@dataclass(frozen=True)
class LocateRequest:
    bssids: tuple[MacAddress, ...]

    def __post_init__(self):
        if not 1 <= len(self.bssids) <= MAX_BATCH:
            raise ValueError(f"request must carry 1..{MAX_BATCH} BSSIDs, got {len(self.bssids)}")
        if len(set(self.bssids)) != len(self.bssids):
            raise ValueError("request contains duplicate BSSIDs")


@dataclass(frozen=True)
class WpsRecord:
    """One BSSID's reported position; sentinel position means not found."""

    bssid: MacAddress
    pos: GeoPosition
    observed_at: date | None = field(default=None, compare=False)

    @property
    def found(self) -> bool:
        return not self.pos.is_sentinel


@dataclass(frozen=True)
class LocateResponse:
    requested: tuple[WpsRecord, ...]
    nearby: tuple[WpsRecord, ...]


def encode_request(req: LocateRequest) -> bytes:
    return json.dumps({"bssids": [str(b) for b in req.bssids]}, separators=(",", ":")).encode()


def decode_request(data: bytes) -> LocateRequest:
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as e:
        raise DecodeError("/", f"invalid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise DecodeError("/", "top-level value must be an object")
    if "bssids" not in obj:
        raise DecodeError("/bssids", "missing required field")
    items = obj["bssids"]
    if not isinstance(items, list):
        raise DecodeError("/bssids", "must be an array")
    if not 1 <= len(items) <= MAX_BATCH:
        raise DecodeError("/bssids", f"must carry 1..{MAX_BATCH} items, got {len(items)}")
    bssids = []
    for i, item in enumerate(items):
        if not isinstance(item, str):
            raise DecodeError(f"/bssids/{i}", "must be a string")
        try:
            bssids.append(MacAddress.parse(item))
        except MacParseError as e:
            raise DecodeError(f"/bssids/{i}", str(e)) from None
    if len(set(bssids)) != len(bssids):
        raise DecodeError("/bssids", "duplicate BSSIDs in one request")
    return LocateRequest(tuple(bssids))


def _encode_record(rec: WpsRecord) -> dict:
    return {
        "bssid": str(rec.bssid),
        "lat": round(rec.pos.lat, COORD_DECIMALS),
        "lon": round(rec.pos.lon, COORD_DECIMALS),
    }


def encode_response(resp: LocateResponse) -> bytes:
    payload = {
        "requested": [_encode_record(r) for r in resp.requested],
        "nearby": [_encode_record(r) for r in resp.nearby],
    }
    return json.dumps(payload, separators=(",", ":")).encode()


def _decode_record(obj, pointer: str) -> WpsRecord:
    if not isinstance(obj, dict):
        raise DecodeError(pointer, "record must be an object")
    for key in ("bssid", "lat", "lon"):
        if key not in obj:
            raise DecodeError(f"{pointer}/{key}", "missing required field")
    if not isinstance(obj["bssid"], str):
        raise DecodeError(f"{pointer}/bssid", "must be a string")
    try:
        bssid = MacAddress.parse(obj["bssid"])
    except MacParseError as e:
        raise DecodeError(f"{pointer}/bssid", str(e)) from None
    coords = []
    for key in ("lat", "lon"):
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise DecodeError(f"{pointer}/{key}", "must be a number")
        coords.append(float(v))
    try:
        pos = GeoPosition(coords[0], coords[1])
    except ValueError as e:
        raise DecodeError(pointer, str(e)) from None
    return WpsRecord(bssid, pos)


def decode_response(data: bytes) -> LocateResponse:
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as e:
        raise DecodeError("/", f"invalid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise DecodeError("/", "top-level value must be an object")
    for key in ("requested", "nearby"):
        if key not in obj:
            raise DecodeError(f"/{key}", "missing required field")
        if not isinstance(obj[key], list):
            raise DecodeError(f"/{key}", "must be an array")
    requested = tuple(
        _decode_record(item, f"/requested/{i}") for i, item in enumerate(obj["requested"])
    )
    nearby = []
    seen: set[MacAddress] = set()
    for i, item in enumerate(obj["nearby"]):
        rec = _decode_record(item, f"/nearby/{i}")
        if rec.pos.is_sentinel:
            raise DecodeError(f"/nearby/{i}", "nearby records must not carry the sentinel")
        if rec.bssid in seen:
            raise DecodeError(f"/nearby/{i}", f"duplicate nearby BSSID {rec.bssid}")
        seen.add(rec.bssid)
        nearby.append(rec)
    return LocateResponse(requested, tuple(nearby))


@dataclass
class ClientConfig:
    endpoint: str = DEFAULT_ENDPOINT
    batch_size: int = MAX_BATCH
    rate_per_s: float = 30.0
    max_attempts: int = 3
    backoff_base_s: float = 0.25
    in_flight: int = 4
    timeout_s: float = 10.0
    client_id: str = "wpslab"

    def __post_init__(self):
        if not 1 <= self.batch_size <= MAX_BATCH:
            raise ValueError(f"batch_size must be in [1, {MAX_BATCH}]")
        if self.rate_per_s <= 0:
            raise ValueError("rate_per_s must be positive")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.in_flight < 1:
            raise ValueError("in_flight must be at least 1")


class TransportError(RuntimeError):
    """The transport could not complete an exchange (connection-level failure)."""


@dataclass
class TransportReply:
    status: int
    body: bytes
    retry_after: float | None = None


Transport = Callable[[bytes], TransportReply]


class HttpTransport:
    """POSTs encoded requests to `endpoint` + /v1/locate."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0, client_id: str = "wpslab"):
        self.url = endpoint.rstrip("/") + LOCATE_PATH
        self.timeout_s = timeout_s
        self.client_id = client_id
        self._session = requests.Session()

    def __call__(self, body: bytes) -> TransportReply:
        try:
            resp = self._session.post(
                self.url,
                data=body,
                headers={"Content-Type": "application/json", "X-Client-Id": self.client_id},
                timeout=self.timeout_s,
            )
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        retry_after = None
        if "Retry-After" in resp.headers:
            try:
                retry_after = float(resp.headers["Retry-After"])
            except ValueError:
                retry_after = None
        return TransportReply(resp.status_code, resp.content, retry_after)


@dataclass
class ChunkResult:
    """Outcome of one batched request, tagged with its chunk index."""

    index: int
    bssids: tuple[MacAddress, ...]
    response: LocateResponse | None
    error: str | None
    attempts: int

    @property
    def ok(self) -> bool:
        return self.response is not None


def chunked(items: Sequence, size: int) -> list[tuple]:
    return [tuple(items[i : i + size]) for i in range(0, len(items), size)]


class WpsClient:
    """Rate-limited, retrying, batching client for the locate service.

    Inputs longer than the batch size are split into chunks; chunks are
    issued concurrently up to `in_flight`, all sharing one token bucket so
    the aggregate request rate stays at `rate_per_s`. Failed chunks are
    retried per policy and surface as errors without aborting the rest.
    """

    def __init__(
        self,
        config: ClientConfig | None = None,
        transport: Transport | None = None,
        bucket: TokenBucket | None = None,
        sleep=time.sleep,
    ):
        self.config = config or ClientConfig()
        self.transport = transport or HttpTransport(
            self.config.endpoint, self.config.timeout_s, self.config.client_id
        )
        self.bucket = bucket or TokenBucket(self.config.rate_per_s)
        self._sleep = sleep

    def clone(self) -> WpsClient:
        """Independent handle sharing this client's rate limiter."""
        return WpsClient(self.config, self.transport, self.bucket, self._sleep)

    def locate(self, bssids: Sequence[MacAddress]) -> Iterator[ChunkResult]:
        """Query all `bssids`, yielding per-chunk results as they complete."""
        chunks = chunked(list(bssids), self.config.batch_size)
        if not chunks:
            return
        if self.config.in_flight == 1 or len(chunks) == 1:
            for i, chunk in enumerate(chunks):
                yield self._request_chunk(i, chunk)
            return
        with ThreadPoolExecutor(max_workers=self.config.in_flight) as pool:
            pending = {
                pool.submit(self._request_chunk, i, chunk) for i, chunk in enumerate(chunks)
            }
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    yield fut.result()

    def locate_all(self, bssids: Sequence[MacAddress]) -> list[ChunkResult]:
        """Like locate(), but collected and ordered by chunk index."""
        return sorted(self.locate(bssids), key=lambda r: r.index)

    def _request_chunk(self, index: int, chunk: tuple[MacAddress, ...]) -> ChunkResult:
        body = encode_request(LocateRequest(chunk))
        last_error = "no attempts made"
        attempts = 0
        while attempts < self.config.max_attempts:
            attempts += 1
            self.bucket.acquire()
            try:
                reply = self.transport(body)
            except TransportError as e:
                last_error = f"transport failure: {e}"
                logger.warning("chunk %d attempt %d failed: %s", index, attempts, e)
                self._backoff(attempts)
                continue
            if reply.status == 200:
                try:
                    resp = decode_response(reply.body)
                except DecodeError as e:
                    return ChunkResult(index, chunk, None, f"bad response: {e}", attempts)
                problem = self._alignment_problem(chunk, resp)
                if problem is not None:
                    return ChunkResult(index, chunk, None, problem, attempts)
                return ChunkResult(index, chunk, resp, None, attempts)
            if reply.status == 429:
                delay = reply.retry_after if reply.retry_after is not None else self._delay(attempts)
                last_error = "rate limited (429)"
                logger.info("chunk %d rate limited, waiting %.3fs", index, delay)
                self._sleep(delay)
                continue
            if reply.status == 400:
                return ChunkResult(
                    index, chunk, None, f"rejected (400): {reply.body[:200]!r}", attempts
                )
            last_error = f"server error ({reply.status})"
            self._backoff(attempts)
        return ChunkResult(index, chunk, None, last_error, attempts)

    @staticmethod
    def _alignment_problem(chunk: tuple[MacAddress, ...], resp: LocateResponse) -> str | None:
        if len(resp.requested) != len(chunk):
            return f"response carries {len(resp.requested)} records for {len(chunk)} requests"
        for i, (want, got) in enumerate(zip(chunk, resp.requested)):
            if want != got.bssid:
                return f"response record {i} is {got.bssid}, expected {want}"
        return None

    def _delay(self, attempt: int) -> float:
        return self.config.backoff_base_s * (2 ** (attempt - 1))

    def _backoff(self, attempt: int) -> None:
        if attempt < self.config.max_attempts:
            self._sleep(self._delay(attempt))
