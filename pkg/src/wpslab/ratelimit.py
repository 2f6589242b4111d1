"""Token-bucket rate limiting shared by the query client and the simulated service."""

from __future__ import annotations

import threading
import time


class TokenBucket:
    """Continuously-refilled token bucket.

    `capacity` bounds the burst: with the default of one token the bucket
    enforces strict pacing at `rate` acquisitions per second. The clock and
    sleep functions are injectable so schedules can be verified without
    real waiting.
    """

    def __init__(self, rate: float, capacity: float = 1.0, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError(f"rate must be positive, got {rate}")
        if capacity < 1:
            raise ValueError(f"capacity must be at least 1, got {capacity}")
        self.rate = rate
        self.capacity = capacity
        self._clock = clock
        self._sleep = sleep
        self._tokens = capacity
        self._last = clock()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
        self._last = now

    # float slack: refills computed from wait*rate can land an ulp short,
    # which would otherwise spin acquire() on infinitesimal sleeps
    _EPS = 1e-9

    def try_acquire(self, tokens: float = 1.0) -> bool:
        """Take tokens if available; never blocks."""
        with self._lock:
            self._refill()
            if self._tokens + self._EPS >= tokens:
                self._tokens = max(0.0, self._tokens - tokens)
                return True
            return False

    def acquire(self, tokens: float = 1.0) -> None:
        """Block until tokens are available, then take them."""
        while True:
            with self._lock:
                self._refill()
                if self._tokens + self._EPS >= tokens:
                    self._tokens = max(0.0, self._tokens - tokens)
                    return
                wait = (tokens - self._tokens) / self.rate
            self._sleep(wait)

    def retry_after(self, tokens: float = 1.0) -> float:
        """Seconds until `tokens` would be available; 0 if available now."""
        with self._lock:
            self._refill()
            if self._tokens + self._EPS >= tokens:
                return 0.0
            return (tokens - self._tokens) / self.rate
