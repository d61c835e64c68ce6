"""Clock abstraction: the live server runs on wall time, tests and the
benchmark harness run on a manually advanced simulated clock so every
timing-dependent number is reproducible."""

from __future__ import annotations

import time


class Clock:
    def now_ms(self) -> float:
        raise NotImplementedError


class WallClock(Clock):
    """Monotonic milliseconds since construction."""

    def __init__(self) -> None:
        self._origin = time.monotonic()

    def now_ms(self) -> float:
        return (time.monotonic() - self._origin) * 1000.0


class SimClock(Clock):
    """Simulated clock advanced explicitly by the harness."""

    def __init__(self, start_ms: float = 0.0) -> None:
        self._now = float(start_ms)

    def now_ms(self) -> float:
        return self._now

    def advance(self, delta_ms: float) -> float:
        if delta_ms < 0:
            raise ValueError("clock cannot run backwards")
        self._now += delta_ms
        return self._now

    def advance_to(self, t_ms: float) -> float:
        if t_ms < self._now:
            raise ValueError("clock cannot run backwards")
        self._now = float(t_ms)
        return self._now
