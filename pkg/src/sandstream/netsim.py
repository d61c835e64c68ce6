"""Deterministic, seeded network-condition emulator.

All transport traffic in tests and benchmarks crosses a :class:`NetEmulator`:
each datagram is either dropped (seeded Bernoulli per direction) or assigned
a delivery time of ``now + base_delay + jitter + queueing``.  Queueing comes
from a token bucket of the configured rate with 50 ms of burst depth;
packets that would wait more than 200 ms are tail-dropped.  Identical
(conditions, seed, packet schedule) always produce identical decisions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import UnknownPreset

DOWNSTREAM = "down"
UPSTREAM = "up"

BUCKET_DEPTH_MS = 50.0
BACKLOG_DROP_MS = 200.0


@dataclass(frozen=True)
class NetConditions:
    bandwidth_cap_bps: float = 0.0  # 0 = unlimited
    loss_down: float = 0.0
    loss_up: float = 0.0
    base_delay_ms: float = 20.0
    jitter_ms: float = 5.0


_PRESETS = {
    "normal": NetConditions(),
    "cap5mbps": NetConditions(bandwidth_cap_bps=5_000_000.0),
    "loss10": NetConditions(loss_down=0.10),
}


def preset(name: str) -> NetConditions:
    try:
        return _PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown net preset {name!r}") from None


def preset_names() -> list[str]:
    return sorted(_PRESETS)


@dataclass(frozen=True)
class Deliver:
    at_ms: float


class Drop:
    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover
        return "Drop()"


DROP = Drop()


class _Direction:
    def __init__(self, conditions: NetConditions, loss: float, seed: int) -> None:
        self.conditions = conditions
        self.loss = loss
        self.rng = random.Random(seed)
        self.vq_ms: float = 0.0  # virtual queue: time the shaper frees up

    def apply(self, packet_bytes: int, now_ms: float) -> Deliver | Drop:
        c = self.conditions
        if self.loss > 0.0 and self.rng.random() < self.loss:
            return DROP
        queue_delay = 0.0
        if c.bandwidth_cap_bps > 0:
            tx_ms = packet_bytes * 8000.0 / c.bandwidth_cap_bps
            start = max(self.vq_ms, now_ms - BUCKET_DEPTH_MS)
            end = start + tx_ms
            if end - now_ms > BACKLOG_DROP_MS:
                return DROP
            self.vq_ms = end
            queue_delay = max(0.0, end - now_ms)
        jitter = self.rng.uniform(-c.jitter_ms, c.jitter_ms) if c.jitter_ms > 0 else 0.0
        return Deliver(at_ms=now_ms + c.base_delay_ms + jitter + queue_delay)


class NetEmulator:
    """Stateful emulator for one bidirectional link under fixed conditions."""

    def __init__(self, conditions: NetConditions, seed: int) -> None:
        self.conditions = conditions
        self._dirs = {
            DOWNSTREAM: _Direction(conditions, conditions.loss_down, seed ^ 0x1),
            UPSTREAM: _Direction(conditions, conditions.loss_up, seed ^ 0x2),
        }

    def apply(self, packet_bytes: int, direction: str, now_ms: float) -> Deliver | Drop:
        return self._dirs[direction].apply(packet_bytes, now_ms)
