"""Bandwidth estimation and loss-threshold congestion control.

The sender keeps a 1-second accounting window of receiver reports.  The
estimate is an EWMA of acked throughput; the send rate backs off
multiplicatively on loss above 2% and otherwise probes upward, capped at
1.2x the estimate so an application-limited sender does not run away.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

RATE_FLOOR_BPS = 100_000
WINDOW_MS = 1000
LOSS_BACKOFF_THRESHOLD = 0.02


@dataclass(frozen=True)
class BandwidthEstimate:
    rate_bps: float
    loss_rate: float
    rtt_ms: float
    window_ms: int = WINDOW_MS


@dataclass(frozen=True)
class AckWindowEvent:
    """One receiver report: bytes and datagram counts over the last window."""

    acked_bytes: int
    received: int
    expected: int
    rtt_sample_ms: float | None = None


def estimate_bandwidth(
    previous: BandwidthEstimate, ack_events: list[AckWindowEvent]
) -> BandwidthEstimate:
    if not ack_events:
        return previous
    acked_bytes = sum(e.acked_bytes for e in ack_events)
    received = sum(e.received for e in ack_events)
    expected = sum(e.expected for e in ack_events)
    window_s = previous.window_ms / 1000.0
    sample_bps = acked_bytes * 8 / window_s
    rate = 0.7 * previous.rate_bps + 0.3 * sample_bps
    loss = 0.0 if expected <= 0 else min(1.0, max(0.0, (expected - received) / expected))
    rtt = previous.rtt_ms
    for e in ack_events:
        if e.rtt_sample_ms is not None:
            rtt = 0.875 * rtt + 0.125 * e.rtt_sample_ms
    return replace(
        previous,
        rate_bps=max(float(RATE_FLOOR_BPS), rate),
        loss_rate=loss,
        rtt_ms=rtt,
    )


def congestion_update(estimate: BandwidthEstimate, send_rate_bps: float) -> float:
    """Next paced send rate given the current estimate."""
    if estimate.loss_rate > LOSS_BACKOFF_THRESHOLD:
        rate = 0.8 * send_rate_bps
    else:
        rate = min(1.05 * send_rate_bps, 1.2 * estimate.rate_bps)
    return max(float(RATE_FLOOR_BPS), rate)
