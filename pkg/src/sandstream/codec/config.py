"""Encoder configuration and network/controller-aware quality adaptation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ..transport.rate import BandwidthEstimate

AGENT_FPS = 5
QUALITY_MIN = 20
QUALITY_MAX = 95
MOTION_QUALITY_MAX = 80  # per-frame fidelity matters less for moving content

# rates (bps) at which quality hits its floor and ceiling
_RATE_LOW = 100_000.0
_RATE_HIGH = 4_000_000.0


class ControllerMode(str, enum.Enum):
    AGENT = "agent"
    HUMAN = "human"


@dataclass(frozen=True)
class EncoderConfig:
    controller_mode: ControllerMode = ControllerMode.HUMAN
    target_fps: int = 20
    quality_natural: int = 85
    quality_motion: int = 80
    keyframe_interval_frames: int = 60

    def __post_init__(self) -> None:
        if self.controller_mode is ControllerMode.AGENT and self.target_fps != AGENT_FPS:
            object.__setattr__(self, "target_fps", AGENT_FPS)

    @property
    def frame_interval_ms(self) -> float:
        return 1000.0 / self.target_fps


def _quality_for_rate(rate_bps: float, ceiling: int) -> int:
    span = (rate_bps - _RATE_LOW) / (_RATE_HIGH - _RATE_LOW)
    q = QUALITY_MIN + (ceiling - QUALITY_MIN) * span
    return int(min(ceiling, max(QUALITY_MIN, round(q))))


def adapt_quality(estimate: BandwidthEstimate, config: EncoderConfig) -> EncoderConfig:
    """New config for the estimated rate.

    Monotone: a lower rate never raises quality or fps.  The frame rate
    itself is pinned (5 fps in agent mode, the scene rate in human mode);
    only quality moves with bandwidth, so presentation cadence survives
    congestion while fidelity degrades.
    """
    return replace(
        config,
        quality_natural=_quality_for_rate(estimate.rate_bps, QUALITY_MAX),
        quality_motion=_quality_for_rate(estimate.rate_bps, MOTION_QUALITY_MAX),
    )
