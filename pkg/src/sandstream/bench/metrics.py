"""Run metrics: stutter rate, click-to-photon latency and SSIM.

A frame is late when its inter-present gap exceeds 1.5x the target frame
interval.  Click-to-photon spans injection at the client to the first
client-side present whose canvas includes the decoded visual response.
SSIM follows the standard form on the luma plane with 8x8 uniform windows
(non-overlapping tiling), k1=0.01, k2=0.03, dynamic range 255, mean over
windows.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, NoClicks, TooFewFrames

LATE_GAP_FACTOR = 1.5


@dataclass(frozen=True)
class MetricsReport:
    protocol: str
    scene: str
    net_preset: str
    duration_ms: float
    mean_bandwidth_bps: float
    stutter_rate: float
    click_to_photon_ms: float | None
    ssim_mean: float
    presented_frames: int = 0
    seed: int = 0
    # per-frame source content hashes, for comparator-fairness cross-checks
    scene_hash_log: tuple = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.stutter_rate <= 1.0:
            raise ValueError("stutter_rate out of [0, 1]")
        if not 0.0 <= self.ssim_mean <= 1.0:
            raise ValueError("ssim_mean out of [0, 1]")


def stutter_rate(frame_present_times, target_fps: float) -> float:
    """Fraction of inter-present gaps exceeding 1.5x the frame interval."""
    times = list(frame_present_times)
    if len(times) < 2:
        raise TooFewFrames("need at least two presented frames")
    threshold = LATE_GAP_FACTOR * (1000.0 / target_fps)
    gaps = [b - a for a, b in zip(times, times[1:])]
    late = sum(1 for g in gaps if g > threshold)
    return late / len(gaps)


@dataclass(frozen=True)
class ClickSample:
    click_ms: float
    photon_ms: float | None  # None = response never presented


def click_to_photon(samples) -> float:
    """Median click-to-photon over clicks whose response was presented;
    unpresented responses count as the run's end (pessimistic)."""
    values = [s.photon_ms - s.click_ms for s in samples if s.photon_ms is not None]
    if not values:
        raise NoClicks("no click produced a presented response")
    return float(statistics.median(values))


_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)
_K1 = 0.01
_K2 = 0.03
_L = 255.0
_WIN = 8


def _tile_means(plane: np.ndarray, win: int) -> np.ndarray:
    h, w = plane.shape
    return plane[: h - h % win, : w - w % win].reshape(
        h // win, win, w // win, win
    ).mean(axis=(1, 3))


def ssim(reference, decoded) -> float:
    """Mean SSIM between two frames (RGBA, RGB arrays or framebuffers).

    Windows are the non-overlapping 8x8 tiling of the luma plane; trailing
    rows/columns that do not fill a window are ignored.
    """
    ref = getattr(reference, "pixels", reference)
    dec = getattr(decoded, "pixels", decoded)
    if ref.shape[:2] != dec.shape[:2]:
        raise DimensionMismatch(f"{ref.shape[:2]} vs {dec.shape[:2]}")
    x = ref[..., :3].astype(np.float64) @ _LUMA.astype(np.float64)
    y = dec[..., :3].astype(np.float64) @ _LUMA.astype(np.float64)
    c1 = (_K1 * _L) ** 2
    c2 = (_K2 * _L) ** 2
    mx = _tile_means(x, _WIN)
    my = _tile_means(y, _WIN)
    vx = _tile_means(x * x, _WIN) - mx * mx
    vy = _tile_means(y * y, _WIN) - my * my
    cov = _tile_means(x * y, _WIN) - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.clip(np.mean(num / den), 0.0, 1.0))
