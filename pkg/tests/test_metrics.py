import numpy as np
import pytest

from sandstream.bench.metrics import ClickSample, click_to_photon, ssim, stutter_rate
from sandstream.errors import DimensionMismatch, NoClicks, TooFewFrames


# --- stutter ------------------------------------------------------------------


def test_perfect_pacing_no_stutter():
    times = [i * (1000.0 / 30.0) for i in range(90)]
    assert stutter_rate(times, 30) == 0.0


def test_stutter_counting_rule():
    # 60 gaps of 33 ms plus 6 gaps of 60 ms at 30 fps (threshold 50 ms)
    times = [0.0]
    for _ in range(60):
        times.append(times[-1] + 33.0)
    for _ in range(6):
        times.append(times[-1] + 60.0)
    assert stutter_rate(times, 30) == pytest.approx(6 / 66)


def test_all_late():
    times = [i * 200.0 for i in range(10)]
    assert stutter_rate(times, 20) == 1.0


def test_too_few_frames():
    with pytest.raises(TooFewFrames):
        stutter_rate([0.0], 30)


# --- click-to-photon -------------------------------------------------------------


def test_click_to_photon_median():
    samples = [
        ClickSample(0.0, 50.0),
        ClickSample(100.0, 190.0),
        ClickSample(200.0, 320.0),
    ]
    assert click_to_photon(samples) == 90.0


def test_click_to_photon_ignores_unpresented():
    samples = [ClickSample(0.0, 60.0), ClickSample(10.0, None)]
    assert click_to_photon(samples) == 60.0
    with pytest.raises(NoClicks):
        click_to_photon([ClickSample(0.0, None)])
    with pytest.raises(NoClicks):
        click_to_photon([])


# --- ssim -------------------------------------------------------------------------


def brute_force_ssim(a, b, win=8):
    """Oracle: direct per-window computation with python loops."""
    luma = np.array([0.299, 0.587, 0.114])
    x = a[..., :3].astype(np.float64) @ luma
    y = b[..., :3].astype(np.float64) @ luma
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    h, w = x.shape
    vals = []
    for i in range(0, h - win + 1, win):
        for j in range(0, w - win + 1, win):
            wx = x[i : i + win, j : j + win]
            wy = y[i : i + win, j : j + win]
            mx, my = wx.mean(), wy.mean()
            vx, vy = wx.var(), wy.var()
            cov = ((wx - mx) * (wy - my)).mean()
            vals.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx**2 + my**2 + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


def rgba(rng, h, w):
    out = rng.integers(0, 256, (h, w, 4), dtype=np.uint8)
    out[..., 3] = 255
    return out


def test_ssim_identity():
    rng = np.random.default_rng(0)
    img = rgba(rng, 64, 64)
    assert ssim(img, img.copy()) == pytest.approx(1.0, abs=1e-9)


def test_ssim_matches_brute_force():
    rng = np.random.default_rng(1)
    a = rgba(rng, 24, 32)
    noise = rng.integers(-20, 21, (24, 32, 4))
    b = np.clip(a.astype(np.int16) + noise, 0, 255).astype(np.uint8)
    assert ssim(a, b) == pytest.approx(brute_force_ssim(a, b), abs=1e-6)


def test_ssim_inversion_is_low_on_text():
    from sandstream.env.scenes import load_scene

    frame = load_scene("text_edit").render(5000.0)
    inverted = frame.copy()
    inverted[..., :3] = 255 - inverted[..., :3]
    assert ssim(frame, inverted) < 0.2


def test_ssim_dimension_mismatch():
    rng = np.random.default_rng(2)
    with pytest.raises(DimensionMismatch):
        ssim(rgba(rng, 16, 16), rgba(rng, 16, 24))


def test_ssim_degrades_with_noise():
    rng = np.random.default_rng(3)
    img = rgba(rng, 64, 64)
    small = np.clip(img.astype(np.int16) + rng.integers(-5, 6, img.shape), 0, 255).astype(np.uint8)
    big = np.clip(img.astype(np.int16) + rng.integers(-60, 61, img.shape), 0, 255).astype(np.uint8)
    assert ssim(img, small) > ssim(img, big)
