import numpy as np
import pytest

from sandstream.codec.tiles import TILE, ContentClass, classify_tiles_batch, diff_frame
from sandstream.env.events import InputEvent, InputKind, InputSource
from sandstream.env.scenes import (
    _TARGET_RECT,
    _VIDEO_RECT,
    ad_reference_target,
    load_scene,
    scene_names,
    step_frame,
)
from sandstream.errors import UnknownScene


def click(x, y, t, source=InputSource.HUMAN):
    return InputEvent(InputKind.MOUSE_CLICK, source, t, x=x, y=y)


def test_catalog():
    assert scene_names() == sorted(
        ["text_edit", "slides", "web_browse", "video_play", "ad_overlay",
         "captcha_modal", "login_form"]
    )
    with pytest.raises(UnknownScene):
        load_scene("nope")


def test_target_fps_from_catalog():
    assert load_scene("video_play").target_fps == 30
    assert load_scene("web_browse").target_fps == 20
    assert load_scene("text_edit").target_fps == 20


def test_repeated_loads_identical():
    a = load_scene("web_browse", seed=3)
    b = load_scene("web_browse", seed=3)
    assert a == b
    assert np.array_equal(a.render(1234.0), b.render(1234.0))


@pytest.mark.parametrize("name", scene_names())
def test_determinism_100_frames(name):
    scene = load_scene(name, seed=1)
    log = (click(640, 360, 500.0),)
    interval = 1000.0 / scene.target_fps
    hashes_a = [
        step_frame(scene, i * interval, log).content_hash() for i in range(100)
    ]
    hashes_b = [
        step_frame(scene, i * interval, log).content_hash() for i in range(100)
    ]
    assert hashes_a == hashes_b


def test_text_edit_small_dirty_footprint():
    scene = load_scene("text_edit")
    interval = 1000.0 / scene.target_fps
    total_tiles = (1280 // TILE) * (720 // TILE)
    # steady-state frames (past the initial render)
    prev = scene.render(2000.0)
    for i in range(1, 30):
        curr = scene.render(2000.0 + i * interval)
        dirty = diff_frame(prev, curr).dirty
        assert len(dirty) <= 0.02 * total_tiles
        prev = curr


def test_text_edit_all_tiles_synthetic():
    scene = load_scene("text_edit")
    pixels = scene.render(5000.0)
    classes = classify_tiles_batch(pixels, np.zeros((45, 80), dtype=np.int32))
    assert (classes == ContentClass.SYNTHETIC).all()


def test_video_rect_differs_every_frame():
    scene = load_scene("video_play")
    interval = 1000.0 / scene.target_fps
    vx, vy, vw, vh = _VIDEO_RECT
    video_tiles = {
        (x, y)
        for x in range(vx // TILE * TILE, vx + vw, TILE)
        for y in range(vy // TILE * TILE, vy + vh, TILE)
    }
    prev = scene.render(1000.0)
    for i in range(1, 10):
        curr = scene.render(1000.0 + i * interval)
        dirty = diff_frame(prev, curr).dirty
        assert video_tiles <= set(dirty)
        prev = curr


def test_video_pause_freezes_content():
    scene = load_scene("video_play")
    bx, by, bw, bh = scene.response_rect("button")
    log = (click(bx + 5, by + 5, 2000.0),)
    a = scene.render(3000.0, log)
    b = scene.render(3400.0, log)
    vx, vy, vw, vh = _VIDEO_RECT
    assert np.array_equal(a[vy : vy + vh, vx : vx + vw], b[vy : vy + vh, vx : vx + vw])


def test_slides_static_between_transitions():
    scene = load_scene("slides")
    a = scene.render(1000.0)
    b = scene.render(1050.0)
    assert np.array_equal(a, b)
    c = scene.render(4100.0)  # next slide
    assert not np.array_equal(a, c)


def test_web_scroll_changes_content():
    scene = load_scene("web_browse")
    a = scene.render(2900.0)
    b = scene.render(3100.0)  # first scroll at 3000 ms
    assert not np.array_equal(a, b)


def test_web_button_response():
    scene = load_scene("web_browse")
    bx, by, bw, bh = scene.response_rect("button")
    log = (click(bx + 10, by + 10, 5000.0),)
    before = scene.render(4990.0, log)
    after = scene.render(5050.0, log)
    rect_after = after[by : by + bh, bx : bx + bw]
    rect_before = before[by : by + bh, bx : bx + bw]
    assert not np.array_equal(rect_after, rect_before)
    # reverts 600 ms later
    reverted = scene.render(5700.0, log)
    assert np.array_equal(reverted[by : by + bh, bx : bx + bw], rect_before)


def test_ad_overlay_obstruction_and_close():
    # find one obstructing seed and one clear seed
    obstructing = next(
        s for s in range(100) if load_scene("ad_overlay", s).state(0)["ad_obstructs_target"]
    )
    clear = next(
        s
        for s in range(100)
        if not load_scene("ad_overlay", s).state(0)["ad_obstructs_target"]
    )
    scene = load_scene("ad_overlay", obstructing)
    x, y, w, h = _TARGET_RECT
    reference = ad_reference_target(scene)
    assert not np.array_equal(scene.render(1000.0)[y : y + h, x : x + w], reference)
    cx, cy, cw, ch = scene.response_rect("close")
    log = (click(cx + 5, cy + 5, 1500.0),)
    assert np.array_equal(scene.render(2000.0, log)[y : y + h, x : x + w], reference)
    assert scene.state(2000.0, log)["ad_closed"]

    scene2 = load_scene("ad_overlay", clear)
    ref2 = ad_reference_target(scene2)
    assert np.array_equal(scene2.render(1000.0)[y : y + h, x : x + w], ref2)


def test_ad_obstruction_rate_near_paper():
    rates = [
        load_scene("ad_overlay", s).state(0)["ad_obstructs_target"] for s in range(400)
    ]
    rate = sum(rates) / len(rates)
    assert 0.65 <= rate <= 0.8


def test_captcha_simple_variant_checkbox_solves():
    seed = next(
        s for s in range(100) if load_scene("captcha_modal", s).state(0)["simple"]
    )
    scene = load_scene("captcha_modal", seed)
    cb = scene.response_rect("checkbox")
    log = (click(cb[0] + 5, cb[1] + 5, 1000.0),)
    assert scene.state(2000.0, log)["solved"]


def test_captcha_hard_variant_needs_correct_cells():
    seed = next(
        s for s in range(100) if not load_scene("captcha_modal", s).state(0)["simple"]
    )
    scene = load_scene("captcha_modal", seed)
    cb = scene.response_rect("checkbox")
    log = [click(cb[0] + 5, cb[1] + 5, 1000.0)]
    st = scene.state(1500.0, log)
    assert st["grid_visible"] and not st["solved"]
    t = 2000.0
    for i in sorted(st["correct_cells"]):
        r = scene.response_rect(f"cell{i}")
        log.append(click(r[0] + 10, r[1] + 10, t))
        t += 100
    sub = scene.response_rect("submit")
    log.append(click(sub[0] + 5, sub[1] + 5, t))
    assert scene.state(t + 100, log)["solved"]
    # wrong selection fails
    bad = [log[0], click(*_cell_center(scene, 0), 3000.0),
           click(sub[0] + 5, sub[1] + 5, 3100.0)]
    st_bad = scene.state(3200.0, bad)
    assert not st_bad["solved"] and st_bad["failed_attempts"] >= (
        1 if frozenset({0}) != st["correct_cells"] else 0
    )


def _cell_center(scene, i):
    x, y, w, h = scene.response_rect(f"cell{i}")
    return x + w // 2, y + h // 2


def test_captcha_cells_brightness_separates_truth():
    seed = next(
        s for s in range(100) if not load_scene("captcha_modal", s).state(0)["simple"]
    )
    scene = load_scene("captcha_modal", seed)
    cb = scene.response_rect("checkbox")
    log = (click(cb[0] + 5, cb[1] + 5, 1000.0),)
    pixels = scene.render(1500.0, log)
    correct = scene.state(1500.0, log)["correct_cells"]
    for i in range(9):
        x, y, w, h = scene.response_rect(f"cell{i}")
        mean = pixels[y : y + h, x : x + w, :3].mean()
        if i in correct:
            assert mean > 150
        else:
            assert mean < 135


def test_login_requires_secret():
    from sandstream.env.scenes import login_secret

    scene = load_scene("login_form", seed=4)
    secret = login_secret(4)
    pf = scene.response_rect("password")
    lb = scene.response_rect("login")
    good = (
        click(pf[0] + 5, pf[1] + 5, 1000.0),
        InputEvent(InputKind.TEXT, InputSource.HUMAN, 1200.0, text=secret),
        click(lb[0] + 5, lb[1] + 5, 1400.0),
    )
    assert scene.state(1500.0, good)["logged_in"]
    bad = (
        click(pf[0] + 5, pf[1] + 5, 1000.0),
        InputEvent(InputKind.TEXT, InputSource.HUMAN, 1200.0, text="wrong-pass"),
        click(lb[0] + 5, lb[1] + 5, 1400.0),
    )
    st = scene.state(1500.0, bad)
    assert not st["logged_in"] and st["errors"] == 1
    # the secret never appears in rendered pixels (glyphs are masked dots)
    assert secret not in str(scene.render(1300.0, bad).tobytes())
