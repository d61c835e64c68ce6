"""Procedurally generated desktop scenes.

Every scene renders as a pure function of (script, frame time, input log):
identical inputs give byte-identical framebuffers.  Content is synthesised
(flat fills and glyph grids for UI/text, seeded noise for photo areas, a
smoothly evolving field for video) so the repository stays self-contained.

Synthetic areas draw from a small fixed palette so their tiles stay within
the lossless codec's 16-colour budget; photo and video areas intentionally
exceed it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import OutOfBounds, UnknownScene
from .events import InputEvent, InputKind
from .framebuffer import DEFAULT_HEIGHT, DEFAULT_WIDTH, VirtualFramebuffer

# shared synthetic palette
BG = (226, 228, 232)
PAGE = (250, 250, 250)
INK = (20, 20, 24)
TOOLBAR = (240, 241, 243)
DARKBAR = (52, 56, 64)
ACCENT = (56, 114, 206)
BUTTON = (230, 233, 238)
LINE = (210, 213, 218)
RED = (200, 60, 50)
GREEN = (70, 160, 90)
YELLOW = (250, 225, 120)
MIDGRAY = (160, 164, 170)
WHITE = (255, 255, 255)

Rect = tuple[int, int, int, int]  # x, y, w, h


def _fill(canvas: np.ndarray, rect: Rect, color) -> None:
    x, y, w, h = rect
    canvas[y : y + h, x : x + w, :3] = color
    canvas[y : y + h, x : x + w, 3] = 255


def _frame_rect(canvas: np.ndarray, rect: Rect, color, thickness: int = 2) -> None:
    x, y, w, h = rect
    _fill(canvas, (x, y, w, thickness), color)
    _fill(canvas, (x, y + h - thickness, w, thickness), color)
    _fill(canvas, (x, y, thickness, h), color)
    _fill(canvas, (x + w - thickness, y, thickness, h), color)


def in_rect(x: int, y: int, rect: Rect) -> bool:
    rx, ry, rw, rh = rect
    return rx <= x < rx + rw and ry <= y < ry + rh


@lru_cache(maxsize=256)
def _glyph(ch: str) -> np.ndarray:
    """Deterministic 5x7 pseudo-glyph bitmap for a character."""
    if ch == " ":
        return np.zeros((7, 5), dtype=bool)
    rng = random.Random((ord(ch) * 2654435761) & 0xFFFFFFFF)
    bits = np.array(
        [[rng.random() < 0.45 for _ in range(5)] for _ in range(7)], dtype=bool
    )
    bits[0, 0] = bits[6, 4] = True  # keep every glyph visibly anchored
    return bits


def draw_text(canvas: np.ndarray, x: int, y: int, text: str, color, scale: int = 2) -> int:
    """Draw a glyph string; returns the x coordinate after the last char."""
    cx = x
    h, w = canvas.shape[:2]
    for ch in text:
        bits = np.repeat(np.repeat(_glyph(ch), scale, axis=0), scale, axis=1)
        gh, gw = bits.shape
        if cx + gw >= w or y + gh >= h:
            break
        patch = canvas[y : y + gh, cx : cx + gw]
        patch[bits, 0] = color[0]
        patch[bits, 1] = color[1]
        patch[bits, 2] = color[2]
        patch[bits, 3] = 255
        cx += gw + scale
    return cx


def _words(rng: random.Random, n: int) -> list[str]:
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    return [
        "".join(rng.choice(alphabet) for _ in range(rng.randint(2, 9))) for _ in range(n)
    ]


def draw_paragraph(
    canvas: np.ndarray, rect: Rect, seed: int, color=INK, line_height: int = 22
) -> None:
    rng = random.Random(seed)
    x, y, w, h = rect
    for row in range(h // line_height):
        line = " ".join(_words(rng, rng.randint(5, 9)))
        draw_text(canvas, x, y + row * line_height, line[: w // 12], color)


def photo_patch(width: int, height: int, seed: int) -> np.ndarray:
    """Seeded smooth noise standing in for natural imagery (> 16 colours)."""
    rng = np.random.default_rng(seed)
    small = rng.integers(40, 216, size=(height // 8 + 2, width // 8 + 2, 3)).astype(np.float32)
    # bilinear-ish upscale: repeat then average neighbours for smoothness
    up = np.repeat(np.repeat(small, 8, axis=0), 8, axis=1)
    up = (up[:-1] + up[1:]) / 2.0
    up = (up[:, :-1] + up[:, 1:]) / 2.0
    tint = np.linspace(0, 30.0, height, dtype=np.float32)[:, None]
    rgb = np.clip(up[:height, :width] + tint[..., None], 0, 255)
    noise = rng.normal(0.0, 6.0, size=(height, width, 3)).astype(np.float32)
    out = np.empty((height, width, 4), dtype=np.uint8)
    out[..., :3] = np.clip(rgb + noise, 0, 255).astype(np.uint8)
    out[..., 3] = 255
    return out


@dataclass(frozen=True)
class SceneScript:
    """Immutable scene handle: catalog metadata plus the pure renderer."""

    name: str
    seed: int
    target_fps: int
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    events: tuple = ()
    interactive_responses: dict = field(default_factory=dict, compare=False, hash=False)

    def render(self, t_ms: float, input_log=()) -> np.ndarray:
        return _RENDERERS[self.name](self, t_ms, tuple(input_log))

    def state(self, t_ms: float, input_log=()) -> dict:
        fn = _STATE_FNS.get(self.name)
        return fn(self, t_ms, tuple(input_log)) if fn else {}

    def response_rect(self, kind: str) -> Rect:
        return self.interactive_responses[kind]

    @property
    def frame_interval_ms(self) -> float:
        return 1000.0 / self.target_fps


def load_scene(name: str, seed: int = 0) -> SceneScript:
    if name not in _RENDERERS:
        raise UnknownScene(f"scene {name!r} is not in the catalog")
    fps = 30 if name == "video_play" else 20
    return SceneScript(
        name=name,
        seed=seed,
        target_fps=fps,
        events=_SCRIPT_EVENTS[name],
        interactive_responses=_RESPONSE_RECTS.get(name, lambda s: {})(seed),
    )


def scene_names() -> list[str]:
    return sorted(_RENDERERS)


def step_frame(scene: SceneScript, t_ms: float, input_log=()) -> VirtualFramebuffer:
    if t_ms < 0:
        raise ValueError("t_ms must be >= 0")
    pixels = scene.render(t_ms, input_log)
    return VirtualFramebuffer(
        width=scene.width,
        height=scene.height,
        pixels=pixels,
        frame_index=int(t_ms * scene.target_fps // 1000),
        timestamp_ms=t_ms,
    )


def validate_input(scene: SceneScript, event: InputEvent) -> None:
    if event.is_mouse() and not (0 <= event.x < scene.width and 0 <= event.y < scene.height):
        raise OutOfBounds(f"({event.x}, {event.y}) outside {scene.width}x{scene.height}")


def _clicks(input_log, t_ms: float, rect: Rect | None = None):
    out = []
    for ev in input_log:
        if ev.kind is not InputKind.MOUSE_CLICK or ev.client_timestamp_ms > t_ms:
            continue
        if rect is None or in_rect(ev.x, ev.y, rect):
            out.append(ev)
    return out


# --- text_edit ---------------------------------------------------------------

_TEXT_BODY = "the quick brown fox jumps over the lazy dog while the editor keeps every keystroke "
_PAGE_RECT = (140, 40, 1000, 640)
_TEXT_ORIGIN = (180, 120)


@lru_cache(maxsize=8)
def _text_edit_base(width: int, height: int, seed: int) -> bytes:
    canvas = np.zeros((height, width, 4), dtype=np.uint8)
    _fill(canvas, (0, 0, width, height), BG)
    _fill(canvas, _PAGE_RECT, PAGE)
    _fill(canvas, (140, 40, 1000, 36), TOOLBAR)
    _fill(canvas, (140, 74, 1000, 2), LINE)
    draw_text(canvas, 152, 50, "document editor", INK)
    return canvas.tobytes()


def _render_text_edit(scene: SceneScript, t_ms: float, input_log) -> np.ndarray:
    canvas = np.frombuffer(
        _text_edit_base(scene.width, scene.height, scene.seed), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4).copy()
    typed = 0 if t_ms < 1000 else min(len(_TEXT_BODY), int((t_ms - 1000) // 500))
    extra = "".join(
        ev.text for ev in input_log
        if ev.kind is InputKind.TEXT and ev.client_timestamp_ms <= t_ms
    )
    text = (_TEXT_BODY[:typed] + extra)[:400]
    x, y = _TEXT_ORIGIN
    per_line = 76
    cx = x
    for start in range(0, len(text), per_line):
        cx = draw_text(canvas, x, y, text[start : start + per_line], INK)
        y += 24 if start + per_line < len(text) else 0
    if int(t_ms // 500) % 2 == 0:  # cursor blink
        _fill(canvas, (min(cx, scene.width - 4), y, 3, 14), INK)
    return canvas


# --- slides -------------------------------------------------------------------

_SLIDE_INTERVAL_MS = 4000
_SLIDE_COUNT = 5


@lru_cache(maxsize=16)
def _slide_base(width: int, height: int, seed: int, slide: int) -> bytes:
    canvas = np.zeros((height, width, 4), dtype=np.uint8)
    _fill(canvas, (0, 0, width, height), DARKBAR)
    _fill(canvas, (80, 50, 1120, 620), PAGE)
    _fill(canvas, (80, 50, 1120, 70), ACCENT)
    draw_text(canvas, 110, 72, f"quarterly review slide {slide + 1}", WHITE, scale=3)
    rng = random.Random(seed * 101 + slide)
    for b in range(4):
        y = 180 + b * 60
        _fill(canvas, (130, y + 6, 10, 10), ACCENT)
        draw_text(canvas, 160, y, " ".join(_words(rng, rng.randint(4, 7))), INK)
    canvas[200:500, 720:1140] = photo_patch(420, 300, seed * 977 + slide)
    _frame_rect(canvas, (720, 200, 420, 300), LINE)
    return canvas.tobytes()


def _render_slides(scene: SceneScript, t_ms: float, input_log) -> np.ndarray:
    slide = int(t_ms // _SLIDE_INTERVAL_MS) % _SLIDE_COUNT
    canvas = np.frombuffer(
        _slide_base(scene.width, scene.height, scene.seed, slide), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4).copy()
    # slide progress pips
    for i in range(_SLIDE_COUNT):
        color = ACCENT if i == slide else MIDGRAY
        _fill(canvas, (560 + i * 36, 690, 20, 8), color)
    return canvas


# --- web_browse ----------------------------------------------------------------

_DOC_HEIGHT = 1560
_CONTENT_RECT = (140, 104, 1000, 600)
_WEB_BUTTON = (1080, 24, 140, 44)
_SPINNER = (1024, 32, 28, 28)
_SCROLL_START_MS = 3000
_SCROLL_INTERVAL_MS = 2500
_SCROLL_STEP_PX = 120


@lru_cache(maxsize=8)
def _web_doc(seed: int) -> bytes:
    doc = np.zeros((_DOC_HEIGHT, 1000, 4), dtype=np.uint8)
    _fill(doc, (0, 0, 1000, _DOC_HEIGHT), PAGE)
    rng = random.Random(seed * 31 + 7)
    draw_text(doc, 30, 24, "welcome to the daily stream gazette", INK, scale=3)
    _fill(doc, (30, 70, 940, 2), LINE)
    y = 96
    para = 0
    while y < _DOC_HEIGHT - 240:
        if para % 3 == 2:
            doc[y : y + 200, 60:360] = photo_patch(300, 200, seed * 13 + para)
            _frame_rect(doc, (60, y, 300, 200), LINE)
            draw_paragraph(doc, (400, y + 10, 560, 180), seed * 53 + para)
            y += 224
        else:
            draw_text(doc, 30, y, " ".join(_words(rng, 4)), ACCENT)
            draw_paragraph(doc, (30, y + 28, 940, 110), seed * 53 + para)
            y += 166
        para += 1
    return doc.tobytes()


@lru_cache(maxsize=8)
def _web_chrome(width: int, height: int) -> bytes:
    canvas = np.zeros((height, width, 4), dtype=np.uint8)
    _fill(canvas, (0, 0, width, height), BG)
    _fill(canvas, (0, 0, width, 92), DARKBAR)
    _fill(canvas, (140, 24, 840, 44), PAGE)
    draw_text(canvas, 156, 40, "https://news.example.com/front", INK)
    _fill(canvas, _WEB_BUTTON, BUTTON)
    _frame_rect(canvas, _WEB_BUTTON, LINE)
    draw_text(canvas, _WEB_BUTTON[0] + 22, _WEB_BUTTON[1] + 16, "reload", INK)
    return canvas.tobytes()


def _web_scroll_offset(t_ms: float) -> int:
    if t_ms < _SCROLL_START_MS:
        return 0
    steps = int((t_ms - _SCROLL_START_MS) // _SCROLL_INTERVAL_MS) + 1
    return (steps % 8) * _SCROLL_STEP_PX


def _render_web(scene: SceneScript, t_ms: float, input_log) -> np.ndarray:
    canvas = np.frombuffer(
        _web_chrome(scene.width, scene.height), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4).copy()
    doc = np.frombuffer(_web_doc(scene.seed), dtype=np.uint8).reshape(_DOC_HEIGHT, 1000, 4)
    x, y, w, h = _CONTENT_RECT
    off = _web_scroll_offset(t_ms)
    canvas[y : y + h, x : x + w] = doc[off : off + h]
    # busy spinner: rotates every frame (high-motion tile)
    frame = int(t_ms * scene.target_fps // 1000)
    sx, sy, sw, sh = _SPINNER
    spin = np.zeros((sh, sw, 4), dtype=np.uint8)
    spin[..., :3] = DARKBAR
    spin[..., 3] = 255
    ang = (frame % 8) / 8.0 * 2 * np.pi
    cx, cy = sw // 2, sh // 2
    for k in range(6):
        a = ang + k * np.pi / 3
        px = int(cx + np.cos(a) * 9)
        py = int(cy + np.sin(a) * 9)
        shade = 255 - k * 30
        spin[py - 2 : py + 2, px - 2 : px + 2, :3] = (shade, shade, shade)
    canvas[sy : sy + sh, sx : sx + sw] = spin
    # reload button press feedback for 600 ms after a click
    presses = _clicks(input_log, t_ms, _WEB_BUTTON)
    if presses and t_ms - presses[-1].client_timestamp_ms < 600:
        _fill(canvas, _WEB_BUTTON, ACCENT)
        draw_text(canvas, _WEB_BUTTON[0] + 22, _WEB_BUTTON[1] + 16, "reload", WHITE)
    return canvas


# --- video_play -----------------------------------------------------------------

_VIDEO_RECT = (320, 140, 640, 360)
_PLAY_BUTTON = (320, 560, 90, 44)
_PROGRESS = (320, 524, 640, 14)
_VIDEO_LEN_MS = 60_000


@lru_cache(maxsize=8)
def _video_chrome(width: int, height: int, seed: int) -> bytes:
    canvas = np.zeros((height, width, 4), dtype=np.uint8)
    _fill(canvas, (0, 0, width, height), DARKBAR)
    _fill(canvas, (280, 100, 720, 540), (30, 32, 38))
    draw_text(canvas, 320, 112, "sandbox player - nature channel", WHITE)
    _fill(canvas, _PROGRESS, MIDGRAY)
    _fill(canvas, _PLAY_BUTTON, BUTTON)
    _frame_rect(canvas, _PLAY_BUTTON, LINE)
    return canvas.tobytes()


@lru_cache(maxsize=8)
def _video_texture(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed * 7919 + 5)
    return rng.normal(0.0, 5.0, size=(_VIDEO_RECT[3], _VIDEO_RECT[2], 3)).astype(np.float32)


def _video_content_time(t_ms: float, input_log) -> tuple[float, bool]:
    """Playback position and playing flag after pause/play toggles."""
    toggles = [ev.client_timestamp_ms for ev in _clicks(input_log, t_ms, _PLAY_BUTTON)]
    playing = True
    pos = 0.0
    last = 0.0
    for tt in toggles:
        if playing:
            pos += tt - last
        playing = not playing
        last = tt
    if playing:
        pos += t_ms - last
    return pos, playing


def _video_pixels(content_ms: float, seed: int) -> np.ndarray:
    vx, vy, vw, vh = _VIDEO_RECT
    phase = content_ms * 0.02  # vertical drift in px
    ys = np.arange(vh, dtype=np.float32)[:, None] + phase
    base = np.empty((vh, vw, 3), dtype=np.float32)
    base[..., 0] = 120 + 70 * np.sin(ys / 90.0)
    base[..., 1] = 110 + 60 * np.sin(ys / 131.0 + 1.7)
    base[..., 2] = 130 + 70 * np.sin(ys / 71.0 + 3.1)
    # translating checkerboard band through the middle third
    xs = np.arange(vw, dtype=np.float32)[None, :] + content_ms * 0.08
    rows = slice(120, 240)
    checker = (
        ((xs // 64).astype(np.int64) + (np.arange(120, 240)[:, None] // 64)) % 2
    ).astype(np.float32)
    base[rows] += (checker * 48.0 - 24.0)[..., None]
    base += _video_texture(seed)
    # sub-quantisation temporal dither: flips the low bit of alternating
    # pixels each frame, so every tile provably changes per frame while the
    # residual quantises to nothing
    frame_parity = int(round(content_ms * 30.0 / 1000.0)) % 2
    col = np.arange(vw, dtype=np.int64)[None, :]
    rowp = np.arange(vh, dtype=np.int64)[:, None]
    base[..., 0] += ((col + rowp + frame_parity) % 2).astype(np.float32)
    out = np.empty((vh, vw, 4), dtype=np.uint8)
    np.clip(base, 0, 255, out=base)
    out[..., :3] = base.astype(np.uint8)
    out[..., 3] = 255
    return out


def _render_video(scene: SceneScript, t_ms: float, input_log) -> np.ndarray:
    canvas = np.frombuffer(
        _video_chrome(scene.width, scene.height, scene.seed), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4).copy()
    pos, playing = _video_content_time(t_ms, input_log)
    vx, vy, vw, vh = _VIDEO_RECT
    canvas[vy : vy + vh, vx : vx + vw] = _video_pixels(pos, scene.seed)
    px, py, pw, ph = _PROGRESS
    frac = (pos % _VIDEO_LEN_MS) / _VIDEO_LEN_MS
    _fill(canvas, (px, py, max(1, int(pw * frac)), ph), ACCENT)
    label = "pause" if playing else "play"
    draw_text(canvas, _PLAY_BUTTON[0] + 16, _PLAY_BUTTON[1] + 16, label, INK)
    if not playing:
        _fill(canvas, (_PLAY_BUTTON[0] + 70, _PLAY_BUTTON[1] + 12, 8, 20), GREEN)
    return canvas


# --- ad_overlay -----------------------------------------------------------------

_TARGET_RECT = (200, 300, 640, 140)
_AD_SIZE = (360, 240)


def _ad_anchor(seed: int) -> tuple[int, int, bool]:
    """Seeded ad placement; ~73% of seeds obstruct the target text."""
    rng = random.Random(seed * 7 + 3)
    obstructs = rng.random() < 0.73
    if obstructs:
        x = rng.randint(240, 460)
        y = rng.randint(240, 360)
    else:
        zone = rng.choice(["right", "below", "above"])
        if zone == "right":
            x, y = rng.randint(860, 900), rng.randint(120, 420)
        elif zone == "below":
            x, y = rng.randint(160, 700), rng.randint(452, 470)
        else:
            x, y = rng.randint(160, 700), rng.randint(20, 52)
    return x, y, obstructs


def _ad_close_rect(seed: int) -> Rect:
    ax, ay, _ = _ad_anchor(seed)
    return (ax + _AD_SIZE[0] - 28, ay + 4, 24, 24)


@lru_cache(maxsize=32)
def _ad_page_base(width: int, height: int, seed: int) -> bytes:
    canvas = np.zeros((height, width, 4), dtype=np.uint8)
    _fill(canvas, (0, 0, width, height), BG)
    _fill(canvas, (0, 0, width, 92), DARKBAR)
    _fill(canvas, (140, 24, 980, 44), PAGE)
    draw_text(canvas, 156, 40, "https://articles.example.com/report", INK)
    _fill(canvas, (140, 104, 1000, 600), PAGE)
    draw_paragraph(canvas, (180, 130, 920, 150), seed * 3 + 11)
    _fill(canvas, _TARGET_RECT, (255, 252, 230))
    _frame_rect(canvas, _TARGET_RECT, ACCENT)
    rng = random.Random(seed * 17 + 1)
    draw_text(canvas, 220, 320, "order reference " + "".join(rng.choice("0123456789") for _ in range(8)), INK)
    draw_paragraph(canvas, (220, 350, 600, 80), seed * 29 + 2)
    draw_paragraph(canvas, (180, 460, 920, 220), seed * 41 + 5)
    return canvas.tobytes()


def _render_ad_overlay(scene: SceneScript, t_ms: float, input_log) -> np.ndarray:
    canvas = np.frombuffer(
        _ad_page_base(scene.width, scene.height, scene.seed), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4).copy()
    close_rect = _ad_close_rect(scene.seed)
    if not _clicks(input_log, t_ms, close_rect):
        ax, ay, _ = _ad_anchor(scene.seed)
        aw, ah = _AD_SIZE
        _fill(canvas, (ax, ay, aw, ah), YELLOW)
        _frame_rect(canvas, (ax, ay, aw, ah), RED, 3)
        blink = int(t_ms // 1000) % 2 == 0
        draw_text(canvas, ax + 16, ay + 40, "HOT DEAL", RED if blink else INK, scale=4)
        draw_paragraph(canvas, (ax + 16, ay + 100, aw - 32, ah - 120), scene.seed * 5 + 9)
        _fill(canvas, close_rect, RED)
        draw_text(canvas, close_rect[0] + 8, close_rect[1] + 6, "x", WHITE)
    return canvas


def _ad_state(scene: SceneScript, t_ms: float, input_log) -> dict:
    closed = bool(_clicks(input_log, t_ms, _ad_close_rect(scene.seed)))
    _, _, obstructs = _ad_anchor(scene.seed)
    return {
        "ad_closed": closed,
        "ad_obstructs_target": obstructs and not closed,
        "target_rect": _TARGET_RECT,
    }


def ad_reference_target(scene: SceneScript) -> np.ndarray:
    """Unobstructed target-text pixels (what a successful read must see)."""
    base = np.frombuffer(
        _ad_page_base(scene.width, scene.height, scene.seed), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4)
    x, y, w, h = _TARGET_RECT
    return base[y : y + h, x : x + w].copy()


# --- captcha_modal ----------------------------------------------------------------

_MODAL_RECT = (430, 160, 420, 400)
_CHECKBOX = (454, 230, 28, 28)
_GRID_ORIGIN = (454, 290)
_CELL = 64
_CELL_GAP = 12
_SUBMIT = (454, 510, 140, 36)


def _captcha_truth(seed: int) -> tuple[bool, frozenset]:
    rng = random.Random(seed * 13 + 29)
    simple = rng.random() < 0.45
    correct = frozenset(rng.sample(range(9), 3))
    return simple, correct


def _cell_rect(i: int) -> Rect:
    gx, gy = _GRID_ORIGIN
    return (
        gx + (i % 3) * (_CELL + _CELL_GAP),
        gy + (i // 3) * (_CELL + _CELL_GAP),
        _CELL,
        _CELL,
    )


@lru_cache(maxsize=32)
def _captcha_cells(seed: int) -> bytes:
    _, correct = _captcha_truth(seed)
    rng = np.random.default_rng(seed * 4099 + 17)
    cells = np.empty((9, _CELL, _CELL, 3), dtype=np.uint8)
    for i in range(9):
        mean = 178.0 if i in correct else 104.0
        patch = rng.normal(mean, 22.0, size=(_CELL, _CELL, 3))
        cells[i] = np.clip(patch, 0, 255).astype(np.uint8)
    return cells.tobytes()


def _captcha_fold(scene: SceneScript, t_ms: float, input_log) -> dict:
    simple, correct = _captcha_truth(scene.seed)
    checked_at = None
    selected: set[int] = set()
    solved = False
    failed = 0
    for ev in input_log:
        if ev.kind is not InputKind.MOUSE_CLICK or ev.client_timestamp_ms > t_ms:
            continue
        if solved:
            continue
        if checked_at is None:
            if in_rect(ev.x, ev.y, _CHECKBOX):
                checked_at = ev.client_timestamp_ms
                if simple:
                    solved = True
            continue
        for i in range(9):
            if in_rect(ev.x, ev.y, _cell_rect(i)):
                selected ^= {i}
        if in_rect(ev.x, ev.y, _SUBMIT):
            if frozenset(selected) == correct:
                solved = True
            else:
                failed += 1
                selected = set()
    return {
        "simple": simple,
        "checked": checked_at is not None,
        "grid_visible": checked_at is not None and not simple and not solved,
        "selected": frozenset(selected),
        "solved": solved,
        "failed_attempts": failed,
        "correct_cells": correct,
    }


@lru_cache(maxsize=32)
def _captcha_page(width: int, height: int, seed: int) -> bytes:
    canvas = np.zeros((height, width, 4), dtype=np.uint8)
    _fill(canvas, (0, 0, width, height), BG)
    _fill(canvas, (140, 40, 1000, 640), PAGE)
    draw_text(canvas, 180, 70, "account portal security check", INK, scale=3)
    draw_paragraph(canvas, (180, 120, 900, 30), seed + 77)
    return canvas.tobytes()


def _render_captcha(scene: SceneScript, t_ms: float, input_log) -> np.ndarray:
    canvas = np.frombuffer(
        _captcha_page(scene.width, scene.height, scene.seed), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4).copy()
    st = _captcha_fold(scene, t_ms, input_log)
    if st["solved"]:
        _fill(canvas, (430, 160, 420, 90), GREEN)
        draw_text(canvas, 460, 196, "verified - you may continue", WHITE)
        return canvas
    mx, my, mw, mh = _MODAL_RECT
    _fill(canvas, (mx, my, mw, mh), WHITE)
    _frame_rect(canvas, (mx, my, mw, mh), MIDGRAY)
    draw_text(canvas, mx + 24, my + 24, "confirm you are human", INK)
    _fill(canvas, _CHECKBOX, WHITE)
    _frame_rect(canvas, _CHECKBOX, INK)
    if st["checked"]:
        _fill(canvas, (_CHECKBOX[0] + 8, _CHECKBOX[1] + 8, 12, 12), ACCENT)
    draw_text(canvas, _CHECKBOX[0] + 40, _CHECKBOX[1] + 8, "i am not a robot", INK)
    if st["grid_visible"]:
        cells = np.frombuffer(_captcha_cells(scene.seed), dtype=np.uint8).reshape(
            9, _CELL, _CELL, 3
        )
        draw_text(canvas, mx + 24, my + 108, "select the three bright panels", INK)
        for i in range(9):
            cx, cy, cw, ch = _cell_rect(i)
            canvas[cy : cy + ch, cx : cx + cw, :3] = cells[i]
            canvas[cy : cy + ch, cx : cx + cw, 3] = 255
            if i in st["selected"]:
                _frame_rect(canvas, (cx, cy, cw, ch), ACCENT, 4)
        _fill(canvas, _SUBMIT, BUTTON)
        _frame_rect(canvas, _SUBMIT, LINE)
        draw_text(canvas, _SUBMIT[0] + 28, _SUBMIT[1] + 12, "submit", INK)
        if st["failed_attempts"]:
            draw_text(canvas, _SUBMIT[0] + 170, _SUBMIT[1] + 12, "try again", RED)
    return canvas


# --- login_form --------------------------------------------------------------------

_USER_FIELD = (480, 280, 320, 40)
_PASS_FIELD = (480, 350, 320, 40)
_LOGIN_BUTTON = (480, 420, 140, 44)


def login_secret(seed: int) -> str:
    rng = random.Random(seed * 1003 + 71)
    return "".join(rng.choice("abcdefghjkmnpqrstuvwxyz23456789") for _ in range(10))


def _login_fold(scene: SceneScript, t_ms: float, input_log) -> dict:
    secret = login_secret(scene.seed)
    focus = None
    password = ""
    logged_in = False
    errors = 0
    for ev in input_log:
        if ev.client_timestamp_ms > t_ms or logged_in:
            continue
        if ev.kind is InputKind.MOUSE_CLICK:
            if in_rect(ev.x, ev.y, _PASS_FIELD):
                focus = "password"
            elif in_rect(ev.x, ev.y, _USER_FIELD):
                focus = "username"
            elif in_rect(ev.x, ev.y, _LOGIN_BUTTON):
                if password == secret:
                    logged_in = True
                else:
                    errors += 1
                    password = ""
            else:
                focus = None
        elif ev.kind is InputKind.TEXT and focus == "password":
            password += ev.text
    return {
        "logged_in": logged_in,
        "password_len": len(password),
        "errors": errors,
        "focus": focus,
    }


@lru_cache(maxsize=32)
def _login_page(width: int, height: int, seed: int) -> bytes:
    canvas = np.zeros((height, width, 4), dtype=np.uint8)
    _fill(canvas, (0, 0, width, height), BG)
    _fill(canvas, (400, 180, 480, 340), PAGE)
    _frame_rect(canvas, (400, 180, 480, 340), LINE)
    draw_text(canvas, 480, 210, "sign in to continue", INK, scale=3)
    draw_text(canvas, 480, 260, "username", MIDGRAY)
    draw_text(canvas, 480, 330, "password", MIDGRAY)
    return canvas.tobytes()


def _render_login(scene: SceneScript, t_ms: float, input_log) -> np.ndarray:
    canvas = np.frombuffer(
        _login_page(scene.width, scene.height, scene.seed), dtype=np.uint8
    ).reshape(scene.height, scene.width, 4).copy()
    st = _login_fold(scene, t_ms, input_log)
    if st["logged_in"]:
        _fill(canvas, (400, 180, 480, 340), PAGE)
        _fill(canvas, (430, 300, 420, 80), GREEN)
        draw_text(canvas, 470, 330, "welcome back, operator", WHITE)
        return canvas
    for rect, name in ((_USER_FIELD, "username"), (_PASS_FIELD, "password")):
        _fill(canvas, rect, WHITE)
        _frame_rect(canvas, rect, ACCENT if st["focus"] == name else LINE)
    draw_text(canvas, _USER_FIELD[0] + 10, _USER_FIELD[1] + 12, "operator", INK)
    dots = "*" * min(st["password_len"], 24)
    draw_text(canvas, _PASS_FIELD[0] + 10, _PASS_FIELD[1] + 12, dots, INK)
    _fill(canvas, _LOGIN_BUTTON, ACCENT)
    draw_text(canvas, _LOGIN_BUTTON[0] + 34, _LOGIN_BUTTON[1] + 16, "log in", WHITE)
    if st["errors"]:
        draw_text(canvas, 480, 480, "invalid credentials", RED)
    return canvas


# --- catalog ------------------------------------------------------------------------

_RENDERERS = {
    "text_edit": _render_text_edit,
    "slides": _render_slides,
    "web_browse": _render_web,
    "video_play": _render_video,
    "ad_overlay": _render_ad_overlay,
    "captcha_modal": _render_captcha,
    "login_form": _render_login,
}

_STATE_FNS = {
    "ad_overlay": _ad_state,
    "captcha_modal": _captcha_fold,
    "login_form": _login_fold,
    "video_play": lambda s, t, log: dict(
        zip(("position_ms", "playing"), _video_content_time(t, log))
    ),
}

_SCRIPT_EVENTS = {
    "text_edit": tuple((1000 + i * 500, "type_char") for i in range(40)),
    "slides": tuple((i * _SLIDE_INTERVAL_MS, "next_slide") for i in range(1, 6)),
    "web_browse": tuple(
        (_SCROLL_START_MS + i * _SCROLL_INTERVAL_MS, "scroll") for i in range(8)
    ),
    "video_play": ((0, "play"),),
    "ad_overlay": ((0, "show_ad"),),
    "captcha_modal": ((0, "show_modal"),),
    "login_form": ((0, "show_form"),),
}

_RESPONSE_RECTS = {
    "web_browse": lambda seed: {"button": _WEB_BUTTON},
    "video_play": lambda seed: {"button": _PLAY_BUTTON},
    "ad_overlay": lambda seed: {"close": _ad_close_rect(seed), "target": _TARGET_RECT},
    "captcha_modal": lambda seed: {
        "checkbox": _CHECKBOX,
        "submit": _SUBMIT,
        **{f"cell{i}": _cell_rect(i) for i in range(9)},
    },
    "login_form": lambda seed: {
        "password": _PASS_FIELD,
        "login": _LOGIN_BUTTON,
        "username": _USER_FIELD,
    },
}

SCENE_CATALOG = tuple(sorted(_RENDERERS))
