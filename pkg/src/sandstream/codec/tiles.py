"""Tile grid, dirty-region detection and per-tile content classification.

Frames are cut into 16x16 tiles (edge tiles smaller).  A tile is dirty iff
its pixel bytes differ from the previous frame; the byte comparison is
authoritative, so hash collisions can never mark a changed tile clean.
The per-tile 64-bit FNV-1a hash (computed over 8-byte words for speed) is
kept alongside for cheap cross-frame bookkeeping.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch

TILE = 16

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)

HIGH_MOTION_CHANGES = 6
HISTORY_WINDOW = 10
SYNTHETIC_MAX_COLORS = 16


class ContentClass(enum.IntEnum):
    SYNTHETIC = 0
    NATURAL = 1
    HIGH_MOTION = 2


@dataclass(frozen=True)
class DirtyMap:
    frame_index: int
    width: int
    height: int
    dirty: frozenset  # set of (x, y) tile pixel origins
    hashes: np.ndarray  # (tiles_y, tiles_x) uint64 content hashes


def tile_counts(width: int, height: int) -> tuple[int, int]:
    return (-(-width // TILE), -(-height // TILE))


def tile_grid(width: int, height: int) -> list[tuple[int, int, int, int]]:
    """All (x, y, w, h) tiles covering a width x height frame, row-major."""
    out = []
    for ty in range(0, height, TILE):
        th = min(TILE, height - ty)
        for tx in range(0, width, TILE):
            out.append((tx, ty, min(TILE, width - tx), th))
    return out


def _padded_tiles(pixels: np.ndarray) -> np.ndarray:
    """View pixels as (tiles_y, tiles_x, TILE*TILE*4) uint8, zero-padded edges."""
    h, w = pixels.shape[:2]
    ph = -(-h // TILE) * TILE
    pw = -(-w // TILE) * TILE
    if (ph, pw) != (h, w):
        padded = np.zeros((ph, pw, 4), dtype=np.uint8)
        padded[:h, :w] = pixels
    else:
        padded = pixels
    ty, tx = ph // TILE, pw // TILE
    return (
        padded.reshape(ty, TILE, tx, TILE, 4)
        .transpose(0, 2, 1, 3, 4)
        .reshape(ty, tx, TILE * TILE * 4)
    )


def tile_hashes(pixels: np.ndarray) -> np.ndarray:
    """FNV-1a over each tile's bytes, consumed as little-endian 64-bit words."""
    tiles = np.ascontiguousarray(_padded_tiles(pixels))
    ty, tx, nbytes = tiles.shape
    words = tiles.reshape(ty * tx, nbytes).view("<u8")
    h = np.full(ty * tx, _FNV_OFFSET, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(words.shape[1]):
            h ^= words[:, j]
            h *= _FNV_PRIME
    return h.reshape(ty, tx)


def dirty_tile_mask(prev: np.ndarray, curr: np.ndarray) -> np.ndarray:
    """(tiles_y, tiles_x) bool mask of tiles whose bytes differ."""
    h, w = curr.shape[:2]
    if h % TILE == 0 and w % 2 == 0:
        # zero-copy fast path: compare rows as 64-bit words, reduce per tile
        words_per_tile = TILE * 4 // 8
        wa = np.ascontiguousarray(prev).reshape(h, -1).view("<u8")
        wb = np.ascontiguousarray(curr).reshape(h, -1).view("<u8")
        diff = wa != wb
        ty, tx = h // TILE, -(-w // TILE)
        padded_tx = tx * words_per_tile
        if diff.shape[1] != padded_tx:
            full = np.zeros((h, padded_tx), dtype=bool)
            full[:, : diff.shape[1]] = diff
            diff = full
        return diff.reshape(ty, TILE, tx, words_per_tile).any(axis=(1, 3))
    a = np.ascontiguousarray(_padded_tiles(prev))
    b = np.ascontiguousarray(_padded_tiles(curr))
    return (a != b).any(axis=2)


def diff_frame(prev, curr) -> DirtyMap:
    """Dirty map between two frames; ``prev`` may be None (all tiles dirty).

    Accepts VirtualFramebuffer or raw (h, w, 4) uint8 arrays.
    """
    curr_px = getattr(curr, "pixels", curr)
    frame_index = getattr(curr, "frame_index", 0)
    h, w = curr_px.shape[:2]
    hashes = tile_hashes(curr_px)
    if prev is None:
        mask = np.ones(hashes.shape, dtype=bool)
    else:
        prev_px = getattr(prev, "pixels", prev)
        if prev_px.shape != curr_px.shape:
            raise DimensionMismatch(
                f"prev {prev_px.shape[:2]} vs curr {curr_px.shape[:2]}"
            )
        mask = dirty_tile_mask(prev_px, curr_px)
    ys, xs = np.nonzero(mask)
    dirty = frozenset(zip((xs * TILE).tolist(), (ys * TILE).tolist()))
    return DirtyMap(frame_index=frame_index, width=w, height=h, dirty=dirty, hashes=hashes)


def distinct_colors(tile_pixels: np.ndarray) -> int:
    flat = np.ascontiguousarray(tile_pixels.reshape(-1, 4)).view(np.uint32).ravel()
    return int(np.unique(flat).size)


def classify_tile(tile_pixels: np.ndarray, history) -> ContentClass:
    """Class from pixels plus change flags for up to the last 10 frames."""
    flags = list(history)[-HISTORY_WINDOW:]
    if sum(bool(f) for f in flags) >= HIGH_MOTION_CHANGES:
        return ContentClass.HIGH_MOTION
    if distinct_colors(tile_pixels) <= SYNTHETIC_MAX_COLORS:
        return ContentClass.SYNTHETIC
    return ContentClass.NATURAL


def classify_tiles_batch(pixels: np.ndarray, change_counts: np.ndarray) -> np.ndarray:
    """Vectorised classification of every tile in a frame.

    ``change_counts`` is the (tiles_y, tiles_x) count of changes over the
    last 10 frames.  Returns an int8 array of ContentClass values.
    """
    tiles = _padded_tiles(pixels)
    ty, tx, nbytes = tiles.shape
    colors = np.ascontiguousarray(tiles.reshape(ty * tx, nbytes // 4, 4)).view(np.uint32)
    colors = colors.reshape(ty * tx, nbytes // 4)
    s = np.sort(colors, axis=1)
    ndistinct = 1 + (np.diff(s, axis=1) != 0).sum(axis=1)
    cls = np.where(
        ndistinct.reshape(ty, tx) <= SYNTHETIC_MAX_COLORS,
        ContentClass.SYNTHETIC,
        ContentClass.NATURAL,
    ).astype(np.int8)
    cls[change_counts >= HIGH_MOTION_CHANGES] = ContentClass.HIGH_MOTION
    return cls
