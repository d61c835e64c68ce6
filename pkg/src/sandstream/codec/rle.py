"""Lossless palette + run-length codec for computer-generated content.

Payload layout: 1 byte palette size P (<= 16), P x 4 RGBA palette entries,
then runs of (1-byte count in 1..255, 1-byte palette index) covering the
region's pixels in row-major order.
"""

from __future__ import annotations

import numpy as np

from ..errors import CorruptPayload

MAX_PALETTE = 16


def palette_size(pixels: np.ndarray) -> int:
    flat = np.ascontiguousarray(pixels.reshape(-1, 4)).view(np.uint32).ravel()
    return int(np.unique(flat).size)


def encode_palette_rle(pixels: np.ndarray) -> bytes | None:
    """Encode an (h, w, 4) uint8 region; None if the palette exceeds 16."""
    flat = np.ascontiguousarray(pixels.reshape(-1, 4)).view(np.uint32).ravel()
    palette, indices = np.unique(flat, return_inverse=True)
    if palette.size > MAX_PALETTE:
        return None
    # run boundaries: index changes, split to <=255-length chunks
    change = np.flatnonzero(np.diff(indices)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [indices.size]))
    counts: list[int] = []
    idxs: list[int] = []
    for s, e in zip(starts.tolist(), ends.tolist()):
        run = e - s
        idx = int(indices[s])
        while run > 255:
            counts.append(255)
            idxs.append(idx)
            run -= 255
        counts.append(run)
        idxs.append(idx)
    runs = np.empty((len(counts), 2), dtype=np.uint8)
    runs[:, 0] = counts
    runs[:, 1] = idxs
    return bytes([palette.size]) + palette.astype("<u4").tobytes() + runs.tobytes()


def decode_palette_rle(data: bytes, width: int, height: int) -> np.ndarray:
    if len(data) < 1:
        raise CorruptPayload("empty palette payload")
    p = data[0]
    if p == 0 or p > MAX_PALETTE:
        raise CorruptPayload(f"palette size {p} out of range")
    header = 1 + p * 4
    if len(data) < header or (len(data) - header) % 2 != 0:
        raise CorruptPayload("truncated palette payload")
    palette = np.frombuffer(data, dtype="<u4", count=p, offset=1)
    runs = np.frombuffer(data, dtype=np.uint8, offset=header).reshape(-1, 2)
    counts = runs[:, 0].astype(np.int64)
    idxs = runs[:, 1]
    if counts.sum() != width * height:
        raise CorruptPayload("run lengths do not cover the region")
    if (counts == 0).any() or (idxs >= p).any():
        raise CorruptPayload("invalid run")
    flat = np.repeat(palette[idxs], counts)
    return flat.view(np.uint8).reshape(height, width, 4).copy()
