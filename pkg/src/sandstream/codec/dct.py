"""Blockwise 8x8 DCT codec used for natural and high-motion content.

Pipeline per region: RGB -> luma/chroma (full resolution, no subsampling),
8x8 forward DCT, quantisation with the standard tables scaled by quality,
zigzag reorder, then zero-run coding packed as bytes.  ``residual`` mode
encodes a signed difference against a reference using the linear part of
the same colour transform; it shares every other stage.

Payload layout, per channel (Y, Cb, Cr): one u8 coefficient count per
block, then for each kept coefficient a (u8 zero-run, i16 value) pair.
Block order is row-major; all stages are vectorised across blocks.
"""

from __future__ import annotations

import numpy as np

from ..errors import CorruptPayload

BLOCK = 8

# Orthonormal DCT-II basis
_K = np.arange(BLOCK)
_DCT = np.sqrt(2.0 / BLOCK) * np.cos(np.pi * (2 * _K[None, :] + 1) * _K[:, None] / (2 * BLOCK))
_DCT[0, :] = np.sqrt(1.0 / BLOCK)
_DCT32 = _DCT.astype(np.float32)

# Standard quantisation tables (luminance / chrominance)
_Q_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)
_Q_CHROMA = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.float64,
)

# full-range BT.601 RGB <-> YCbCr
_RGB2YCC = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ],
    dtype=np.float32,
)
_YCC2RGB = np.linalg.inv(_RGB2YCC.astype(np.float64)).astype(np.float32)
_YCC_OFFSET = np.array([0.0, 128.0, 128.0], dtype=np.float32)

_ZIGZAG = np.array(
    [
        0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5,
        12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
    ]
)
_UNZIGZAG = np.argsort(_ZIGZAG)


def scaled_quant_tables(quality: int) -> tuple[np.ndarray, np.ndarray]:
    """JPEG-style quality scaling; quality 100 yields all-ones tables."""
    q = min(100, max(1, int(quality)))
    scale = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    out = []
    for table in (_Q_LUMA, _Q_CHROMA):
        t = np.floor((table * scale + 50.0) / 100.0)
        out.append(np.clip(t, 1.0, 255.0).astype(np.float32))
    return out[0], out[1]


def _block_split(channel: np.ndarray) -> tuple[np.ndarray, int, int]:
    """(n, 8, 8) blocks from an (h, w) channel, edge-replicated to multiples of 8."""
    h, w = channel.shape
    ph = -(-h // BLOCK) * BLOCK
    pw = -(-w // BLOCK) * BLOCK
    if (ph, pw) != (h, w):
        channel = np.pad(channel, ((0, ph - h), (0, pw - w)), mode="edge")
    by, bx = ph // BLOCK, pw // BLOCK
    blocks = channel.reshape(by, BLOCK, bx, BLOCK).transpose(0, 2, 1, 3).reshape(-1, BLOCK, BLOCK)
    return np.ascontiguousarray(blocks), by, bx


def _block_join(blocks: np.ndarray, by: int, bx: int, h: int, w: int) -> np.ndarray:
    full = blocks.reshape(by, bx, BLOCK, BLOCK).transpose(0, 2, 1, 3).reshape(by * BLOCK, bx * BLOCK)
    return full[:h, :w]


def _pack_channel(q: np.ndarray) -> bytes:
    """Pack quantised (n, 8, 8) int32 coefficients into the byte layout."""
    n = q.shape[0]
    zz = q.reshape(n, 64)[:, _ZIGZAG]
    mask = zz != 0
    nnz = mask.sum(axis=1)
    block_idx, pos = np.nonzero(mask)
    vals = zz[block_idx, pos].astype(">i2")
    prev = np.concatenate(([np.int64(-1)], pos[:-1]))
    first = np.concatenate(([True], block_idx[1:] != block_idx[:-1])) if len(block_idx) else np.array([], bool)
    zrun = pos - prev - 1
    if len(block_idx):
        zrun[first] = pos[first]
    triples = np.empty((len(pos), 3), dtype=np.uint8)
    triples[:, 0] = zrun
    triples[:, 1:] = vals.view(np.uint8).reshape(-1, 2)
    return nnz.astype(np.uint8).tobytes() + triples.tobytes()


def _unpack_channel(data: bytes, offset: int, nblocks: int) -> tuple[np.ndarray, int]:
    if len(data) < offset + nblocks:
        raise CorruptPayload("truncated coefficient counts")
    nnz = np.frombuffer(data, np.uint8, count=nblocks, offset=offset).astype(np.int64)
    offset += nblocks
    total = int(nnz.sum())
    if len(data) < offset + total * 3:
        raise CorruptPayload("truncated coefficient data")
    triples = np.frombuffer(data, np.uint8, count=total * 3, offset=offset).reshape(-1, 3)
    offset += total * 3
    zrun = triples[:, 0].astype(np.int64)
    vals = np.ascontiguousarray(triples[:, 1:]).view(">i2").ravel().astype(np.int32)
    block_idx = np.repeat(np.arange(nblocks), nnz)
    steps = np.cumsum(zrun + 1)
    starts = np.concatenate(([0], np.cumsum(nnz)[:-1]))
    base = np.zeros(total, dtype=np.int64)
    if total:
        has = nnz > 0
        prev_total = np.where(starts > 0, steps[starts - 1], 0)
        base = np.repeat(prev_total[has], nnz[has])
    pos = steps - base - 1
    if total and pos.max() > 63:
        raise CorruptPayload("coefficient position out of range")
    zz = np.zeros((nblocks, 64), dtype=np.float32)
    zz[block_idx, pos] = vals
    coeffs = zz[:, _UNZIGZAG].reshape(nblocks, BLOCK, BLOCK)
    return coeffs, offset


def _forward(blocks: np.ndarray) -> np.ndarray:
    return (_DCT32 @ blocks) @ _DCT32.T


def _inverse(coeffs: np.ndarray) -> np.ndarray:
    return (_DCT32.T @ coeffs) @ _DCT32


def _to_planes(pixels: np.ndarray, residual: bool) -> np.ndarray:
    """(h, w, 3) float32 YCbCr planes (no offsets in residual mode)."""
    rgb = pixels[..., :3].astype(np.float32)
    ycc = rgb @ _RGB2YCC.T
    if not residual:
        ycc += _YCC_OFFSET
    return ycc


def _from_planes(ycc: np.ndarray, residual: bool) -> np.ndarray:
    if not residual:
        ycc = ycc - _YCC_OFFSET
    return ycc @ _YCC2RGB.T


def encode_blocks(pixels: np.ndarray, quality: int, *, residual: bool = False) -> tuple[bytes, np.ndarray]:
    """Encode an (h, w, >=3) region (uint8, or int16 residual in residual
    mode); returns (payload, reconstructed float32 rgb)."""
    h, w = pixels.shape[:2]
    qt_luma, qt_chroma = scaled_quant_tables(quality)
    ycc = _to_planes(pixels, residual)
    level = 0.0 if residual else 128.0
    payload = bytearray()
    recon_planes = np.empty((h, w, 3), dtype=np.float32)
    for c in range(3):
        qt = qt_luma if c == 0 else qt_chroma
        blocks, by, bx = _block_split(ycc[..., c] - (level if c == 0 else 0.0))
        coeffs = _forward(blocks)
        q = np.round(coeffs / qt).astype(np.int32)
        np.clip(q, -32768, 32767, out=q)
        payload += _pack_channel(q)
        deq = q.astype(np.float32) * qt
        rec = _inverse(deq) + (level if c == 0 else 0.0)
        recon_planes[..., c] = _block_join(rec, by, bx, h, w)
    rgb = _from_planes(recon_planes, residual)
    return bytes(payload), rgb


def decode_blocks(data: bytes, width: int, height: int, quality: int, *, residual: bool = False) -> np.ndarray:
    """Decode a payload back to float32 RGB (or residual) planes."""
    qt_luma, qt_chroma = scaled_quant_tables(quality)
    by = -(-height // BLOCK)
    bx = -(-width // BLOCK)
    nblocks = by * bx
    level = 0.0 if residual else 128.0
    offset = 0
    planes = np.empty((height, width, 3), dtype=np.float32)
    for c in range(3):
        qt = qt_luma if c == 0 else qt_chroma
        coeffs, offset = _unpack_channel(data, offset, nblocks)
        deq = coeffs * qt
        rec = _inverse(deq) + (level if c == 0 else 0.0)
        planes[..., c] = _block_join(rec, by, bx, height, width)
    if offset != len(data):
        raise CorruptPayload("trailing bytes in coefficient payload")
    return _from_planes(planes, residual)
