"""Minimal deterministic PNG encode/decode for screenshots.

Writes truecolour-with-alpha PNGs using filter type 0 on every scanline and
a fixed zlib level, so identical framebuffers always produce identical
bytes.  The decoder handles exactly what the encoder emits (plus filters
1/2 for robustness); it exists so in-repo consumers can read screenshots
without an imaging dependency.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + tag
        + data
        + struct.pack(">I", zlib.crc32(tag + data))
    )


def encode_png(pixels: np.ndarray) -> bytes:
    """(h, w, 4) or (h, w, 3) uint8 -> PNG bytes (lossless)."""
    h, w, channels = pixels.shape
    color_type = 6 if channels == 4 else 2
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    raw = bytearray()
    rows = np.ascontiguousarray(pixels)
    for y in range(h):
        raw.append(0)  # filter type 0
        raw += rows[y].tobytes()
    idat = zlib.compress(bytes(raw), 6)
    return (
        _SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", idat)
        + _chunk(b"IEND", b"")
    )


def decode_png(data: bytes) -> np.ndarray:
    if data[:8] != _SIGNATURE:
        raise ValueError("not a PNG")
    pos = 8
    width = height = 0
    channels = 4
    idat = bytearray()
    while pos < len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        tag = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            width, height, depth, color_type, *_ = struct.unpack(">IIBBBBB", body)
            if depth != 8 or color_type not in (2, 6):
                raise ValueError("unsupported PNG variant")
            channels = 4 if color_type == 6 else 3
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            break
    raw = zlib.decompress(bytes(idat))
    stride = width * channels
    out = np.empty((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    for y in range(height):
        ftype = raw[y * (stride + 1)]
        line = np.frombuffer(
            raw, dtype=np.uint8, count=stride, offset=y * (stride + 1) + 1
        ).copy()
        if ftype == 0:
            pass
        elif ftype == 2:  # up
            line += prev
        elif ftype == 1:  # sub
            line = _unfilter_sub(line, channels)
        else:
            raise ValueError(f"unsupported filter {ftype}")
        out[y] = line
        prev = out[y]
    return out.reshape(height, width, channels)


def _unfilter_sub(line: np.ndarray, channels: int) -> np.ndarray:
    out = line.copy()
    for i in range(channels, out.size):
        out[i] = (int(out[i]) + int(out[i - channels])) & 0xFF
    return out
