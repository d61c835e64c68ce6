"""Encoded regions: the unit of screen content on the wire.

Serialisation (big-endian): codec_id u8, class u8, quality u8, flags u8
(bit0 keyframe), x u16, y u16, w u16, h u16, payload_len u32, payload.

Codec per class: Synthetic -> PaletteRLE (lossless), Natural -> QuantDCT,
HighMotion -> DeltaDCT (residual against the previous decoded frame, or a
self-contained intra block when flagged keyframe).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptPayload, MissingReference
from .config import EncoderConfig
from .dct import decode_blocks, encode_blocks
from .rle import MAX_PALETTE, decode_palette_rle, encode_palette_rle, palette_size
from .tiles import TILE, ContentClass, classify_tiles_batch, tile_counts

CODEC_PALETTE_RLE = 1
CODEC_QUANT_DCT = 2
CODEC_DELTA_DCT = 3

_HEADER = struct.Struct(">BBBBHHHHI")
REGION_HEADER_SIZE = _HEADER.size  # 16
FLAG_REGION_KEYFRAME = 0x01


@dataclass(frozen=True)
class EncodedRegion:
    x: int
    y: int
    w: int
    h: int
    content_class: ContentClass
    codec_id: int
    quality: int
    payload: bytes
    is_keyframe: bool = False

    def serialize(self) -> bytes:
        flags = FLAG_REGION_KEYFRAME if self.is_keyframe else 0
        return (
            _HEADER.pack(
                self.codec_id,
                int(self.content_class),
                self.quality,
                flags,
                self.x,
                self.y,
                self.w,
                self.h,
                len(self.payload),
            )
            + self.payload
        )

    @classmethod
    def parse(cls, data: bytes, offset: int = 0) -> tuple["EncodedRegion", int]:
        if len(data) < offset + REGION_HEADER_SIZE:
            raise CorruptPayload("truncated region header")
        codec, clazz, quality, flags, x, y, w, h, plen = _HEADER.unpack_from(data, offset)
        offset += REGION_HEADER_SIZE
        if len(data) < offset + plen:
            raise CorruptPayload("truncated region payload")
        if codec not in (CODEC_PALETTE_RLE, CODEC_QUANT_DCT, CODEC_DELTA_DCT):
            raise CorruptPayload(f"unknown codec id {codec}")
        region = cls(
            x=x,
            y=y,
            w=w,
            h=h,
            content_class=ContentClass(clazz),
            codec_id=codec,
            quality=quality,
            payload=data[offset : offset + plen],
            is_keyframe=bool(flags & FLAG_REGION_KEYFRAME),
        )
        return region, offset + plen


_CLASS_CODEC = {
    ContentClass.SYNTHETIC: CODEC_PALETTE_RLE,
    ContentClass.NATURAL: CODEC_QUANT_DCT,
    ContentClass.HIGH_MOTION: CODEC_DELTA_DCT,
}


def _rgba_from_rgb(rgb: np.ndarray) -> np.ndarray:
    out = np.empty((*rgb.shape[:2], 4), dtype=np.uint8)
    out[..., :3] = np.clip(np.round(rgb), 0, 255).astype(np.uint8)
    out[..., 3] = 255
    return out


def encode_region(
    pixels: np.ndarray,
    x: int,
    y: int,
    content_class: ContentClass,
    config: EncoderConfig,
    prev_decoded: np.ndarray | None = None,
    *,
    keyframe: bool = False,
) -> tuple[EncodedRegion, np.ndarray]:
    """Encode one region; returns (region, reconstructed RGBA pixels).

    ``pixels`` is the (h, w, 4) source rect; ``prev_decoded`` the same rect
    of the previous decoded frame (required for HighMotion deltas).
    """
    h, w = pixels.shape[:2]
    codec = _CLASS_CODEC[content_class]
    if codec == CODEC_PALETTE_RLE:
        payload = encode_palette_rle(pixels)
        if payload is None:
            # palette overflow on a merged span: fall back to intra DCT
            content_class = ContentClass.NATURAL
            codec = CODEC_QUANT_DCT
        else:
            region = EncodedRegion(
                x, y, w, h, content_class, codec, 100, payload, is_keyframe=keyframe
            )
            return region, pixels.copy()
    if codec == CODEC_QUANT_DCT:
        payload, rgb = encode_blocks(pixels, config.quality_natural)
        region = EncodedRegion(
            x, y, w, h, content_class, codec, config.quality_natural, payload,
            is_keyframe=keyframe,
        )
        return region, _rgba_from_rgb(rgb)
    # DeltaDCT
    if keyframe or prev_decoded is None:
        if not keyframe:
            raise MissingReference("HighMotion delta requires a reference frame")
        payload, rgb = encode_blocks(pixels, config.quality_motion)
        region = EncodedRegion(
            x, y, w, h, content_class, CODEC_DELTA_DCT, config.quality_motion, payload,
            is_keyframe=True,
        )
        return region, _rgba_from_rgb(rgb)
    residual = pixels[..., :3].astype(np.int16) - prev_decoded[..., :3].astype(np.int16)
    payload, res_rgb = encode_blocks(residual, config.quality_motion, residual=True)
    recon = prev_decoded[..., :3].astype(np.float32) + res_rgb
    region = EncodedRegion(
        x, y, w, h, content_class, CODEC_DELTA_DCT, config.quality_motion, payload,
        is_keyframe=False,
    )
    return region, _rgba_from_rgb(recon)


def decode_region(
    region: EncodedRegion,
    target: np.ndarray,
    prev_decoded: np.ndarray | None = None,
) -> None:
    """Decode one region into ``target`` (a full (H, W, 4) canvas)."""
    x, y, w, h = region.x, region.y, region.w, region.h
    if y + h > target.shape[0] or x + w > target.shape[1]:
        raise CorruptPayload("region outside target bounds")
    if region.codec_id == CODEC_PALETTE_RLE:
        target[y : y + h, x : x + w] = decode_palette_rle(region.payload, w, h)
        return
    if region.codec_id == CODEC_QUANT_DCT or (
        region.codec_id == CODEC_DELTA_DCT and region.is_keyframe
    ):
        rgb = decode_blocks(region.payload, w, h, region.quality)
        target[y : y + h, x : x + w] = _rgba_from_rgb(rgb)
        return
    if region.codec_id == CODEC_DELTA_DCT:
        if prev_decoded is None:
            raise MissingReference("delta region requires the previous decoded frame")
        residual = decode_blocks(region.payload, w, h, region.quality, residual=True)
        base = prev_decoded[y : y + h, x : x + w, :3].astype(np.float32)
        target[y : y + h, x : x + w] = _rgba_from_rgb(base + residual)
        return
    raise CorruptPayload(f"unknown codec id {region.codec_id}")


def encode_keyframe(frame, config: EncoderConfig) -> list[EncodedRegion]:
    """Self-contained regions covering every tile of a frame.

    Tiles are classified from pixels alone (no change history at a cut
    point) and horizontally merged per row while the class matches; all
    regions carry the keyframe flag and decode with no prior state.
    """
    pixels = getattr(frame, "pixels", frame)
    h, w = pixels.shape[:2]
    tx, ty = tile_counts(w, h)
    classes = classify_tiles_batch(pixels, np.zeros((ty, tx), dtype=np.int32))
    regions: list[EncodedRegion] = []
    for row in range(ty):
        y0 = row * TILE
        rh = min(TILE, h - y0)
        col = 0
        while col < tx:
            cls = ContentClass(int(classes[row, col]))
            end = col + 1
            while end < tx and ContentClass(int(classes[row, end])) == cls:
                end += 1
            for x0, rw in split_span(pixels, y0, rh, col, end, w, cls):
                rect = pixels[y0 : y0 + rh, x0 : x0 + rw]
                region, _ = encode_region(rect, x0, y0, cls, config, keyframe=True)
                regions.append(region)
            col = end
    return regions


def split_span(
    pixels: np.ndarray,
    y0: int,
    rh: int,
    col: int,
    end: int,
    width: int,
    cls: ContentClass,
) -> list[tuple[int, int]]:
    """(x, w) pieces for a merged tile span.

    Synthetic spans whose combined palette would overflow are split back
    into single tiles (each tile alone is within the palette by
    classification); other classes merge freely.
    """
    x0 = col * TILE
    rw = min(end * TILE, width) - x0
    if cls is ContentClass.SYNTHETIC and end - col > 1:
        if palette_size(pixels[y0 : y0 + rh, x0 : x0 + rw]) > MAX_PALETTE:
            return [
                (c * TILE, min((c + 1) * TILE, width) - c * TILE)
                for c in range(col, end)
            ]
    return [(x0, rw)]
