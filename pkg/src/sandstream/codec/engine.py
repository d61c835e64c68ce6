"""Per-session streaming engine: encoder pipeline and client-side decoder.

Server side, per frame: detect dirty tiles, classify (change history plus
palette statistics), merge same-class row runs, then encode each run as an
EncodedRegion.  High-motion runs are delta-coded against the encoder's own
decoded canvas (closed loop) with periodic intra refresh; everything else
is self-contained.  Recovery requests start an intra "wave" that re-sends
every tile as keyframe regions over the following frames within a byte
budget, so repair never stalls live content.

Message envelope (first payload byte):
    0x01 control JSON | 0x02 keyframe bundle | 0x03 frame marker
    0x04 region batch | 0x05 input JSON      | 0x06 metrics JSON
Bundles/batches carry: u32 frame_index, u16 region_count, regions.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import CorruptPayload
from .config import EncoderConfig
from .regions import EncodedRegion, decode_region, encode_region, split_span
from .tiles import (
    HIGH_MOTION_CHANGES,
    TILE,
    ContentClass,
    SYNTHETIC_MAX_COLORS,
    _padded_tiles,
    dirty_tile_mask,
    tile_counts,
)

MSG_CONTROL_JSON = 0x01
MSG_KEYFRAME = 0x02
MSG_FRAME_MARK = 0x03
MSG_REGIONS = 0x04
MSG_INPUT_JSON = 0x05
MSG_METRICS_JSON = 0x06

_BUNDLE = struct.Struct(">BIH")
_MARK = struct.Struct(">BI")

REGION_MESSAGE_TARGET = 4096  # soft cap per region-batch message
_REFRESH_TILES_PER_FRAME = 48
_REFRESH_QUALITY_STEP = 10
_LOSSLESS = 127

_POPCOUNT = np.array([bin(i).count("1") for i in range(1024)], dtype=np.int32)


def pack_json(msg_type: int, obj: dict) -> bytes:
    return bytes([msg_type]) + json.dumps(obj, separators=(",", ":")).encode()


def pack_marker(frame_index: int) -> bytes:
    return _MARK.pack(MSG_FRAME_MARK, frame_index)


def pack_regions(msg_type: int, frame_index: int, regions: list[EncodedRegion]) -> bytes:
    body = b"".join(r.serialize() for r in regions)
    return _BUNDLE.pack(msg_type, frame_index, len(regions)) + body


def batch_region_messages(frame_index: int, regions: list[EncodedRegion]) -> list[bytes]:
    """Split a frame's regions into region-batch messages of bounded size,
    so one lost datagram never invalidates the whole frame."""
    messages: list[bytes] = []
    batch: list[EncodedRegion] = []
    size = 0
    for region in regions:
        rsize = len(region.payload) + 16
        if batch and size + rsize > REGION_MESSAGE_TARGET:
            messages.append(pack_regions(MSG_REGIONS, frame_index, batch))
            batch, size = [], 0
        batch.append(region)
        size += rsize
    if batch:
        messages.append(pack_regions(MSG_REGIONS, frame_index, batch))
    return messages


@dataclass(frozen=True)
class StreamMessage:
    msg_type: int
    frame_index: int = 0
    regions: tuple = ()
    obj: dict | None = None


def parse_message(data: bytes) -> StreamMessage:
    if not data:
        raise CorruptPayload("empty stream message")
    msg_type = data[0]
    if msg_type in (MSG_CONTROL_JSON, MSG_INPUT_JSON, MSG_METRICS_JSON):
        try:
            return StreamMessage(msg_type=msg_type, obj=json.loads(data[1:]))
        except ValueError as exc:
            raise CorruptPayload(f"bad json message: {exc}") from None
    if msg_type == MSG_FRAME_MARK:
        if len(data) != _MARK.size:
            raise CorruptPayload("bad marker length")
        return StreamMessage(msg_type=msg_type, frame_index=_MARK.unpack(data)[1])
    if msg_type in (MSG_KEYFRAME, MSG_REGIONS):
        if len(data) < _BUNDLE.size:
            raise CorruptPayload("truncated bundle")
        _, frame_index, count = _BUNDLE.unpack_from(data)
        offset = _BUNDLE.size
        regions = []
        for _ in range(count):
            region, offset = EncodedRegion.parse(data, offset)
            regions.append(region)
        if offset != len(data):
            raise CorruptPayload("trailing bytes in bundle")
        return StreamMessage(msg_type=msg_type, frame_index=frame_index, regions=tuple(regions))
    raise CorruptPayload(f"unknown message type {msg_type}")


class StreamEncoder:
    def __init__(self, width: int, height: int, config: EncoderConfig) -> None:
        self.width = width
        self.height = height
        self.config = config
        tx, ty = tile_counts(width, height)
        self._tx, self._ty = tx, ty
        self._prev: np.ndarray | None = None
        self._history = np.zeros((ty, tx), dtype=np.uint16)
        # stagger initial chain ages so periodic intra refresh spreads out
        self._since_intra = (
            np.arange(ty * tx, dtype=np.int32).reshape(ty, tx) * 7
        ) % max(1, config.keyframe_interval_frames)
        self._last_q = np.zeros((ty, tx), dtype=np.int16)
        self._wave = np.zeros((ty, tx), dtype=bool)
        self.decoded = np.zeros((height, width, 4), dtype=np.uint8)
        self.frames_encoded = 0

    # -- public ------------------------------------------------------------------

    def set_config(self, config: EncoderConfig) -> None:
        self.config = config

    def start_intra_wave(self) -> None:
        self._wave[:] = True

    @property
    def wave_active(self) -> bool:
        return bool(self._wave.any())

    def encode_keyframe(self, pixels: np.ndarray, frame_index: int) -> list[EncodedRegion]:
        """Full self-contained frame; resets every delta chain."""
        all_tiles = np.ones((self._ty, self._tx), dtype=bool)
        regions = self._encode_tiles(pixels, all_tiles, force_intra=True)
        self._prev = pixels
        self._wave[:] = False
        self.frames_encoded += 1
        return regions

    def encode_frame(
        self,
        pixels: np.ndarray,
        frame_index: int,
        wave_budget_bytes: int = 1 << 30,
        resend_intra: np.ndarray | None = None,
    ) -> list[EncodedRegion]:
        """Regions for one frame: dirty tiles plus refresh/repair extras.

        ``resend_intra`` marks tiles whose last update never reached the
        client (deferred under rate pressure): they are re-encoded
        self-contained so the client canvas needs no missed state.
        """
        if self._prev is None:
            return self.encode_keyframe(pixels, frame_index)
        dirty = dirty_tile_mask(self._prev, pixels)
        self._history = ((self._history << 1) | dirty.astype(np.uint16)) & 0x3FF
        selected = dirty.copy()
        force_intra = np.zeros_like(dirty)
        if resend_intra is not None:
            selected |= resend_intra
            force_intra |= resend_intra
        self._select_wave_tiles(selected, force_intra, wave_budget_bytes)
        self._select_refresh_tiles(selected, force_intra, dirty)
        regions = self._encode_tiles(pixels, selected, force_intra=False, intra_mask=force_intra)
        self._prev = pixels
        self.frames_encoded += 1
        return regions

    # -- internals ------------------------------------------------------------------

    def _select_wave_tiles(self, selected, force_intra, budget_bytes) -> None:
        if not self._wave.any():
            return
        est_tile_bytes = 360
        quota = max(8, budget_bytes // est_tile_bytes)
        ys, xs = np.nonzero(self._wave)
        take = min(quota, len(ys))
        ys, xs = ys[:take], xs[:take]
        selected[ys, xs] = True
        force_intra[ys, xs] = True
        self._wave[ys, xs] = False

    def _select_refresh_tiles(self, selected, force_intra, dirty) -> None:
        if self._wave.any():
            return
        q_now = min(self.config.quality_natural, self.config.quality_motion)
        stale = (self._last_q <= q_now - _REFRESH_QUALITY_STEP) & (self._last_q != _LOSSLESS)
        stale &= ~selected
        if not stale.any():
            return
        ys, xs = np.nonzero(stale)
        ys, xs = ys[:_REFRESH_TILES_PER_FRAME], xs[:_REFRESH_TILES_PER_FRAME]
        selected[ys, xs] = True
        force_intra[ys, xs] = True

    def _classify_selected(self, pixels: np.ndarray, selected: np.ndarray) -> np.ndarray:
        """ContentClass per selected tile (int8 grid, -1 elsewhere)."""
        out = np.full((self._ty, self._tx), -1, dtype=np.int8)
        counts = _POPCOUNT[self._history]
        ys, xs = np.nonzero(selected)
        if len(ys) == 0:
            return out
        tiles = _padded_tiles(pixels)[ys, xs]  # (n, TILE*TILE*4)
        n = tiles.shape[0]
        colors = np.ascontiguousarray(tiles).reshape(n, -1, 4).view(np.uint32)[..., 0]
        s = np.sort(colors, axis=1)
        ndistinct = 1 + (np.diff(s, axis=1) != 0).sum(axis=1)
        cls = np.where(
            ndistinct <= SYNTHETIC_MAX_COLORS, ContentClass.SYNTHETIC, ContentClass.NATURAL
        )
        cls = np.where(counts[ys, xs] >= HIGH_MOTION_CHANGES, ContentClass.HIGH_MOTION, cls)
        out[ys, xs] = cls.astype(np.int8)
        return out

    def _encode_tiles(
        self,
        pixels: np.ndarray,
        selected: np.ndarray,
        force_intra: bool,
        intra_mask: np.ndarray | None = None,
    ) -> list[EncodedRegion]:
        classes = self._classify_selected(pixels, selected)
        interval = self.config.keyframe_interval_frames
        self._since_intra += 1
        h, w = self.height, self.width
        # row runs of equal (span, class, intra) first, then merge vertically
        runs: list[tuple[int, int, int, ContentClass, bool]] = []
        for row in range(self._ty):
            cols = np.nonzero(selected[row])[0]
            start = 0
            while start < len(cols):
                end = start + 1
                cls_val = classes[row, cols[start]]
                while (
                    end < len(cols)
                    and cols[end] == cols[end - 1] + 1
                    and classes[row, cols[end]] == cls_val
                ):
                    end += 1
                col0, col1 = int(cols[start]), int(cols[end - 1]) + 1
                cls = ContentClass(int(cls_val))
                intra = force_intra or (
                    intra_mask is not None and bool(intra_mask[row, col0:col1].any())
                )
                if cls is ContentClass.HIGH_MOTION and not intra:
                    intra = bool((self._since_intra[row, col0:col1] >= interval).any())
                runs.append((row, col0, col1, cls, intra))
                start = end
        regions: list[EncodedRegion] = []
        open_runs: dict[tuple, tuple[int, int]] = {}  # key -> (row0, row1)
        ordered: list[tuple[tuple, int, int]] = []

        def flush(key, rows):
            ordered.append((key, rows[0], rows[1]))

        for row, col0, col1, cls, intra in runs:
            key = (col0, col1, cls, intra)
            prev = open_runs.pop(key, None)
            if prev is not None and prev[1] == row - 1:
                open_runs[key] = (prev[0], row)
            else:
                if prev is not None:
                    flush(key, prev)
                open_runs[key] = (row, row)
        for key, rows in open_runs.items():
            flush(key, rows)
        ordered.sort(key=lambda item: (item[1], item[0][0]))
        for (col0, col1, cls, intra), row0, row1 in ordered:
            y0 = row0 * TILE
            rh = min((row1 + 1) * TILE, h) - y0
            for x0, rw in split_span(pixels, y0, rh, col0, col1, w, cls):
                regions.append(
                    self._encode_rect(pixels, x0, y0, rw, rh, cls, intra)
                )
        return regions

    def _encode_rect(self, pixels, x0, y0, rw, rh, cls, intra) -> EncodedRegion:
        row0, row1 = y0 // TILE, -(-(y0 + rh) // TILE)
        col0, col1 = x0 // TILE, -(-(x0 + rw) // TILE)
        rect = pixels[y0 : y0 + rh, x0 : x0 + rw]
        if cls is ContentClass.HIGH_MOTION:
            if intra:
                region, recon = encode_region(rect, x0, y0, cls, self.config, keyframe=True)
                self._since_intra[row0:row1, col0:col1] = 0
            else:
                ref = self.decoded[y0 : y0 + rh, x0 : x0 + rw]
                region, recon = encode_region(rect, x0, y0, cls, self.config, prev_decoded=ref)
        else:
            region, recon = encode_region(rect, x0, y0, cls, self.config, keyframe=intra)
        self.decoded[y0 : y0 + rh, x0 : x0 + rw] = recon
        self._last_q[row0:row1, col0:col1] = (
            _LOSSLESS if region.codec_id == 1 else region.quality
        )
        if region.codec_id != 3 or region.is_keyframe:
            # any self-contained encode repairs the tile, advancing the wave
            self._wave[row0:row1, col0:col1] = False
        return region


@dataclass
class AppliedRegion:
    frame_index: int
    rect: tuple
    at_ms: float


class StreamDecoder:
    """Client-side canvas: applies stream messages in arrival order.

    Region batches for one source frame are buffered and applied
    atomically (on the frame's marker, or when a newer frame's content
    arrives), so the canvas always jumps between frame-coherent states
    instead of tearing mid-update.
    """

    def __init__(self, width: int, height: int, log_regions: bool = False) -> None:
        self.canvas = np.zeros((height, width, 4), dtype=np.uint8)
        self.started = False
        self.last_keyframe_index = -1
        self.last_applied_frame = -1  # newest frame with content on the canvas
        self.presents: list[tuple[int, float]] = []  # (frame_index, at_ms)
        self._presented: set[int] = set()
        self.applied_regions: list[AppliedRegion] = []
        self.log_regions = log_regions
        self.keyframes_applied = 0
        self.bytes_applied = 0
        self._buffer_frame = -1
        self._buffered: list = []  # StreamMessage region batches for _buffer_frame

    def apply_message(self, data: bytes, now_ms: float) -> StreamMessage | None:
        try:
            msg = parse_message(data)
        except CorruptPayload:
            return None
        if msg.msg_type == MSG_KEYFRAME:
            self._flush(now_ms)
            for region in msg.regions:
                decode_region(region, self.canvas, prev_decoded=self.canvas)
                self._log(region, msg.frame_index, now_ms)
            self.started = True
            self.keyframes_applied += 1
            self.last_keyframe_index = msg.frame_index
            self.last_applied_frame = max(self.last_applied_frame, msg.frame_index)
            self._present(msg.frame_index, now_ms)
        elif msg.msg_type == MSG_REGIONS:
            if not self.started or msg.frame_index <= self.last_keyframe_index:
                return msg  # stale content from before the keyframe cut
            if msg.frame_index > self._buffer_frame:
                self._flush(now_ms)
                self._buffer_frame = msg.frame_index
            self._buffered.append(msg)
        elif msg.msg_type == MSG_FRAME_MARK:
            if self._buffer_frame >= 0 and msg.frame_index >= self._buffer_frame:
                self._flush(now_ms)
            if self.started:
                self._present(msg.frame_index, now_ms)
        return msg

    def _flush(self, now_ms: float) -> None:
        for msg in self._buffered:
            if msg.frame_index <= self.last_keyframe_index:
                continue
            for region in msg.regions:
                decode_region(region, self.canvas, prev_decoded=self.canvas)
                self._log(region, msg.frame_index, now_ms)
                self.bytes_applied += len(region.payload)
            self.last_applied_frame = max(self.last_applied_frame, msg.frame_index)
        self._buffered = []
        self._buffer_frame = -1

    def _present(self, frame_index: int, now_ms: float) -> None:
        if frame_index in self._presented:
            return
        self._presented.add(frame_index)
        self.presents.append((frame_index, now_ms))

    def _log(self, region: EncodedRegion, frame_index: int, now_ms: float) -> None:
        if self.log_regions:
            self.applied_regions.append(
                AppliedRegion(frame_index, (region.x, region.y, region.w, region.h), now_ms)
            )
