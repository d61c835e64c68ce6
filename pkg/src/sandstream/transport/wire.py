"""Byte-exact wire framing for the stream transport.

Every datagram on the link is exactly one frame:

    magic        u8   0xA5
    version      u8   0x01
    channel      u8
    flags        u8   bit0 reliable, bit1 keyframe, bit2 is-ack, bit3 keyframe-request
    seq          u32
    ack          u32  highest contiguous seq received on this channel
    timestamp_ms u32  sender clock, wrapping
    payload_len  u16
    payload      bytes

All multi-byte fields are big-endian; the header is exactly 18 bytes and a
whole datagram never exceeds the 1200-byte budget.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from ..errors import BadMagic, BadVersion, LengthMismatch, PayloadTooLarge

MAGIC = 0xA5
VERSION = 0x01

FLAG_RELIABLE = 0x01
FLAG_KEYFRAME = 0x02
FLAG_ACK = 0x04
FLAG_KEYFRAME_REQUEST = 0x08

_HEADER = struct.Struct(">BBBBIIIH")
HEADER_SIZE = _HEADER.size  # 18
DATAGRAM_BUDGET = 1200
MAX_PAYLOAD = DATAGRAM_BUDGET - HEADER_SIZE  # 1182

_U32 = 0xFFFFFFFF


class Channel(enum.IntEnum):
    CONTROL = 0
    INPUT = 1
    VIDEO = 2
    METRICS = 3


# Drain order for the sender: input beats control beats media beats telemetry.
CHANNEL_PRIORITY = (Channel.INPUT, Channel.CONTROL, Channel.VIDEO, Channel.METRICS)

_RELIABLE = frozenset({Channel.CONTROL, Channel.INPUT})


def is_reliable_channel(channel: int) -> bool:
    return channel in _RELIABLE


@dataclass(frozen=True)
class WireFrame:
    channel: int
    flags: int
    seq: int
    ack: int
    timestamp_ms: int
    payload: bytes

    @property
    def reliable(self) -> bool:
        return bool(self.flags & FLAG_RELIABLE)

    @property
    def keyframe(self) -> bool:
        return bool(self.flags & FLAG_KEYFRAME)

    @property
    def is_ack(self) -> bool:
        return bool(self.flags & FLAG_ACK)

    @property
    def keyframe_request(self) -> bool:
        return bool(self.flags & FLAG_KEYFRAME_REQUEST)


def frame_pack(
    channel: int,
    flags: int,
    seq: int,
    ack: int,
    timestamp_ms: int,
    payload: bytes,
) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload {len(payload)} exceeds {MAX_PAYLOAD} bytes")
    return (
        _HEADER.pack(
            MAGIC,
            VERSION,
            channel & 0xFF,
            flags & 0xFF,
            seq & _U32,
            ack & _U32,
            int(timestamp_ms) & _U32,
            len(payload),
        )
        + payload
    )


def frame_unpack(data: bytes) -> WireFrame:
    if len(data) < HEADER_SIZE:
        raise LengthMismatch(f"frame shorter than header: {len(data)} bytes")
    magic, version, channel, flags, seq, ack, ts, payload_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic 0x{magic:02X}")
    if version != VERSION:
        raise BadVersion(f"unsupported version 0x{version:02X}")
    if len(data) != HEADER_SIZE + payload_len:
        raise LengthMismatch(
            f"declared payload {payload_len}, got {len(data) - HEADER_SIZE}"
        )
    return WireFrame(
        channel=channel,
        flags=flags,
        seq=seq,
        ack=ack,
        timestamp_ms=ts,
        payload=data[HEADER_SIZE:],
    )
