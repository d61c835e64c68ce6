import pytest
from hypothesis import given, strategies as st

from sandstream.errors import BadMagic, BadVersion, LengthMismatch, PayloadTooLarge
from sandstream.transport import (
    FLAG_KEYFRAME,
    HEADER_SIZE,
    MAX_PAYLOAD,
    Channel,
    frame_pack,
    frame_unpack,
)

GOLDEN = bytes.fromhex("A5010202" "00000001" "00000000" "000003E8" "0002" "4142")


def test_golden_bytes():
    packed = frame_pack(Channel.VIDEO, FLAG_KEYFRAME, 1, 0, 1000, b"AB")
    assert packed == GOLDEN


def test_golden_unpack():
    frame = frame_unpack(GOLDEN)
    assert frame.channel == Channel.VIDEO
    assert frame.keyframe and not frame.reliable and not frame.is_ack
    assert frame.seq == 1
    assert frame.ack == 0
    assert frame.timestamp_ms == 1000
    assert frame.payload == b"AB"


def test_header_is_18_bytes():
    assert HEADER_SIZE == 18
    assert len(frame_pack(0, 0, 0, 0, 0, b"")) == 18


def test_payload_too_large():
    frame_pack(0, 0, 0, 0, 0, b"x" * MAX_PAYLOAD)
    with pytest.raises(PayloadTooLarge):
        frame_pack(0, 0, 0, 0, 0, b"x" * 2000)


def test_bad_magic():
    with pytest.raises(BadMagic):
        frame_unpack(b"\x00" + GOLDEN[1:])


def test_bad_version():
    with pytest.raises(BadVersion):
        frame_unpack(GOLDEN[:1] + b"\x07" + GOLDEN[2:])


def test_length_mismatch():
    bad = bytearray(frame_pack(0, 0, 0, 0, 0, b"abc"))
    bad[16:18] = (5).to_bytes(2, "big")  # declares 5, carries 3
    with pytest.raises(LengthMismatch):
        frame_unpack(bytes(bad))
    with pytest.raises(LengthMismatch):
        frame_unpack(b"\xa5\x01")


@given(
    channel=st.integers(0, 255),
    flags=st.integers(0, 255),
    seq=st.integers(0, 2**32 - 1),
    ack=st.integers(0, 2**32 - 1),
    ts=st.integers(0, 2**32 - 1),
    payload=st.binary(max_size=MAX_PAYLOAD),
)
def test_round_trip(channel, flags, seq, ack, ts, payload):
    frame = frame_unpack(frame_pack(channel, flags, seq, ack, ts, payload))
    assert (frame.channel, frame.flags, frame.seq, frame.ack, frame.timestamp_ms) == (
        channel,
        flags,
        seq,
        ack,
        ts,
    )
    assert frame.payload == payload


def test_ten_thousand_random_round_trips():
    import random

    rng = random.Random(7)
    for _ in range(10_000):
        payload = rng.randbytes(rng.randrange(0, 64))
        args = (
            rng.randrange(4),
            rng.randrange(16),
            rng.randrange(2**32),
            rng.randrange(2**32),
            rng.randrange(2**32),
            payload,
        )
        frame = frame_unpack(frame_pack(*args))
        assert frame.payload == payload
        assert frame.seq == args[2]
