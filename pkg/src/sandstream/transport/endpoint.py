"""Multi-channel transport endpoint over a single datagram link.

One endpoint owns the send and receive state for all four channels.  The
caller shuttles raw datagrams between two endpoints (directly, over the
network emulator, or over a websocket bridge) and drives time explicitly:

    ep.send_message(channel, data, now_ms)
    datagrams = ep.poll(now_ms)            # paced, priority-ordered
    deliveries = ep.on_datagram(raw, now_ms)

Messages of arbitrary size are split into fragments, each carried in one
wire frame.  Fragments of a message occupy consecutive sequence numbers
and are never interleaved with other messages on the same channel, so the
receiver reassembles from the in-order frame stream alone.

Reliability is per frame (flag bit0): reliable frames are retained and
retransmitted on timeout until acked; Control and Input channels are
reliable by default, Video and Metrics are not.  Receivers report per
channel window statistics (bytes, received/expected counts, timestamp
echo) in standalone ack frames every 50 ms; the sender feeds those into
the bandwidth estimator and the loss-threshold congestion controller.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field, replace

from ..errors import ConnectionClosed, PayloadTooLarge, QueueOverflow
from .rate import (
    RATE_FLOOR_BPS,
    WINDOW_MS,
    AckWindowEvent,
    BandwidthEstimate,
    congestion_update,
    estimate_bandwidth,
)
from .wire import (
    CHANNEL_PRIORITY,
    FLAG_ACK,
    FLAG_KEYFRAME,
    FLAG_KEYFRAME_REQUEST,
    FLAG_RELIABLE,
    MAX_PAYLOAD,
    Channel,
    WireFrame,
    frame_pack,
    frame_unpack,
    is_reliable_channel,
)

_FRAG_HEADER = struct.Struct(">IHH")  # msg_id, frag_index, frag_count
FRAG_CHUNK = MAX_PAYLOAD - _FRAG_HEADER.size

# Receiver report payload carried in standalone ack frames.
_ACK_REPORT = struct.Struct(">IHHIH")  # bytes, received, expected, echo_ts, hold_ms

_U32 = 0xFFFFFFFF


@dataclass
class EndpointConfig:
    initial_rate_bps: float = 8_000_000.0
    queue_cap: int = 1024
    max_attempts: int = 10
    ack_interval_ms: float = 50.0
    jitter_depth_ms: float = 50.0
    congestion_interval_ms: float = 100.0
    frame_interval_ms: float = 50.0
    gap_intervals: float = 2.0
    keyframe_request_cooldown_ms: float = 3000.0
    video_backlog_ms: float = 2000.0


@dataclass(frozen=True)
class Delivery:
    channel: int
    data: bytes
    keyframe: bool = False


@dataclass
class _QueuedMessage:
    msg_id: int
    chunks: list[bytes]
    next_chunk: int = 0
    keyframe: bool = False
    reliable: bool = False
    marker: bool = False
    group: int = 0  # app grouping key used by the backlog eviction policy

    @property
    def started(self) -> bool:
        return self.next_chunk > 0

    def pending_bytes(self) -> int:
        return sum(len(c) for c in self.chunks[self.next_chunk :])


@dataclass
class _Inflight:
    datagram: bytes
    due_ms: float
    rto_ms: float
    attempts: int


class JitterBuffer:
    """Orders unreliable video frames by seq, holding each at most
    ``target_depth_ms`` beyond arrival before gaps are skipped."""

    def __init__(self, target_depth_ms: float = 50.0) -> None:
        self.target_depth_ms = target_depth_ms
        self._buffered: dict[int, tuple[WireFrame, float]] = {}
        self._horizon: int | None = None  # next seq to release

    def insert(self, frame: WireFrame, now_ms: float) -> list[WireFrame]:
        if self._horizon is None:
            self._horizon = frame.seq
        if frame.seq < self._horizon or frame.seq in self._buffered:
            return []  # late or duplicate
        self._buffered[frame.seq] = (frame, now_ms + self.target_depth_ms)
        return self._release_contiguous()

    def poll(self, now_ms: float) -> tuple[list[WireFrame], list[int]]:
        """Force-release past-deadline frames; returns (frames, skipped seqs)."""
        released: list[WireFrame] = []
        skipped: list[int] = []
        while self._buffered:
            oldest = min(self._buffered)
            if self._horizon is not None and oldest == self._horizon:
                released.extend(self._release_contiguous())
                continue
            _, deadline = self._buffered[oldest]
            if deadline > now_ms:
                break
            assert self._horizon is not None
            skipped.extend(range(self._horizon, oldest))
            self._horizon = oldest
            released.extend(self._release_contiguous())
        return released, skipped

    def _release_contiguous(self) -> list[WireFrame]:
        out: list[WireFrame] = []
        while self._horizon in self._buffered:
            frame, _ = self._buffered.pop(self._horizon)
            out.append(frame)
            self._horizon += 1
        return out


class _ChannelSend:
    def __init__(self) -> None:
        self.queue: deque[_QueuedMessage] = deque()
        self.next_seq = 1
        self.next_msg_id = 1
        self.inflight: dict[int, _Inflight] = {}


class _ChannelRecv:
    def __init__(self) -> None:
        self.expected = 1  # reliable: next contiguous seq
        self.ooo: dict[int, WireFrame] = {}
        self.highest_seen = 0
        self.last_delivered_unreliable = 0
        # reassembly of the in-order frame stream
        self.partial_id: int | None = None
        self.partial_parts: list[bytes] = []
        self.partial_count = 0
        self.partial_keyframe = False
        # receiver report accounting since the last standalone ack
        self.window_bytes = 0
        self.window_received = 0
        self.window_base_seq = 0
        self.last_ack_sent_ms = -1e18
        self.last_data_ts: int | None = None
        self.last_data_arrival = 0.0
        self.had_traffic = False


class Endpoint:
    def __init__(self, config: EndpointConfig | None = None) -> None:
        self.config = config or EndpointConfig()
        self.closed = False
        self._send: dict[int, _ChannelSend] = {c: _ChannelSend() for c in Channel}
        self._recv: dict[int, _ChannelRecv] = {c: _ChannelRecv() for c in Channel}
        self._jitter = JitterBuffer(self.config.jitter_depth_ms)
        self._gap_observed: dict[int, float] = {}  # missing video seq -> first seen
        self._lost_unresolved: dict[int, float] = {}
        self._last_keyframe_request_ms = -1e18
        self._keyframe_requested_by_peer = False
        self._pending_request_frame = False
        # pacing
        self.send_rate_bps = self.config.initial_rate_bps
        self.estimate = BandwidthEstimate(
            rate_bps=self.config.initial_rate_bps, loss_rate=0.0, rtt_ms=100.0
        )
        self._tokens = 4096.0
        self._last_refill_ms: float | None = None
        self._ack_events: deque[tuple[float, AckWindowEvent]] = deque()
        self._first_report_ms: float | None = None
        self._last_congestion_ms = 0.0
        self._link_limited = False  # pacing denied data since last update?
        self._busy_history: deque[bool] = deque(maxlen=10)
        # counters for tests / stats overlays
        self.corrupt_frames = 0
        self.bytes_sent = 0
        self.bytes_received = 0

    # -- sending ------------------------------------------------------------

    def send_message(
        self,
        channel: int,
        data: bytes,
        now_ms: float,
        *,
        keyframe: bool = False,
        reliable: bool | None = None,
        marker: bool = False,
        group: int = 0,
    ) -> None:
        if self.closed:
            raise ConnectionClosed("endpoint closed")
        ch = self._send[channel]
        if len(ch.queue) >= self.config.queue_cap:
            self._make_room(channel, ch)
        chunks = [data[i : i + FRAG_CHUNK] for i in range(0, len(data), FRAG_CHUNK)] or [b""]
        if len(chunks) > 0xFFFF:
            raise PayloadTooLarge("message exceeds fragment limit")
        msg = _QueuedMessage(
            msg_id=ch.next_msg_id & _U32,
            chunks=[
                _FRAG_HEADER.pack(ch.next_msg_id & _U32, i, len(chunks)) + c
                for i, c in enumerate(chunks)
            ],
            keyframe=keyframe,
            reliable=is_reliable_channel(channel) if reliable is None else reliable,
            marker=marker,
            group=group,
        )
        ch.next_msg_id += 1
        ch.queue.append(msg)

    def _make_room(self, channel: int, ch: _ChannelSend) -> None:
        if channel == Channel.VIDEO:
            # Oldest unsent non-keyframe goes first; keyframes are retained.
            for msg in list(ch.queue):
                if not msg.keyframe and not msg.started:
                    ch.queue.remove(msg)
                    return
        raise QueueOverflow(f"channel {channel} queue full")

    def evict_video_backlog(self, *, keep_group: int) -> int:
        """Drop queued non-marker, non-keyframe video messages from older
        groups (frames); returns the number evicted.  Used by the encoder to
        keep stale region payloads from delaying fresher content."""
        ch = self._send[Channel.VIDEO]
        stale = [
            m
            for m in ch.queue
            if m.group < keep_group and not m.keyframe and not m.marker and not m.started
        ]
        for m in stale:
            ch.queue.remove(m)
        return len(stale)

    def video_backlog_bytes(self) -> int:
        return sum(m.pending_bytes() for m in self._send[Channel.VIDEO].queue)

    def request_keyframe(self) -> None:
        """Queue an explicit keyframe-request frame (sent on next poll)."""
        self._pending_request_frame = True

    def take_keyframe_requested(self) -> bool:
        """True once per peer keyframe-request received (sender side)."""
        was = self._keyframe_requested_by_peer
        self._keyframe_requested_by_peer = False
        return was

    def poll(self, now_ms: float) -> list[bytes]:
        """Advance timers and return datagrams ready to transmit."""
        if self.closed:
            return []
        out: list[bytes] = []
        self._refill(now_ms)
        self._check_congestion(now_ms)

        # keyframe-request control frames (tiny, unpaced)
        self._check_video_gaps(now_ms)
        if self._pending_request_frame:
            self._pending_request_frame = False
            frame = frame_pack(
                Channel.VIDEO,
                FLAG_KEYFRAME_REQUEST,
                0,
                self._ack_value(Channel.VIDEO),
                int(now_ms),
                b"",
            )
            out.append(frame)
            self.bytes_sent += len(frame)

        # standalone acks (paced lightly: they ride ahead of data)
        for channel in Channel:
            ack = self._maybe_standalone_ack(channel, now_ms)
            if ack is not None:
                out.append(ack)
                self.bytes_sent += len(ack)

        # retransmissions first, then fresh data, strictly by priority
        for channel in CHANNEL_PRIORITY:
            ch = self._send[channel]
            for seq in sorted(ch.inflight):
                item = ch.inflight[seq]
                if item.due_ms > now_ms:
                    continue
                if item.attempts >= self.config.max_attempts:
                    self.closed = True
                    return out
                if not self._take_tokens(len(item.datagram)):
                    return out
                item.attempts += 1
                item.rto_ms *= 2
                item.due_ms = now_ms + item.rto_ms
                # refresh timestamp and ack so receivers echo the actual
                # transmit time (stale echoes would poison the rtt estimate)
                patched = bytearray(item.datagram)
                struct.pack_into(
                    ">II", patched, 8, self._ack_value(channel), int(now_ms) & _U32
                )
                item.datagram = bytes(patched)
                out.append(item.datagram)
                self.bytes_sent += len(item.datagram)
        for channel in CHANNEL_PRIORITY:
            ch = self._send[channel]
            while ch.queue:
                msg = ch.queue[0]
                chunk = msg.chunks[msg.next_chunk]
                size = len(chunk) + 18
                if not self._take_tokens(size):
                    return out
                flags = 0
                if msg.reliable:
                    flags |= FLAG_RELIABLE
                if msg.keyframe:
                    flags |= FLAG_KEYFRAME
                seq = ch.next_seq
                ch.next_seq += 1
                datagram = frame_pack(
                    channel, flags, seq, self._ack_value(channel), int(now_ms), chunk
                )
                if msg.reliable:
                    rto = max(2.0 * self.estimate.rtt_ms, 200.0)
                    ch.inflight[seq] = _Inflight(
                        datagram=datagram, due_ms=now_ms + rto, rto_ms=rto, attempts=1
                    )
                out.append(datagram)
                self.bytes_sent += len(datagram)
                msg.next_chunk += 1
                if msg.next_chunk == len(msg.chunks):
                    ch.queue.popleft()
        return out

    def _refill(self, now_ms: float) -> None:
        if self._last_refill_ms is None:
            self._last_refill_ms = now_ms
            return
        dt = max(0.0, now_ms - self._last_refill_ms)
        self._last_refill_ms = now_ms
        burst = max(self.send_rate_bps * 0.05 / 8.0, 2400.0)
        self._tokens = min(burst, self._tokens + dt * self.send_rate_bps / 8000.0)

    def _take_tokens(self, nbytes: int) -> bool:
        if self._tokens < nbytes:
            self._link_limited = True
            return False
        self._tokens -= nbytes
        return True

    def _check_congestion(self, now_ms: float) -> None:
        if now_ms - self._last_congestion_ms < self.config.congestion_interval_ms:
            return
        self._last_congestion_ms = now_ms
        while self._ack_events and self._ack_events[0][0] < now_ms - WINDOW_MS:
            self._ack_events.popleft()
        # sliding 1 s window, refreshed at the congestion cadence; hold the
        # prior until reports have covered a full window, else the first
        # partial samples would read as a rate collapse
        self._busy_history.append(self._link_limited)
        self._link_limited = False
        if self._first_report_ms is not None and now_ms - self._first_report_ms >= WINDOW_MS:
            events = [e for _, e in self._ack_events]
            updated = estimate_bandwidth(self.estimate, events)
            if sum(self._busy_history) < 8:
                # not saturated for (almost) the whole window: the throughput
                # sample measures demand, not capacity, so keep the prior
                # rate estimate (loss and rtt still update)
                updated = replace(updated, rate_bps=self.estimate.rate_bps)
            self.estimate = updated
        self.send_rate_bps = congestion_update(self.estimate, self.send_rate_bps)

    # -- receiving ----------------------------------------------------------

    def on_datagram(self, data: bytes, now_ms: float) -> list[Delivery]:
        """Process one received datagram; corrupt input is counted, never raised."""
        if self.closed:
            return []
        try:
            frame = frame_unpack(data)
        except Exception:
            self.corrupt_frames += 1
            return []
        self.bytes_received += len(data)
        if frame.channel not in self._recv:
            self.corrupt_frames += 1
            return []

        if frame.keyframe_request:
            self._keyframe_requested_by_peer = True
            return []

        self._process_ack_field(frame)
        if frame.is_ack:
            self._process_ack_report(frame, now_ms)
            return []

        rc = self._recv[frame.channel]
        rc.had_traffic = True
        rc.window_bytes += len(data)
        rc.window_received += 1
        rc.highest_seen = max(rc.highest_seen, frame.seq)
        rc.last_data_ts = frame.timestamp_ms
        rc.last_data_arrival = now_ms

        if is_reliable_channel(frame.channel):
            return self._receive_reliable(frame)
        if frame.channel == Channel.VIDEO:
            self._observe_gaps_before(frame.seq, now_ms)
            deliveries: list[Delivery] = []
            for released in self._jitter.insert(frame, now_ms):
                self._gap_observed.pop(released.seq, None)
                deliveries.extend(self._reassemble(released))
            return deliveries
        # metrics: at-most-once, drop anything not newer
        if frame.seq <= rc.last_delivered_unreliable:
            return []
        rc.last_delivered_unreliable = frame.seq
        return self._reassemble(frame)

    def poll_receive(self, now_ms: float) -> list[Delivery]:
        """Release video frames whose jitter deadline has passed."""
        released, skipped = self._jitter.poll(now_ms)
        for seq in skipped:
            observed = self._gap_observed.pop(seq, now_ms)
            self._lost_unresolved[seq] = observed
        out: list[Delivery] = []
        for frame in released:
            out.extend(self._reassemble(frame))
        return out

    def _receive_reliable(self, frame: WireFrame) -> list[Delivery]:
        rc = self._recv[frame.channel]
        if frame.seq < rc.expected or frame.seq in rc.ooo:
            return []  # duplicate
        rc.ooo[frame.seq] = frame
        out: list[Delivery] = []
        while rc.expected in rc.ooo:
            out.extend(self._reassemble(rc.ooo.pop(rc.expected)))
            rc.expected += 1
        return out

    def _observe_gaps_before(self, seq: int, now_ms: float) -> None:
        horizon = self._jitter._horizon
        if horizon is None:
            return
        for missing in range(horizon, seq):
            if missing not in self._jitter._buffered:
                self._gap_observed.setdefault(missing, now_ms)

    def _check_video_gaps(self, now_ms: float) -> None:
        gap_age = self.config.gap_intervals * self.config.frame_interval_ms
        stale = [s for s, t in self._gap_observed.items() if now_ms - t >= gap_age]
        overdue = stale or [
            s for s, t in self._lost_unresolved.items() if now_ms - t >= gap_age
        ]
        if not overdue:
            return
        if now_ms - self._last_keyframe_request_ms < self.config.keyframe_request_cooldown_ms:
            return
        self._last_keyframe_request_ms = now_ms
        self._lost_unresolved.clear()
        self._pending_request_frame = True

    def _reassemble(self, frame: WireFrame) -> list[Delivery]:
        rc = self._recv[frame.channel]
        payload = frame.payload
        if len(payload) < _FRAG_HEADER.size:
            self.corrupt_frames += 1
            return []
        msg_id, index, count = _FRAG_HEADER.unpack_from(payload)
        chunk = payload[_FRAG_HEADER.size :]
        if index == 0:
            rc.partial_id = msg_id
            rc.partial_parts = [chunk]
            rc.partial_count = count
            rc.partial_keyframe = frame.keyframe
        else:
            if rc.partial_id != msg_id or index != len(rc.partial_parts):
                rc.partial_id = None  # fragment stream broken; drop the partial
                rc.partial_parts = []
                return []
            rc.partial_parts.append(chunk)
        if rc.partial_id is not None and len(rc.partial_parts) == rc.partial_count:
            data = b"".join(rc.partial_parts)
            keyframe = rc.partial_keyframe
            rc.partial_id = None
            rc.partial_parts = []
            return [Delivery(channel=frame.channel, data=data, keyframe=keyframe)]
        return []

    # -- acks ---------------------------------------------------------------

    def _ack_value(self, channel: int) -> int:
        rc = self._recv[channel]
        if is_reliable_channel(channel):
            return rc.expected - 1
        return rc.highest_seen

    def _process_ack_field(self, frame: WireFrame) -> None:
        ch = self._send[frame.channel]
        if not ch.inflight:
            return
        for seq in [s for s in ch.inflight if s <= frame.ack]:
            del ch.inflight[seq]

    def _process_ack_report(self, frame: WireFrame, now_ms: float) -> None:
        if len(frame.payload) != _ACK_REPORT.size:
            return
        nbytes, received, expected, echo_ts, hold_ms = _ACK_REPORT.unpack(frame.payload)
        rtt = None
        if echo_ts or hold_ms:
            rtt = max(0.0, ((int(now_ms) - echo_ts) & _U32) - hold_ms)
            if rtt > 60_000:  # wrapped or nonsense sample
                rtt = None
        if self._first_report_ms is None:
            self._first_report_ms = now_ms
        self._ack_events.append(
            (
                now_ms,
                AckWindowEvent(
                    acked_bytes=nbytes,
                    received=received,
                    expected=expected,
                    rtt_sample_ms=rtt,
                ),
            )
        )

    def _maybe_standalone_ack(self, channel: int, now_ms: float) -> bytes | None:
        rc = self._recv[channel]
        if not rc.had_traffic:
            return None
        if now_ms - rc.last_ack_sent_ms < self.config.ack_interval_ms:
            return None
        rc.last_ack_sent_ms = now_ms
        expected = max(0, rc.highest_seen - rc.window_base_seq)
        report = _ACK_REPORT.pack(
            rc.window_bytes & _U32,
            min(rc.window_received, 0xFFFF),
            min(expected, 0xFFFF),
            (rc.last_data_ts or 0) & _U32,
            min(0xFFFF, int(now_ms - rc.last_data_arrival)) if rc.last_data_ts is not None else 0,
        )
        rc.window_bytes = 0
        rc.window_received = 0
        rc.window_base_seq = rc.highest_seen
        rc.had_traffic = False
        return frame_pack(
            channel, FLAG_ACK, 0, self._ack_value(channel), int(now_ms), report
        )
