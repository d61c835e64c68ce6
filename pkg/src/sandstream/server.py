"""TCP control-plane server and websocket stream bridge.

One listening socket serves both planes: connections beginning with an
HTTP ``GET`` upgrade to a websocket stream bridge (one binary message per
wire frame); anything else is treated as line-delimited JSON requests
against the gateway.  Malformed input yields an error response on the
same connection, never a dropped connection or a crashed service.

Each streaming session runs one wall-clock loop that renders the scene at
its target fps, encodes dirty regions once, and fans the messages out to
every attached viewer's transport endpoint.  An optional network-emulation
preset (``--net-preset``) shapes bridge traffic through the same emulator
the benchmark harness uses, which makes protocol behaviour demonstrable
from a browser.
"""

from __future__ import annotations

import heapq
import json
import socket
import threading
from dataclasses import dataclass
from urllib.parse import parse_qs, urlsplit

from . import ws
from .clock import WallClock
from .codec.config import ControllerMode, EncoderConfig, adapt_quality
from .codec.engine import (
    MSG_CONTROL_JSON,
    MSG_INPUT_JSON,
    MSG_METRICS_JSON,
    MSG_KEYFRAME,
    StreamEncoder,
    batch_region_messages,
    pack_json,
    pack_marker,
    pack_regions,
    parse_message,
)
from .codec.tiles import TILE, tile_counts
from .env.events import InputEvent, InputSource
from .errors import BindFailure, SandstreamError
from .gateway import Gateway, _control_state_obj
from .netsim import DOWNSTREAM, UPSTREAM, Deliver, NetEmulator, preset
from .session import ControlMode, SessionRegistry, SessionState
from .transport import Channel, Endpoint, EndpointConfig

import numpy as np

_MAX_LINE = 1 << 20


@dataclass
class ServerConfig:
    max_sessions: int = 64
    net_preset: str | None = None  # emulate link conditions on the bridge
    seed: int = 0


class _Viewer:
    def __init__(self, sock: socket.socket, endpoint: Endpoint, emulator: NetEmulator | None):
        self.sock = sock
        self.endpoint = endpoint
        self.emulator = emulator
        self.reader = ws.FrameReader()
        self.delayed: list[tuple[float, int, bytes, str]] = []  # emulated in-flight
        self._tiebreak = 0
        self.alive = True
        self.needs_keyframe = True

    def queue_datagram(self, datagram: bytes, now_ms: float) -> None:
        if self.emulator is None:
            self._ws_send(datagram)
            return
        res = self.emulator.apply(len(datagram), DOWNSTREAM, now_ms)
        if isinstance(res, Deliver):
            self._tiebreak += 1
            heapq.heappush(self.delayed, (res.at_ms, self._tiebreak, datagram, "out"))

    def queue_incoming(self, datagram: bytes, now_ms: float) -> bytes | None:
        if self.emulator is None:
            return datagram
        res = self.emulator.apply(len(datagram), UPSTREAM, now_ms)
        if isinstance(res, Deliver):
            self._tiebreak += 1
            heapq.heappush(self.delayed, (res.at_ms, self._tiebreak, datagram, "in"))
        return None

    def flush_delayed(self, now_ms: float) -> list[bytes]:
        incoming = []
        while self.delayed and self.delayed[0][0] <= now_ms:
            _, _, datagram, direction = heapq.heappop(self.delayed)
            if direction == "out":
                self._ws_send(datagram)
            else:
                incoming.append(datagram)
        return incoming

    def _ws_send(self, datagram: bytes) -> None:
        try:
            self.sock.sendall(ws.encode_frame(ws.OP_BINARY, datagram))
        except OSError:
            self.alive = False


class _SessionStreamer(threading.Thread):
    def __init__(self, server: "StreamServer", session) -> None:
        super().__init__(name=f"stream-{session.id}", daemon=True)
        self.server = server
        self.session = session
        self.viewers: list[_Viewer] = []
        self.lock = threading.Lock()
        scene = session.scene
        self.encoder = StreamEncoder(
            scene.width,
            scene.height,
            EncoderConfig(controller_mode=ControllerMode.HUMAN, target_fps=scene.target_fps),
        )
        tx, ty = tile_counts(scene.width, scene.height)
        self.resend_mask = np.zeros((ty, tx), dtype=bool)
        self.stop_event = threading.Event()
        self.frame_index = 0
        self._last_controller = None
        self._last_stats_ms = 0.0

    def add_viewer(self, viewer: _Viewer) -> None:
        with self.lock:
            self.viewers.append(viewer)
            viewer.needs_keyframe = True

    def run(self) -> None:
        clock = self.server.registry.clock
        scene = self.session.scene
        interval = 1000.0 / scene.target_fps
        next_frame = clock.now_ms()
        while not self.stop_event.is_set():
            now = clock.now_ms()
            if self.session.state is not SessionState.ACTIVE:
                self._broadcast_json(
                    Channel.CONTROL, {"type": "terminated", "session_id": self.session.id}, now
                )
                self._pump(now)
                break
            if now >= next_frame:
                self._frame_tick(now)
                next_frame += interval
                if now - next_frame > 5 * interval:  # fell behind badly
                    next_frame = now + interval
            self._pump(now)
            self._broadcast_control_changes(now)
            if now - self._last_stats_ms >= 1000.0:
                self._last_stats_ms = now
                self._broadcast_stats(now)
            self.stop_event.wait(0.005)
        self.server._drop_streamer(self.session.id)

    # -- per-tick work ---------------------------------------------------------

    def _frame_tick(self, now: float) -> None:
        t_session = now - self.session.created_at
        try:
            fb = self.session.render_frame(t_session)
        except SandstreamError:
            return
        with self.lock:
            viewers = list(self.viewers)
            wants_key = any(v.needs_keyframe for v in viewers)
        if not viewers:
            return
        for viewer in viewers:
            if viewer.endpoint.take_keyframe_requested():
                self.encoder.start_intra_wave()
        fi = self.frame_index
        self.frame_index += 1
        if wants_key or self.encoder.frames_encoded == 0:
            regions = self.encoder.encode_keyframe(fb.pixels, fi)
            bundle = pack_regions(MSG_KEYFRAME, fi, regions)
            for viewer in viewers:
                viewer.endpoint.send_message(Channel.CONTROL, bundle, now, keyframe=True)
                viewer.needs_keyframe = False
            return
        rate = min((v.endpoint.send_rate_bps for v in viewers), default=1e6)
        interval = 1000.0 / self.session.scene.target_fps
        pending = self.resend_mask.copy()
        self.resend_mask[:] = False
        regions = self.encoder.encode_frame(
            fb.pixels,
            fi,
            wave_budget_bytes=max(2048, int(rate * interval / 16000.0)),
            resend_intra=pending,
        )
        est = adapt_quality(
            type(viewers[0].endpoint.estimate)(
                rate_bps=rate,
                loss_rate=viewers[0].endpoint.estimate.loss_rate,
                rtt_ms=viewers[0].endpoint.estimate.rtt_ms,
            ),
            self.encoder.config,
        )
        self.encoder.set_config(est)
        budget = max(16_384.0, rate * interval / 4000.0)
        kept = []
        room = budget - max(v.endpoint.video_backlog_bytes() for v in viewers)
        for region in regions:
            size = len(region.payload) + 16
            if room - size < 0 and kept:
                self.resend_mask[
                    region.y // TILE : -(-(region.y + region.h) // TILE),
                    region.x // TILE : -(-(region.x + region.w) // TILE),
                ] = True
            else:
                kept.append(region)
                room -= size
        messages = batch_region_messages(fi, kept)
        marker = pack_marker(fi)
        for viewer in viewers:
            try:
                for data in messages:
                    viewer.endpoint.send_message(Channel.VIDEO, data, now, group=fi)
                viewer.endpoint.send_message(Channel.INPUT, marker, now)
            except SandstreamError:
                viewer.alive = False

    def _pump(self, now: float) -> None:
        with self.lock:
            viewers = list(self.viewers)
        for viewer in viewers:
            if not viewer.alive or viewer.endpoint.closed:
                self._detach(viewer)
                continue
            for datagram in viewer.endpoint.poll(now):
                viewer.queue_datagram(datagram, now)
            for datagram in viewer.flush_delayed(now):
                self._deliver(viewer, datagram, now)
            try:
                data = viewer.sock.recv(65536, socket.MSG_DONTWAIT)
            except (BlockingIOError, InterruptedError):
                data = None
            except OSError:
                viewer.alive = False
                continue
            if data == b"":
                viewer.alive = False
                continue
            if data:
                for opcode, payload in viewer.reader.feed(data):
                    if opcode == ws.OP_CLOSE:
                        viewer.alive = False
                    elif opcode == ws.OP_PING:
                        try:
                            viewer.sock.sendall(ws.encode_frame(ws.OP_PONG, payload))
                        except OSError:
                            viewer.alive = False
                    elif opcode == ws.OP_BINARY:
                        routed = viewer.queue_incoming(payload, now)
                        if routed is not None:
                            self._deliver(viewer, routed, now)
            for delivery in viewer.endpoint.poll_receive(now):
                self._handle_delivery(viewer, delivery, now)

    def _deliver(self, viewer: _Viewer, datagram: bytes, now: float) -> None:
        for delivery in viewer.endpoint.on_datagram(datagram, now):
            self._handle_delivery(viewer, delivery, now)

    def _handle_delivery(self, viewer: _Viewer, delivery, now: float) -> None:
        try:
            msg = parse_message(delivery.data)
        except SandstreamError:
            return
        if msg.msg_type == MSG_INPUT_JSON and msg.obj is not None:
            try:
                event = InputEvent.from_json_obj(msg.obj)
            except (KeyError, ValueError):
                return
            # bridge input is always a human acting on the session
            event = InputEvent(
                kind=event.kind,
                source=InputSource.HUMAN,
                client_timestamp_ms=event.client_timestamp_ms,
                x=event.x,
                y=event.y,
                key=event.key,
                text=event.text,
            )
            try:
                self.session.inject_input(event)
            except SandstreamError as exc:
                self._send_json(
                    viewer,
                    Channel.CONTROL,
                    {"type": "error", "code": exc.code, "message": str(exc)},
                    now,
                )
        elif msg.msg_type == MSG_CONTROL_JSON and msg.obj is not None:
            self._handle_control(viewer, msg.obj, now)

    def _handle_control(self, viewer: _Viewer, obj: dict, now: float) -> None:
        kind = obj.get("type")
        actor = str(obj.get("actor") or "viewer")
        try:
            if kind in ("takeover", "accept_handoff"):
                state = self.session.request_takeover(actor)
            elif kind == "release":
                state = self.session.release_control(actor)
            else:
                self._send_json(
                    viewer,
                    Channel.CONTROL,
                    {"type": "error", "code": "bad_request", "message": f"unknown control {kind!r}"},
                    now,
                )
                return
        except SandstreamError as exc:
            self._send_json(
                viewer,
                Channel.CONTROL,
                {"type": "error", "code": exc.code, "message": str(exc)},
                now,
            )
            return
        self._broadcast_json(
            Channel.CONTROL,
            {"type": "control_state", **_control_state_obj(state)},
            now,
        )

    def _broadcast_control_changes(self, now: float) -> None:
        try:
            state = self.session.controller
        except SandstreamError:
            return
        key = (state.mode, state.holder, state.since_ms)
        if key == self._last_controller:
            return
        self._last_controller = key
        obj = {"type": "control_state", **_control_state_obj(state)}
        self._broadcast_json(Channel.CONTROL, obj, now)
        if state.mode is ControlMode.HANDOFF_PENDING:
            self._broadcast_json(
                Channel.CONTROL, {"type": "handoff_request", "reason": state.reason}, now
            )

    def _broadcast_stats(self, now: float) -> None:
        with self.lock:
            viewers = list(self.viewers)
        for viewer in viewers:
            est = viewer.endpoint.estimate
            self._send_json(
                viewer,
                Channel.METRICS,
                {
                    "type": "stats",
                    "loss": est.loss_rate,
                    "rtt_ms": est.rtt_ms,
                    "send_rate_bps": viewer.endpoint.send_rate_bps,
                    "controller": self._last_controller[0].value if self._last_controller else "",
                },
                now,
            )

    def _send_json(self, viewer: _Viewer, channel: int, obj: dict, now: float) -> None:
        try:
            viewer.endpoint.send_message(channel, pack_json(_json_type(channel), obj), now)
        except SandstreamError:
            viewer.alive = False

    def _broadcast_json(self, channel: int, obj: dict, now: float) -> None:
        with self.lock:
            viewers = list(self.viewers)
        for viewer in viewers:
            self._send_json(viewer, channel, obj, now)

    def _detach(self, viewer: _Viewer) -> None:
        with self.lock:
            if viewer in self.viewers:
                self.viewers.remove(viewer)
        try:
            viewer.sock.close()
        except OSError:
            pass


def _json_type(channel: int) -> int:
    return MSG_METRICS_JSON if channel == Channel.METRICS else MSG_CONTROL_JSON


class StreamServer:
    """serve() result: owns the listener, gateway, and session streamers."""

    def __init__(self, registry: SessionRegistry, config: ServerConfig | None = None):
        self.config = config or ServerConfig()
        self.registry = registry
        self.gateway = Gateway(registry)
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._streamers: dict[str, _SessionStreamer] = {}
        self._lock = threading.Lock()
        self._stopping = threading.Event()
        self.address: tuple[str, int] | None = None

    # -- lifecycle -----------------------------------------------------------------

    def start(self, bind_address: str) -> tuple[str, int]:
        host, _, port = bind_address.partition(":")
        try:
            listener = socket.create_server((host or "127.0.0.1", int(port or 0)))
        except OSError as exc:
            raise BindFailure(f"cannot bind {bind_address!r}: {exc}") from exc
        listener.settimeout(0.2)
        self._listener = listener
        self.address = listener.getsockname()[:2]
        acceptor = threading.Thread(target=self._accept_loop, daemon=True, name="accept")
        acceptor.start()
        self._threads.append(acceptor)
        return self.address

    def stop(self) -> None:
        self._stopping.set()
        for streamer in list(self._streamers.values()):
            streamer.stop_event.set()
        if self._listener is not None:
            self._listener.close()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            thread = threading.Thread(
                target=self._handle_connection, args=(conn,), daemon=True
            )
            thread.start()
            self._threads.append(thread)

    # -- connection handling ----------------------------------------------------------

    def _handle_connection(self, conn: socket.socket) -> None:
        try:
            conn.settimeout(10.0)
            first = conn.recv(4, socket.MSG_PEEK)
            if first.startswith(b"GET"):
                self._handle_websocket(conn)
            else:
                self._handle_json_lines(conn)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def _handle_json_lines(self, conn: socket.socket) -> None:
        conn.settimeout(None)
        buf = bytearray()
        while not self._stopping.is_set():
            idx = buf.find(b"\n")
            if idx < 0:
                if len(buf) > _MAX_LINE:
                    conn.sendall(_response_line({"id": None, "ok": False, "error": {
                        "code": "bad_request", "message": "line too long"}}))
                    buf.clear()
                try:
                    data = conn.recv(65536)
                except OSError:
                    return
                if not data:
                    return
                buf += data
                continue
            line = bytes(buf[:idx]).strip()
            del buf[: idx + 1]
            if not line:
                continue
            self.registry.tick()
            try:
                request = json.loads(line)
            except ValueError:
                conn.sendall(_response_line({"id": None, "ok": False, "error": {
                    "code": "bad_request", "message": "malformed json line"}}))
                continue
            response = self.gateway.handle(request)
            try:
                conn.sendall(_response_line(response))
            except OSError:
                return

    def _handle_websocket(self, conn: socket.socket) -> None:
        header = bytearray()
        while b"\r\n\r\n" not in header:
            data = conn.recv(4096)
            if not data:
                return
            header += data
            if len(header) > _MAX_LINE:
                return
        head, _, remainder = bytes(header).partition(b"\r\n\r\n")
        lines = head.decode("latin-1").split("\r\n")
        path = lines[0].split(" ")[1] if len(lines[0].split(" ")) > 1 else "/"
        fields = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            fields[name.strip().lower()] = value.strip()
        key = fields.get("sec-websocket-key")
        split = urlsplit(path)
        token = parse_qs(split.query).get("token", [""])[0]
        session_id = split.path.rsplit("/", 1)[-1]
        allowed, reason = self.registry.authorize(token, "stream")
        if key is None or not allowed or reason != session_id:
            conn.sendall(b"HTTP/1.1 403 Forbidden\r\n\r\n")
            return
        conn.sendall(ws.handshake_response(key))
        conn.settimeout(None)  # reads use MSG_DONTWAIT, writes block
        session = self.registry.get(session_id)
        emulator = None
        if self.config.net_preset:
            emulator = NetEmulator(preset(self.config.net_preset), self.config.seed)
        scene = session.scene
        viewer = _Viewer(
            conn,
            Endpoint(EndpointConfig(frame_interval_ms=1000.0 / scene.target_fps)),
            emulator,
        )
        if remainder:
            for opcode, payload in viewer.reader.feed(remainder):
                pass  # nothing meaningful can precede the first server frame
        streamer = self._streamer_for(session)
        streamer.add_viewer(viewer)
        # the streamer thread owns the socket from here on
        while viewer.alive and not self._stopping.is_set():
            if self._stopping.wait(0.25):
                break
            if session.state is not SessionState.ACTIVE:
                break

    def _streamer_for(self, session) -> _SessionStreamer:
        with self._lock:
            streamer = self._streamers.get(session.id)
            if streamer is None or not streamer.is_alive():
                streamer = _SessionStreamer(self, session)
                self._streamers[session.id] = streamer
                streamer.start()
            return streamer

    def _drop_streamer(self, session_id: str) -> None:
        with self._lock:
            self._streamers.pop(session_id, None)


def _response_line(obj: dict) -> bytes:
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode()


def serve(
    bind_address: str,
    config: ServerConfig | None = None,
    registry: SessionRegistry | None = None,
) -> StreamServer:
    """Start the service; returns the running handle (see StreamServer.stop)."""
    config = config or ServerConfig()
    if registry is None:
        registry = SessionRegistry(clock=WallClock(), max_sessions=config.max_sessions)
    server = StreamServer(registry, config)
    server.start(bind_address)
    return server
