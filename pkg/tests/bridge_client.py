"""Test helper: a native stream-bridge client (websocket + transport)."""

from __future__ import annotations

import json
import socket
import time

from sandstream import ws
from sandstream.codec.engine import (
    MSG_CONTROL_JSON,
    MSG_INPUT_JSON,
    MSG_KEYFRAME,
    MSG_METRICS_JSON,
    MSG_REGIONS,
    StreamDecoder,
    pack_json,
    parse_message,
)
from sandstream.transport import Channel, Endpoint, EndpointConfig


class BridgeClient:
    def __init__(self, host: str, port: int, session_id: str, token: str,
                 width: int = 1280, height: int = 720):
        self.sock = socket.create_connection((host, port), timeout=5.0)
        request, _ = ws.handshake_request(f"{host}:{port}", f"/stream/{session_id}?token={token}")
        self.sock.sendall(request)
        header = b""
        while b"\r\n\r\n" not in header:
            chunk = self.sock.recv(4096)
            if not chunk:
                break
            header += chunk
        self.accepted = b"101" in header.split(b"\r\n", 1)[0]
        self.reader = ws.FrameReader()
        if self.accepted:
            _, _, remainder = header.partition(b"\r\n\r\n")
            self.reader.feed(remainder)
        self.endpoint = Endpoint(EndpointConfig())
        self.decoder = StreamDecoder(width, height, log_regions=True)
        self.control_msgs: list[dict] = []
        self.metrics_msgs: list[dict] = []
        self.region_payload_log: list[bytes] = []
        self._origin = time.monotonic()

    def now_ms(self) -> float:
        return (time.monotonic() - self._origin) * 1000.0

    def pump(self, duration_s: float = 0.2) -> None:
        """Shuttle bridge traffic for a while."""
        deadline = time.monotonic() + duration_s
        self.sock.settimeout(0.02)
        while time.monotonic() < deadline:
            now = self.now_ms()
            for datagram in self.endpoint.poll(now):
                self.sock.sendall(ws.encode_frame(ws.OP_BINARY, datagram, mask=True))
            try:
                data = self.sock.recv(65536)
            except socket.timeout:
                data = b""
            except OSError:
                break
            if data:
                for opcode, payload in self.reader.feed(data):
                    if opcode == ws.OP_BINARY:
                        for delivery in self.endpoint.on_datagram(payload, self.now_ms()):
                            self._consume(delivery)
            for delivery in self.endpoint.poll_receive(self.now_ms()):
                self._consume(delivery)

    def _consume(self, delivery) -> None:
        msg = self.decoder.apply_message(delivery.data, self.now_ms())
        if msg is None:
            return
        if msg.msg_type in (MSG_KEYFRAME, MSG_REGIONS):
            if msg.msg_type == MSG_KEYFRAME:
                # keyframes are broadcast: a common alignment point for logs
                self.region_payload_log.clear()
            for region in msg.regions:
                self.region_payload_log.append(region.payload)
        elif msg.msg_type == MSG_CONTROL_JSON and msg.obj is not None:
            self.control_msgs.append(msg.obj)
        elif msg.msg_type == MSG_METRICS_JSON and msg.obj is not None:
            self.metrics_msgs.append(msg.obj)

    def send_control(self, obj: dict) -> None:
        self.endpoint.send_message(
            Channel.CONTROL, pack_json(MSG_CONTROL_JSON, obj), self.now_ms()
        )

    def send_input(self, event_obj: dict) -> None:
        self.endpoint.send_message(
            Channel.INPUT, pack_json(MSG_INPUT_JSON, event_obj), self.now_ms()
        )

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class JsonClient:
    """Line-delimited JSON control-plane client."""

    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port), timeout=10.0)
        self._buf = b""
        self._next_id = 0

    def call_raw(self, line: bytes) -> dict:
        self.sock.sendall(line + b"\n")
        return self._read_response()

    def call(self, method: str, token: str | None = None, **params) -> dict:
        self._next_id += 1
        request = {"id": self._next_id, "method": method, "params": params}
        if token is not None:
            request["token"] = token
        return self.call_raw(json.dumps(request).encode())

    def result(self, method: str, token: str | None = None, **params) -> dict:
        response = self.call(method, token, **params)
        assert response["ok"], response
        return response["result"]

    def _read_response(self) -> dict:
        while b"\n" not in self._buf:
            data = self.sock.recv(65536)
            if not data:
                raise ConnectionError("server closed connection")
            self._buf += data
        line, _, self._buf = self._buf.partition(b"\n")
        return json.loads(line)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass
