import base64

import numpy as np
import pytest

from sandstream.clock import SimClock
from sandstream.gateway import METHOD_SCOPES, Gateway
from sandstream.pngcodec import decode_png
from sandstream.session import ALL_SCOPES, SessionRegistry


@pytest.fixture()
def gateway():
    return Gateway(SessionRegistry(clock=SimClock()))


def create(gateway, scene="text_edit", **params):
    response = gateway.handle(
        {"id": 1, "method": "create_session", "params": {"scene": scene, **params}}
    )
    assert response["ok"], response
    return response["result"]


def test_create_and_status(gateway):
    created = create(gateway, scene="web_browse")
    assert created["session_id"] and created["token"]
    status = gateway.handle(
        {"id": 2, "token": created["token"], "method": "status", "params": {}}
    )
    assert status["ok"]
    assert status["result"]["scene"] == "web_browse"
    assert status["result"]["controller"]["mode"] == "agent_control"


def test_response_id_matches_request(gateway):
    for req_id in (7, 99, 12345):
        response = gateway.handle({"id": req_id, "method": "list_scenes"})
        assert response["id"] == req_id and response["ok"]


def test_unknown_method(gateway):
    response = gateway.handle({"id": 3, "method": "drop_tables"})
    assert not response["ok"] and response["error"]["code"] == "unknown_method"


def test_bad_request_shapes(gateway):
    assert gateway.handle("nonsense")["error"]["code"] == "bad_request"
    assert gateway.handle({"method": "list_scenes"})["error"]["code"] == "bad_request"
    assert (
        gateway.handle({"id": 1, "method": "create_session", "params": {}})["error"]["code"]
        == "bad_request"
    )


def test_exec_round_trip(gateway):
    created = create(gateway)
    result = gateway.handle(
        {"id": 4, "token": created["token"], "method": "exec", "params": {"cmd": "echo hi"}}
    )["result"]
    assert result == {"exit_code": 0, "stdout": "hi\n", "stderr": ""}


def test_scope_matrix_forbidden(gateway):
    # every token-guarded method x every token missing its scopes -> forbidden
    for method, scopes in METHOD_SCOPES.items():
        if scopes is None:
            continue
        missing = sorted(ALL_SCOPES - set(scopes))
        created = create(gateway, scopes=missing)
        response = gateway.handle(
            {"id": 5, "token": created["token"], "method": method, "params": {}}
        )
        assert not response["ok"], (method, response)
        assert response["error"]["code"] == "forbidden", (method, response)


def test_exec_with_stream_scoped_token_forbidden(gateway):
    created = create(gateway, scopes=["stream"])
    response = gateway.handle(
        {"id": 6, "token": created["token"], "method": "exec", "params": {"cmd": "env"}}
    )
    assert response["error"]["code"] == "forbidden"


def test_screenshot_deterministic_and_pillow_readable(gateway):
    created = create(gateway, scene="slides")
    token = created["token"]
    a = gateway.handle({"id": 7, "token": token, "method": "screenshot", "params": {}})["result"]
    b = gateway.handle({"id": 8, "token": token, "method": "screenshot", "params": {}})["result"]
    assert a["png_base64"] == b["png_base64"]  # no intervening frame change
    png = base64.b64decode(a["png_base64"])
    pixels = decode_png(png)
    assert pixels.shape == (720, 1280, 4)
    assert (a["width"], a["height"]) == (1280, 720)
    PIL = pytest.importorskip("PIL.Image")
    import io

    with PIL.open(io.BytesIO(png)) as img:
        assert img.size == (1280, 720)
        via_pillow = np.asarray(img.convert("RGBA"))
    assert np.array_equal(via_pillow, pixels)


def test_screenshot_after_terminate(gateway):
    created = create(gateway)
    token = created["token"]
    gateway.handle({"id": 9, "token": token, "method": "terminate", "params": {}})
    response = gateway.handle({"id": 10, "token": token, "method": "screenshot", "params": {}})
    assert not response["ok"]
    assert response["error"]["code"] == "session_terminated"


def test_takeover_release_flow(gateway):
    created = create(gateway, scene="web_browse")
    token = created["token"]
    taken = gateway.handle(
        {"id": 11, "token": token, "method": "takeover", "params": {"actor": "alice"}}
    )["result"]
    assert taken["mode"] == "human_control" and taken["holder"] == "alice"
    exec_denied = gateway.handle(
        {"id": 12, "token": token, "method": "exec", "params": {"cmd": "echo hi"}}
    )
    assert exec_denied["error"]["code"] == "control_revoked"
    released = gateway.handle(
        {"id": 13, "token": token, "method": "release", "params": {"actor": "alice"}}
    )["result"]
    assert released["mode"] == "agent_control"


def test_handoff_via_api(gateway):
    created = create(gateway, scene="captcha_modal")
    token = created["token"]
    state = gateway.handle(
        {"id": 14, "token": token, "method": "request_handoff", "params": {"reason": "captcha"}}
    )["result"]
    assert state["mode"] == "handoff_pending" and state["reason"] == "captcha"


def test_allow_hosts_policy(gateway):
    created = create(gateway, allow_hosts=["api.example.com"])
    token = created["token"]
    ok = gateway.handle(
        {"id": 15, "token": token, "method": "exec",
         "params": {"cmd": "curl http://api.example.com/x"}}
    )["result"]
    assert ok["exit_code"] == 0
    denied = gateway.handle(
        {"id": 16, "token": token, "method": "exec",
         "params": {"cmd": "curl http://203.0.113.7/x"}}
    )["result"]
    assert denied["exit_code"] == 7


def test_stream_open_scope(gateway):
    created = create(gateway, scopes=["stream"])
    result = gateway.handle(
        {"id": 17, "token": created["token"], "method": "stream_open", "params": {}}
    )["result"]
    assert result["stream_path"].endswith(created["session_id"])
