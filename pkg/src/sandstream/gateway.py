"""Control-plane method surface: the single entry point to all sessions.

Requests are {id, token, method, params} maps; every request yields exactly
one {id, ok, result|error} response.  Each method checks the token scope
before touching session state.  The same surface backs the TCP JSON-lines
server and in-process callers (the scripted agent driver, tests).
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

from .env.events import InputEvent
from .env.policy import EgressPolicy
from .errors import SandstreamError
from .pngcodec import encode_png
from .session import ALL_SCOPES, SessionRegistry

# scope(s) accepted per method; None = no token required
METHOD_SCOPES: dict[str, tuple[str, ...] | None] = {
    "create_session": None,
    "list_scenes": None,
    "exec": ("exec",),
    "input": ("input",),
    "screenshot": ("exec", "stream"),
    "request_handoff": ("handoff",),
    "takeover": ("handoff",),
    "release": ("handoff",),
    "status": ("exec", "input", "stream", "handoff"),
    "terminate": ("exec",),
    "stream_open": ("stream",),
}


@dataclass(frozen=True)
class ApiError(Exception):
    code: str
    message: str


class Gateway:
    def __init__(self, registry: SessionRegistry) -> None:
        self.registry = registry

    # -- request plumbing ------------------------------------------------------

    def handle(self, request) -> dict:
        if not isinstance(request, dict):
            return self._error(None, "bad_request", "request must be a JSON object")
        req_id = request.get("id")
        if not isinstance(req_id, int):
            return self._error(None, "bad_request", "missing integer request id")
        method = request.get("method")
        scopes = METHOD_SCOPES.get(method)
        if method not in METHOD_SCOPES:
            return self._error(req_id, "unknown_method", f"unknown method {method!r}")
        params = request.get("params") or {}
        if not isinstance(params, dict):
            return self._error(req_id, "bad_request", "params must be an object")
        try:
            if scopes is None:
                session = None
            else:
                session = self._authorized_session(request.get("token"), scopes)
            result = getattr(self, f"_method_{method}")(session, params)
            return {"id": req_id, "ok": True, "result": result}
        except ApiError as exc:
            return self._error(req_id, exc.code, exc.message)
        except SandstreamError as exc:
            return self._error(req_id, exc.code, str(exc))
        except (KeyError, TypeError, ValueError) as exc:
            return self._error(req_id, "bad_request", str(exc))

    @staticmethod
    def _error(req_id, code: str, message: str) -> dict:
        return {"id": req_id, "ok": False, "error": {"code": code, "message": message}}

    def _authorized_session(self, token, scopes):
        if not isinstance(token, str) or not token:
            raise ApiError("forbidden", "missing token")
        last_reason = "forbidden"
        for scope in scopes:
            allowed, reason = self.registry.authorize(token, scope)
            if allowed:
                return self.registry.get(reason)  # reason carries the session id
            last_reason = reason
        if last_reason in ("expired", "session_terminated", "unknown_token"):
            raise ApiError(last_reason, f"token rejected: {last_reason}")
        raise ApiError("forbidden", "token scope does not permit this method")

    # -- methods ------------------------------------------------------------------

    def _method_create_session(self, _session, params) -> dict:
        scene = params.get("scene")
        if not isinstance(scene, str):
            raise ApiError("bad_request", "missing scene name")
        allow_hosts = params.get("allow_hosts") or []
        policy = (
            EgressPolicy.allowing(*allow_hosts) if allow_hosts else EgressPolicy.default_deny()
        )
        ttl_ms = float(params.get("ttl_ms", 10 * 60 * 1000))
        scopes = params.get("scopes")
        if scopes is None:
            scopes = sorted(ALL_SCOPES)
        session = self.registry.create_session(
            scene, policy, ttl_ms, scene_seed=int(params.get("scene_seed", 0))
        )
        token = self.registry.issue_token(session, scopes, ttl_ms)
        return {
            "session_id": session.id,
            "token": token.secret,
            "scene": scene,
            "scopes": sorted(token.scope),
            "expires_at_ms": token.expires_at_ms,
        }

    def _method_list_scenes(self, _session, _params) -> dict:
        return {"scenes": self.registry.list_scenes()}

    def _method_exec(self, session, params) -> dict:
        cmd = params.get("cmd")
        if not isinstance(cmd, str):
            raise ApiError("bad_request", "missing cmd")
        result = session.exec_command(cmd)
        return {
            "exit_code": result.exit_code,
            "stdout": result.stdout,
            "stderr": result.stderr,
        }

    def _method_input(self, session, params) -> dict:
        event = InputEvent.from_json_obj(params.get("event") or {})
        ack = session.inject_input(event)
        return {"applied_at_frame": ack.applied_at_frame}

    def _method_screenshot(self, session, params) -> dict:
        t_ms = self.registry.clock.now_ms() - session.created_at
        fb = session.render_frame(t_ms)
        png = encode_png(fb.pixels)
        return {
            "png_base64": base64.b64encode(png).decode(),
            "width": fb.width,
            "height": fb.height,
            "frame_index": fb.frame_index,
        }

    def _method_request_handoff(self, session, params) -> dict:
        state = session.request_handoff_to_human(str(params.get("reason", "")))
        return _control_state_obj(state)

    def _method_takeover(self, session, params) -> dict:
        actor = str(params.get("actor") or "")
        if not actor:
            raise ApiError("bad_request", "missing actor")
        return _control_state_obj(session.request_takeover(actor))

    def _method_release(self, session, params) -> dict:
        actor = str(params.get("actor") or "")
        if not actor:
            raise ApiError("bad_request", "missing actor")
        return _control_state_obj(session.release_control(actor))

    def _method_status(self, session, _params) -> dict:
        controller = session.controller
        return {
            "session_id": session.id,
            "state": session.state.value,
            "scene": session.scene.name,
            "controller": _control_state_obj(controller),
            "history_length": len(session.history),
            "history": [_control_state_obj(e) for e in session.history[-32:]],
            "last_rendered_frame": session.last_rendered_frame,
            "scene_state": session.scene.state(
                self.registry.clock.now_ms() - session.created_at,
                tuple(session.input_log),
            ),
        }

    def _method_terminate(self, session, _params) -> dict:
        report = self.registry.terminate_session(session.id)
        return {
            "session_id": report.session_id,
            "already_terminated": report.already_terminated,
            "wiped_bytes": report.wiped_bytes,
        }

    def _method_stream_open(self, session, _params) -> dict:
        # the websocket bridge authenticates with the same token on this path
        return {"stream_path": f"/stream/{session.id}", "session_id": session.id}


def _control_state_obj(state) -> dict:
    return {
        "mode": state.mode.value,
        "holder": state.holder,
        "since_ms": state.since_ms,
        "reason": state.reason,
    }
