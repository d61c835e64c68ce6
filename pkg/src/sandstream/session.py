"""Session lifecycle, control arbitration and scoped access tokens.

Each session has exactly one effective controller at any instant: the
agent, one human, or a pending handoff that must resolve within a timeout.
All transitions append to a totally ordered per-session history, and every
mutating operation serialises through the session lock, so an in-flight
agent command either completes before a takeover or is rejected after it,
never half-applied.  Termination irreversibly wipes the virtual filesystem
and framebuffer state and invalidates every token for the session.
"""

from __future__ import annotations

import enum
import hmac
import secrets
import threading
from dataclasses import dataclass

from .clock import Clock, WallClock
from .env.events import InputEvent, InputSource
from .env.policy import EgressPolicy
from .env.scenes import SceneScript, load_scene, scene_names, validate_input
from .env.shell import CommandResult, run_command
from .env.vfs import VirtualFs
from .errors import (
    CapacityExceeded,
    ControlRevoked,
    HeldByOtherHuman,
    NotAgentControlled,
    NotHolder,
    SessionTerminated,
)

HANDOFF_TIMEOUT_MS = 5000.0
DEFAULT_MAX_SESSIONS = 64
DEFAULT_TTL_MS = 10 * 60 * 1000

ALL_SCOPES = frozenset({"exec", "input", "stream", "handoff"})


class ControlMode(str, enum.Enum):
    AGENT_CONTROL = "agent_control"
    HUMAN_CONTROL = "human_control"
    HANDOFF_PENDING = "handoff_pending"


class SessionState(str, enum.Enum):
    ACTIVE = "active"
    TERMINATED = "terminated"


@dataclass(frozen=True)
class ControlState:
    mode: ControlMode
    holder: str
    since_ms: float
    reason: str = ""


@dataclass(frozen=True)
class AccessToken:
    session_id: str
    scope: frozenset
    expires_at_ms: float
    secret: str  # >= 128 bits of randomness, hex

    def allows(self, action: str) -> bool:
        return action in self.scope


@dataclass(frozen=True)
class TerminationReport:
    session_id: str
    already_terminated: bool
    wiped_bytes: int


@dataclass(frozen=True)
class InputAck:
    applied_at_frame: int


class Session:
    def __init__(
        self,
        session_id: str,
        scene: SceneScript,
        policy: EgressPolicy,
        ttl_ms: float,
        clock: Clock,
        handoff_timeout_ms: float = HANDOFF_TIMEOUT_MS,
    ) -> None:
        self.id = session_id
        self.scene = scene
        self.policy = policy
        self.vfs: VirtualFs | None = VirtualFs()
        self.clock = clock
        self.created_at = clock.now_ms()
        self.ttl_ms = ttl_ms
        self.handoff_timeout_ms = handoff_timeout_ms
        self.state = SessionState.ACTIVE
        self.lock = threading.RLock()
        self.history: list[ControlState] = [
            ControlState(ControlMode.AGENT_CONTROL, "agent", self.created_at)
        ]
        self.input_log: list[InputEvent] = []
        self.last_rendered_frame = -1
        self._pending_deadline: float | None = None

    # -- controller state ------------------------------------------------------

    @property
    def controller(self) -> ControlState:
        with self.lock:
            self._resolve_pending(self.clock.now_ms())
            return self.history[-1]

    def _append(self, mode: ControlMode, holder: str, at_ms: float, reason: str = "") -> ControlState:
        entry = ControlState(mode, holder, at_ms, reason)
        self.history.append(entry)
        return entry

    def _resolve_pending(self, now_ms: float) -> None:
        last = self.history[-1]
        if (
            last.mode is ControlMode.HANDOFF_PENDING
            and self._pending_deadline is not None
            and now_ms >= self._pending_deadline
        ):
            # nobody accepted: control reverts to the agent at the deadline
            self._append(
                ControlMode.AGENT_CONTROL, "agent", self._pending_deadline, "handoff_timeout"
            )
            self._pending_deadline = None

    def _ensure_active(self) -> None:
        if self.state is not SessionState.ACTIVE:
            raise SessionTerminated(f"session {self.id} is terminated")
        if self.clock.now_ms() - self.created_at > self.ttl_ms:
            self.terminate()
            raise SessionTerminated(f"session {self.id} exceeded its ttl")

    def request_takeover(self, actor: str) -> ControlState:
        with self.lock:
            self._ensure_active()
            now = self.clock.now_ms()
            self._resolve_pending(now)
            last = self.history[-1]
            if last.mode is ControlMode.HUMAN_CONTROL:
                if last.holder == actor:
                    return last  # idempotent
                raise HeldByOtherHuman(f"held by {last.holder}")
            self._pending_deadline = None
            return self._append(ControlMode.HUMAN_CONTROL, actor, now)

    def request_handoff_to_human(self, reason: str) -> ControlState:
        with self.lock:
            self._ensure_active()
            now = self.clock.now_ms()
            self._resolve_pending(now)
            if self.history[-1].mode is not ControlMode.AGENT_CONTROL:
                raise NotAgentControlled("handoff requires agent control")
            self._pending_deadline = now + self.handoff_timeout_ms
            return self._append(ControlMode.HANDOFF_PENDING, "agent", now, reason)

    def release_control(self, actor: str) -> ControlState:
        with self.lock:
            self._ensure_active()
            now = self.clock.now_ms()
            self._resolve_pending(now)
            last = self.history[-1]
            if last.mode is not ControlMode.HUMAN_CONTROL or last.holder != actor:
                raise NotHolder(f"{actor} does not hold control")
            return self._append(ControlMode.AGENT_CONTROL, "agent", now)

    # -- environment operations --------------------------------------------------

    def exec_command(self, cmdline: str) -> CommandResult:
        with self.lock:
            self._ensure_active()
            self._resolve_pending(self.clock.now_ms())
            if self.history[-1].mode is not ControlMode.AGENT_CONTROL:
                raise ControlRevoked("agent commands are rejected while a human holds control")
            assert self.vfs is not None
            return run_command(self.vfs, self.policy, cmdline, {"SESSION_ID": self.id})

    def inject_input(self, event: InputEvent) -> InputAck:
        with self.lock:
            self._ensure_active()
            self._resolve_pending(self.clock.now_ms())
            mode = self.history[-1].mode
            if event.source is InputSource.AGENT and mode is not ControlMode.AGENT_CONTROL:
                raise ControlRevoked("agent input rejected: human holds control")
            if event.source is InputSource.HUMAN and mode is ControlMode.AGENT_CONTROL:
                raise ControlRevoked("human input rejected: agent holds control")
            validate_input(self.scene, event)
            self.input_log.append(event)
            return InputAck(applied_at_frame=self.last_rendered_frame + 1)

    def render_frame(self, t_ms: float):
        """Render the scene at session-relative time t_ms (pure, logged input)."""
        with self.lock:
            self._ensure_active()
            from .env.scenes import step_frame

            fb = step_frame(self.scene, t_ms, tuple(self.input_log))
            self.last_rendered_frame = fb.frame_index
            return fb

    def terminate(self) -> TerminationReport:
        with self.lock:
            if self.state is SessionState.TERMINATED:
                return TerminationReport(self.id, already_terminated=True, wiped_bytes=0)
            wiped = self.vfs.used_bytes if self.vfs else 0
            if self.vfs is not None:
                self.vfs.wipe()
            self.vfs = None
            self.input_log.clear()
            self.state = SessionState.TERMINATED
            return TerminationReport(self.id, already_terminated=False, wiped_bytes=wiped)


class SessionRegistry:
    """Owner of all sessions and tokens for one service run."""

    def __init__(
        self,
        clock: Clock | None = None,
        max_sessions: int = DEFAULT_MAX_SESSIONS,
        handoff_timeout_ms: float = HANDOFF_TIMEOUT_MS,
    ) -> None:
        self.clock = clock or WallClock()
        self.max_sessions = max_sessions
        self.handoff_timeout_ms = handoff_timeout_ms
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._tokens: dict[str, AccessToken] = {}
        self._counter = 0

    # -- lifecycle ---------------------------------------------------------------

    def create_session(
        self,
        scene_name: str,
        policy: EgressPolicy | None = None,
        ttl_ms: float = DEFAULT_TTL_MS,
        scene_seed: int = 0,
    ) -> Session:
        if ttl_ms <= 0:
            raise ValueError("ttl_ms must be positive")
        scene = load_scene(scene_name, seed=scene_seed)
        with self._lock:
            active = sum(
                1 for s in self._sessions.values() if s.state is SessionState.ACTIVE
            )
            if active >= self.max_sessions:
                raise CapacityExceeded(f"{active} active sessions (max {self.max_sessions})")
            self._counter += 1
            session_id = f"s{self._counter:05d}-{secrets.token_hex(4)}"
            session = Session(
                session_id,
                scene,
                policy if policy is not None else EgressPolicy.default_deny(),
                ttl_ms,
                self.clock,
                self.handoff_timeout_ms,
            )
            self._sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionTerminated(f"unknown session {session_id}")
        return session

    def terminate_session(self, session_id: str) -> TerminationReport:
        # tokens stay in the store: they authorize nothing once the session
        # is terminated, and keeping them yields a precise rejection reason
        return self.get(session_id).terminate()

    def tick(self) -> None:
        """Resolve timers lazily (handoff deadlines, ttl expiry)."""
        now = self.clock.now_ms()
        for session in list(self._sessions.values()):
            if session.state is SessionState.ACTIVE:
                with session.lock:
                    session._resolve_pending(now)
                    if now - session.created_at > session.ttl_ms:
                        self.terminate_session(session.id)

    def list_scenes(self) -> list[str]:
        return scene_names()

    # -- tokens --------------------------------------------------------------------

    def issue_token(self, session: Session, scope, ttl_ms: float) -> AccessToken:
        session._ensure_active()
        now = self.clock.now_ms()
        token = AccessToken(
            session_id=session.id,
            scope=frozenset(scope) & ALL_SCOPES,
            expires_at_ms=now + ttl_ms,
            secret=secrets.token_hex(16),
        )
        with self._lock:
            self._tokens[token.secret] = token
        return token

    def authorize(self, secret: str, action: str) -> tuple[bool, str]:
        """(allowed, reason); authority only ever decays over time."""
        token = None
        with self._lock:
            for candidate_secret, candidate in self._tokens.items():
                if hmac.compare_digest(candidate_secret, secret):
                    token = candidate
                    break
        if token is None:
            return False, "unknown_token"
        if self.clock.now_ms() >= token.expires_at_ms:
            return False, "expired"
        session = self._sessions.get(token.session_id)
        if session is None or session.state is not SessionState.ACTIVE:
            return False, "session_terminated"
        if not token.allows(action):
            return False, "forbidden"
        return True, token.session_id

    def token_session(self, secret: str) -> str | None:
        with self._lock:
            token = self._tokens.get(secret)
        return token.session_id if token else None
