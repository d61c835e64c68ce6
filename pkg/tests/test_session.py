import random

import pytest

from sandstream.clock import SimClock
from sandstream.env.events import InputEvent, InputKind, InputSource
from sandstream.env.policy import EgressPolicy
from sandstream.errors import (
    CapacityExceeded,
    ControlRevoked,
    HeldByOtherHuman,
    NotAgentControlled,
    NotHolder,
    OutOfBounds,
    SessionTerminated,
    UnknownScene,
)
from sandstream.session import (
    ControlMode,
    SessionRegistry,
    SessionState,
)


@pytest.fixture()
def clock():
    return SimClock()


@pytest.fixture()
def registry(clock):
    return SessionRegistry(clock=clock)


def agent_click(x=10, y=10, t=0.0):
    return InputEvent(InputKind.MOUSE_CLICK, InputSource.AGENT, t, x=x, y=y)


def human_click(x=10, y=10, t=0.0):
    return InputEvent(InputKind.MOUSE_CLICK, InputSource.HUMAN, t, x=x, y=y)


# --- lifecycle -----------------------------------------------------------------


def test_create_session_defaults(registry):
    session = registry.create_session("text_edit", EgressPolicy.default_deny(), 60_000)
    assert session.state is SessionState.ACTIVE
    assert session.controller.mode is ControlMode.AGENT_CONTROL
    assert registry.get(session.id) is session


def test_unknown_scene(registry):
    with pytest.raises(UnknownScene):
        registry.create_session("no_such_scene", EgressPolicy.default_deny(), 1000)


def test_capacity_limit(clock):
    registry = SessionRegistry(clock=clock, max_sessions=64)
    for _ in range(64):
        registry.create_session("text_edit", EgressPolicy.default_deny(), 60_000)
    with pytest.raises(CapacityExceeded):
        registry.create_session("text_edit", EgressPolicy.default_deny(), 60_000)


def test_session_ids_unique(registry):
    ids = {
        registry.create_session("text_edit", ttl_ms=1000).id for _ in range(50)
    }
    assert len(ids) == 50


def test_ttl_expiry(registry, clock):
    session = registry.create_session("text_edit", ttl_ms=1000)
    clock.advance(1500)
    with pytest.raises(SessionTerminated):
        session.exec_command("echo hi")
    assert session.state is SessionState.TERMINATED


# --- tokens ----------------------------------------------------------------------


def test_token_scope_exclusion(registry):
    session = registry.create_session("text_edit", ttl_ms=60_000)
    token = registry.issue_token(session, {"stream"}, 10_000)
    assert registry.authorize(token.secret, "exec")[0] is False
    assert registry.authorize(token.secret, "stream")[0] is True


def test_token_scope_inclusion(registry):
    session = registry.create_session("text_edit", ttl_ms=60_000)
    token = registry.issue_token(session, {"exec", "input"}, 10_000)
    assert registry.authorize(token.secret, "input")[0] is True


def test_token_expiry(registry, clock):
    session = registry.create_session("text_edit", ttl_ms=60_000)
    token = registry.issue_token(session, {"exec"}, 10)
    assert registry.authorize(token.secret, "exec")[0] is True
    clock.advance(20)
    allowed, reason = registry.authorize(token.secret, "exec")
    assert not allowed and reason == "expired"


def test_token_secret_entropy(registry):
    session = registry.create_session("text_edit", ttl_ms=60_000)
    token = registry.issue_token(session, {"exec"}, 1000)
    assert len(bytes.fromhex(token.secret)) >= 16


def test_token_authority_never_grows(registry, clock):
    # Allow -> Deny transitions only (expiry, termination), never Deny -> Allow
    session = registry.create_session("text_edit", ttl_ms=60_000)
    token = registry.issue_token(session, {"exec"}, 5000)
    seen_allow = []
    for _ in range(20):
        seen_allow.append(registry.authorize(token.secret, "exec")[0])
        clock.advance(500)
    assert seen_allow == sorted(seen_allow, reverse=True)
    assert registry.authorize("deadbeef" * 4, "exec") == (False, "unknown_token")


def test_terminated_session_tokens_invalid(registry):
    session = registry.create_session("text_edit", ttl_ms=60_000)
    token = registry.issue_token(session, {"exec"}, 60_000)
    registry.terminate_session(session.id)
    assert registry.authorize(token.secret, "exec")[0] is False
    with pytest.raises(SessionTerminated):
        session.exec_command("echo hi")


# --- control arbitration ------------------------------------------------------------


def test_takeover_and_idempotence(registry):
    session = registry.create_session("web_browse", ttl_ms=60_000)
    state = session.request_takeover("alice")
    assert state.mode is ControlMode.HUMAN_CONTROL and state.holder == "alice"
    again = session.request_takeover("alice")
    assert again == state  # no new entry
    with pytest.raises(HeldByOtherHuman):
        session.request_takeover("bob")


def test_agent_commands_rejected_under_human_control(registry):
    session = registry.create_session("web_browse", ttl_ms=60_000)
    session.request_takeover("alice")
    with pytest.raises(ControlRevoked):
        session.exec_command("echo hi")
    with pytest.raises(ControlRevoked):
        session.inject_input(agent_click())
    session.inject_input(human_click())  # human input fine


def test_human_input_rejected_under_agent_control(registry):
    session = registry.create_session("web_browse", ttl_ms=60_000)
    with pytest.raises(ControlRevoked):
        session.inject_input(human_click())
    session.inject_input(agent_click())


def test_out_of_bounds_click(registry):
    session = registry.create_session("web_browse", ttl_ms=60_000)
    with pytest.raises(OutOfBounds):
        session.inject_input(agent_click(x=99999, y=0))


def test_release_and_history_order(registry):
    session = registry.create_session("web_browse", ttl_ms=60_000)
    base = len(session.history)
    session.request_takeover("alice")
    session.release_control("alice")
    session.request_takeover("alice")
    assert len(session.history) - base == 3
    times = [e.since_ms for e in session.history]
    assert times == sorted(times)


def test_release_requires_holder(registry):
    session = registry.create_session("web_browse", ttl_ms=60_000)
    with pytest.raises(NotHolder):
        session.release_control("alice")
    session.request_takeover("alice")
    with pytest.raises(NotHolder):
        session.release_control("bob")


def test_handoff_accept_flow(registry, clock):
    session = registry.create_session("captcha_modal", ttl_ms=60_000)
    state = session.request_handoff_to_human("captcha")
    assert state.mode is ControlMode.HANDOFF_PENDING and state.reason == "captcha"
    clock.advance(1000)
    accepted = session.request_takeover("alice")
    assert accepted.mode is ControlMode.HUMAN_CONTROL


def test_handoff_timeout_reverts_to_agent(registry, clock):
    session = registry.create_session("captcha_modal", ttl_ms=60_000)
    session.request_handoff_to_human("captcha")
    clock.advance(5001)
    state = session.controller
    assert state.mode is ControlMode.AGENT_CONTROL
    assert state.reason == "handoff_timeout"
    session.exec_command("echo resumed")


def test_handoff_requires_agent_control(registry):
    session = registry.create_session("captcha_modal", ttl_ms=60_000)
    session.request_takeover("alice")
    with pytest.raises(NotAgentControlled):
        session.request_handoff_to_human("why not")


# --- termination / isolation ----------------------------------------------------------


def test_terminate_idempotent(registry):
    session = registry.create_session("text_edit", ttl_ms=60_000)
    first = registry.terminate_session(session.id)
    second = registry.terminate_session(session.id)
    assert not first.already_terminated
    assert second.already_terminated


def test_sibling_isolation(registry):
    a = registry.create_session("text_edit", ttl_ms=60_000)
    b = registry.create_session("text_edit", ttl_ms=60_000)
    a.exec_command("write /a.txt from-a")
    b.exec_command("write /b.txt from-b")
    before = b.vfs.snapshot_hash()
    a.exec_command("rm -fr /")
    assert b.vfs.snapshot_hash() == before
    registry.terminate_session(a.id)
    assert b.vfs.snapshot_hash() == before


def test_terminated_vfs_unreachable(registry):
    session = registry.create_session("text_edit", ttl_ms=60_000)
    session.exec_command("write /secret.txt top-secret")
    registry.terminate_session(session.id)
    assert session.vfs is None


# --- randomized interleavings (acceptance-scale invariants) ----------------------------


def test_control_invariants_randomized():
    rng = random.Random(42)
    clock = SimClock()
    registry = SessionRegistry(clock=clock, handoff_timeout_ms=500.0)
    session = registry.create_session("web_browse", ttl_ms=10**9)
    actors = ["alice", "bob", "carol"]
    for _ in range(1000):
        op = rng.randrange(5)
        try:
            if op == 0:
                session.request_takeover(rng.choice(actors))
            elif op == 1:
                session.release_control(rng.choice(actors))
            elif op == 2:
                session.request_handoff_to_human("assist")
            elif op == 3:
                session.exec_command("echo tick")
            else:
                clock.advance(rng.choice([10, 100, 400, 600]))
                registry.tick()
        except (HeldByOtherHuman, NotHolder, NotAgentControlled, ControlRevoked):
            pass
    clock.advance(1000)
    registry.tick()
    history = session.history
    # total order
    times = [e.since_ms for e in history]
    assert times == sorted(times)
    # handoff liveness: every pending entry resolves within the timeout
    for i, entry in enumerate(history):
        if entry.mode is ControlMode.HANDOFF_PENDING:
            nxt = history[i + 1]
            assert nxt.mode in (ControlMode.AGENT_CONTROL, ControlMode.HUMAN_CONTROL)
            assert nxt.since_ms - entry.since_ms <= 500.0
    # single controller: consecutive entries always differ in (mode, holder)
    for a, b in zip(history, history[1:]):
        assert (a.mode, a.holder) != (b.mode, b.holder)
