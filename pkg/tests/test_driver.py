import pytest

from sandstream.driver import (
    TaskMode,
    TaskPolicy,
    build_human_trace,
    run_task,
    run_trials,
    trial_table,
)
from sandstream.env.scenes import load_scene


def seeds_by_obstruction(n=60):
    clear, blocked = [], []
    for s in range(n):
        if load_scene("ad_overlay", s).state(0)["ad_obstructs_target"]:
            blocked.append(s)
        else:
            clear.append(s)
    return clear, blocked


def test_ad_overlay_agent_only_outcomes():
    clear, blocked = seeds_by_obstruction()
    ok = run_task(TaskPolicy("ad_overlay"), TaskMode.AGENT_ONLY, seed=clear[0])
    assert ok.success and ok.handoffs == 0
    blocked_run = run_task(TaskPolicy("ad_overlay"), TaskMode.AGENT_ONLY, seed=blocked[0])
    assert not blocked_run.success and blocked_run.handoffs == 1


def test_ad_overlay_hybrid_succeeds_on_blocked_seed():
    _, blocked = seeds_by_obstruction()
    outcome = run_task(TaskPolicy("ad_overlay"), TaskMode.HYBRID, seed=blocked[0])
    assert outcome.success and outcome.handoffs == 1
    # human intervention time is calibrated near the observed 5-8 s window
    assert outcome.duration_ms >= 5000


def test_captcha_simple_variant_agent_solves():
    simple = next(s for s in range(60) if load_scene("captcha_modal", s).state(0)["simple"])
    outcome = run_task(TaskPolicy("captcha_modal"), TaskMode.AGENT_ONLY, seed=simple)
    assert outcome.success and outcome.handoffs == 0


def test_captcha_hard_variant_needs_human():
    hard = next(s for s in range(60) if not load_scene("captcha_modal", s).state(0)["simple"])
    alone = run_task(TaskPolicy("captcha_modal"), TaskMode.AGENT_ONLY, seed=hard)
    assert not alone.success
    hybrid = run_task(TaskPolicy("captcha_modal"), TaskMode.HYBRID, seed=hard)
    assert hybrid.success and hybrid.handoffs == 1
    assert hybrid.duration_ms >= 15_000  # paper-calibrated 15-20 s intervention


def test_login_agent_never_hybrid_always():
    for seed in (0, 1, 2):
        assert not run_task(TaskPolicy("login_form"), TaskMode.AGENT_ONLY, seed=seed).success
        assert run_task(TaskPolicy("login_form"), TaskMode.HYBRID, seed=seed).success


def test_outcomes_deterministic():
    a = run_task(TaskPolicy("captcha_modal"), TaskMode.HYBRID, seed=7)
    b = run_task(TaskPolicy("captcha_modal"), TaskMode.HYBRID, seed=7)
    assert a == b


def test_hybrid_dominance_small_sample():
    for scene in ("ad_overlay", "captcha_modal", "login_form"):
        agent_rate, _ = run_trials(scene, TaskMode.AGENT_ONLY, 12, seed=100)
        hybrid_rate, _ = run_trials(scene, TaskMode.HYBRID, 12, seed=100)
        assert hybrid_rate >= agent_rate


def test_trace_requires_known_scene():
    with pytest.raises(ValueError):
        build_human_trace("text_edit", 0)
    with pytest.raises(ValueError):
        run_task(TaskPolicy("web_browse"), TaskMode.AGENT_ONLY, seed=0)


def test_trial_table_format():
    table = trial_table(["login_form"], trials=3, seed=0)
    assert "login_form" in table and "--" in table
