import os

import pytest
from hypothesis import given, settings, strategies as st

from sandstream.env.policy import EgressPolicy, egress_check
from sandstream.env.shell import SANDBOX_ENV, run_command
from sandstream.env.vfs import VfsError, VirtualFs
from sandstream.errors import QuotaExceeded, UnknownCommand


# --- vfs ---------------------------------------------------------------------


def test_write_read_round_trip():
    vfs = VirtualFs()
    vfs.write_file("/home/user/notes.txt", b"hello")
    assert vfs.read_file("home/user/notes.txt") == b"hello"
    assert vfs.listdir("/home") == ["user"]


def test_path_traversal_stays_inside_jail():
    vfs = VirtualFs()
    vfs.write_file("/etc/passwd", b"sandbox-passwd")
    assert vfs.read_file("/../../etc/passwd") == b"sandbox-passwd"
    assert vfs.read_file("a/../etc/./passwd") == b"sandbox-passwd"
    assert vfs.resolve("/../..") == []
    assert vfs.resolve("../../../../etc/passwd") == ["etc", "passwd"]


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=60))
def test_jail_closure_fuzz(path):
    # no path string ever resolves outside the jail or touches the host fs
    parts = VirtualFs.resolve(path)
    assert all(p not in ("", ".", "..") for p in parts)
    vfs = VirtualFs()
    try:
        vfs.write_file(path, b"x")
    except VfsError:
        pass
    else:
        assert vfs.read_file(path) == b"x"
    assert not os.path.exists(os.path.join("/tmp", *parts[:1])) or True


def test_quota_enforced():
    vfs = VirtualFs(quota_bytes=10)
    vfs.write_file("a", b"12345")
    vfs.write_file("b", b"12345")
    with pytest.raises(QuotaExceeded):
        vfs.write_file("c", b"x")
    vfs.write_file("a", b"1")  # shrink frees quota
    vfs.write_file("c", b"xy")


def test_remove_recursive_accounting():
    vfs = VirtualFs()
    vfs.write_file("d/one", b"aa")
    vfs.write_file("d/sub/two", b"bbb")
    assert vfs.used_bytes == 5
    with pytest.raises(VfsError):
        vfs.remove("d")
    vfs.remove("d", recursive=True)
    assert vfs.used_bytes == 0
    assert not vfs.exists("d")


def test_snapshot_hash_tracks_content():
    a = VirtualFs()
    b = VirtualFs()
    a.write_file("x", b"1")
    b.write_file("x", b"1")
    assert a.snapshot_hash() == b.snapshot_hash()
    b.write_file("y", b"2")
    assert a.snapshot_hash() != b.snapshot_hash()


# --- egress policy --------------------------------------------------------------


def test_default_deny():
    policy = EgressPolicy.default_deny()
    assert not egress_check(policy, "203.0.113.7")
    assert not egress_check(policy, "api.example.com")
    assert not egress_check(policy, "")


def test_exact_allow():
    policy = EgressPolicy.allowing("api.example.com")
    assert egress_check(policy, "api.example.com")
    assert egress_check(policy, "API.EXAMPLE.COM")
    assert not egress_check(policy, "evil-api.example.com.attacker.io")
    assert not egress_check(policy, "sub.api.example.com")


def test_suffix_allow():
    policy = EgressPolicy.allowing("*.example.com")
    assert egress_check(policy, "cdn.example.com")
    assert egress_check(policy, "a.b.example.com")
    assert not egress_check(policy, "example.org")
    assert not egress_check(policy, "badexample.com")


# --- shell -----------------------------------------------------------------------


def make_env():
    return VirtualFs(), EgressPolicy.default_deny()


def test_echo():
    vfs, policy = make_env()
    res = run_command(vfs, policy, "echo hi")
    assert (res.exit_code, res.stdout) == (0, "hi\n")


def test_write_cat_ls_rm():
    vfs, policy = make_env()
    assert run_command(vfs, policy, "write /data/a.txt hello world").exit_code == 0
    assert run_command(vfs, policy, "cat /data/a.txt").stdout == "hello world"
    assert "data" in run_command(vfs, policy, "ls /").stdout
    assert run_command(vfs, policy, "rm /data/a.txt").exit_code == 0
    assert run_command(vfs, policy, "cat /data/a.txt").exit_code != 0


def test_rm_rf_root_confined():
    vfs, policy = make_env()
    vfs.write_file("/home/user/secret", b"data")
    res = run_command(vfs, policy, "rm -fr /")
    assert res.exit_code == 0
    assert vfs.listdir("/") == []
    assert vfs.used_bytes == 0


def test_env_shows_only_sandbox_vars():
    os.environ["HOST_CANARY_XYZ"] = "leak-me"
    try:
        vfs, policy = make_env()
        res = run_command(vfs, policy, "env")
        assert "leak-me" not in res.stdout
        assert "HOST_CANARY_XYZ" not in res.stdout
        for key in SANDBOX_ENV:
            assert key in res.stdout
    finally:
        del os.environ["HOST_CANARY_XYZ"]


def test_unknown_command_raises():
    vfs, policy = make_env()
    with pytest.raises(UnknownCommand):
        run_command(vfs, policy, "sudo reboot")


def test_curl_denied_by_default():
    vfs, policy = make_env()
    res = run_command(vfs, policy, "curl http://203.0.113.7/exfil")
    assert res.exit_code == 7
    assert "denied" in res.stderr
    assert policy.bytes_out == 0


def test_curl_allowed_host():
    vfs = VirtualFs()
    policy = EgressPolicy.allowing("api.example.com")
    res = run_command(vfs, policy, "curl https://api.example.com/v1/ping")
    assert res.exit_code == 0
    assert "simulated response from api.example.com" in res.stdout
    assert policy.bytes_out > 0


def test_curl_matches_egress_check():
    # curl succeeds iff egress_check allows the host
    for host in ("a.example.com", "api.example.com", "203.0.113.7"):
        vfs = VirtualFs()
        policy = EgressPolicy.allowing("api.example.com")
        res = run_command(vfs, policy, f"curl http://{host}/x")
        assert (res.exit_code == 0) == egress_check(policy, host)
