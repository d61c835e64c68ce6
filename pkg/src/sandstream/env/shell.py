"""Minimal built-in command interpreter for agent exec.

Deliberately not a real shell: the supported commands (ls, cat, echo,
write, rm, env, curl) operate only on the session's virtual filesystem and
egress policy.  The host process environment is never consulted, so no
host secret can leak into a command result.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from urllib.parse import urlsplit

from ..errors import QuotaExceeded, UnknownCommand
from .policy import EgressPolicy
from .vfs import VfsError, VirtualFs

SANDBOX_ENV = {
    "HOME": "/home/user",
    "PATH": "/usr/local/bin:/usr/bin",
    "SHELL": "/bin/box",
    "SANDBOX": "1",
    "TERM": "dumb",
}


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    stdout: str
    stderr: str


def _ok(stdout: str = "") -> CommandResult:
    return CommandResult(0, stdout, "")


def _err(code: int, message: str) -> CommandResult:
    return CommandResult(code, "", message + "\n")


def run_command(vfs: VirtualFs, policy: EgressPolicy, cmdline: str, env_extra=None) -> CommandResult:
    try:
        argv = shlex.split(cmdline)
    except ValueError as exc:
        return _err(2, f"parse error: {exc}")
    if not argv:
        return _ok()
    name, *args = argv
    handler = _COMMANDS.get(name)
    if handler is None:
        raise UnknownCommand(f"unknown command: {name}")
    return handler(vfs, policy, args, dict(SANDBOX_ENV, **(env_extra or {})))


def _cmd_ls(vfs, policy, args, env):
    path = args[0] if args else "/"
    try:
        return _ok("".join(f"{n}\n" for n in vfs.listdir(path)))
    except VfsError as exc:
        return _err(2, f"ls: {exc}")


def _cmd_cat(vfs, policy, args, env):
    if not args:
        return _err(2, "cat: missing operand")
    out = []
    for path in args:
        try:
            out.append(vfs.read_file(path).decode("utf-8", "replace"))
        except VfsError as exc:
            return _err(1, f"cat: {exc}")
    return _ok("".join(out))


def _cmd_echo(vfs, policy, args, env):
    return _ok(" ".join(args) + "\n")


def _cmd_write(vfs, policy, args, env):
    if len(args) < 1:
        return _err(2, "write: usage: write <path> [content...]")
    path, content = args[0], " ".join(args[1:])
    try:
        vfs.write_file(path, content.encode())
    except (VfsError, QuotaExceeded) as exc:
        return _err(1, f"write: {exc}")
    return _ok()


def _cmd_rm(vfs, policy, args, env):
    flags = {a for a in args if a.startswith("-")}
    paths = [a for a in args if not a.startswith("-")]
    recursive = any("r" in f for f in flags)
    force = any("f" in f for f in flags)
    if not paths:
        return _err(2, "rm: missing operand")
    for path in paths:
        try:
            vfs.remove(path, recursive=recursive)
        except VfsError as exc:
            if not force:
                return _err(1, f"rm: {exc}")
    return _ok()


def _cmd_env(vfs, policy, args, env):
    return _ok("".join(f"{k}={v}\n" for k, v in sorted(env.items())))


def _cmd_curl(vfs, policy, args, env):
    urls = [a for a in args if not a.startswith("-")]
    if not urls:
        return _err(2, "curl: no URL specified")
    url = urls[0]
    split = urlsplit(url if "//" in url else f"http://{url}")
    host = split.hostname or ""
    if not policy.allows(host):
        return _err(7, f"curl: (7) connection to {host or url!r} denied by egress policy")
    body = f"HTTP/1.1 200 OK\ncontent-type: text/plain\n\nsimulated response from {host}\n"
    policy.record_egress(len(url) + 64)  # request line + headers actually sent
    return _ok(body)


_COMMANDS = {
    "ls": _cmd_ls,
    "cat": _cmd_cat,
    "echo": _cmd_echo,
    "write": _cmd_write,
    "rm": _cmd_rm,
    "env": _cmd_env,
    "curl": _cmd_curl,
}
