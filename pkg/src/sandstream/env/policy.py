"""Default-deny egress policy with an explicit host allowlist."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class EgressPolicy:
    """Deny unless the host matches the allowlist.

    Patterns are either exact hosts/IPs ("api.example.com", "203.0.113.7")
    or suffix patterns ("*.example.com" / ".example.com") matching any
    subdomain.  ``bytes_out`` counts payload bytes of allowed requests only,
    so a blocked destination provably receives nothing.
    """

    allowlist: frozenset = frozenset()
    bytes_out: int = field(default=0, compare=False)

    @classmethod
    def default_deny(cls) -> "EgressPolicy":
        return cls(allowlist=frozenset())

    @classmethod
    def allowing(cls, *patterns: str) -> "EgressPolicy":
        return cls(allowlist=frozenset(p.lower() for p in patterns))

    def allows(self, host: str) -> bool:
        host = host.strip().lower().rstrip(".")
        if not host:
            return False
        for pattern in self.allowlist:
            if pattern.startswith("*."):
                if host.endswith(pattern[1:]):
                    return True
            elif pattern.startswith("."):
                if host.endswith(pattern):
                    return True
            elif host == pattern:
                return True
        return False

    def record_egress(self, nbytes: int) -> None:
        self.bytes_out += nbytes


def egress_check(policy: EgressPolicy, host: str) -> bool:
    """True = Allow, False = Deny."""
    return policy.allows(host)
