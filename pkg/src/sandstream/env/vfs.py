"""In-memory jailed filesystem private to one session.

Every path, including absolute ones and any amount of ``..``, resolves
strictly inside the jail root; the host filesystem is never touched.
"""

from __future__ import annotations

from ..errors import QuotaExceeded

DEFAULT_QUOTA = 64 * 1024 * 1024


class VfsError(Exception):
    pass


class VirtualFs:
    def __init__(self, quota_bytes: int = DEFAULT_QUOTA) -> None:
        self.quota_bytes = quota_bytes
        self._root: dict = {}  # name -> dict (directory) | bytes (file)
        self._used = 0

    # -- paths ---------------------------------------------------------------

    @staticmethod
    def resolve(path: str) -> list[str]:
        """Jailed normalisation: '..' never escapes, absolute paths are
        relative to the jail root, odd names are plain names."""
        parts: list[str] = []
        for piece in path.replace("\\", "/").split("/"):
            if piece in ("", "."):
                continue
            if piece == "..":
                if parts:
                    parts.pop()
                continue
            parts.append(piece)
        return parts

    def _walk(self, parts: list[str], create_dirs: bool = False):
        node = self._root
        for piece in parts:
            child = node.get(piece)
            if child is None:
                if not create_dirs:
                    raise VfsError(f"no such path: /{'/'.join(parts)}")
                child = node[piece] = {}
            if not isinstance(child, dict):
                raise VfsError(f"not a directory: {piece}")
            node = child
        return node

    # -- operations ------------------------------------------------------------

    def write_file(self, path: str, content: bytes) -> None:
        parts = self.resolve(path)
        if not parts:
            raise VfsError("cannot write to the root directory")
        parent = self._walk(parts[:-1], create_dirs=True)
        name = parts[-1]
        existing = parent.get(name)
        if isinstance(existing, dict):
            raise VfsError(f"is a directory: {name}")
        delta = len(content) - (len(existing) if existing is not None else 0)
        if self._used + delta > self.quota_bytes:
            raise QuotaExceeded(f"vfs quota of {self.quota_bytes} bytes exceeded")
        self._used += delta
        parent[name] = bytes(content)

    def read_file(self, path: str) -> bytes:
        parts = self.resolve(path)
        if not parts:
            raise VfsError("is a directory: /")
        parent = self._walk(parts[:-1])
        node = parent.get(parts[-1])
        if node is None:
            raise VfsError(f"no such file: {path}")
        if isinstance(node, dict):
            raise VfsError(f"is a directory: {path}")
        return node

    def mkdir(self, path: str) -> None:
        self._walk(self.resolve(path), create_dirs=True)

    def listdir(self, path: str = "/") -> list[str]:
        node = self._walk(self.resolve(path))
        return sorted(node)

    def exists(self, path: str) -> bool:
        parts = self.resolve(path)
        try:
            parent = self._walk(parts[:-1]) if parts else self._root
        except VfsError:
            return False
        return not parts or parts[-1] in parent

    def remove(self, path: str, recursive: bool = False) -> None:
        parts = self.resolve(path)
        if not parts:
            if not recursive:
                raise VfsError("refusing to remove / without -r")
            self._root.clear()
            self._used = 0
            return
        parent = self._walk(parts[:-1])
        node = parent.get(parts[-1])
        if node is None:
            raise VfsError(f"no such path: {path}")
        if isinstance(node, dict) and not recursive:
            raise VfsError(f"is a directory: {path}")
        self._used -= self._subtree_bytes(node)
        del parent[parts[-1]]

    def wipe(self) -> None:
        self._root.clear()
        self._used = 0

    # -- accounting --------------------------------------------------------------

    @classmethod
    def _subtree_bytes(cls, node) -> int:
        if isinstance(node, dict):
            return sum(cls._subtree_bytes(v) for v in node.values())
        return len(node)

    @property
    def used_bytes(self) -> int:
        return self._used

    def snapshot_hash(self) -> int:
        import zlib

        def walk(node, prefix):
            acc = 0
            for name in sorted(node):
                child = node[name]
                key = f"{prefix}/{name}".encode()
                if isinstance(child, dict):
                    acc = zlib.crc32(key + b"/", acc)
                    acc = walk(child, f"{prefix}/{name}") ^ acc
                else:
                    acc = zlib.crc32(key + b"=" + child, acc)
            return acc

        return walk(self._root, "")
