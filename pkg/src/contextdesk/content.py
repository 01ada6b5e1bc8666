"""Content-addressed blob storage and the archive store.

Items with payloads (files, mails, notes) keep their bytes under
``content/<sha256>``; archiving moves the blob into ``archive/<sha256>``
and appends one line to a plain-text index mapping node id -> hash ->
original path, so an archived item's bytes stay reachable outside the
live store.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from .clock import iso


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class ContentStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> str:
        digest = sha256_hex(data)
        path = self.root / digest
        if not path.exists():
            path.write_bytes(data)
        return digest

    def get(self, digest: str) -> bytes:
        return (self.root / digest).read_bytes()

    def has(self, digest: str) -> bool:
        return (self.root / digest).exists()

    def remove(self, digest: str) -> None:
        (self.root / digest).unlink(missing_ok=True)


class ArchiveStore:
    """Destination of the ARCHIVE forgetting measure."""

    def __init__(self, root: Path | str, index_path: Path | str | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = Path(index_path) if index_path else self.root.parent / "archive.index"

    def archive(self, node_id: str, digest: str, content: ContentStore, original_path: str, now) -> None:
        src = content.root / digest
        dst = self.root / digest
        if src.exists() and not dst.exists():
            dst.write_bytes(src.read_bytes())
        content.remove(digest)
        self._index_line("archived", node_id, digest, original_path, now)

    def restore(self, node_id: str, digest: str, content: ContentStore, now) -> None:
        src = self.root / digest
        if src.exists() and not content.has(digest):
            content.put(src.read_bytes())
        self._index_line("restored", node_id, digest, "", now)

    def has(self, digest: str) -> bool:
        return (self.root / digest).exists()

    def _index_line(self, action: str, node_id: str, digest: str, original_path: str, now) -> None:
        with open(self.index_path, "a", encoding="utf-8") as fh:
            fh.write(f"{action}\t{node_id}\t{digest}\t{original_path}\t{iso(now)}\n")


class NullArchiveStore(ArchiveStore):
    """No-op archive used by dry-run clones so previews move no bytes."""

    def __init__(self):  # noqa: D401 - no directories
        self.root = None
        self.index_path = None

    def archive(self, node_id, digest, content, original_path, now):  # noqa: ARG002
        pass

    def restore(self, node_id, digest, content, now):  # noqa: ARG002
        pass

    def has(self, digest):  # noqa: ARG002
        return False
