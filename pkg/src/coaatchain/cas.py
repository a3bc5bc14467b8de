"""Content-addressed document store.

Documents live off-chain; the chain only carries their CID. A CID is the
SHA-256 of the stored bytes, rendered as ``cid:`` plus lowercase hex.
Blobs sit in a two-level fan-out directory keyed by that hex, published
atomically (write to a temp file, then rename), and every read re-hashes
the bytes so silent storage corruption surfaces as IntegrityViolation
instead of bad data.

Reads are deliberately authorization-free: stored documents are public,
access control applies only to resolving an SVC to a CID upstream.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import codec
from .errors import ContentTooLarge, EmptyContent, IntegrityViolation, NotFound

DEFAULT_MAX_BYTES = 32 * 1024 * 1024


@dataclass(frozen=True)
class Cid:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != 32:
            raise ValueError("cid digest must be 32 bytes")

    def render(self) -> str:
        return "cid:" + self.digest.hex()

    @classmethod
    def parse(cls, text: str) -> "Cid":
        if not text.startswith("cid:"):
            raise ValueError("cid must start with 'cid:'")
        return cls(bytes.fromhex(text[4:]))

    @classmethod
    def of(cls, content: bytes) -> "Cid":
        return cls(codec.sha256(content))

    def __str__(self) -> str:
        return self.render()


class ContentStore:
    def __init__(self, root: str | Path, max_bytes: int = DEFAULT_MAX_BYTES):
        self.root = Path(root)
        self.max_bytes = max_bytes
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, cid: Cid) -> Path:
        hexd = cid.digest.hex()
        return self.root / hexd[:2] / hexd[2:4] / hexd

    def put(self, content: bytes) -> Cid:
        if len(content) == 0:
            raise EmptyContent()
        if len(content) > self.max_bytes:
            raise ContentTooLarge(f"{len(content)} bytes > max {self.max_bytes}")
        cid = Cid.of(content)
        path = self._path(cid)
        if path.exists():
            return cid
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(content)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return cid

    def get(self, cid: Cid) -> bytes:
        path = self._path(cid)
        try:
            content = path.read_bytes()
        except FileNotFoundError:
            raise NotFound(cid.render()) from None
        if codec.sha256(content) != cid.digest:
            raise IntegrityViolation(f"stored bytes no longer match {cid.render()}")
        return content

    def has(self, cid: Cid) -> bool:
        """Presence only; says nothing about integrity."""
        return self._path(cid).is_file()

    def discard(self, cid: Cid) -> None:
        """Drop a blob if present; rolls back a store-first write whose
        transaction was then rejected."""
        try:
            self._path(cid).unlink()
        except FileNotFoundError:
            pass
