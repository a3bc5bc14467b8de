"""Secure Verification Codes and the document signature envelope.

An SVC is a 16-character code over the Crockford base32 alphabet (no
I, L, O, U, so it survives e-mail, paper, and phone transcription):
14 payload characters carrying 70 bits of entropy, then 2 checksum
characters holding the first 10 bits of SHA-256 over the payload
characters. The checksum is decidable from the string alone.

The code is bound to a document by a plain-text marker line appended to
the document bytes:

    SVC: <16 characters>\\n

byte-exact, exactly once per document. Documents themselves stay opaque
bytes.

Signatures are a keyed-MAC envelope: a 32-byte HMAC-SHA256 tag over
(body, signer) under the signer's registered secret. The key registry is
node-local; nothing here ever reaches the chain.
"""

from __future__ import annotations

import hmac
import re
import secrets
import threading
from dataclasses import dataclass
from typing import Callable

from . import codec
from .errors import (
    MalformedSvc,
    MarkerAlreadyPresent,
    MissingSvcMarker,
    SignatureInvalid,
    UnknownSigner,
)
from .ledger import Address

CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"
SVC_LENGTH = 16
SVC_PAYLOAD_CHARS = 14
SVC_CHECKSUM_CHARS = 2

EntropySource = Callable[[int], bytes]


def _checksum(payload: str) -> str:
    digest = codec.sha256(payload.encode("ascii"))
    bits = int.from_bytes(digest[:2], "big") >> 6  # first 10 bits
    return CROCKFORD[bits >> 5] + CROCKFORD[bits & 0x1F]


def checksum_valid(code: str) -> bool:
    if len(code) != SVC_LENGTH or any(c not in CROCKFORD for c in code):
        return False
    return code[SVC_PAYLOAD_CHARS:] == _checksum(code[:SVC_PAYLOAD_CHARS])


@dataclass(frozen=True)
class Svc:
    code: str

    def __post_init__(self):
        if not checksum_valid(self.code):
            raise MalformedSvc(self.code)

    @classmethod
    def parse(cls, text: str) -> "Svc":
        return cls(text)

    def __str__(self) -> str:
        return self.code


def generate_svc(entropy: EntropySource = secrets.token_bytes) -> Svc:
    """Mint a fresh code: 70 random bits, then the derived checksum."""
    bits = int.from_bytes(entropy(9), "big") >> 2
    payload = "".join(
        CROCKFORD[(bits >> (5 * i)) & 0x1F] for i in reversed(range(SVC_PAYLOAD_CHARS))
    )
    return Svc(payload + _checksum(payload))


MARKER_PREFIX = b"SVC: "
_MARKER_RE = re.compile(rb"^SVC: ([0-9A-Z]{16})$")


def _marker_line(svc: Svc) -> bytes:
    return MARKER_PREFIX + svc.code.encode("ascii") + b"\n"


def _find_marker_lines(content: bytes) -> list[bytes]:
    return [line for line in content.split(b"\n") if line.startswith(MARKER_PREFIX)]


def embed_svc(content: bytes, svc: Svc) -> bytes:
    if _find_marker_lines(content):
        raise MarkerAlreadyPresent()
    sep = b"" if (not content or content.endswith(b"\n")) else b"\n"
    return content + sep + _marker_line(svc)


def extract_svc(content: bytes) -> Svc:
    markers = _find_marker_lines(content)
    if not markers:
        raise MissingSvcMarker()
    if len(markers) > 1:
        raise MarkerAlreadyPresent("more than one marker line")
    match = _MARKER_RE.match(markers[0])
    if match is None:
        raise MalformedSvc(markers[0].decode("ascii", errors="replace"))
    return Svc(match.group(1).decode("ascii"))


def strip_svc(content: bytes) -> tuple[bytes, Svc]:
    """Remove the single marker line; used when re-stamping a reviewed copy."""
    svc = extract_svc(content)
    lines = [l for l in content.split(b"\n") if not l.startswith(MARKER_PREFIX)]
    stripped = b"\n".join(lines)
    return stripped, svc


KEY_SIZE = 32


@dataclass(frozen=True)
class SigningKey:
    secret: bytes

    def __post_init__(self):
        if len(self.secret) != KEY_SIZE:
            raise ValueError(f"signing key must be {KEY_SIZE} bytes")

    @classmethod
    def generate(cls, entropy: EntropySource = secrets.token_bytes) -> "SigningKey":
        return cls(entropy(KEY_SIZE))


def _tag(body: bytes, signer: Address, key: SigningKey) -> bytes:
    return hmac.new(key.secret, body + signer.value, "sha256").digest()


@dataclass(frozen=True)
class SignedDocument:
    body: bytes
    signer: Address
    signature: bytes

    @property
    def embedded_svc(self) -> Svc:
        return extract_svc(self.body)


def sign(body: bytes, signer: Address, key: SigningKey) -> SignedDocument:
    extract_svc(body)  # exactly one marker required before signing
    return SignedDocument(body=body, signer=signer, signature=_tag(body, signer, key))


def login_proof(nonce: bytes, address: Address, key: SigningKey) -> bytes:
    """Possession proof for token login: the same MAC envelope, over the
    server's nonce instead of a document body."""
    return _tag(nonce, address, key)


class KeyRegistry:
    """Per-address secrets. Concurrent reads, serialized registration."""

    def __init__(self, keys: dict[Address, SigningKey] | None = None):
        self._keys = dict(keys or {})
        self._lock = threading.Lock()

    def register(self, address: Address, key: SigningKey) -> None:
        with self._lock:
            self._keys[address] = key

    def key_for(self, address: Address) -> SigningKey:
        try:
            return self._keys[address]
        except KeyError:
            raise UnknownSigner(address.render()) from None

    def has(self, address: Address) -> bool:
        return address in self._keys

    def items(self) -> list[tuple[Address, SigningKey]]:
        with self._lock:
            return list(self._keys.items())


def verify(doc: SignedDocument, registry: KeyRegistry) -> Address:
    key = registry.key_for(doc.signer)
    expected = _tag(doc.body, doc.signer, key)
    if not hmac.compare_digest(expected, doc.signature):
        raise SignatureInvalid()
    return doc.signer
