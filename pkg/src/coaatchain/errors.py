"""Protocol error hierarchy.

Every error that can cross a module or wire boundary has a stable name
(the class name). The HTTP service and the CLI report that name verbatim,
so renaming a class here is a breaking interface change.
"""

from __future__ import annotations


class ProtocolError(Exception):
    """Base class for all protocol-level failures."""

    @property
    def name(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:
        detail = super().__str__()
        return f"{self.name}: {detail}" if detail else self.name


# Ledger

class DuplicateNonce(ProtocolError):
    pass


class MalformedTransaction(ProtocolError):
    pass


class RejectedByContract(ProtocolError):
    """Wraps the contract-layer error that kept a transaction off the chain."""

    def __init__(self, inner: ProtocolError):
        super().__init__(inner.name)
        self.inner = inner


class ReplayDivergence(ProtocolError):
    pass


class CorruptChain(ProtocolError):
    """Persisted chain record failed to decode."""

    def __init__(self, height: int, detail: str = ""):
        super().__init__(f"height {height}" + (f": {detail}" if detail else ""))
        self.height = height


# Content-addressed store

class EmptyContent(ProtocolError):
    pass


class ContentTooLarge(ProtocolError):
    pass


class NotFound(ProtocolError):
    pass


class IntegrityViolation(ProtocolError):
    pass


# Documents and signatures

class MalformedSvc(ProtocolError):
    pass


class MarkerAlreadyPresent(ProtocolError):
    pass


class MissingSvcMarker(ProtocolError):
    pass


class SignatureInvalid(ProtocolError):
    pass


class UnknownSigner(ProtocolError):
    pass


# Contracts

class AlreadyInitialized(ProtocolError):
    pass


class Unauthorized(ProtocolError):
    pass


class AddressAlreadyRegistered(ProtocolError):
    pass


class InvalidRole(ProtocolError):
    pass


class MalformedCadastralRef(ProtocolError):
    pass


class DuplicateProperty(ProtocolError):
    pass


class UnknownProperty(ProtocolError):
    pass


class UnknownDossier(ProtocolError):
    pass


class DossierAlreadyOpen(ProtocolError):
    pass


class DossierNotOpen(ProtocolError):
    pass


class WrongStatus(ProtocolError):
    pass


class EmptyDossier(ProtocolError):
    pass


class SvcMismatch(ProtocolError):
    pass


class ReviewCountMismatch(ProtocolError):
    pass


class UnknownSvc(ProtocolError):
    pass


class NotYetValidated(ProtocolError):
    pass


# Service authentication

class UnknownToken(ProtocolError):
    pass


class InvalidProof(ProtocolError):
    pass
