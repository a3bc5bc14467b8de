"""Contract factory and per-property state machines.

This is the consensus layer: ``ProtocolState.apply`` is a pure function of
(state, transaction). Every handler validates first and mutates only after
all checks pass, so a rejected transaction provably leaves the state (and
its root) untouched. Checks that need anything off-chain (signature
verification, blob bytes, SVC reservation bookkeeping) belong to the node
admission layer, never here; that is what makes a transaction log replay
byte-identically on a fresh instance.

Roles form a registrar chain: the system admin (Role 0) registers COAAT
admins (Role 1), who register their own staff (Role 2) and read-only
users (Role 3). Properties are registered by Roles 1-2, keyed by a unique
20-character cadastral reference, and each deploys a per-property contract
owning its dossiers. A property gets bound to the COAAT of its first
dossier's creator; that COAAT's admins are the only ones who can validate.

Dossier lifecycle:

    Open -> PendingValidation -> Validated | Rejected

Validated and Rejected are terminal; a rejected dossier is resubmitted as
a fresh dossier. At most one dossier per property is ever non-terminal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

from . import codec
from .cas import Cid
from .documents import Svc, checksum_valid
from .errors import (
    AddressAlreadyRegistered,
    AlreadyInitialized,
    DossierAlreadyOpen,
    DossierNotOpen,
    DuplicateProperty,
    EmptyDossier,
    InvalidRole,
    MalformedCadastralRef,
    MalformedSvc,
    MalformedTransaction,
    NotYetValidated,
    ReviewCountMismatch,
    SvcMismatch,
    Unauthorized,
    UnknownDossier,
    UnknownProperty,
    UnknownSvc,
    WrongStatus,
)
from .ledger import Address, Transaction, TxKind

CADASTRAL_REF_LENGTH = 20
_CADASTRAL_ALPHABET = frozenset("0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ")


def cadastral_ref_valid(ref: str) -> bool:
    return len(ref) == CADASTRAL_REF_LENGTH and all(c in _CADASTRAL_ALPHABET for c in ref)


class Role(IntEnum):
    SYSTEM_ADMIN = 0
    COAAT_ADMIN = 1
    COAAT_STAFF = 2
    READ_ONLY = 3


class DossierStatus(str, Enum):
    OPEN = "open"
    PENDING_VALIDATION = "pending_validation"
    VALIDATED = "validated"
    REJECTED = "rejected"

    @property
    def terminal(self) -> bool:
        return self in (DossierStatus.VALIDATED, DossierStatus.REJECTED)


class DocVersion(str, Enum):
    SUBMITTED = "submitted"
    REVIEWED = "reviewed"


class EventKind(str, Enum):
    DOSSIER_SUBMITTED = "DossierSubmitted"
    DOSSIER_STATUS_CHANGED = "DossierStatusChanged"


@dataclass
class Coaat:
    coaat_id: int
    name: str
    admin: Address


@dataclass
class UserRecord:
    address: Address
    role: Role
    registered_by: Address
    coaat_id: int | None
    name: str


@dataclass
class DocumentRecord:
    svc: str
    cid: Cid
    version: DocVersion
    uploader: Address
    tx_hash: bytes
    timestamp: int
    reviews: int | None = None  # index of the Submitted record a Reviewed one covers


@dataclass
class Dossier:
    property_ref: str
    seq: int
    creator: Address
    status: DossierStatus
    metadata: str
    created_at: int
    documents: list[DocumentRecord] = field(default_factory=list)
    decided_at: int | None = None
    decided_by: Address | None = None

    @property
    def dossier_id(self) -> str:
        return f"{self.property_ref}:{self.seq}"


@dataclass
class Property:
    cadastral_ref: str
    cadastral_data: str
    registered_by: Address
    contract_id: str
    registered_at: int
    coaat_id: int | None = None  # bound by the first dossier's creator
    dossiers: list[Dossier] = field(default_factory=list)


@dataclass
class Event:
    event_id: int
    kind: EventKind
    dossier_id: str
    audience_role: Role
    payload: dict[str, str]


def parse_dossier_id(text: str) -> tuple[str, int]:
    ref, sep, seq = text.rpartition(":")
    if not sep or not seq.isdigit():
        raise UnknownDossier(text)
    return ref, int(seq)


# Canonical payload encodings, one per operation, arguments in declared order.

def encode_add_coaat(new_admin: Address, name: str) -> bytes:
    return new_admin.value + codec.lp_str(name)


def encode_add_user(new_user: Address, role: int, name: str) -> bytes:
    return new_user.value + codec.u8(role) + codec.lp_str(name)


def encode_register_property(ref: str, data: str) -> bytes:
    return codec.lp_str(ref) + codec.lp_str(data)


def encode_create_dossier(ref: str, metadata: str) -> bytes:
    return codec.lp_str(ref) + codec.lp_str(metadata)


def encode_add_file(ref: str, seq: int, svc: Svc, cid: Cid) -> bytes:
    return codec.lp_str(ref) + codec.u32(seq) + svc.code.encode("ascii") + cid.digest


def encode_request_validation(ref: str, seq: int) -> bytes:
    return codec.lp_str(ref) + codec.u32(seq)


_DECISION_CODES = {DossierStatus.VALIDATED: 1, DossierStatus.REJECTED: 2}


def encode_validate_dossier(
    ref: str, seq: int, decision: DossierStatus, reviews: list[tuple[Svc, Cid]]
) -> bytes:
    if decision not in _DECISION_CODES:
        raise MalformedTransaction(f"decision must be validated or rejected, got {decision}")
    parts = [
        codec.lp_str(ref),
        codec.u32(seq),
        codec.u8(_DECISION_CODES[decision]),
        codec.u32(len(reviews)),
    ]
    for svc, cid in reviews:
        parts.append(svc.code.encode("ascii"))
        parts.append(cid.digest)
    return b"".join(parts)


class ProtocolState:
    """Full application state plus the transition function."""

    def __init__(self):
        self.initialized = False
        self.users: dict[Address, UserRecord] = {}
        self.coaats: dict[int, Coaat] = {}
        self.properties: dict[str, Property] = {}
        self.svc_index: dict[str, tuple[str, int, int]] = {}  # code -> (ref, seq, doc idx)
        self.events: list[Event] = []
        self.next_coaat_id = 1
        self.next_event_id = 1
        self.nonces: dict[Address, int] = {}

    # -- StateMachine interface ------------------------------------------

    def nonce_for(self, sender: Address) -> int:
        return self.nonces.get(sender, 0)

    def apply(self, tx: Transaction) -> list[int]:
        handler = _HANDLERS[tx.kind]
        try:
            events = handler(self, tx)
        except ValueError as exc:
            raise MalformedTransaction(str(exc)) from exc
        self.nonces[tx.sender] = self.nonces.get(tx.sender, 0) + 1
        return events

    def root(self) -> bytes:
        return codec.tree_hash(self.to_tree())

    # -- transition handlers (validate first, mutate last) ---------------

    def _apply_kickoff(self, tx: Transaction) -> list[int]:
        if self.initialized:
            raise AlreadyInitialized()
        if tx.payload:
            raise MalformedTransaction("kickoff carries no payload")
        self.initialized = True
        self.users[tx.sender] = UserRecord(
            address=tx.sender,
            role=Role.SYSTEM_ADMIN,
            registered_by=tx.sender,
            coaat_id=None,
            name="",
        )
        return []

    def _apply_add_coaat(self, tx: Transaction) -> list[int]:
        self._require_role(tx.sender, Role.SYSTEM_ADMIN)
        r = codec.Reader(tx.payload)
        new_admin = Address(r.take(20))
        name = r.lp_str()
        r.expect_end()
        if new_admin in self.users:
            raise AddressAlreadyRegistered(new_admin.render())
        coaat_id = self.next_coaat_id
        self.next_coaat_id += 1
        self.coaats[coaat_id] = Coaat(coaat_id, name, new_admin)
        self.users[new_admin] = UserRecord(
            address=new_admin,
            role=Role.COAAT_ADMIN,
            registered_by=tx.sender,
            coaat_id=coaat_id,
            name=name,
        )
        return []

    def _apply_add_user(self, tx: Transaction) -> list[int]:
        registrar = self._require_role(tx.sender, Role.COAAT_ADMIN)
        r = codec.Reader(tx.payload)
        new_user = Address(r.take(20))
        role_code = r.u8()
        name = r.lp_str()
        r.expect_end()
        if role_code not in (Role.COAAT_STAFF.value, Role.READ_ONLY.value):
            raise InvalidRole(f"COAAT admins register roles 2 and 3, got {role_code}")
        if new_user in self.users:
            raise AddressAlreadyRegistered(new_user.render())
        self.users[new_user] = UserRecord(
            address=new_user,
            role=Role(role_code),
            registered_by=tx.sender,
            coaat_id=registrar.coaat_id,
            name=name,
        )
        return []

    def _apply_register_property(self, tx: Transaction) -> list[int]:
        self._require_role(tx.sender, Role.COAAT_ADMIN, Role.COAAT_STAFF)
        r = codec.Reader(tx.payload)
        ref = r.lp_str()
        data = r.lp_str()
        r.expect_end()
        if not cadastral_ref_valid(ref):
            raise MalformedCadastralRef(ref)
        if ref in self.properties:
            raise DuplicateProperty(ref)
        contract_id = Address.derive(b"property-contract:" + ref.encode("ascii"))
        self.properties[ref] = Property(
            cadastral_ref=ref,
            cadastral_data=data,
            registered_by=tx.sender,
            contract_id=contract_id.render(),
            registered_at=tx.timestamp,
        )
        return []

    def _apply_create_dossier(self, tx: Transaction) -> list[int]:
        creator = self._require_role(tx.sender, Role.COAAT_ADMIN, Role.COAAT_STAFF)
        r = codec.Reader(tx.payload)
        ref = r.lp_str()
        metadata = r.lp_str()
        r.expect_end()
        prop = self._property(ref)
        if prop.coaat_id is not None and prop.coaat_id != creator.coaat_id:
            raise Unauthorized(f"property {ref} is managed by another COAAT")
        if any(not d.status.terminal for d in prop.dossiers):
            raise DossierAlreadyOpen(ref)
        if prop.coaat_id is None:
            prop.coaat_id = creator.coaat_id
        dossier = Dossier(
            property_ref=ref,
            seq=len(prop.dossiers) + 1,
            creator=tx.sender,
            status=DossierStatus.OPEN,
            metadata=metadata,
            created_at=tx.timestamp,
        )
        prop.dossiers.append(dossier)
        return []

    def _apply_add_file(self, tx: Transaction) -> list[int]:
        r = codec.Reader(tx.payload)
        ref = r.lp_str()
        seq = r.u32()
        code = r.take(16).decode("ascii")
        cid = Cid(r.take(32))
        r.expect_end()
        dossier = self._dossier(ref, seq)
        if tx.sender != dossier.creator:
            raise Unauthorized("only the dossier's creator may add documents")
        if dossier.status is not DossierStatus.OPEN:
            raise DossierNotOpen(dossier.dossier_id)
        if not checksum_valid(code):
            raise MalformedSvc(code)
        if code in self.svc_index:
            raise SvcMismatch(f"SVC {code} is already bound to a document")
        record = DocumentRecord(
            svc=code,
            cid=cid,
            version=DocVersion.SUBMITTED,
            uploader=tx.sender,
            tx_hash=tx.tx_hash,
            timestamp=tx.timestamp,
        )
        self.svc_index[code] = (ref, seq, len(dossier.documents))
        dossier.documents.append(record)
        return []

    def _apply_request_validation(self, tx: Transaction) -> list[int]:
        r = codec.Reader(tx.payload)
        ref = r.lp_str()
        seq = r.u32()
        r.expect_end()
        dossier = self._dossier(ref, seq)
        if tx.sender != dossier.creator:
            raise Unauthorized("only the dossier's creator may request validation")
        if dossier.status is not DossierStatus.OPEN:
            raise WrongStatus(f"{dossier.dossier_id} is {dossier.status.value}")
        if not dossier.documents:
            raise EmptyDossier(dossier.dossier_id)
        dossier.status = DossierStatus.PENDING_VALIDATION
        event_id = self._emit(
            EventKind.DOSSIER_SUBMITTED,
            dossier,
            audience=Role.COAAT_ADMIN,
        )
        return [event_id]

    def _apply_validate_dossier(self, tx: Transaction) -> list[int]:
        admin = self._require_role(tx.sender, Role.COAAT_ADMIN)
        r = codec.Reader(tx.payload)
        ref = r.lp_str()
        seq = r.u32()
        decision_code = r.u8()
        count = r.u32()
        reviews = []
        for _ in range(count):
            code = r.take(16).decode("ascii")
            cid = Cid(r.take(32))
            reviews.append((code, cid))
        r.expect_end()
        if decision_code not in (1, 2):
            raise MalformedTransaction(f"unknown decision code {decision_code}")
        decision = DossierStatus.VALIDATED if decision_code == 1 else DossierStatus.REJECTED
        dossier = self._dossier(ref, seq)
        prop = self.properties[ref]
        if admin.coaat_id != prop.coaat_id:
            raise Unauthorized("dossier belongs to another COAAT")
        if dossier.status is not DossierStatus.PENDING_VALIDATION:
            raise WrongStatus(f"{dossier.dossier_id} is {dossier.status.value}")
        submitted = [d for d in dossier.documents if d.version is DocVersion.SUBMITTED]
        if len(reviews) != len(submitted):
            raise ReviewCountMismatch(f"{len(reviews)} reviewed vs {len(submitted)} submitted")
        seen = set()
        for code, _ in reviews:
            if not checksum_valid(code):
                raise MalformedSvc(code)
            if code in self.svc_index or code in seen:
                raise SvcMismatch(f"SVC {code} is already bound to a document")
            seen.add(code)
        for i, (code, cid) in enumerate(reviews):
            record = DocumentRecord(
                svc=code,
                cid=cid,
                version=DocVersion.REVIEWED,
                uploader=tx.sender,
                tx_hash=tx.tx_hash,
                timestamp=tx.timestamp,
                reviews=i,
            )
            self.svc_index[code] = (ref, seq, len(dossier.documents))
            dossier.documents.append(record)
        dossier.status = decision
        dossier.decided_at = tx.timestamp
        dossier.decided_by = tx.sender
        event_id = self._emit(
            EventKind.DOSSIER_STATUS_CHANGED,
            dossier,
            audience=Role.COAAT_STAFF,
        )
        return [event_id]

    def _emit(self, kind: EventKind, dossier: Dossier, audience: Role) -> int:
        event = Event(
            event_id=self.next_event_id,
            kind=kind,
            dossier_id=dossier.dossier_id,
            audience_role=audience,
            payload={"property": dossier.property_ref, "status": dossier.status.value},
        )
        self.next_event_id += 1
        self.events.append(event)
        return event.event_id

    # -- lookups -----------------------------------------------------------

    def _require_role(self, sender: Address, *roles: Role) -> UserRecord:
        record = self.users.get(sender)
        if record is None or record.role not in roles:
            raise Unauthorized(f"{sender} lacks the required role")
        return record

    def _property(self, ref: str) -> Property:
        prop = self.properties.get(ref)
        if prop is None:
            raise UnknownProperty(ref)
        return prop

    def _dossier(self, ref: str, seq: int) -> Dossier:
        prop = self._property(ref)
        if not 1 <= seq <= len(prop.dossiers):
            raise UnknownDossier(f"{ref}:{seq}")
        return prop.dossiers[seq - 1]

    # -- read-only queries (no transaction, no fee) -------------------------

    def user(self, address: Address) -> UserRecord | None:
        return self.users.get(address)

    def property_record(self, ref: str) -> Property:
        return self._property(ref)

    def dossier(self, ref: str, seq: int) -> Dossier:
        return self._dossier(ref, seq)

    def resolve_svc(self, code: str) -> tuple[Property, Dossier, DocumentRecord]:
        entry = self.svc_index.get(code)
        if entry is None:
            raise UnknownSvc(code)
        ref, seq, idx = entry
        prop = self.properties[ref]
        dossier = prop.dossiers[seq - 1]
        return prop, dossier, dossier.documents[idx]

    def check_view(self, caller: Address, dossier: Dossier) -> None:
        """View policy: validated dossiers are readable by every registered
        user; before that, only the owning COAAT's admins and the dossier's
        creator see anything."""
        record = self.users.get(caller)
        if record is None:
            raise Unauthorized("caller is not registered")
        if dossier.status is DossierStatus.VALIDATED:
            return
        prop = self.properties[dossier.property_ref]
        if record.role is Role.COAAT_ADMIN and record.coaat_id == prop.coaat_id:
            return
        if caller == dossier.creator:
            return
        raise NotYetValidated(dossier.dossier_id)

    def list_dossiers(self, caller: Address, ref: str) -> list[dict]:
        record = self.users.get(caller)
        if record is None or record.role not in (Role.COAAT_ADMIN, Role.COAAT_STAFF):
            raise Unauthorized("dossier listings are for COAAT admins and staff")
        prop = self._property(ref)
        entries = []
        for dossier in prop.dossiers:
            privileged = (
                record.role is Role.COAAT_ADMIN and record.coaat_id == prop.coaat_id
            ) or caller == dossier.creator
            entry = {
                "dossier_id": dossier.dossier_id,
                "seq": dossier.seq,
                "status": dossier.status.value,
                "creator": dossier.creator.render(),
                "document_count": len(dossier.documents),
                "created_at": dossier.created_at,
                "decided_at": dossier.decided_at,
            }
            if privileged:
                entry["metadata"] = dossier.metadata
                entry["documents"] = [
                    {
                        "svc": d.svc,
                        "cid": Cid(d.cid.digest).render(),
                        "version": d.version.value,
                        "timestamp": d.timestamp,
                    }
                    for d in dossier.documents
                ]
            entries.append(entry)
        return entries

    def events_since(self, since_id: int, role: Role | None = None) -> list[Event]:
        return [
            e
            for e in self.events
            if e.event_id > since_id and (role is None or e.audience_role == role)
        ]

    # -- canonical state tree (snapshots and state roots) --------------------

    def to_tree(self) -> dict:
        return {
            "initialized": self.initialized,
            "next_coaat_id": self.next_coaat_id,
            "next_event_id": self.next_event_id,
            "nonces": {a.render(): n for a, n in self.nonces.items()},
            "coaats": {
                str(cid): {"name": c.name, "admin": c.admin.value}
                for cid, c in self.coaats.items()
            },
            "users": {
                a.render(): {
                    "role": int(u.role),
                    "registered_by": u.registered_by.value,
                    "coaat_id": u.coaat_id,
                    "name": u.name,
                }
                for a, u in self.users.items()
            },
            "properties": {
                ref: {
                    "cadastral_data": p.cadastral_data,
                    "registered_by": p.registered_by.value,
                    "contract_id": p.contract_id,
                    "registered_at": p.registered_at,
                    "coaat_id": p.coaat_id,
                    "dossiers": [
                        {
                            "seq": d.seq,
                            "creator": d.creator.value,
                            "status": d.status.value,
                            "metadata": d.metadata,
                            "created_at": d.created_at,
                            "decided_at": d.decided_at,
                            "decided_by": d.decided_by.value if d.decided_by else None,
                            "documents": [
                                {
                                    "svc": doc.svc,
                                    "cid": doc.cid.digest,
                                    "version": doc.version.value,
                                    "uploader": doc.uploader.value,
                                    "tx_hash": doc.tx_hash,
                                    "timestamp": doc.timestamp,
                                    "reviews": doc.reviews,
                                }
                                for doc in d.documents
                            ],
                        }
                        for d in p.dossiers
                    ],
                }
                for ref, p in self.properties.items()
            },
            "svc_index": {
                code: {"property": ref, "seq": seq, "doc": idx}
                for code, (ref, seq, idx) in self.svc_index.items()
            },
            "events": [
                {
                    "id": e.event_id,
                    "kind": e.kind.value,
                    "dossier_id": e.dossier_id,
                    "audience_role": int(e.audience_role),
                    "payload": dict(e.payload),
                }
                for e in self.events
            ],
        }

    @classmethod
    def from_tree(cls, tree: dict) -> "ProtocolState":
        state = cls()
        state.initialized = tree["initialized"]
        state.next_coaat_id = tree["next_coaat_id"]
        state.next_event_id = tree["next_event_id"]
        state.nonces = {Address.parse(a): n for a, n in tree["nonces"].items()}
        state.coaats = {
            int(cid): Coaat(int(cid), c["name"], Address(c["admin"]))
            for cid, c in tree["coaats"].items()
        }
        state.users = {
            Address.parse(a): UserRecord(
                address=Address.parse(a),
                role=Role(u["role"]),
                registered_by=Address(u["registered_by"]),
                coaat_id=u["coaat_id"],
                name=u["name"],
            )
            for a, u in tree["users"].items()
        }
        for ref, p in tree["properties"].items():
            prop = Property(
                cadastral_ref=ref,
                cadastral_data=p["cadastral_data"],
                registered_by=Address(p["registered_by"]),
                contract_id=p["contract_id"],
                registered_at=p["registered_at"],
                coaat_id=p["coaat_id"],
            )
            for d in p["dossiers"]:
                dossier = Dossier(
                    property_ref=ref,
                    seq=d["seq"],
                    creator=Address(d["creator"]),
                    status=DossierStatus(d["status"]),
                    metadata=d["metadata"],
                    created_at=d["created_at"],
                    decided_at=d["decided_at"],
                    decided_by=Address(d["decided_by"]) if d["decided_by"] else None,
                )
                for doc in d["documents"]:
                    dossier.documents.append(
                        DocumentRecord(
                            svc=doc["svc"],
                            cid=Cid(doc["cid"]),
                            version=DocVersion(doc["version"]),
                            uploader=Address(doc["uploader"]),
                            tx_hash=doc["tx_hash"],
                            timestamp=doc["timestamp"],
                            reviews=doc["reviews"],
                        )
                    )
                prop.dossiers.append(dossier)
            state.properties[ref] = prop
        state.svc_index = {
            code: (e["property"], e["seq"], e["doc"])
            for code, e in tree["svc_index"].items()
        }
        state.events = [
            Event(
                event_id=e["id"],
                kind=EventKind(e["kind"]),
                dossier_id=e["dossier_id"],
                audience_role=Role(e["audience_role"]),
                payload={k: v for k, v in e["payload"].items()},
            )
            for e in tree["events"]
        ]
        return state


_HANDLERS = {
    TxKind.KICKOFF: ProtocolState._apply_kickoff,
    TxKind.ADD_COAAT: ProtocolState._apply_add_coaat,
    TxKind.ADD_USER: ProtocolState._apply_add_user,
    TxKind.REGISTER_PROPERTY: ProtocolState._apply_register_property,
    TxKind.CREATE_DOSSIER: ProtocolState._apply_create_dossier,
    TxKind.ADD_FILE: ProtocolState._apply_add_file,
    TxKind.REQUEST_VALIDATION: ProtocolState._apply_request_validation,
    TxKind.VALIDATE_DOSSIER: ProtocolState._apply_validate_dossier,
}
