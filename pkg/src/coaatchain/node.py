"""A running protocol instance: one data directory, one chain.

The node owns the admission path. Anything that needs off-chain artifacts
is checked here, before a transaction exists: document signatures against
the node keyring, SVC reservations, blob storage. Once a transaction is
built, acceptance depends only on consensus state, so a stored log replays
identically on a node that has none of this local material.

Startup recovery: decode the block log, verify the hash chain, then
rebuild state from the newest verifiable snapshot (or genesis) by
re-applying the remaining transactions, cross-checking every stored
state root along the way.
"""

from __future__ import annotations

import secrets
import threading
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from . import fees, storage
from .cas import Cid, ContentStore
from .contracts import (
    Dossier,
    DossierStatus,
    DocumentRecord,
    Event,
    Property,
    ProtocolState,
    Role,
    UserRecord,
    encode_add_coaat,
    encode_add_user,
    encode_add_file,
    encode_create_dossier,
    encode_register_property,
    encode_request_validation,
    encode_validate_dossier,
)
from .documents import (
    EntropySource,
    SignedDocument,
    SigningKey,
    Svc,
    extract_svc,
    generate_svc,
    verify,
)
from .errors import (
    CorruptChain,
    IntegrityViolation,
    MalformedTransaction,
    ProtocolError,
    RejectedByContract,
    SvcMismatch,
    Unauthorized,
    WrongStatus,
)
from .ledger import (
    Address,
    AuditReport,
    Block,
    Clock,
    CostReport,
    Ledger,
    Receipt,
    Transaction,
    TxKind,
    chain_dump,
    system_clock,
    total_cost,
    verify_chain,
)


@dataclass(frozen=True)
class Enrollment:
    """Result of registering an identity: the receipt plus the signing key
    issued for the new address (returned once, then kept node-local)."""

    receipt: Receipt
    address: Address
    signing_key: SigningKey


@dataclass(frozen=True)
class DossierReceipt:
    receipt: Receipt
    dossier_id: str
    seq: int


@dataclass(frozen=True)
class DocumentReceipt:
    receipt: Receipt
    svc: str
    cid: Cid


@dataclass(frozen=True)
class DecisionReceipt:
    receipt: Receipt
    status: DossierStatus
    reviews: tuple[tuple[str, Cid], ...]


@dataclass(frozen=True)
class DocumentView:
    body: bytes
    record: DocumentRecord
    dossier: Dossier
    prop: Property


class CoaatChainNode:
    """Single-process node over a data directory.

    All mutating entry points serialize on one lock, making an admission
    check plus its transaction atomic. Queries read committed state only.
    """

    def __init__(
        self,
        data_dir: str | Path,
        schedule=None,
        clock: Clock = system_clock,
        entropy: EntropySource = secrets.token_bytes,
        snapshot_every: int = 32,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.entropy = entropy
        self.snapshot_every = snapshot_every

        config_path = self.data_dir / storage.CONFIG_FILE
        if schedule is not None:
            self.schedule = schedule
            fees.save_schedule(schedule, config_path)
        elif config_path.exists():
            self.schedule = fees.load_schedule(config_path)
        else:
            self.schedule = fees.testnet_schedule()
            fees.save_schedule(self.schedule, config_path)

        self.registry = storage.Registry(self.data_dir / storage.REGISTRY_FILE)
        self.blobs = ContentStore(self.data_dir / storage.BLOB_DIR)
        self.store = storage.ChainStore(self.data_dir / storage.CHAIN_LOG)

        self._lock = threading.RLock()
        blocks = self.store.read_blocks()
        state = ProtocolState()
        if blocks:
            report = verify_chain(blocks)
            if not report.ok:
                raise CorruptChain(report.first_corrupt_height, "hash chain broken")
            start = 0
            snap = storage.load_latest_snapshot(self.data_dir / storage.SNAPSHOT_DIR)
            if snap is not None:
                height, root, tree = snap
                if height < len(blocks) and blocks[height].state_root == root:
                    state = ProtocolState.from_tree(tree)
                    start = height
            _replay_blocks(state, blocks, start)
            self.ledger = Ledger(state, clock=clock, sink=self.store, blocks=blocks)
        else:
            self.ledger = Ledger(state, clock=clock, sink=self.store)
        self.state = state

    # -- identity and fee context -----------------------------------------

    def user_record(self, address: Address) -> UserRecord | None:
        with self._lock:
            return self.state.user(address)

    def fee_quote(self, kind: TxKind) -> tuple[Decimal, Decimal]:
        fee = self.schedule.fee_bnb(kind)
        return fee, self.schedule.fee_usd(fee)

    # -- mutating operations ----------------------------------------------

    def kickoff(self, sender: Address) -> Enrollment:
        with self._lock:
            receipt = self._submit(TxKind.KICKOFF, sender, b"")
            return Enrollment(receipt, sender, self._issue_key(sender))

    def add_coaat(self, sender: Address, new_admin: Address, name: str) -> Enrollment:
        with self._lock:
            payload = encode_add_coaat(new_admin, name)
            receipt = self._submit(TxKind.ADD_COAAT, sender, payload)
            return Enrollment(receipt, new_admin, self._issue_key(new_admin))

    def add_user(
        self, sender: Address, new_user: Address, role: int, name: str
    ) -> Enrollment:
        with self._lock:
            payload = encode_add_user(new_user, role, name)
            receipt = self._submit(TxKind.ADD_USER, sender, payload)
            return Enrollment(receipt, new_user, self._issue_key(new_user))

    def register_property(self, sender: Address, ref: str, data: str = "") -> Receipt:
        with self._lock:
            return self._submit(
                TxKind.REGISTER_PROPERTY, sender, encode_register_property(ref, data)
            )

    def create_dossier(self, sender: Address, ref: str, metadata: str = "") -> DossierReceipt:
        with self._lock:
            receipt = self._submit(
                TxKind.CREATE_DOSSIER, sender, encode_create_dossier(ref, metadata)
            )
            seq = len(self.state.properties[ref].dossiers)
            return DossierReceipt(receipt, f"{ref}:{seq}", seq)

    def reserve_svc(self, sender: Address, ref: str, seq: int) -> Svc:
        """Mint a code for one future document slot of a dossier. Free: no
        transaction is written until the document itself arrives."""
        with self._lock:
            dossier = self.state.dossier(ref, seq)
            self._check_may_attach(sender, dossier)
            while True:
                svc = generate_svc(self.entropy)
                if (
                    svc.code not in self.registry.reservations
                    and svc.code not in self.state.svc_index
                ):
                    break
            self.registry.reserve(svc.code, sender, dossier.dossier_id)
            return svc

    def add_document(
        self, sender: Address, ref: str, seq: int, signed: SignedDocument
    ) -> DocumentReceipt:
        with self._lock:
            self._verify_envelope(sender, signed)
            svc = extract_svc(signed.body)
            self._check_reservation(svc.code, sender, f"{ref}:{seq}")
            cid, fresh = self._store_blob(signed.body)
            payload = encode_add_file(ref, seq, svc, cid)
            try:
                receipt = self._submit(TxKind.ADD_FILE, sender, payload)
            except ProtocolError:
                if fresh:
                    self.blobs.discard(cid)
                raise
            self.registry.consume(svc.code)
            return DocumentReceipt(receipt, svc.code, cid)

    def request_validation(self, sender: Address, ref: str, seq: int) -> Receipt:
        with self._lock:
            return self._submit(
                TxKind.REQUEST_VALIDATION, sender, encode_request_validation(ref, seq)
            )

    def validate_dossier(
        self,
        sender: Address,
        ref: str,
        seq: int,
        decision: DossierStatus,
        reviewed: list[SignedDocument],
    ) -> DecisionReceipt:
        """Decide a pending dossier. ``reviewed`` carries one signed reviewed
        copy per submitted document, in submission order, each embedding its
        own freshly reserved SVC."""
        if decision not in (DossierStatus.VALIDATED, DossierStatus.REJECTED):
            raise MalformedTransaction("decision must be validated or rejected")
        with self._lock:
            dossier_id = f"{ref}:{seq}"
            pairs: list[tuple[Svc, bytes]] = []
            for doc in reviewed:
                self._verify_envelope(sender, doc)
                svc = extract_svc(doc.body)
                self._check_reservation(svc.code, sender, dossier_id)
                pairs.append((svc, doc.body))
            stored: list[tuple[Svc, Cid]] = []
            fresh_cids: list[Cid] = []
            for svc, body in pairs:
                cid, fresh = self._store_blob(body)
                if fresh:
                    fresh_cids.append(cid)
                stored.append((svc, cid))
            payload = encode_validate_dossier(ref, seq, decision, stored)
            try:
                receipt = self._submit(TxKind.VALIDATE_DOSSIER, sender, payload)
            except ProtocolError:
                for cid in fresh_cids:
                    self.blobs.discard(cid)
                raise
            for svc, _ in stored:
                self.registry.consume(svc.code)
            return DecisionReceipt(
                receipt, decision, tuple((svc.code, cid) for svc, cid in stored)
            )

    # -- queries (no transaction, no fee) -----------------------------------

    def view_document(self, caller: Address, code: str) -> DocumentView:
        svc = Svc(code)
        with self._lock:
            prop, dossier, record = self.state.resolve_svc(svc.code)
            self.state.check_view(caller, dossier)
            body = self.blobs.get(record.cid)
        embedded = extract_svc(body)
        if embedded.code != record.svc:
            raise IntegrityViolation(
                f"blob for {record.cid} embeds {embedded.code}, chain says {record.svc}"
            )
        return DocumentView(body, record, dossier, prop)

    def list_dossiers(self, caller: Address, ref: str) -> list[dict]:
        with self._lock:
            return self.state.list_dossiers(caller, ref)

    def events_since(self, since: int, role: Role | None = None) -> list[Event]:
        with self._lock:
            return list(self.state.events_since(since, role))

    def cost_report(self, rate: Decimal | None = None) -> CostReport:
        with self._lock:
            return total_cost(self.ledger.transactions(), self.schedule, rate)

    def dump_chain(self) -> list[str]:
        with self._lock:
            return chain_dump(self.ledger.blocks, self.schedule)

    def audit(self) -> AuditReport:
        """Re-read the log from disk and check everything that is checkable:
        framing, hash chain, and a full state replay against stored roots."""
        with self._lock:
            return audit_data_dir(self.data_dir)

    def snapshot_now(self) -> Path:
        with self._lock:
            return storage.write_snapshot(
                self.data_dir / storage.SNAPSHOT_DIR,
                self.ledger.height,
                self.state.to_tree(),
            )

    # -- internals ----------------------------------------------------------

    def _submit(self, kind: TxKind, sender: Address, payload: bytes) -> Receipt:
        # surface the concrete contract error; the ledger-level wrapper only
        # marks where in the pipeline the rejection happened
        try:
            receipt = self.ledger.submit_operation(kind, sender, payload, self.schedule)
        except RejectedByContract as exc:
            raise exc.inner from exc
        if receipt.block_height % self.snapshot_every == 0:
            self.snapshot_now()
        return receipt

    def _issue_key(self, address: Address) -> SigningKey:
        key = SigningKey.generate(self.entropy)
        self.registry.register_key(address, key)
        return key

    def _verify_envelope(self, sender: Address, signed: SignedDocument) -> None:
        if signed.signer != sender:
            raise Unauthorized("document is signed by a different address")
        verify(signed, self.registry)

    def _check_reservation(self, code: str, sender: Address, dossier_id: str) -> None:
        r = self.registry.reservations.get(code)
        if r is None:
            raise SvcMismatch(f"SVC {code} was never reserved on this node")
        if r.reserved_by != sender:
            raise SvcMismatch(f"SVC {code} was reserved by another user")
        if r.dossier_id != dossier_id:
            raise SvcMismatch(f"SVC {code} was reserved for dossier {r.dossier_id}")
        if r.consumed:
            raise SvcMismatch(f"SVC {code} has already been used")

    def _check_may_attach(self, sender: Address, dossier: Dossier) -> None:
        if dossier.status is DossierStatus.OPEN:
            if sender != dossier.creator:
                raise Unauthorized("only the dossier's creator may reserve codes")
            return
        if dossier.status is DossierStatus.PENDING_VALIDATION:
            record = self.state.user(sender)
            prop = self.state.properties[dossier.property_ref]
            if (
                record is None
                or record.role is not Role.COAAT_ADMIN
                or record.coaat_id != prop.coaat_id
            ):
                raise Unauthorized("only the validating COAAT's admin may reserve codes")
            return
        raise WrongStatus(f"{dossier.dossier_id} is {dossier.status.value}")

    def _store_blob(self, body: bytes) -> tuple[Cid, bool]:
        existed = self.blobs.has(Cid.of(body))
        cid = self.blobs.put(body)
        return cid, not existed


def _replay_blocks(state: ProtocolState, blocks: list[Block], start: int) -> None:
    if start == 0 and blocks and blocks[0].state_root != state.root():
        raise CorruptChain(0, "genesis state root mismatch")
    for block in blocks[start + 1 :]:
        for tx in block.txs:
            if state.nonce_for(tx.sender) != tx.nonce:
                raise CorruptChain(block.height, "nonce out of sequence")
            try:
                state.apply(tx)
            except ProtocolError as exc:
                raise CorruptChain(block.height, f"logged tx rejected: {exc}") from exc
        if state.root() != block.state_root:
            raise CorruptChain(block.height, "state root mismatch")


def audit_data_dir(data_dir: str | Path) -> AuditReport:
    """Offline integrity audit of a data directory's chain log.

    Never raises on corruption; reports the lowest broken height. Safe to
    run against a directory whose node would refuse to start.
    """
    store = storage.ChainStore(Path(data_dir) / storage.CHAIN_LOG)
    blocks, bad_record = store.read_blocks_lenient()
    report = verify_chain(blocks)
    if not report.ok:
        h = report.first_corrupt_height
        if bad_record is not None:
            h = min(h, bad_record)
        return AuditReport(False, h)
    if bad_record is not None:
        return AuditReport(False, bad_record)
    try:
        _replay_blocks(ProtocolState(), blocks, 0)
    except CorruptChain as exc:
        return AuditReport(False, exc.height)
    return AuditReport(True, None)
