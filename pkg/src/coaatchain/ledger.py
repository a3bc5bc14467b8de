"""Simulated append-only blockchain.

One submitted transaction becomes one sealed block (there is no mempool,
no consensus, no forks). Each block commits to:

    block_hash = SHA-256( u64(height) || prev_hash ||
                          u32(tx_count) || (lp(tx_encoding))* ||
                          state_root )

where ``state_root`` hashes the full application state after the block is
applied. Genesis sits at height 0 with a zero prev_hash and no transactions.
Flipping any stored byte therefore breaks either a block's own hash or the
prev_hash linkage of its successor, which is what ``verify_chain`` reports.

Fees are flat per transaction kind, carried as exact decimals (8 fractional
digits). Read-only queries never touch this module at all.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Callable, Iterable, Protocol, Sequence

from . import codec
from .errors import (
    DuplicateNonce,
    MalformedTransaction,
    ProtocolError,
    RejectedByContract,
    ReplayDivergence,
)

DIGEST_SIZE = 32
ADDRESS_SIZE = 20
GENESIS_PREV_HASH = b"\x00" * DIGEST_SIZE

Clock = Callable[[], int]


def system_clock() -> int:
    return int(time.time())


class FixedStepClock:
    """Deterministic clock for scripted runs and tests: starts at ``start``
    and advances by ``step`` on every call."""

    def __init__(self, start: int, step: int = 1):
        self.now = start
        self.step = step

    def __call__(self) -> int:
        t = self.now
        self.now += self.step
        return t


@dataclass(frozen=True)
class Address:
    """20-byte wallet-style identity, rendered as 0x-prefixed lowercase hex."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != ADDRESS_SIZE:
            raise ValueError(f"address must be {ADDRESS_SIZE} bytes")

    def render(self) -> str:
        return "0x" + self.value.hex()

    @classmethod
    def parse(cls, text: str) -> "Address":
        if not text.startswith("0x"):
            raise ValueError("address must start with 0x")
        try:
            raw = bytes.fromhex(text[2:])
        except ValueError as exc:
            raise ValueError("address is not valid hex") from exc
        return cls(raw)

    @classmethod
    def derive(cls, seed: bytes) -> "Address":
        """Deterministic pseudo-address (contract ids, scripted actors)."""
        return cls(codec.sha256(seed)[:ADDRESS_SIZE])

    def __str__(self) -> str:
        return self.render()


class TxKind(Enum):
    KICKOFF = 0
    ADD_COAAT = 1
    ADD_USER = 2
    REGISTER_PROPERTY = 3
    CREATE_DOSSIER = 4
    ADD_FILE = 5
    REQUEST_VALIDATION = 6
    VALIDATE_DOSSIER = 7

    @property
    def wire_name(self) -> str:
        return _KIND_WIRE_NAMES[self]

    @classmethod
    def from_wire_name(cls, name: str) -> "TxKind":
        for kind, wire in _KIND_WIRE_NAMES.items():
            if wire == name:
                return kind
        raise ValueError(f"unknown transaction kind {name!r}")


_KIND_WIRE_NAMES = {
    TxKind.KICKOFF: "Kickoff",
    TxKind.ADD_COAAT: "AddCoaat",
    TxKind.ADD_USER: "AddUser",
    TxKind.REGISTER_PROPERTY: "RegisterProperty",
    TxKind.CREATE_DOSSIER: "CreateDossier",
    TxKind.ADD_FILE: "AddFile",
    TxKind.REQUEST_VALIDATION: "RequestValidation",
    TxKind.VALIDATE_DOSSIER: "ValidateDossier",
}


@dataclass(frozen=True)
class Transaction:
    """A ledger entry. The timestamp is stamped by the ledger at acceptance."""

    kind: TxKind
    sender: Address
    payload: bytes
    nonce: int
    timestamp: int

    def encode(self) -> bytes:
        return (
            codec.u8(self.kind.value)
            + self.sender.value
            + codec.lp(self.payload)
            + codec.u64(self.nonce)
            + codec.u64(self.timestamp)
        )

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        r = codec.Reader(data)
        tx = cls.read_from(r)
        r.expect_end()
        return tx

    @classmethod
    def read_from(cls, r: codec.Reader) -> "Transaction":
        kind = TxKind(r.u8())
        sender = Address(r.take(ADDRESS_SIZE))
        payload = r.lp()
        nonce = r.u64()
        timestamp = r.u64()
        return cls(kind, sender, payload, nonce, timestamp)

    @property
    def tx_hash(self) -> bytes:
        return codec.sha256(self.encode())


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    txs: tuple[Transaction, ...]
    state_root: bytes
    block_hash: bytes

    @staticmethod
    def header_bytes(
        height: int, prev_hash: bytes, txs: Sequence[Transaction], state_root: bytes
    ) -> bytes:
        parts = [codec.u64(height), prev_hash, codec.u32(len(txs))]
        parts.extend(codec.lp(tx.encode()) for tx in txs)
        parts.append(state_root)
        return b"".join(parts)

    @classmethod
    def seal(
        cls,
        height: int,
        prev_hash: bytes,
        txs: Sequence[Transaction],
        state_root: bytes,
    ) -> "Block":
        block_hash = codec.sha256(cls.header_bytes(height, prev_hash, txs, state_root))
        return cls(height, prev_hash, tuple(txs), state_root, block_hash)

    def recomputed_hash(self) -> bytes:
        return codec.sha256(
            self.header_bytes(self.height, self.prev_hash, self.txs, self.state_root)
        )

    def encode(self) -> bytes:
        """Stored form: header fields plus the seal itself."""
        return (
            self.header_bytes(self.height, self.prev_hash, self.txs, self.state_root)
            + self.block_hash
        )

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        r = codec.Reader(data)
        height = r.u64()
        prev_hash = r.take(DIGEST_SIZE)
        count = r.u32()
        txs = []
        for _ in range(count):
            txs.append(Transaction.decode(r.lp()))
        state_root = r.take(DIGEST_SIZE)
        block_hash = r.take(DIGEST_SIZE)
        r.expect_end()
        return cls(height, prev_hash, tuple(txs), state_root, block_hash)


FEE_QUANTUM = Decimal("0.00000001")
USD_QUANTUM = Decimal("0.01")


@dataclass(frozen=True)
class FeeSchedule:
    """Flat fee per transaction kind, in BNB, plus a USD conversion rate."""

    per_kind: dict[TxKind, Decimal]
    usd_per_bnb: Decimal

    def __post_init__(self):
        for kind in TxKind:
            fee = self.per_kind.get(kind)
            if fee is None:
                raise ValueError(f"fee schedule missing {kind.wire_name}")
            if fee < 0:
                raise ValueError(f"negative fee for {kind.wire_name}")
            if fee != fee.quantize(FEE_QUANTUM):
                raise ValueError(f"fee for {kind.wire_name} exceeds 8 fractional digits")
        if self.usd_per_bnb < 0:
            raise ValueError("negative usd_per_bnb")

    def fee_bnb(self, kind: TxKind) -> Decimal:
        return self.per_kind[kind]

    def fee_usd(self, fee_bnb: Decimal, rate: Decimal | None = None) -> Decimal:
        rate = self.usd_per_bnb if rate is None else rate
        return (fee_bnb * rate).quantize(USD_QUANTUM, rounding=ROUND_HALF_UP)

    @classmethod
    def flat_zero(cls, usd_per_bnb: Decimal = Decimal("0")) -> "FeeSchedule":
        return cls({kind: Decimal("0") for kind in TxKind}, usd_per_bnb)


@dataclass(frozen=True)
class Receipt:
    tx_hash: bytes
    block_height: int
    fee_bnb: Decimal
    fee_usd: Decimal
    emitted_events: tuple[int, ...]


@dataclass(frozen=True)
class AuditReport:
    ok: bool
    first_corrupt_height: int | None = None


class StateMachine(Protocol):
    """Application state the ledger orders transactions over."""

    def apply(self, tx: Transaction) -> list[int]:
        """Validate and apply; returns emitted event ids. Must raise before
        mutating anything when the transaction is invalid."""
        ...

    def root(self) -> bytes:
        ...

    def nonce_for(self, sender: Address) -> int:
        ...


class BlockSink(Protocol):
    def append_block(self, block: Block) -> None:
        ...


class Ledger:
    """Single-writer sequencer over a state machine.

    Mutations are serialized by an internal lock; queries only ever see
    fully committed blocks.
    """

    def __init__(
        self,
        state: StateMachine,
        clock: Clock = system_clock,
        sink: BlockSink | None = None,
        blocks: list[Block] | None = None,
    ):
        self._state = state
        self._clock = clock
        self._sink = sink
        self._lock = threading.RLock()
        self.receipts: list[Receipt] = []
        if blocks:
            self._blocks = list(blocks)
        else:
            genesis = Block.seal(0, GENESIS_PREV_HASH, (), state.root())
            self._blocks = [genesis]
            if sink is not None:
                sink.append_block(genesis)

    @property
    def state(self) -> StateMachine:
        return self._state

    @property
    def height(self) -> int:
        return self._blocks[-1].height

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    @property
    def state_root(self) -> bytes:
        return self._blocks[-1].state_root

    def transactions(self) -> list[Transaction]:
        return [tx for block in self._blocks for tx in block.txs]

    def next_nonce(self, sender: Address) -> int:
        return self._state.nonce_for(sender)

    def submit_operation(
        self, kind: TxKind, sender: Address, payload: bytes, schedule: FeeSchedule
    ) -> Receipt:
        """Stamp (nonce, timestamp) and submit atomically. The live path."""
        with self._lock:
            tx = Transaction(
                kind, sender, payload, self._state.nonce_for(sender), self._clock()
            )
            return self.submit_transaction(tx, schedule)

    def submit_transaction(self, tx: Transaction, schedule: FeeSchedule) -> Receipt:
        with self._lock:
            self._check_well_formed(tx)
            try:
                events = self._state.apply(tx)
            except ProtocolError as exc:
                raise RejectedByContract(exc) from exc
            prev = self._blocks[-1]
            block = Block.seal(prev.height + 1, prev.block_hash, (tx,), self._state.root())
            self._blocks.append(block)
            if self._sink is not None:
                self._sink.append_block(block)
            fee = schedule.fee_bnb(tx.kind)
            receipt = Receipt(
                tx_hash=tx.tx_hash,
                block_height=block.height,
                fee_bnb=fee,
                fee_usd=schedule.fee_usd(fee),
                emitted_events=tuple(events),
            )
            self.receipts.append(receipt)
            return receipt

    def _check_well_formed(self, tx: Transaction) -> None:
        expected = self._state.nonce_for(tx.sender)
        if tx.nonce < expected:
            raise DuplicateNonce(f"nonce {tx.nonce} already used by {tx.sender}")
        if tx.nonce > expected:
            raise MalformedTransaction(
                f"nonce gap: got {tx.nonce}, expected {expected}"
            )
        if tx.kind is not TxKind.KICKOFF and not tx.payload:
            raise MalformedTransaction(f"{tx.kind.wire_name} requires a payload")

    def verify(self) -> AuditReport:
        return verify_chain(self._blocks)

    def session_fees_bnb(self) -> Decimal:
        return sum((r.fee_bnb for r in self.receipts), Decimal("0"))


def verify_chain(blocks: Sequence[Block]) -> AuditReport:
    """Check every block's seal and linkage; report the lowest bad height."""
    for i, block in enumerate(blocks):
        if block.height != i:
            return AuditReport(False, i)
        if i == 0:
            if block.prev_hash != GENESIS_PREV_HASH:
                return AuditReport(False, 0)
        elif block.prev_hash != blocks[i - 1].block_hash:
            return AuditReport(False, i)
        if block.recomputed_hash() != block.block_hash:
            return AuditReport(False, i)
    return AuditReport(True, None)


def replay(
    txs: Iterable[Transaction],
    schedule: FeeSchedule,
    state: StateMachine,
    clock: Clock = system_clock,
) -> bytes:
    """Re-apply an accepted log on a fresh state; returns the final state root.

    Logged transactions already carry their nonce and timestamp, so the
    result is independent of this instance's clock. A rejection mid-log
    means the log is not a prefix of an honestly accepted history.
    """
    ledger = Ledger(state, clock=clock)
    for tx in txs:
        try:
            ledger.submit_transaction(tx, schedule)
        except ProtocolError as exc:
            raise ReplayDivergence(
                f"tx {tx.kind.wire_name} at height {ledger.height + 1} rejected: {exc}"
            ) from exc
    return ledger.state_root


@dataclass(frozen=True)
class CostLine:
    kind: TxKind | None  # None for the read row
    label: str
    count: int
    fee_bnb: Decimal
    total_bnb: Decimal
    total_usd: Decimal


@dataclass(frozen=True)
class CostReport:
    lines: tuple[CostLine, ...]
    overall_bnb: Decimal
    overall_usd: Decimal
    usd_per_bnb: Decimal


READ_LABEL = "Read or check a dossier"

KIND_LABELS = {
    TxKind.KICKOFF: "Smart contract factory deployment",
    TxKind.ADD_COAAT: "Add COAAT (Role 1)",
    TxKind.ADD_USER: "Add Quantity Surveyor (Role 2)",
    TxKind.REGISTER_PROPERTY: "Add new property",
    TxKind.CREATE_DOSSIER: "Add new dossier",
    TxKind.ADD_FILE: "Add file to dossier",
    TxKind.REQUEST_VALIDATION: "Request dossier validation",
    TxKind.VALIDATE_DOSSIER: "Validate or reject dossier",
}


def total_cost(
    txs: Iterable[Transaction],
    schedule: FeeSchedule,
    rate: Decimal | None = None,
) -> CostReport:
    """Per-kind and overall fee totals for a transaction log.

    Every kind is listed, as is the zero-cost read row (reads never appear
    in the log because they are not transactions).
    """
    rate = schedule.usd_per_bnb if rate is None else rate
    counts = {kind: 0 for kind in TxKind}
    for tx in txs:
        counts[tx.kind] += 1
    lines = []
    overall = Decimal("0")
    for kind in TxKind:
        fee = schedule.fee_bnb(kind)
        total = fee * counts[kind]
        overall += total
        lines.append(
            CostLine(
                kind=kind,
                label=KIND_LABELS[kind],
                count=counts[kind],
                fee_bnb=fee,
                total_bnb=total,
                total_usd=schedule.fee_usd(total, rate),
            )
        )
    lines.append(
        CostLine(
            kind=None,
            label=READ_LABEL,
            count=0,
            fee_bnb=Decimal("0"),
            total_bnb=Decimal("0"),
            total_usd=Decimal("0.00"),
        )
    )
    return CostReport(
        lines=tuple(lines),
        overall_bnb=overall,
        overall_usd=schedule.fee_usd(overall, rate),
        usd_per_bnb=rate,
    )


def format_fee(fee: Decimal) -> str:
    return f"{fee.quantize(FEE_QUANTUM):.8f}"


def format_usd(usd: Decimal) -> str:
    return f"{usd.quantize(USD_QUANTUM):.2f}"


def chain_dump(blocks: Sequence[Block], schedule: FeeSchedule) -> list[str]:
    """Line-delimited chain export: height, block hash, kind, sender, fee."""
    lines = []
    for block in blocks:
        if not block.txs:
            lines.append(f"{block.height}\t{block.block_hash.hex()}\tgenesis\t-\t0.00000000")
            continue
        for tx in block.txs:
            fee = format_fee(schedule.fee_bnb(tx.kind))
            lines.append(
                f"{block.height}\t{block.block_hash.hex()}\t{tx.kind.wire_name}"
                f"\t{tx.sender.render()}\t{fee}"
            )
    return lines
