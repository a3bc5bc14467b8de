"""Ledger: block sealing, chain verification, fees, replay, reports."""

import hashlib
from decimal import Decimal

import pytest

from coaatchain import codec
from coaatchain.errors import (
    DuplicateNonce,
    MalformedTransaction,
    RejectedByContract,
    ReplayDivergence,
)
from coaatchain.fees import testnet_schedule as paper_schedule
from coaatchain.ledger import (
    GENESIS_PREV_HASH,
    Address,
    Block,
    FeeSchedule,
    FixedStepClock,
    Ledger,
    Transaction,
    TxKind,
    chain_dump,
    format_fee,
    replay,
    total_cost,
    verify_chain,
)


class CountingState:
    """Minimal state machine: counts applied txs per sender; root folds
    the history. An independent stand-in so ledger tests do not depend on
    the real contracts."""

    def __init__(self):
        self.applied = []
        self.nonces = {}

    def apply(self, tx):
        if tx.kind is TxKind.VALIDATE_DOSSIER:  # reserved as the "rejected" kind
            raise MalformedTransaction("rejected by test state")
        self.applied.append(tx.tx_hash)
        self.nonces[tx.sender] = self.nonces.get(tx.sender, 0) + 1
        return []

    def root(self):
        acc = b"\x00" * 32
        for h in self.applied:
            acc = hashlib.sha256(acc + h).digest()
        return acc

    def nonce_for(self, sender):
        return self.nonces.get(sender, 0)


SENDER = Address.derive(b"ledger-test-sender")


def make_ledger():
    return Ledger(CountingState(), clock=FixedStepClock(1_000))


def zero():
    return FeeSchedule.flat_zero()


def test_genesis_shape():
    ledger = make_ledger()
    genesis = ledger.blocks[0]
    assert genesis.height == 0
    assert genesis.prev_hash == GENESIS_PREV_HASH == b"\x00" * 32
    assert genesis.txs == ()
    assert verify_chain(ledger.blocks).ok


def test_transaction_encoding_oracle():
    tx = Transaction(TxKind.ADD_COAAT, SENDER, b"payload", 3, 99)
    expected = (
        b"\x01"
        + SENDER.value
        + b"\x00\x00\x00\x07payload"
        + (3).to_bytes(8, "big")
        + (99).to_bytes(8, "big")
    )
    assert tx.encode() == expected
    assert tx.tx_hash == hashlib.sha256(expected).digest()
    assert Transaction.decode(expected) == tx


def test_block_hash_oracle():
    """Recompute a sealed block's hash with hashlib directly."""
    ledger = make_ledger()
    receipt = ledger.submit_operation(TxKind.KICKOFF, SENDER, b"", zero())
    block = ledger.blocks[1]
    tx_bytes = block.txs[0].encode()
    preimage = (
        (1).to_bytes(8, "big")
        + ledger.blocks[0].block_hash
        + (1).to_bytes(4, "big")
        + len(tx_bytes).to_bytes(4, "big")
        + tx_bytes
        + block.state_root
    )
    assert block.block_hash == hashlib.sha256(preimage).digest()
    assert receipt.block_height == 1


def test_block_encode_decode_roundtrip():
    ledger = make_ledger()
    ledger.submit_operation(TxKind.ADD_USER, SENDER, b"x", zero())
    block = ledger.blocks[1]
    assert Block.decode(block.encode()) == block


def test_one_tx_per_block_and_linkage():
    ledger = make_ledger()
    for i in range(5):
        ledger.submit_operation(TxKind.ADD_FILE, SENDER, bytes([i + 1]), zero())
    assert ledger.height == 5
    for i, block in enumerate(ledger.blocks):
        assert block.height == i
        if i:
            assert block.prev_hash == ledger.blocks[i - 1].block_hash
            assert len(block.txs) == 1
    assert verify_chain(ledger.blocks).ok


def test_nonce_policy_exact_next():
    ledger = make_ledger()
    ledger.submit_operation(TxKind.KICKOFF, SENDER, b"", zero())
    used = Transaction(TxKind.ADD_USER, SENDER, b"x", 0, 5)
    with pytest.raises(DuplicateNonce):
        ledger.submit_transaction(used, zero())
    gap = Transaction(TxKind.ADD_USER, SENDER, b"x", 5, 5)
    with pytest.raises(MalformedTransaction):
        ledger.submit_transaction(gap, zero())
    assert ledger.height == 1  # neither attempt sealed a block


def test_empty_payload_rejected_except_kickoff():
    ledger = make_ledger()
    with pytest.raises(MalformedTransaction):
        ledger.submit_operation(TxKind.ADD_COAAT, SENDER, b"", zero())
    ledger.submit_operation(TxKind.KICKOFF, SENDER, b"", zero())
    assert ledger.height == 1


def test_rejected_tx_leaves_no_block_and_no_fee():
    ledger = make_ledger()
    before_root = ledger.state_root
    with pytest.raises(RejectedByContract) as err:
        ledger.submit_operation(TxKind.VALIDATE_DOSSIER, SENDER, b"x", paper_schedule())
    assert err.value.inner.name == "MalformedTransaction"
    assert ledger.height == 0
    assert ledger.state_root == before_root
    assert ledger.session_fees_bnb() == 0
    assert ledger.receipts == []


def test_verify_chain_detects_field_mutations():
    ledger = make_ledger()
    for i in range(3):
        ledger.submit_operation(TxKind.ADD_FILE, SENDER, bytes([i + 1]), zero())
    blocks = list(ledger.blocks)

    # flipped state root
    b = blocks[2]
    bad = Block(b.height, b.prev_hash, b.txs, b"\xff" * 32, b.block_hash)
    assert verify_chain(blocks[:2] + [bad] + blocks[3:]).first_corrupt_height == 2

    # broken linkage
    bad = Block.seal(2, b"\x11" * 32, b.txs, b.state_root)
    assert verify_chain(blocks[:2] + [bad] + blocks[3:]).first_corrupt_height == 2

    # height skip
    bad = Block.seal(7, b.prev_hash, b.txs, b.state_root)
    assert verify_chain(blocks[:2] + [bad] + blocks[3:]).first_corrupt_height == 2


def test_fee_schedule_validation():
    with pytest.raises(ValueError):
        FeeSchedule({k: Decimal("0") for k in list(TxKind)[:-1]}, Decimal("1"))
    with pytest.raises(ValueError):
        FeeSchedule({k: Decimal("-1") for k in TxKind}, Decimal("1"))
    with pytest.raises(ValueError):
        FeeSchedule({k: Decimal("0.000000001") for k in TxKind}, Decimal("1"))


def test_fee_usd_rounding_half_up():
    sched = FeeSchedule.flat_zero(Decimal("302.80"))
    # 0.00304687 * 302.80 = 0.922592236 -> 0.92
    assert sched.fee_usd(Decimal("0.00304687")) == Decimal("0.92")
    # exact half rounds up: 0.005 * 1 = 0.005 -> 0.01
    assert sched.fee_usd(Decimal("0.005"), Decimal("1")) == Decimal("0.01")
    assert sched.fee_usd(Decimal("0.015"), Decimal("1")) == Decimal("0.02")


def test_replay_reproduces_root_and_flags_divergence():
    ledger = make_ledger()
    for i in range(4):
        ledger.submit_operation(TxKind.ADD_FILE, SENDER, bytes([i + 1]), zero())
    txs = ledger.transactions()
    assert replay(txs, zero(), CountingState()) == ledger.state_root

    broken = txs[:2] + [Transaction(TxKind.ADD_FILE, SENDER, b"zz", 9, 1)] + txs[2:]
    with pytest.raises(ReplayDivergence):
        replay(broken, zero(), CountingState())


def test_total_cost_one_of_each_kind_matches_frozen_sum():
    sched = paper_schedule()
    txs = [
        Transaction(kind, SENDER, b"" if kind is TxKind.KICKOFF else b"x", i, i)
        for i, kind in enumerate(TxKind)
    ]
    report = total_cost(txs, sched)
    # independent Decimal sum of the configured per-kind fees
    expected = sum((sched.fee_bnb(k) for k in TxKind), Decimal("0"))
    assert report.overall_bnb == expected == Decimal("0.09407742")
    by_label = {line.label: line for line in report.lines}
    assert by_label["Read or check a dossier"].count == 0
    assert by_label["Read or check a dossier"].total_bnb == 0
    assert len(report.lines) == len(TxKind) + 1


def test_chain_dump_format():
    ledger = make_ledger()
    ledger.submit_operation(TxKind.KICKOFF, SENDER, b"", zero())
    lines = chain_dump(ledger.blocks, paper_schedule())
    assert lines[0].endswith("\tgenesis\t-\t0.00000000")
    height, block_hash, kind, sender, fee = lines[1].split("\t")
    assert height == "1"
    assert bytes.fromhex(block_hash) == ledger.blocks[1].block_hash
    assert kind == "Kickoff"
    assert sender == SENDER.render()
    assert fee == "0.05250531"


def test_format_fee_fixed_point():
    assert format_fee(Decimal("0")) == "0.00000000"
    assert format_fee(Decimal("0.05250531")) == "0.05250531"


def test_address_render_parse():
    addr = Address.derive(b"x")
    assert Address.parse(addr.render()) == addr
    with pytest.raises(ValueError):
        Address(b"short")
    with pytest.raises(ValueError):
        Address.parse("not-hex")
