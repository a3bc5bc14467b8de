"""Fee schedule values, JSON round-trip, and USD conversion."""

from decimal import ROUND_HALF_UP, Decimal

import pytest

from coaatchain.fees import (
    DEFAULT_USD_PER_BNB,
    TESTNET_FEES_BNB,
    load_schedule,
    resolve_schedule,
    save_schedule,
    schedule_from_json,
    schedule_to_json,
)
from coaatchain.fees import testnet_schedule as paper_schedule
from coaatchain.fees import zero_schedule
from coaatchain.ledger import TxKind

# Published per-transaction costs for the testnet deployment this system
# reproduces, frozen here independently of the package constants.
EXPECTED_FEES = {
    "Kickoff": "0.05250531",
    "AddCoaat": "0.00238626",
    "AddUser": "0.00177261",
    "RegisterProperty": "0.03027519",
    "CreateDossier": "0.00409118",
    "AddFile": "0.00304687",
    "RequestValidation": "0",
    "ValidateDossier": "0",
}


def test_bundled_fees_match_frozen_values():
    assert DEFAULT_USD_PER_BNB == "302.80"
    for kind in TxKind:
        assert Decimal(TESTNET_FEES_BNB[kind]) == Decimal(EXPECTED_FEES[kind.wire_name])


def test_schedule_covers_every_kind():
    sched = paper_schedule()
    assert set(sched.per_kind) == set(TxKind)


def test_usd_conversion_oracle():
    # 0.00304687 BNB * 302.80 USD/BNB = 0.922592236 USD -> 0.92 after
    # rounding to whole cents, half up.
    sched = paper_schedule()
    raw = Decimal("0.00304687") * Decimal("302.80")
    assert raw == Decimal("0.922592236")
    expected = raw.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    assert sched.fee_usd(sched.fee_bnb(TxKind.ADD_FILE)) == expected == Decimal("0.92")


def test_usd_conversion_accepts_override_rate():
    sched = paper_schedule()
    fee = sched.fee_bnb(TxKind.ADD_FILE)
    assert sched.fee_usd(fee, rate=Decimal("1000")) == Decimal("3.05")


def test_usd_rounding_is_half_up():
    sched = paper_schedule()
    # 0.005 exactly on the midpoint rounds away from zero
    assert sched.fee_usd(Decimal("0.005"), rate=Decimal("1")) == Decimal("0.01")
    assert sched.fee_usd(Decimal("0.004999"), rate=Decimal("1")) == Decimal("0.00")


def test_zero_schedule_is_all_zero():
    sched = zero_schedule()
    for kind in TxKind:
        assert sched.fee_bnb(kind) == 0
        assert sched.fee_usd(sched.fee_bnb(kind)) == 0


def test_json_round_trip_preserves_every_fee():
    sched = paper_schedule()
    data = schedule_to_json(sched)
    back = schedule_from_json(data)
    assert back.per_kind == sched.per_kind
    assert back.usd_per_bnb == sched.usd_per_bnb


def test_json_shape_uses_wire_names_and_strings():
    data = schedule_to_json(paper_schedule())
    assert set(data) == {"fees", "usd_per_bnb"}
    assert set(data["fees"]) == set(EXPECTED_FEES)
    for value in data["fees"].values():
        assert isinstance(value, str)
    assert data["usd_per_bnb"] == "302.80"


def test_schedule_from_json_rejects_missing_kind():
    data = schedule_to_json(paper_schedule())
    del data["fees"]["AddFile"]
    with pytest.raises(ValueError):
        schedule_from_json(data)


def test_save_and_load_round_trip(tmp_path):
    path = tmp_path / "fees.json"
    save_schedule(paper_schedule(), path)
    back = load_schedule(path)
    assert back == paper_schedule()


def test_resolve_schedule_spellings(tmp_path):
    assert resolve_schedule(None) == paper_schedule()
    assert resolve_schedule("testnet") == paper_schedule()
    assert resolve_schedule("zero") == zero_schedule()
    path = tmp_path / "custom.json"
    save_schedule(zero_schedule(), path)
    assert resolve_schedule(str(path)) == zero_schedule()
