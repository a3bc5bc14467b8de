"""Fee schedule configuration.

The bundled schedule carries the per-transaction fees measured for each
operation on the BNB testnet deployment this system models. The validate
and request-validation transactions had no measured row there, so they
default to zero; both are plain schedule entries and can be overridden
from a schedule file.

Schedule files are JSON with string-carried decimals:

    {
      "fees": {"Kickoff": "0.05250531", "AddCoaat": "0.00238626", ...},
      "usd_per_bnb": "302.80"
    }
"""

from __future__ import annotations

import json
from decimal import Decimal
from pathlib import Path

from .ledger import FeeSchedule, TxKind

TESTNET_FEES_BNB = {
    TxKind.KICKOFF: "0.05250531",
    TxKind.ADD_COAAT: "0.00238626",
    TxKind.ADD_USER: "0.00177261",
    TxKind.REGISTER_PROPERTY: "0.03027519",
    TxKind.CREATE_DOSSIER: "0.00409118",
    TxKind.ADD_FILE: "0.00304687",
    TxKind.REQUEST_VALIDATION: "0",
    TxKind.VALIDATE_DOSSIER: "0",
}

DEFAULT_USD_PER_BNB = "302.80"


def testnet_schedule(usd_per_bnb: str | Decimal = DEFAULT_USD_PER_BNB) -> FeeSchedule:
    return FeeSchedule(
        {kind: Decimal(fee) for kind, fee in TESTNET_FEES_BNB.items()},
        Decimal(usd_per_bnb),
    )


def zero_schedule() -> FeeSchedule:
    return FeeSchedule.flat_zero()


def schedule_to_json(schedule: FeeSchedule) -> dict:
    return {
        "fees": {kind.wire_name: str(schedule.per_kind[kind]) for kind in TxKind},
        "usd_per_bnb": str(schedule.usd_per_bnb),
    }


def schedule_from_json(data: dict) -> FeeSchedule:
    fees = data.get("fees", {})
    per_kind = {}
    for kind in TxKind:
        if kind.wire_name not in fees:
            raise ValueError(f"schedule file missing fee for {kind.wire_name}")
        per_kind[kind] = Decimal(str(fees[kind.wire_name]))
    return FeeSchedule(per_kind, Decimal(str(data.get("usd_per_bnb", "0"))))


def load_schedule(path: str | Path) -> FeeSchedule:
    with open(path, "r", encoding="utf-8") as fh:
        return schedule_from_json(json.load(fh))


def save_schedule(schedule: FeeSchedule, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(schedule_to_json(schedule), indent=2) + "\n", encoding="utf-8"
    )


def resolve_schedule(spec: str | None) -> FeeSchedule:
    """Map a --fees flag value to a schedule: none/'testnet' for the bundled
    one, 'zero' for all-zero, anything else is a file path."""
    if spec is None or spec == "testnet":
        return testnet_schedule()
    if spec == "zero":
        return zero_schedule()
    return load_schedule(spec)
