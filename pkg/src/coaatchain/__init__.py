"""Property construction dossiers on a simulated permissioned blockchain.

Quantity surveyors register properties and submit dossiers of
content-addressed documents; COAAT administrators validate them; third
parties verify any document by its Secure Verification Code. Every
state-changing operation is a fee-bearing transaction on a hash-chained
ledger, so the full history is replayable and tamper-evident.
"""

from .cas import Cid, ContentStore
from .contracts import DossierStatus, ProtocolState, Role
from .documents import SignedDocument, SigningKey, Svc, embed_svc, extract_svc, generate_svc, sign
from .fees import testnet_schedule, zero_schedule
from .ledger import (
    Address,
    Block,
    FeeSchedule,
    FixedStepClock,
    Ledger,
    Receipt,
    Transaction,
    TxKind,
    total_cost,
    verify_chain,
)
from .node import CoaatChainNode, audit_data_dir

__version__ = "0.1.0"

__all__ = [
    "Address",
    "Block",
    "Cid",
    "CoaatChainNode",
    "ContentStore",
    "DossierStatus",
    "FeeSchedule",
    "FixedStepClock",
    "Ledger",
    "ProtocolState",
    "Receipt",
    "Role",
    "SignedDocument",
    "SigningKey",
    "Svc",
    "Transaction",
    "TxKind",
    "audit_data_dir",
    "embed_svc",
    "extract_svc",
    "generate_svc",
    "sign",
    "testnet_schedule",
    "total_cost",
    "verify_chain",
    "zero_schedule",
]
