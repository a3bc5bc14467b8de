"""Durable node state.

Three stores live under a node's data directory:

* ``chain.log``: the append-only block log. Each record is a u32 length
  prefix followed by the sealed block encoding (header fields plus the
  block hash). Every stored byte is covered by some block's hash or by
  the framing, so any single-byte mutation is detectable offline.
* ``snapshots/``: canonical state-tree encodings named
  ``{height:08d}_{state_root_hex}.snap``. A snapshot file re-hashes to
  the root in its own name, so a corrupt or renamed snapshot is simply
  skipped and recovery falls back to replaying the log.
* ``registry.json``: node-local secrets and SVC reservations. Never part
  of consensus; a transaction log replays identically without it.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import codec
from .errors import CorruptChain, UnknownSigner
from .ledger import Address, Block
from .documents import SigningKey

CHAIN_LOG = "chain.log"
SNAPSHOT_DIR = "snapshots"
REGISTRY_FILE = "registry.json"
CONFIG_FILE = "config.json"
BLOB_DIR = "blobs"


class ChainStore:
    """Append-only block log."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append_block(self, block: Block) -> None:
        record = codec.lp(block.encode())
        with open(self.path, "ab") as fh:
            fh.write(record)
            fh.flush()
            os.fsync(fh.fileno())

    def read_blocks(self) -> list[Block]:
        blocks, bad = self.read_blocks_lenient()
        if bad is not None:
            raise CorruptChain(bad, "undecodable block record")
        return blocks

    def read_blocks_lenient(self) -> tuple[list[Block], int | None]:
        """Decode records up to the first undecodable one.

        Returns the good prefix plus the index of the broken record, if
        any. Record index equals block height (one block per record,
        genesis first), so the index doubles as a corrupt height.
        """
        if not self.path.exists():
            return [], None
        data = self.path.read_bytes()
        blocks: list[Block] = []
        pos = 0
        while pos < len(data):
            if pos + 4 > len(data):
                return blocks, len(blocks)
            length = int.from_bytes(data[pos : pos + 4], "big")
            if pos + 4 + length > len(data):
                return blocks, len(blocks)
            try:
                block = Block.decode(data[pos + 4 : pos + 4 + length])
            except ValueError:
                return blocks, len(blocks)
            blocks.append(block)
            pos += 4 + length
        return blocks, None


_SNAP_NAME = re.compile(r"^(\d{8})_([0-9a-f]{64})\.snap$")


def write_snapshot(directory: str | Path, height: int, state_tree: dict) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    encoded = codec.encode_tree(state_tree)
    root = codec.sha256(encoded)
    path = directory / f"{height:08d}_{root.hex()}.snap"
    _write_atomic(path, encoded)
    return path


def load_latest_snapshot(directory: str | Path) -> tuple[int, bytes, dict] | None:
    """Newest verifiable snapshot as (height, state_root, state_tree).

    Files whose bytes no longer hash to the root in their name are
    skipped, not reported: snapshots are a recovery shortcut, the log is
    the authority.
    """
    directory = Path(directory)
    if not directory.is_dir():
        return None
    for path in sorted(directory.iterdir(), reverse=True):
        match = _SNAP_NAME.match(path.name)
        if match is None:
            continue
        encoded = path.read_bytes()
        root = bytes.fromhex(match.group(2))
        if codec.sha256(encoded) != root:
            continue
        try:
            tree = codec.decode_tree(encoded)
        except ValueError:
            continue
        return int(match.group(1)), root, tree
    return None


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class Reservation:
    code: str
    reserved_by: Address
    dossier_id: str
    consumed: bool = False


class Registry:
    """Node-local key material and SVC reservations, one JSON file.

    Signing keys are issued when a user is registered and looked up at
    login and signature checks. Reservations track codes handed out by
    the node that no accepted transaction has bound yet.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.keys: dict[Address, SigningKey] = {}
        self.reservations: dict[str, Reservation] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        data = json.loads(self.path.read_text(encoding="utf-8"))
        self.keys = {
            Address.parse(addr): SigningKey(bytes.fromhex(secret))
            for addr, secret in data.get("keys", {}).items()
        }
        self.reservations = {
            code: Reservation(
                code=code,
                reserved_by=Address.parse(entry["reserved_by"]),
                dossier_id=entry["dossier"],
                consumed=bool(entry["consumed"]),
            )
            for code, entry in data.get("svc_reservations", {}).items()
        }

    def save(self) -> None:
        data = {
            "keys": {
                addr.render(): key.secret.hex() for addr, key in self.keys.items()
            },
            "svc_reservations": {
                code: {
                    "reserved_by": r.reserved_by.render(),
                    "dossier": r.dossier_id,
                    "consumed": r.consumed,
                }
                for code, r in self.reservations.items()
            },
        }
        _write_atomic(self.path, (json.dumps(data, indent=2) + "\n").encode("utf-8"))

    def register_key(self, address: Address, key: SigningKey) -> None:
        self.keys[address] = key
        self.save()

    def key_for(self, address: Address) -> SigningKey:
        try:
            return self.keys[address]
        except KeyError:
            raise UnknownSigner(address.render()) from None

    def has_key(self, address: Address) -> bool:
        return address in self.keys

    def reserve(self, code: str, reserved_by: Address, dossier_id: str) -> None:
        self.reservations[code] = Reservation(code, reserved_by, dossier_id)
        self.save()

    def consume(self, code: str) -> None:
        self.reservations[code].consumed = True
        self.save()
