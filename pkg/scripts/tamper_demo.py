#!/usr/bin/env python3
"""Corrupt one byte of a persisted chain and watch the audit catch it.

Builds a real chain by running a scenario into a temp directory, verifies
it, flips a random byte of the log, audits again, then restores the
original bytes and confirms the chain is clean again.
"""

import random
import sys
import tempfile
from pathlib import Path

from coaatchain.node import audit_data_dir
from coaatchain.scenarios import run_scenario
from coaatchain.storage import CHAIN_LOG


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else random.randrange(1 << 30)
    rng = random.Random(seed)
    with tempfile.TemporaryDirectory(prefix="coaatchain-tamper-") as tmp:
        data_dir = Path(tmp)
        run_scenario("validation", data_dir)
        log = data_dir / CHAIN_LOG
        raw = log.read_bytes()
        print(f"chain written: {len(raw)} bytes (seed {seed})")
        print(f"audit before:  ok={audit_data_dir(data_dir).ok}")

        pos = rng.randrange(len(raw))
        mutated = bytearray(raw)
        mutated[pos] ^= rng.randrange(1, 256)
        log.write_bytes(bytes(mutated))
        report = audit_data_dir(data_dir)
        print(
            f"flipped byte at offset {pos}: ok={report.ok},"
            f" first corrupt height {report.first_corrupt_height}"
        )
        assert not report.ok

        log.write_bytes(raw)
        print(f"restored:      ok={audit_data_dir(data_dir).ok}")


if __name__ == "__main__":
    main()
