#!/usr/bin/env python3
"""Start a demo server on a pre-populated instance.

Boots a node, runs one full case through it (a COAAT, a surveyor, a
validated dossier with one document), writes the actors' keyfiles next to
the data directory, prints a login crib, then serves HTTP until killed.
Re-running on the same --data-dir skips the population step.
"""

import argparse
import tempfile
from pathlib import Path

import uvicorn

from coaatchain.contracts import DossierStatus
from coaatchain.documents import embed_svc, sign
from coaatchain.ledger import Address
from coaatchain.node import CoaatChainNode
from coaatchain.service import create_app

PROPERTY_REF = "9872023VH5797S0001WX"

ACTORS = [
    ("deployer", Address.derive(b"demo:deployer")),
    ("admin", Address.derive(b"demo:admin")),
    ("staff", Address.derive(b"demo:staff")),
]


def populate(node: CoaatChainNode, keydir: Path) -> None:
    (deployer, admin, staff) = (addr for _, addr in ACTORS)
    keys = {deployer: node.kickoff(deployer).signing_key}
    keys[admin] = node.add_coaat(deployer, admin, "COAAT Barcelona").signing_key
    keys[staff] = node.add_user(admin, staff, 2, "Demo Surveyor").signing_key

    node.register_property(staff, PROPERTY_REF, "Av. Diagonal 220, Barcelona")
    node.create_dossier(staff, PROPERTY_REF, "Demo renovation")
    svc = node.reserve_svc(staff, PROPERTY_REF, 1)
    body = embed_svc(b"Demo structural report.\n", svc)
    node.add_document(staff, PROPERTY_REF, 1, sign(body, staff, keys[staff]))
    node.request_validation(staff, PROPERTY_REF, 1)

    reviewed_svc = node.reserve_svc(admin, PROPERTY_REF, 1)
    reviewed = embed_svc(b"Demo structural report. Reviewed.\n", reviewed_svc)
    node.validate_dossier(
        admin, PROPERTY_REF, 1, DossierStatus.VALIDATED,
        [sign(reviewed, admin, keys[admin])],
    )

    keydir.mkdir(exist_ok=True)
    for name, addr in ACTORS:
        path = keydir / f"{name}.key"
        path.write_text(keys[addr].secret.hex() + "\n", encoding="utf-8")
        path.chmod(0o600)
    print(f"document on chain: SVC {svc.code}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data-dir", default=None, help="Default: a fresh temp dir.")
    ap.add_argument("--listen", default="127.0.0.1:8715")
    args = ap.parse_args()

    data_dir = Path(args.data_dir or tempfile.mkdtemp(prefix="coaatchain-demo-"))
    node = CoaatChainNode(data_dir)
    keydir = data_dir / "demo-keys"
    if node.ledger.height == 0:
        populate(node, keydir)
    print(f"data dir: {data_dir}")
    for name, addr in ACTORS:
        print(f"  {name:9s} {addr.render()}  --keyfile {keydir / (name + '.key')}")
    print("try:")
    print(
        f"  coaatchain --server http://{args.listen}"
        f" --address {ACTORS[2][1].render()} --keyfile {keydir / 'staff.key'}"
        f" dossier list {PROPERTY_REF}"
    )

    host, _, port = args.listen.rpartition(":")
    uvicorn.run(create_app(node), host=host, port=int(port), log_level="info")


if __name__ == "__main__":
    main()
