"""Operator command line.

Every command is a thin client of the HTTP API. With ``--server`` it
talks to a remote service; otherwise it opens the data directory locally
and drives the very same app in-process, so both modes exercise one code
path and one error contract.

Exit codes: 0 success, 1 protocol error (error name on stderr), 2 usage,
3 could not reach the server.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import httpx

from . import fees as fees_mod
from .documents import SigningKey, Svc, embed_svc, login_proof, sign
from .ledger import Address, format_fee, format_usd
from .node import CoaatChainNode, audit_data_dir
from .scenarios import run_scenario, scenario_names

DEFAULT_DATA_DIR = "./coaatchain-data"


class ProtocolFailure(Exception):
    def __init__(self, name: str, detail: str, status: int):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name
        self.detail = detail
        self.status = status


@dataclass
class CliState:
    server: str | None
    data_dir: str
    token: str | None
    address: str | None
    keyfile: str | None
    fees_spec: str | None
    fmt: str
    _client: object = None

    @property
    def client(self):
        if self._client is None:
            if self.server:
                self._client = httpx.Client(base_url=self.server, timeout=30.0)
            else:
                import warnings

                with warnings.catch_warnings():
                    # this environment's starlette build warns on import
                    warnings.simplefilter("ignore")
                    from fastapi.testclient import TestClient

                from .service import create_app

                schedule = (
                    fees_mod.resolve_schedule(self.fees_spec) if self.fees_spec else None
                )
                node = CoaatChainNode(self.data_dir, schedule=schedule)
                self._client = TestClient(
                    create_app(node), raise_server_exceptions=False
                )
        return self._client

    def request(self, method: str, path: str, auth: bool = True, **kw):
        headers = kw.pop("headers", {})
        if auth:
            headers["Authorization"] = f"Bearer {self.ensure_token()}"
        try:
            resp = self.client.request(method, path, headers=headers, **kw)
        except httpx.TransportError as exc:
            click.echo(f"error: cannot reach server: {exc}", err=True)
            sys.exit(3)
        if resp.status_code >= 400:
            try:
                body = resp.json()
                raise ProtocolFailure(
                    body["error"], body.get("detail", ""), resp.status_code
                )
            except (KeyError, ValueError):
                raise ProtocolFailure("HttpError", resp.text[:200], resp.status_code)
        return resp

    def ensure_token(self) -> str:
        if self.token:
            return self.token
        if not (self.address and self.keyfile):
            raise click.UsageError(
                "authentication required: pass --token, or --address with --keyfile"
            )
        addr = Address.parse(self.address)
        key = load_keyfile(self.keyfile)
        r = self.request("GET", "/auth/nonce", auth=False, params={"address": addr.render()})
        nonce = r.json()["nonce"]
        proof = login_proof(bytes.fromhex(nonce), addr, key).hex()
        r = self.request(
            "POST",
            "/auth/login",
            auth=False,
            json={"address": addr.render(), "nonce": nonce, "proof": proof},
        )
        self.token = r.json()["token"]
        return self.token

    def signing_identity(self) -> tuple[Address, SigningKey]:
        if not (self.address and self.keyfile):
            raise click.UsageError(
                "this command signs documents: pass --address and --keyfile"
            )
        return Address.parse(self.address), load_keyfile(self.keyfile)

    def emit(self, obj: dict, lines: list[str]) -> None:
        if self.fmt == "json-lines":
            click.echo(json.dumps(obj, sort_keys=True))
        else:
            for line in lines:
                click.echo(line)


def load_keyfile(path: str) -> SigningKey:
    text = Path(path).read_text(encoding="utf-8").strip()
    return SigningKey(bytes.fromhex(text))


def save_keyfile(path: str, key_hex: str) -> None:
    p = Path(path)
    p.write_text(key_hex + "\n", encoding="utf-8")
    p.chmod(0o600)


def receipt_lines(body: dict) -> list[str]:
    r = body["receipt"]
    return [
        f"tx {r['tx_hash']} at height {r['block_height']}"
        f" (fee {r['fee_bnb']} BNB / {r['fee_usd']} USD)"
    ]


def protocol_guard(fn):
    """Map protocol failures to exit code 1 with the error name on stderr."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ProtocolFailure as exc:
            click.echo(f"error: {exc.name}: {exc.detail}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--server", envvar="COAATCHAIN_SERVER", default=None, help="Service URL; omit to run against --data-dir in-process.")
@click.option("--data-dir", envvar="COAATCHAIN_DATA", default=DEFAULT_DATA_DIR, show_default=True)
@click.option("--token", envvar="COAATCHAIN_TOKEN", default=None, help="Bearer token from a previous login.")
@click.option("--address", envvar="COAATCHAIN_ADDRESS", default=None, help="Caller address (with --keyfile, logs in automatically).")
@click.option("--keyfile", envvar="COAATCHAIN_KEYFILE", default=None, help="File holding the caller's signing key (hex).")
@click.option("--fees", "fees_spec", default=None, help="Fee schedule: 'testnet', 'zero', or a JSON file (local mode).")
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]), default="text", show_default=True)
@click.pass_context
def main(ctx, server, data_dir, token, address, keyfile, fees_spec, fmt):
    """Construction dossiers on a simulated permissioned blockchain."""
    ctx.obj = CliState(server, data_dir, token, address, keyfile, fees_spec, fmt)


@main.command()
@click.option("--address", "new_address", required=True, help="System admin address.")
@click.option("--save-key", type=click.Path(), default=None, help="Write the issued signing key here.")
@click.pass_obj
@protocol_guard
def kickoff(state: CliState, new_address, save_key):
    """Deploy the contract factory and register the system admin."""
    r = state.request("POST", "/kickoff", auth=False, json={"address": new_address})
    body = r.json()
    if save_key:
        save_keyfile(save_key, body["signing_key"])
    state.emit(
        body,
        [
            f"system admin {body['address']} registered",
            f"signing key: {body['signing_key']}"
            + (f" (saved to {save_key})" if save_key else ""),
            *receipt_lines(body),
        ],
    )


@main.group()
def coaat():
    """COAAT organizations."""


@coaat.command("add")
@click.option("--address", "new_address", required=True)
@click.option("--name", required=True)
@click.option("--save-key", type=click.Path(), default=None)
@click.pass_obj
@protocol_guard
def coaat_add(state: CliState, new_address, name, save_key):
    """Register a COAAT and its Role 1 admin (system admin only)."""
    r = state.request("POST", "/coaats", json={"address": new_address, "name": name})
    body = r.json()
    if save_key:
        save_keyfile(save_key, body["signing_key"])
    state.emit(
        body,
        [
            f"COAAT admin {body['address']} registered",
            f"signing key: {body['signing_key']}"
            + (f" (saved to {save_key})" if save_key else ""),
            *receipt_lines(body),
        ],
    )


@main.group()
def user():
    """COAAT staff and read-only users."""


@user.command("add")
@click.option("--address", "new_address", required=True)
@click.option("--role", type=int, required=True, help="2 = staff, 3 = read-only.")
@click.option("--name", required=True)
@click.option("--save-key", type=click.Path(), default=None)
@click.pass_obj
@protocol_guard
def user_add(state: CliState, new_address, role, name, save_key):
    """Register a user under the caller's COAAT (COAAT admin only)."""
    r = state.request(
        "POST", "/users", json={"address": new_address, "role": role, "name": name}
    )
    body = r.json()
    if save_key:
        save_keyfile(save_key, body["signing_key"])
    state.emit(
        body,
        [
            f"user {body['address']} registered with role {role}",
            f"signing key: {body['signing_key']}"
            + (f" (saved to {save_key})" if save_key else ""),
            *receipt_lines(body),
        ],
    )


@main.group(name="property")
def property_group():
    """Properties keyed by cadastral reference."""


@property_group.command("register")
@click.argument("ref")
@click.option("--data", default="", help="Cadastral data (free text).")
@click.pass_obj
@protocol_guard
def property_register(state: CliState, ref, data):
    """Register a property (20-char uppercase alphanumeric reference)."""
    r = state.request(
        "POST", "/properties", json={"cadastral_ref": ref, "cadastral_data": data}
    )
    body = r.json()
    state.emit(body, [f"property {ref} registered", *receipt_lines(body)])


@main.group()
def dossier():
    """Construction dossier lifecycle."""


@dossier.command("create")
@click.argument("ref")
@click.option("--metadata", default="")
@click.pass_obj
@protocol_guard
def dossier_create(state: CliState, ref, metadata):
    """Open a new dossier on a property."""
    r = state.request(
        "POST", f"/properties/{ref}/dossiers", json={"metadata": metadata}
    )
    body = r.json()
    state.emit(
        body, [f"dossier {body['dossier_id']} opened", *receipt_lines(body)]
    )


@dossier.command("add-file")
@click.argument("dossier_id")
@click.argument("file", type=click.Path(exists=True))
@click.pass_obj
@protocol_guard
def dossier_add_file(state: CliState, dossier_id, file):
    """Reserve an SVC, stamp it into FILE, sign, and upload."""
    addr, key = state.signing_identity()
    r = state.request("POST", f"/dossiers/{dossier_id}/svc")
    svc = Svc(r.json()["svc"])
    content = Path(file).read_bytes()
    body_bytes = embed_svc(content, svc)
    signed = sign(body_bytes, addr, key)
    r = state.request(
        "POST",
        f"/dossiers/{dossier_id}/documents",
        files={"body": (Path(file).name, signed.body)},
        data={"signature": signed.signature.hex()},
    )
    body = r.json()
    state.emit(
        body,
        [
            f"document added to {dossier_id}",
            f"svc: {body['svc']}",
            f"cid: {body['cid']}",
            *receipt_lines(body),
        ],
    )


@dossier.command("submit")
@click.argument("dossier_id")
@click.pass_obj
@protocol_guard
def dossier_submit(state: CliState, dossier_id):
    """Request validation (dossier moves to pending_validation)."""
    r = state.request("POST", f"/dossiers/{dossier_id}/submit")
    body = r.json()
    state.emit(
        body, [f"dossier {dossier_id} submitted for validation", *receipt_lines(body)]
    )


@dossier.command("decide")
@click.argument("dossier_id")
@click.argument("decision", type=click.Choice(["validated", "rejected"]))
@click.option(
    "--review",
    "reviews",
    type=click.Path(exists=True),
    multiple=True,
    required=True,
    help="Reviewed copy, one per submitted document, in submission order.",
)
@click.pass_obj
@protocol_guard
def dossier_decide(state: CliState, dossier_id, decision, reviews):
    """Validate or reject a pending dossier (COAAT admin only)."""
    addr, key = state.signing_identity()
    signed_docs = []
    for path in reviews:
        r = state.request("POST", f"/dossiers/{dossier_id}/svc")
        svc = Svc(r.json()["svc"])
        body_bytes = embed_svc(Path(path).read_bytes(), svc)
        signed_docs.append(sign(body_bytes, addr, key))
    r = state.request(
        "POST",
        f"/dossiers/{dossier_id}/decision",
        files=[("reviewed", (Path(p).name, d.body)) for p, d in zip(reviews, signed_docs)],
        data={
            "decision": decision,
            "signature": [d.signature.hex() for d in signed_docs],
        },
    )
    body = r.json()
    lines = [f"dossier {dossier_id} {body['status']}"]
    for rv in body["reviews"]:
        lines.append(f"reviewed copy svc {rv['svc']} cid {rv['cid']}")
    lines.extend(receipt_lines(body))
    state.emit(body, lines)


@dossier.command("list")
@click.argument("ref")
@click.pass_obj
@protocol_guard
def dossier_list(state: CliState, ref):
    """List a property's dossiers (COAAT admins and staff)."""
    r = state.request("GET", f"/properties/{ref}/dossiers")
    body = r.json()
    lines = []
    for d in body["dossiers"]:
        lines.append(
            f"{d['dossier_id']}  {d['status']}  {d['document_count']} document(s)"
            f"  creator {d['creator']}"
        )
    state.emit(body, lines or ["no dossiers"])


@main.group()
def svc():
    """Secure Verification Codes."""


@svc.command("reserve")
@click.argument("dossier_id")
@click.pass_obj
@protocol_guard
def svc_reserve(state: CliState, dossier_id):
    """Mint a code for the next document of a dossier (free)."""
    r = state.request("POST", f"/dossiers/{dossier_id}/svc")
    body = r.json()
    state.emit(body, [body["svc"]])


@main.group()
def doc():
    """Documents."""


@doc.command("view")
@click.argument("svc_code")
@click.option("--out", type=click.Path(), default=None, help="Write the document body here.")
@click.pass_obj
@protocol_guard
def doc_view(state: CliState, svc_code, out):
    """Fetch a document and its chain provenance by SVC."""
    r = state.request("GET", f"/documents/{svc_code}")
    provenance = {
        "svc": r.headers["X-Coaat-Svc"],
        "cid": r.headers["X-Coaat-Cid"],
        "version": r.headers["X-Coaat-Version"],
        "tx_hash": r.headers["X-Coaat-Tx-Hash"],
        "timestamp": r.headers["X-Coaat-Timestamp"],
        "uploader": r.headers["X-Coaat-Uploader"],
        "dossier_id": r.headers["X-Coaat-Dossier"],
        "status": r.headers["X-Coaat-Status"],
        "property": r.headers["X-Coaat-Property"],
    }
    if out:
        Path(out).write_bytes(r.content)
        provenance["saved_to"] = out
    lines = [f"{k}: {v}" for k, v in provenance.items()]
    if not out:
        lines.append("(use --out FILE to save the document body)")
    state.emit(provenance, lines)


@main.command()
@click.option("--since", type=int, default=0, show_default=True)
@click.option("--role", type=int, default=None, help="Filter by audience role.")
@click.option("--wait", type=float, default=0.0, help="Long-poll seconds.")
@click.pass_obj
@protocol_guard
def events(state: CliState, since, role, wait):
    """Poll the ordered event feed."""
    params = {"since": since, "wait": wait}
    if role is not None:
        params["role"] = role
    r = state.request("GET", "/events", params=params)
    body = r.json()
    lines = [
        f"[{e['id']}] {e['kind']} {e['dossier_id']} -> {e['payload'].get('status', '')}"
        f" (audience role {e['audience_role']})"
        for e in body["events"]
    ]
    state.emit(body, lines or ["no events"])


@main.command()
@click.pass_obj
@protocol_guard
def audit(state: CliState):
    """Verify the stored chain and print the chain dump.

    Exits 1 with the first corrupt height if any stored byte fails its
    hash, linkage, or replay check.
    """
    if state.server:
        report = state.request("GET", "/chain/audit", auth=False).json()
        dump = state.request("GET", "/chain/dump", auth=False).json()["lines"]
    else:
        local = audit_data_dir(state.data_dir)
        report = {
            "ok": local.ok,
            "first_corrupt_height": local.first_corrupt_height,
        }
        dump = _local_dump(state)
    for line in dump:
        click.echo(line)
    if state.fmt == "json-lines":
        click.echo(json.dumps(report, sort_keys=True))
    if not report["ok"]:
        click.echo(
            f"error: IntegrityViolation: chain corrupt at height"
            f" {report['first_corrupt_height']}",
            err=True,
        )
        sys.exit(1)
    click.echo("chain ok" if state.fmt == "text" else "", nl=state.fmt == "text")


def _local_dump(state: CliState) -> list[str]:
    """Chain dump straight from disk; tolerates a corrupt tail."""
    from . import storage
    from .ledger import chain_dump

    store = storage.ChainStore(Path(state.data_dir) / storage.CHAIN_LOG)
    blocks, _ = store.read_blocks_lenient()
    config = Path(state.data_dir) / storage.CONFIG_FILE
    schedule = (
        fees_mod.load_schedule(config) if config.exists() else fees_mod.testnet_schedule()
    )
    return chain_dump(blocks, schedule)


@main.command("cost-report")
@click.option("--rate", default=None, help="USD per BNB override.")
@click.pass_obj
@protocol_guard
def cost_report(state: CliState, rate):
    """Per-kind transaction fees for everything on the chain."""
    params = {"rate": rate} if rate else {}
    body = state.request("GET", "/costs/report", auth=False, params=params).json()
    if state.fmt == "json-lines":
        for line in body["lines"]:
            click.echo(json.dumps(line, sort_keys=True))
        click.echo(
            json.dumps(
                {
                    "overall_bnb": body["overall_bnb"],
                    "overall_usd": body["overall_usd"],
                    "usd_per_bnb": body["usd_per_bnb"],
                },
                sort_keys=True,
            )
        )
        return
    width = max(len(l["label"]) for l in body["lines"])
    click.echo(f"{'operation':<{width}}  {'count':>5}  {'fee (BNB)':>12}  {'total (BNB)':>12}  {'total (USD)':>11}")
    for line in body["lines"]:
        click.echo(
            f"{line['label']:<{width}}  {line['count']:>5}  {line['fee_bnb']:>12}"
            f"  {line['total_bnb']:>12}  {line['total_usd']:>11}"
        )
    click.echo(
        f"{'overall':<{width}}  {'':>5}  {'':>12}  {body['overall_bnb']:>12}"
        f"  {body['overall_usd']:>11}"
    )
    click.echo(f"(rate: {body['usd_per_bnb']} USD per BNB)")


@main.command()
@click.argument("name", type=click.Choice(scenario_names()))
@click.option("--data-dir", "scenario_dir", type=click.Path(), default=None,
              help="Run here instead of a throwaway directory.")
@click.pass_obj
@protocol_guard
def scenario(state: CliState, name, scenario_dir):
    """Replay a scripted walkthrough on a fresh instance."""
    result = run_scenario(name, scenario_dir)
    if state.fmt == "json-lines":
        click.echo(
            json.dumps(
                {
                    "name": result.name,
                    "narrative": result.narrative,
                    "events": result.events,
                    "dump": result.dump,
                    "state_root": result.state_root,
                    "total_fee_bnb": result.total_fee_bnb,
                    "total_fee_usd": result.total_fee_usd,
                },
                sort_keys=True,
            )
        )
        return
    for line in result.narrative:
        click.echo(line)
    click.echo("")
    for line in result.dump:
        click.echo(line)
    click.echo(
        f"total fees: {result.total_fee_bnb} BNB ({result.total_fee_usd} USD)"
    )


@main.command()
@click.option("--listen", default="127.0.0.1:8715", show_default=True)
@click.pass_obj
def serve(state: CliState, listen):
    """Run the HTTP service over the data directory."""
    import uvicorn

    from .service import create_app

    schedule = fees_mod.resolve_schedule(state.fees_spec) if state.fees_spec else None
    node = CoaatChainNode(state.data_dir, schedule=schedule)
    host, _, port = listen.rpartition(":")
    uvicorn.run(create_app(node), host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
