"""HTTP facade over a node.

Every endpoint is a thin mapping onto one node operation; the protocol
itself lives below. Authentication is a bearer token obtained by proving
possession of the address's signing key: fetch a one-time nonce, MAC it
with the key, exchange the proof for a token.

Error contract: every failure body is ``{"error": <name>, "detail": ...}``
where ``<name>`` is the protocol error class name verbatim. The
status code is a fixed function of the name (see ``STATUS_BY_ERROR``).
"""

from __future__ import annotations

import asyncio
import secrets
import time

from fastapi import Depends, FastAPI, File, Form, Header, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from .contracts import Role, parse_dossier_id
from .documents import SignedDocument, login_proof
from .errors import (
    InvalidProof,
    MalformedTransaction,
    ProtocolError,
    RejectedByContract,
    UnknownSigner,
    UnknownToken,
)
from .fees import schedule_to_json
from .ledger import Address, Receipt, format_fee, format_usd
from .node import CoaatChainNode

_401 = ("UnknownToken", "InvalidProof")
_403 = ("Unauthorized", "NotYetValidated")
_404 = ("UnknownSvc", "UnknownProperty", "UnknownDossier", "NotFound")
_409 = (
    "AlreadyInitialized",
    "AddressAlreadyRegistered",
    "DuplicateProperty",
    "DossierAlreadyOpen",
    "DossierNotOpen",
    "WrongStatus",
    "EmptyDossier",
    "DuplicateNonce",
    "ReviewCountMismatch",
)
_422 = (
    "MalformedCadastralRef",
    "InvalidRole",
    "SvcMismatch",
    "SignatureInvalid",
    "UnknownSigner",
    "MissingSvcMarker",
    "MarkerAlreadyPresent",
    "ContentTooLarge",
    "EmptyContent",
    "MalformedSvc",
    "MalformedTransaction",
)

STATUS_BY_ERROR = {
    **{name: 401 for name in _401},
    **{name: 403 for name in _403},
    **{name: 404 for name in _404},
    **{name: 409 for name in _409},
    **{name: 422 for name in _422},
}

NONCE_TTL = 120
TOKEN_TTL = 3600
LONG_POLL_MAX = 25.0


def error_response(exc: ProtocolError) -> JSONResponse:
    if isinstance(exc, RejectedByContract):
        exc = exc.inner
    status = STATUS_BY_ERROR.get(exc.name, 500)
    detail = Exception.__str__(exc)
    return JSONResponse(status_code=status, content={"error": exc.name, "detail": detail})


def parse_address(text: str) -> Address:
    try:
        return Address.parse(text)
    except (ValueError, TypeError) as exc:
        raise MalformedTransaction(f"bad address: {exc}") from exc


def parse_hex(text: str, what: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except (ValueError, TypeError) as exc:
        raise MalformedTransaction(f"bad {what}: not hex") from exc


def receipt_json(receipt: Receipt) -> dict:
    return {
        "tx_hash": receipt.tx_hash.hex(),
        "block_height": receipt.block_height,
        "fee_bnb": format_fee(receipt.fee_bnb),
        "fee_usd": format_usd(receipt.fee_usd),
        "events": list(receipt.emitted_events),
    }


class TokenStore:
    """One-time login nonces and bearer sessions, in memory only."""

    def __init__(self):
        self._nonces: dict[str, tuple[Address, float]] = {}
        self._tokens: dict[str, tuple[Address, float]] = {}

    def issue_nonce(self, address: Address) -> str:
        nonce = secrets.token_hex(16)
        self._nonces[nonce] = (address, time.time() + NONCE_TTL)
        return nonce

    def redeem_nonce(self, nonce: str, address: Address) -> None:
        entry = self._nonces.pop(nonce, None)
        if entry is None or entry[0] != address or entry[1] < time.time():
            raise InvalidProof("unknown, expired, or mismatched nonce")

    def issue_token(self, address: Address) -> str:
        token = secrets.token_hex(16)
        self._tokens[token] = (address, time.time() + TOKEN_TTL)
        return token

    def resolve(self, token: str) -> Address:
        entry = self._tokens.get(token)
        if entry is None:
            raise UnknownToken()
        address, expires = entry
        if expires < time.time():
            del self._tokens[token]
            raise UnknownToken("token expired")
        return address


def create_app(node: CoaatChainNode) -> FastAPI:
    app = FastAPI(title="coaatchain", docs_url=None, redoc_url=None)
    tokens = TokenStore()

    @app.exception_handler(ProtocolError)
    async def on_protocol_error(request: Request, exc: ProtocolError):
        return error_response(exc)

    def caller(authorization: str | None = Header(default=None)) -> Address:
        if not authorization or not authorization.startswith("Bearer "):
            raise UnknownToken("missing bearer token")
        return tokens.resolve(authorization[len("Bearer ") :])

    # -- authentication --------------------------------------------------

    @app.get("/auth/nonce")
    def auth_nonce(address: str):
        addr = parse_address(address)
        return {"address": addr.render(), "nonce": tokens.issue_nonce(addr)}

    @app.post("/auth/login")
    async def auth_login(body: dict):
        addr = parse_address(str(body.get("address", "")))
        nonce = str(body.get("nonce", ""))
        proof = parse_hex(str(body.get("proof", "")), "proof")
        tokens.redeem_nonce(nonce, addr)
        try:
            key = node.registry.key_for(addr)
        except UnknownSigner:
            raise InvalidProof("no key registered for this address") from None
        expected = login_proof(bytes.fromhex(nonce), addr, key)
        if not secrets.compare_digest(expected, proof):
            raise InvalidProof()
        record = node.user_record(addr)
        return {
            "token": tokens.issue_token(addr),
            "address": addr.render(),
            "role": int(record.role) if record else None,
            "coaat_id": record.coaat_id if record else None,
            "name": record.name if record else None,
            "expires_in": TOKEN_TTL,
        }

    @app.get("/whoami")
    def whoami(addr: Address = Depends(caller)):
        record = node.user_record(addr)
        return {
            "address": addr.render(),
            "role": int(record.role) if record else None,
            "coaat_id": record.coaat_id if record else None,
            "name": record.name if record else None,
        }

    # -- registration ------------------------------------------------------

    def enrollment_json(e) -> dict:
        return {
            "receipt": receipt_json(e.receipt),
            "address": e.address.render(),
            "signing_key": e.signing_key.secret.hex(),
        }

    @app.post("/kickoff")
    def kickoff(body: dict):
        addr = parse_address(str(body.get("address", "")))
        return enrollment_json(node.kickoff(addr))

    @app.post("/coaats")
    def add_coaat(body: dict, addr: Address = Depends(caller)):
        new_admin = parse_address(str(body.get("address", "")))
        return enrollment_json(node.add_coaat(addr, new_admin, str(body.get("name", ""))))

    @app.post("/users")
    def add_user(body: dict, addr: Address = Depends(caller)):
        new_user = parse_address(str(body.get("address", "")))
        role = body.get("role")
        if not isinstance(role, int):
            raise MalformedTransaction("role must be an integer")
        return enrollment_json(
            node.add_user(addr, new_user, role, str(body.get("name", "")))
        )

    # -- properties and dossiers --------------------------------------------

    @app.post("/properties")
    def register_property(body: dict, addr: Address = Depends(caller)):
        ref = str(body.get("cadastral_ref", ""))
        data = str(body.get("cadastral_data", ""))
        receipt = node.register_property(addr, ref, data)
        return {"receipt": receipt_json(receipt), "cadastral_ref": ref}

    @app.post("/properties/{ref}/dossiers")
    def create_dossier(ref: str, body: dict, addr: Address = Depends(caller)):
        result = node.create_dossier(addr, ref, str(body.get("metadata", "")))
        return {
            "receipt": receipt_json(result.receipt),
            "dossier_id": result.dossier_id,
            "seq": result.seq,
        }

    @app.get("/properties/{ref}/dossiers")
    def list_dossiers(ref: str, addr: Address = Depends(caller)):
        return {"cadastral_ref": ref, "dossiers": node.list_dossiers(addr, ref)}

    @app.post("/dossiers/{dossier_id}/svc")
    def reserve_svc(dossier_id: str, addr: Address = Depends(caller)):
        ref, seq = parse_dossier_id(dossier_id)
        svc = node.reserve_svc(addr, ref, seq)
        return {"svc": svc.code, "dossier_id": dossier_id}

    @app.post("/dossiers/{dossier_id}/documents")
    def add_document(
        dossier_id: str,
        body: UploadFile = File(...),
        signature: str = Form(...),
        addr: Address = Depends(caller),
    ):
        ref, seq = parse_dossier_id(dossier_id)
        content = body.file.read()
        signed = SignedDocument(content, addr, parse_hex(signature, "signature"))
        result = node.add_document(addr, ref, seq, signed)
        return {
            "receipt": receipt_json(result.receipt),
            "svc": result.svc,
            "cid": result.cid.render(),
        }

    @app.post("/dossiers/{dossier_id}/submit")
    def submit_dossier(dossier_id: str, addr: Address = Depends(caller)):
        ref, seq = parse_dossier_id(dossier_id)
        receipt = node.request_validation(addr, ref, seq)
        return {"receipt": receipt_json(receipt), "dossier_id": dossier_id}

    @app.post("/dossiers/{dossier_id}/decision")
    def decide_dossier(
        dossier_id: str,
        decision: str = Form(...),
        reviewed: list[UploadFile] = File(default=[]),
        signature: list[str] = Form(default=[]),
        addr: Address = Depends(caller),
    ):
        from .contracts import DossierStatus

        ref, seq = parse_dossier_id(dossier_id)
        try:
            status = DossierStatus(decision)
        except ValueError:
            raise MalformedTransaction(
                "decision must be 'validated' or 'rejected'"
            ) from None
        if len(reviewed) != len(signature):
            raise MalformedTransaction("one signature per reviewed file required")
        docs = [
            SignedDocument(f.file.read(), addr, parse_hex(sig, "signature"))
            for f, sig in zip(reviewed, signature)
        ]
        result = node.validate_dossier(addr, ref, seq, status, docs)
        return {
            "receipt": receipt_json(result.receipt),
            "dossier_id": dossier_id,
            "status": result.status.value,
            "reviews": [{"svc": code, "cid": cid.render()} for code, cid in result.reviews],
        }

    # -- documents ---------------------------------------------------------

    @app.get("/documents/{svc}")
    def view_document(svc: str, addr: Address = Depends(caller)):
        view = node.view_document(addr, svc)
        headers = {
            "X-Coaat-Svc": view.record.svc,
            "X-Coaat-Cid": view.record.cid.render(),
            "X-Coaat-Version": view.record.version.value,
            "X-Coaat-Tx-Hash": view.record.tx_hash.hex(),
            "X-Coaat-Timestamp": str(view.record.timestamp),
            "X-Coaat-Uploader": view.record.uploader.render(),
            "X-Coaat-Dossier": view.dossier.dossier_id,
            "X-Coaat-Status": view.dossier.status.value,
            "X-Coaat-Property": view.prop.cadastral_ref,
        }
        return Response(
            content=view.body, media_type="application/octet-stream", headers=headers
        )

    # -- events --------------------------------------------------------------

    @app.get("/events")
    async def events(
        since: int = 0,
        role: int | None = None,
        wait: float = 0.0,
        addr: Address = Depends(caller),
    ):
        audience = Role(role) if role is not None else None
        deadline = time.monotonic() + min(max(wait, 0.0), LONG_POLL_MAX)
        while True:
            found = node.events_since(since, audience)
            if found or time.monotonic() >= deadline:
                break
            await asyncio.sleep(0.1)
        return {
            "events": [
                {
                    "id": e.event_id,
                    "kind": e.kind.value,
                    "dossier_id": e.dossier_id,
                    "audience_role": int(e.audience_role),
                    "payload": e.payload,
                }
                for e in found
            ],
            "next_since": max([e.event_id for e in found], default=since),
        }

    # -- operator surface ------------------------------------------------------

    @app.get("/chain/audit")
    def chain_audit():
        report = node.audit()
        return {
            "ok": report.ok,
            "first_corrupt_height": report.first_corrupt_height,
            "height": node.ledger.height,
        }

    @app.get("/chain/dump")
    def chain_dump_endpoint():
        return {"lines": node.dump_chain()}

    @app.get("/costs/report")
    def costs_report(rate: str | None = None):
        from decimal import Decimal, InvalidOperation

        parsed = None
        if rate is not None:
            try:
                parsed = Decimal(rate)
            except InvalidOperation:
                raise MalformedTransaction(f"bad rate {rate!r}") from None
        report = node.cost_report(parsed)
        return {
            "lines": [
                {
                    "kind": line.kind.wire_name if line.kind else None,
                    "label": line.label,
                    "count": line.count,
                    "fee_bnb": format_fee(line.fee_bnb),
                    "total_bnb": format_fee(line.total_bnb),
                    "total_usd": format_usd(line.total_usd),
                }
                for line in report.lines
            ],
            "overall_bnb": format_fee(report.overall_bnb),
            "overall_usd": format_usd(report.overall_usd),
            "usd_per_bnb": str(report.usd_per_bnb),
        }

    @app.get("/costs/schedule")
    def costs_schedule():
        return schedule_to_json(node.schedule)

    return app
