"""Scripted end-to-end walkthroughs of the protocol, one per major flow.

``onboarding`` covers onboarding through document upload: factory kickoff, a
COAAT, a quantity surveyor, a property, a dossier, one stamped document.
``validation`` continues through validation: submit for review, the admin is
alerted, inspects the document, attaches reviewed copies, and validates;
the surveyor sees the status-change alert.

Runs are deterministic: fixed-step clock, counter-mode seeded entropy,
derived actor addresses, fixed document bytes. Two runs on fresh data
directories produce byte-identical chain dumps, which is what makes the
scenarios usable as golden tests and as reproducible evidence.

Everything goes through the HTTP surface (in-process ASGI), so a scenario
exercises the same path a browser or remote CLI would.
"""

from __future__ import annotations

import asyncio
import hashlib
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .documents import EntropySource, SignedDocument, SigningKey, Svc, embed_svc, login_proof, sign, strip_svc
from .ledger import Address, FixedStepClock
from .node import CoaatChainNode
from .service import create_app

SCENARIO_EPOCH = 1_700_000_000

DEPLOYER = Address.derive(b"scenario:deployer")
COAAT_ADMIN = Address.derive(b"scenario:coaat-admin")
SURVEYOR = Address.derive(b"scenario:surveyor")

PROPERTY_REF = "9872023VH5797S0001WX"
PROPERTY_DATA = "Av. Diagonal 220, Barcelona"

DOC_STRUCTURAL = b"Certificate of structural works, phase 1.\n"
DOC_ENERGY = b"Energy efficiency report, class B.\n"
REVIEW_NOTE = b"Reviewed and approved by the COAAT validation desk.\n"


def seeded_entropy(seed: bytes) -> EntropySource:
    """Deterministic byte stream: SHA-256 in counter mode over the seed."""
    counter = 0

    def gen(n: int) -> bytes:
        nonlocal counter
        out = b""
        while len(out) < n:
            out += hashlib.sha256(seed + counter.to_bytes(8, "big")).digest()
            counter += 1
        return out[:n]

    return gen


@dataclass
class ScenarioResult:
    name: str
    narrative: list[str] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    dump: list[str] = field(default_factory=list)
    state_root: str = ""
    total_fee_bnb: str = ""
    total_fee_usd: str = ""


class _Driver:
    """Small HTTP client wrapper holding per-actor tokens and keys."""

    def __init__(self, client: httpx.AsyncClient, result: ScenarioResult):
        self.client = client
        self.result = result
        self.keys: dict[Address, SigningKey] = {}
        self.tokens: dict[Address, str] = {}

    def say(self, line: str) -> None:
        self.result.narrative.append(line)

    async def call(self, method: str, path: str, actor: Address | None = None, **kw):
        headers = kw.pop("headers", {})
        if actor is not None:
            headers["Authorization"] = f"Bearer {self.tokens[actor]}"
        resp = await self.client.request(method, path, headers=headers, **kw)
        if resp.status_code >= 400:
            raise RuntimeError(f"{method} {path} -> {resp.status_code}: {resp.text}")
        return resp

    def remember_key(self, enrollment: dict) -> None:
        addr = Address.parse(enrollment["address"])
        self.keys[addr] = SigningKey(bytes.fromhex(enrollment["signing_key"]))

    async def login(self, actor: Address) -> None:
        r = await self.call("GET", "/auth/nonce", params={"address": actor.render()})
        nonce = r.json()["nonce"]
        proof = login_proof(bytes.fromhex(nonce), actor, self.keys[actor]).hex()
        r = await self.call(
            "POST",
            "/auth/login",
            json={"address": actor.render(), "nonce": nonce, "proof": proof},
        )
        self.tokens[actor] = r.json()["token"]

    def fee_of(self, body: dict) -> str:
        return body["receipt"]["fee_bnb"]

    async def stamped_upload(
        self, actor: Address, dossier_id: str, content: bytes
    ) -> dict:
        """Reserve a code, embed it, sign, upload. The client-side half of
        the document flow."""
        r = await self.call("POST", f"/dossiers/{dossier_id}/svc", actor=actor)
        svc = Svc(r.json()["svc"])
        body = embed_svc(content, svc)
        signed = sign(body, actor, self.keys[actor])
        r = await self.call(
            "POST",
            f"/dossiers/{dossier_id}/documents",
            actor=actor,
            files={"body": ("document.pdf", signed.body)},
            data={"signature": signed.signature.hex()},
        )
        return r.json()


async def _onboard_and_file(driver: _Driver) -> tuple[str, list[dict]]:
    """Shared first act: kickoff through document upload. Returns the
    dossier id and the upload result bodies."""
    d = driver
    r = await d.call("POST", "/kickoff", json={"address": DEPLOYER.render()})
    d.remember_key(r.json())
    d.say(f"deployer kicks off the contract factory (fee {d.fee_of(r.json())} BNB)")
    await d.login(DEPLOYER)

    r = await d.call(
        "POST",
        "/coaats",
        actor=DEPLOYER,
        json={"address": COAAT_ADMIN.render(), "name": "COAAT Barcelona"},
    )
    d.remember_key(r.json())
    d.say(f"system admin registers COAAT Barcelona (fee {d.fee_of(r.json())} BNB)")
    await d.login(COAAT_ADMIN)

    r = await d.call(
        "POST",
        "/users",
        actor=COAAT_ADMIN,
        json={"address": SURVEYOR.render(), "role": 2, "name": "Quantity Surveyor"},
    )
    d.remember_key(r.json())
    d.say(f"COAAT admin registers a quantity surveyor (fee {d.fee_of(r.json())} BNB)")
    await d.login(SURVEYOR)

    r = await d.call(
        "POST",
        "/properties",
        actor=SURVEYOR,
        json={"cadastral_ref": PROPERTY_REF, "cadastral_data": PROPERTY_DATA},
    )
    d.say(f"surveyor registers property {PROPERTY_REF} (fee {d.fee_of(r.json())} BNB)")

    r = await d.call(
        "POST",
        f"/properties/{PROPERTY_REF}/dossiers",
        actor=SURVEYOR,
        json={"metadata": "Renovation project"},
    )
    dossier_id = r.json()["dossier_id"]
    d.say(f"surveyor opens dossier {dossier_id} (fee {d.fee_of(r.json())} BNB)")

    uploads = []
    for content in (DOC_STRUCTURAL, DOC_ENERGY):
        up = await d.stamped_upload(SURVEYOR, dossier_id, content)
        uploads.append(up)
        d.say(
            f"surveyor stamps and uploads a document, SVC {up['svc']}"
            f" (fee {d.fee_of(up)} BNB)"
        )
    return dossier_id, uploads


async def _finish(node: CoaatChainNode, result: ScenarioResult) -> None:
    report = node.cost_report()
    from .ledger import format_fee, format_usd

    result.dump = node.dump_chain()
    result.state_root = node.ledger.state_root.hex()
    result.total_fee_bnb = format_fee(report.overall_bnb)
    result.total_fee_usd = format_usd(report.overall_usd)


async def run_onboarding(data_dir: str | Path) -> ScenarioResult:
    """Property registration and dossier management."""
    result = ScenarioResult(name="onboarding")
    node = CoaatChainNode(
        data_dir,
        clock=FixedStepClock(SCENARIO_EPOCH),
        entropy=seeded_entropy(b"scenario:onboarding"),
    )
    transport = httpx.ASGITransport(app=create_app(node))
    async with httpx.AsyncClient(transport=transport, base_url="http://scenario") as client:
        driver = _Driver(client, result)
        await _onboard_and_file(driver)
    await _finish(node, result)
    return result


async def run_validation(data_dir: str | Path) -> ScenarioResult:
    """Dossier validation: submission, alerting, review, decision."""
    result = ScenarioResult(name="validation")
    node = CoaatChainNode(
        data_dir,
        clock=FixedStepClock(SCENARIO_EPOCH),
        entropy=seeded_entropy(b"scenario:validation"),
    )
    transport = httpx.ASGITransport(app=create_app(node))
    async with httpx.AsyncClient(transport=transport, base_url="http://scenario") as client:
        d = _Driver(client, result)
        dossier_id, uploads = await _onboard_and_file(d)

        r = await d.call("POST", f"/dossiers/{dossier_id}/submit", actor=SURVEYOR)
        d.say(f"surveyor submits {dossier_id} for validation (fee {d.fee_of(r.json())} BNB)")

        r = await d.call(
            "GET", "/events", actor=COAAT_ADMIN, params={"since": 0, "role": 1}
        )
        admin_alerts = r.json()["events"]
        result.events.extend(admin_alerts)
        d.say(f"COAAT admin is alerted: {admin_alerts[-1]['kind']} for {dossier_id}")

        reviewed_docs = []
        for up in uploads:
            r = await d.call("GET", f"/documents/{up['svc']}", actor=COAAT_ADMIN)
            original, _ = strip_svc(r.content)
            r2 = await d.call("POST", f"/dossiers/{dossier_id}/svc", actor=COAAT_ADMIN)
            svc = Svc(r2.json()["svc"])
            body = embed_svc(original + REVIEW_NOTE, svc)
            reviewed_docs.append(sign(body, COAAT_ADMIN, d.keys[COAAT_ADMIN]))
            d.say(f"admin reviews document {up['svc']}, re-stamps copy as {svc.code}")

        r = await d.call(
            "POST",
            f"/dossiers/{dossier_id}/decision",
            actor=COAAT_ADMIN,
            files=[("reviewed", ("reviewed.pdf", doc.body)) for doc in reviewed_docs],
            data={
                "decision": "validated",
                "signature": [doc.signature.hex() for doc in reviewed_docs],
            },
        )
        d.say(f"admin validates {dossier_id} (fee {d.fee_of(r.json())} BNB)")

        r = await d.call(
            "GET", "/events", actor=SURVEYOR, params={"since": 0, "role": 2}
        )
        staff_alerts = r.json()["events"]
        result.events.extend(staff_alerts)
        d.say(f"surveyor is alerted: {staff_alerts[-1]['kind']} -> validated")
    await _finish(node, result)
    return result


_SCENARIOS = {"onboarding": run_onboarding, "validation": run_validation}


def scenario_names() -> list[str]:
    return sorted(_SCENARIOS)


def run_scenario(name: str, data_dir: str | Path | None = None) -> ScenarioResult:
    """Run a named scenario on a fresh instance (temp dir unless given)."""
    if name not in _SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; have {scenario_names()}")
    if data_dir is not None:
        return asyncio.run(_SCENARIOS[name](data_dir))
    with tempfile.TemporaryDirectory(prefix=f"coaatchain-{name}-") as tmp:
        return asyncio.run(_SCENARIOS[name](tmp))
