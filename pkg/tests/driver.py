"""Shared test drivers.

Two layers live here. ``populate`` scripts one full case through a node
(bootstrap, onboarding, property, dossier, documents, decision) and hands
back the cast with their signing keys. ``RandomDriver`` generates random
action sequences against a bare in-memory ledger while an independent
``Mirror`` re-states the authorization and lifecycle rules; the two are
compared action by action. The mirror deliberately shares no code with
the package so a rule drifting on either side shows up as disagreement.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from coaatchain.cas import Cid
from coaatchain.contracts import (
    DossierStatus,
    DocVersion,
    ProtocolState,
    cadastral_ref_valid,
    encode_add_coaat,
    encode_add_file,
    encode_add_user,
    encode_create_dossier,
    encode_register_property,
    encode_request_validation,
    encode_validate_dossier,
)
from coaatchain.documents import SignedDocument, SigningKey, embed_svc, generate_svc, sign
from coaatchain.errors import RejectedByContract
from coaatchain.ledger import Address, FeeSchedule, FixedStepClock, Ledger, TxKind

PROP_REF = "4821907XK3340F0002QZ"
PROP_REF2 = "0077123MB9912A0044TD"


@dataclass
class Actors:
    deployer: Address
    admin: Address
    admin2: Address
    staff: Address
    staff2: Address
    reader: Address
    keys: dict[Address, SigningKey]

    def key(self, address: Address) -> SigningKey:
        return self.keys[address]


def stamp_and_sign(node, sender, key, ref, seq, body: bytes) -> SignedDocument:
    """Reserve a code, stamp the body with it, sign: the full client side
    of one document upload."""
    svc = node.reserve_svc(sender, ref, seq)
    return sign(embed_svc(body, svc), sender, key)


def make_reviews(node, admin, key, ref, seq) -> list[SignedDocument]:
    """One signed reviewed copy per submitted document, in order."""
    dossier = node.state.dossier(ref, seq)
    submitted = [d for d in dossier.documents if d.version is DocVersion.SUBMITTED]
    return [
        stamp_and_sign(node, admin, key, ref, seq, b"reviewed copy of " + d.svc.encode())
        for d in submitted
    ]


def enroll_cast(node) -> Actors:
    """Bootstrap and register the standard six-actor cast."""
    deployer = Address.derive(b"flow:deployer")
    admin = Address.derive(b"flow:admin")
    admin2 = Address.derive(b"flow:admin2")
    staff = Address.derive(b"flow:staff")
    staff2 = Address.derive(b"flow:staff2")
    reader = Address.derive(b"flow:reader")
    keys = {}
    keys[deployer] = node.kickoff(deployer).signing_key
    keys[admin] = node.add_coaat(deployer, admin, "COAAT One").signing_key
    keys[admin2] = node.add_coaat(deployer, admin2, "COAAT Two").signing_key
    keys[staff] = node.add_user(admin, staff, 2, "Surveyor One").signing_key
    keys[staff2] = node.add_user(admin2, staff2, 2, "Surveyor Two").signing_key
    keys[reader] = node.add_user(admin, reader, 3, "Auditor").signing_key
    return Actors(deployer, admin, admin2, staff, staff2, reader, keys)


def populate(node, ref: str = PROP_REF, decide: bool = True) -> tuple[Actors, dict]:
    """Run the standard case end to end; returns the cast and the artifacts
    (dossier id, svc codes, cids) the tests poke at."""
    actors = enroll_cast(node)
    node.register_property(actors.staff, ref, "Carrer Mallorca 401")
    dossier = node.create_dossier(actors.staff, ref, "Full renovation")
    doc1 = node.add_document(
        actors.staff,
        ref,
        1,
        stamp_and_sign(node, actors.staff, actors.key(actors.staff), ref, 1, b"structural report\n"),
    )
    doc2 = node.add_document(
        actors.staff,
        ref,
        1,
        stamp_and_sign(node, actors.staff, actors.key(actors.staff), ref, 1, b"energy audit\n"),
    )
    info = {"ref": ref, "dossier_id": dossier.dossier_id, "docs": [doc1, doc2]}
    node.request_validation(actors.staff, ref, 1)
    if decide:
        reviews = make_reviews(node, actors.admin, actors.key(actors.admin), ref, 1)
        decision = node.validate_dossier(
            actors.admin, ref, 1, DossierStatus.VALIDATED, reviews
        )
        info["decision"] = decision
    return actors, info


# -- random sequences against an independent rule mirror -----------------------


class Mirror:
    """The protocol rules, restated naively: plain dicts, no events, no
    fees, no hashing. Only answers 'would this action be allowed'."""

    def __init__(self):
        self.initialized = False
        self.role: dict[Address, int] = {}
        self.coaat: dict[Address, int | None] = {}
        self.next_coaat = 1
        # ref -> {"coaat": int | None, "dossiers": [dict]}
        self.props: dict[str, dict] = {}

    def _dossier(self, ref, seq):
        prop = self.props.get(ref)
        if prop is None or not 1 <= seq <= len(prop["dossiers"]):
            return None
        return prop["dossiers"][seq - 1]

    def denial(self, action) -> str | None:
        """None when the action should be accepted, else a short reason."""
        name = action[0]
        sender = action[1]
        if name == "kickoff":
            return "already initialized" if self.initialized else None
        if name == "add_coaat":
            _, _, new = action
            if self.role.get(sender) != 0:
                return "sender is not the system admin"
            if new in self.role:
                return "address already registered"
            return None
        if name == "add_user":
            _, _, new, role = action
            if self.role.get(sender) != 1:
                return "sender is not a COAAT admin"
            if role not in (2, 3):
                return "role out of range"
            if new in self.role:
                return "address already registered"
            return None
        if name == "register_property":
            _, _, ref = action
            if self.role.get(sender) not in (1, 2):
                return "sender may not register properties"
            if not cadastral_ref_valid(ref):
                return "malformed cadastral ref"
            if ref in self.props:
                return "property already registered"
            return None
        if name == "create_dossier":
            _, _, ref = action
            if self.role.get(sender) not in (1, 2):
                return "sender may not open dossiers"
            prop = self.props.get(ref)
            if prop is None:
                return "unknown property"
            if prop["coaat"] is not None and prop["coaat"] != self.coaat.get(sender):
                return "property belongs to another COAAT"
            if any(d["status"] in ("open", "pending") for d in prop["dossiers"]):
                return "a dossier is already open"
            return None
        if name == "add_file":
            _, _, ref, seq = action
            dossier = self._dossier(ref, seq)
            if dossier is None:
                return "unknown dossier"
            if sender != dossier["creator"]:
                return "only the creator may add documents"
            if dossier["status"] != "open":
                return "dossier is not open"
            return None
        if name == "request_validation":
            _, _, ref, seq = action
            dossier = self._dossier(ref, seq)
            if dossier is None:
                return "unknown dossier"
            if sender != dossier["creator"]:
                return "only the creator may submit"
            if dossier["status"] != "open":
                return "dossier is not open"
            if dossier["docs"] == 0:
                return "dossier has no documents"
            return None
        if name == "validate":
            _, _, ref, seq, _decision, extra = action
            if self.role.get(sender) != 1:
                return "sender is not a COAAT admin"
            dossier = self._dossier(ref, seq)
            if dossier is None:
                return "unknown dossier"
            if self.props[ref]["coaat"] != self.coaat.get(sender):
                return "dossier belongs to another COAAT"
            if dossier["status"] != "pending":
                return "dossier is not pending"
            if extra != 0:
                return "review count mismatch"
            return None
        raise AssertionError(f"unknown action {name}")

    def record(self, action) -> None:
        """Apply an action the implementation accepted."""
        name = action[0]
        sender = action[1]
        if name == "kickoff":
            self.initialized = True
            self.role[sender] = 0
            self.coaat[sender] = None
        elif name == "add_coaat":
            _, _, new = action
            self.role[new] = 1
            self.coaat[new] = self.next_coaat
            self.next_coaat += 1
        elif name == "add_user":
            _, _, new, role = action
            self.role[new] = role
            self.coaat[new] = self.coaat[sender]
        elif name == "register_property":
            _, _, ref = action
            self.props[ref] = {"coaat": None, "dossiers": []}
        elif name == "create_dossier":
            _, _, ref = action
            prop = self.props[ref]
            if prop["coaat"] is None:
                prop["coaat"] = self.coaat[sender]
            prop["dossiers"].append({"status": "open", "creator": sender, "docs": 0})
        elif name == "add_file":
            _, _, ref, seq = action
            self._dossier(ref, seq)["docs"] += 1
        elif name == "request_validation":
            _, _, ref, seq = action
            self._dossier(ref, seq)["status"] = "pending"
        elif name == "validate":
            _, _, ref, seq, decision, _ = action
            self._dossier(ref, seq)["status"] = decision


CAST_SEEDS = [b"rand:deployer", b"rand:a", b"rand:b", b"rand:c", b"rand:d", b"rand:e"]
POOL_SEEDS = [b"rand:p%d" % i for i in range(8)]
GOOD_REFS = [
    "1111111AA1111A1111AA",
    "2222222BB2222B2222BB",
    "3333333CC3333C3333CC",
    "4444444DD4444D4444DD",
]
BAD_REFS = ["tooshort", "5555555ee5555e5555ee", "66666 66FF6666F6666F"]


class RandomDriver:
    """Seeded action-sequence driver over an in-memory ledger."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.state = ProtocolState()
        self.schedule = FeeSchedule.flat_zero()
        self.ledger = Ledger(self.state, clock=FixedStepClock(1_600_000_000 + seed))
        self.mirror = Mirror()
        self.cast = [Address.derive(s) for s in CAST_SEEDS]
        self.pool = [Address.derive(s) for s in POOL_SEEDS]
        self.outsider = Address.derive(b"rand:outsider")
        self._svc_seen: set[str] = set()

    # -- action generation ---------------------------------------------------

    def legal_actions(self) -> list[tuple]:
        m = self.mirror
        if not m.initialized:
            return [("kickoff", self.cast[0])]
        actions: list[tuple] = []
        sys_admins = [a for a in self.cast if m.role.get(a) == 0]
        admins = [a for a in self.cast if m.role.get(a) == 1]
        filers = [a for a in self.cast if m.role.get(a) in (1, 2)]
        unregistered = [a for a in self.cast + self.pool if a not in m.role]
        for sender in sys_admins:
            for new in unregistered:
                actions.append(("add_coaat", sender, new))
        for sender in admins:
            for new in unregistered:
                for role in (2, 3):
                    actions.append(("add_user", sender, new, role))
        for sender in filers:
            for ref in GOOD_REFS:
                if ref not in m.props:
                    actions.append(("register_property", sender, ref))
        for ref, prop in m.props.items():
            open_slots = not any(
                d["status"] in ("open", "pending") for d in prop["dossiers"]
            )
            for sender in filers:
                if open_slots and prop["coaat"] in (None, m.coaat.get(sender)):
                    actions.append(("create_dossier", sender, ref))
            for i, dossier in enumerate(prop["dossiers"], start=1):
                if dossier["status"] == "open":
                    actions.append(("add_file", dossier["creator"], ref, i))
                    if dossier["docs"] > 0:
                        actions.append(("request_validation", dossier["creator"], ref, i))
                if dossier["status"] == "pending":
                    for admin in admins:
                        if m.coaat.get(admin) == prop["coaat"]:
                            for decision in ("validated", "rejected"):
                                actions.append(("validate", admin, ref, i, decision, 0))
        return actions

    def random_action(self) -> tuple:
        """Arbitrary action, valid or not."""
        rng = self.rng
        everyone = self.cast + [self.outsider]
        name = rng.choice(
            [
                "kickoff",
                "add_coaat",
                "add_user",
                "register_property",
                "create_dossier",
                "add_file",
                "request_validation",
                "validate",
            ]
        )
        sender = rng.choice(everyone)
        ref = rng.choice(GOOD_REFS + BAD_REFS)
        seq = rng.randint(1, 3)
        if name == "kickoff":
            return (name, sender)
        if name == "add_coaat":
            return (name, sender, rng.choice(self.pool + self.cast))
        if name == "add_user":
            return (name, sender, rng.choice(self.pool + self.cast), rng.randint(0, 4))
        if name in ("register_property", "create_dossier"):
            return (name, sender, ref)
        if name in ("add_file", "request_validation"):
            return (name, sender, ref, seq)
        return (name, sender, ref, seq, rng.choice(["validated", "rejected"]), rng.choice([-1, 0, 0, 1]))

    def pick_action(self, valid_only: bool) -> tuple:
        if valid_only or self.rng.random() < 0.5:
            legal = self.legal_actions()
            if legal:
                return self.rng.choice(legal)
        return self.random_action()

    # -- execution -------------------------------------------------------------

    def _fresh_svc(self):
        while True:
            svc = generate_svc(self.rng.randbytes)
            if svc.code not in self._svc_seen:
                self._svc_seen.add(svc.code)
                return svc

    def _fresh_cid(self) -> Cid:
        return Cid.of(self.rng.randbytes(24))

    def _payload(self, action) -> bytes:
        name = action[0]
        if name == "kickoff":
            return b""
        if name == "add_coaat":
            return encode_add_coaat(action[2], "c")
        if name == "add_user":
            return encode_add_user(action[2], action[3], "u")
        if name == "register_property":
            return encode_register_property(action[2], "d")
        if name == "create_dossier":
            return encode_create_dossier(action[2], "m")
        if name == "add_file":
            return encode_add_file(action[2], action[3], self._fresh_svc(), self._fresh_cid())
        if name == "request_validation":
            return encode_request_validation(action[2], action[3])
        if name == "validate":
            _, _, ref, seq, decision, extra = action
            dossier = self.mirror._dossier(ref, seq)
            n = max(0, (dossier["docs"] if dossier else 0) + extra)
            reviews = [(self._fresh_svc(), self._fresh_cid()) for _ in range(n)]
            return encode_validate_dossier(ref, seq, DossierStatus(decision), reviews)
        raise AssertionError(name)

    _KINDS = {
        "kickoff": TxKind.KICKOFF,
        "add_coaat": TxKind.ADD_COAAT,
        "add_user": TxKind.ADD_USER,
        "register_property": TxKind.REGISTER_PROPERTY,
        "create_dossier": TxKind.CREATE_DOSSIER,
        "add_file": TxKind.ADD_FILE,
        "request_validation": TxKind.REQUEST_VALIDATION,
        "validate": TxKind.VALIDATE_DOSSIER,
    }

    def step(self, valid_only: bool = False) -> tuple:
        """Generate and run one action; cross-check implementation against
        the mirror and the structural invariants. Returns the action."""
        action = self.pick_action(valid_only)
        expected_denial = self.mirror.denial(action)
        payload = self._payload(action)
        height_before = self.ledger.height
        root_before = self.ledger.state_root
        try:
            self.ledger.submit_operation(
                self._KINDS[action[0]], action[1], payload, self.schedule
            )
            accepted = True
        except RejectedByContract:
            accepted = False
        if accepted and expected_denial is not None:
            raise AssertionError(
                f"implementation accepted {action!r}, mirror denies: {expected_denial}"
            )
        if not accepted and expected_denial is None:
            raise AssertionError(f"implementation denied {action!r}, mirror allows it")
        if accepted:
            self.mirror.record(action)
            assert self.ledger.height == height_before + 1
        else:
            assert self.ledger.height == height_before
            assert self.ledger.state_root == root_before
        self._check_one_open()
        return action

    def _check_one_open(self) -> None:
        for ref, prop in self.state.properties.items():
            live = [d for d in prop.dossiers if not d.status.terminal]
            if len(live) > 1:
                raise AssertionError(f"{ref} holds {len(live)} non-terminal dossiers")

    def run(self, steps: int, valid_only: bool = False) -> None:
        for _ in range(steps):
            self.step(valid_only)
