"""Command-line interface: walkthrough, formats, exit codes."""

import json

from click.testing import CliRunner

from coaatchain.cli import main
from coaatchain.ledger import Address
from coaatchain.storage import CHAIN_LOG

DEPLOYER = Address.derive(b"cli:deployer").render()
ADMIN = Address.derive(b"cli:admin").render()
STAFF = Address.derive(b"cli:staff").render()
REF = "8412007CW2255N0008RL"


def run(runner, tmp_path, *args, expect=0, identity=None):
    argv = ["--data-dir", str(tmp_path / "data")]
    if identity:
        address, keyfile = identity
        argv += ["--address", address, "--keyfile", str(keyfile)]
    argv += list(args)
    result = runner.invoke(main, argv)
    if result.exit_code != expect:  # pragma: no cover - debugging aid
        raise AssertionError(
            f"exit {result.exit_code} != {expect}\nstdout: {result.output}\n"
            f"stderr: {result.stderr}\nexc: {result.exception}"
        )
    return result


def onboard(runner, tmp_path):
    keys = {
        "deployer": tmp_path / "deployer.key",
        "admin": tmp_path / "admin.key",
        "staff": tmp_path / "staff.key",
    }
    run(runner, tmp_path, "kickoff", "--address", DEPLOYER, "--save-key", str(keys["deployer"]))
    run(
        runner,
        tmp_path,
        "coaat",
        "add",
        "--address",
        ADMIN,
        "--name",
        "COAAT Test",
        "--save-key",
        str(keys["admin"]),
        identity=(DEPLOYER, keys["deployer"]),
    )
    run(
        runner,
        tmp_path,
        "user",
        "add",
        "--address",
        STAFF,
        "--role",
        "2",
        "--name",
        "Surveyor",
        "--save-key",
        str(keys["staff"]),
        identity=(ADMIN, keys["admin"]),
    )
    return keys


def test_full_walkthrough(tmp_path):
    runner = CliRunner()
    keys = onboard(runner, tmp_path)
    staff_id = (STAFF, keys["staff"])
    admin_id = (ADMIN, keys["admin"])

    r = run(runner, tmp_path, "property", "register", REF, "--data", "Main street 1", identity=staff_id)
    assert f"property {REF} registered" in r.output

    r = run(runner, tmp_path, "dossier", "create", REF, "--metadata", "new roof", identity=staff_id)
    assert f"dossier {REF}:1 opened" in r.output

    doc_path = tmp_path / "survey.txt"
    doc_path.write_text("roof structure assessment\n")
    r = run(runner, tmp_path, "dossier", "add-file", f"{REF}:1", str(doc_path), identity=staff_id)
    assert "svc: " in r.output and "cid: cid:" in r.output
    svc_code = next(
        line.split("svc: ")[1] for line in r.output.splitlines() if line.startswith("svc: ")
    )

    r = run(runner, tmp_path, "dossier", "submit", f"{REF}:1", identity=staff_id)
    assert "submitted for validation" in r.output

    review_path = tmp_path / "review.txt"
    review_path.write_text("checked and approved\n")
    r = run(
        runner,
        tmp_path,
        "dossier",
        "decide",
        f"{REF}:1",
        "validated",
        "--review",
        str(review_path),
        identity=admin_id,
    )
    assert f"dossier {REF}:1 validated" in r.output
    assert "reviewed copy svc" in r.output

    r = run(runner, tmp_path, "dossier", "list", REF, identity=admin_id)
    assert "validated" in r.output and "2 document(s)" in r.output

    out_path = tmp_path / "fetched.bin"
    r = run(runner, tmp_path, "doc", "view", svc_code, "--out", str(out_path), identity=staff_id)
    assert f"svc: {svc_code}" in r.output
    assert "version: submitted" in r.output
    assert f"property: {REF}" in r.output
    fetched = out_path.read_bytes()
    assert fetched.startswith(b"roof structure assessment")
    assert b"SVC: " + svc_code.encode() in fetched

    r = run(runner, tmp_path, "events", "--role", "2", identity=staff_id)
    assert "DossierStatusChanged" in r.output and "validated" in r.output

    r = run(runner, tmp_path, "audit")
    assert "chain ok" in r.output
    assert "genesis" in r.output  # dump precedes the verdict

    r = run(runner, tmp_path, "cost-report")
    assert "Smart contract factory deployment" in r.output
    assert "0.05250531" in r.output
    assert "302.80 USD per BNB" in r.output


def test_protocol_errors_exit_1_with_error_line(tmp_path):
    runner = CliRunner()
    keys = onboard(runner, tmp_path)
    staff_id = (STAFF, keys["staff"])
    run(runner, tmp_path, "property", "register", REF, identity=staff_id)
    r = run(runner, tmp_path, "property", "register", REF, identity=staff_id, expect=1)
    assert "error: DuplicateProperty" in r.stderr
    r = run(runner, tmp_path, "property", "register", "bad ref", identity=staff_id, expect=1)
    assert "error: MalformedCadastralRef" in r.stderr


def test_missing_identity_is_a_usage_error(tmp_path):
    runner = CliRunner()
    onboard(runner, tmp_path)
    r = run(runner, tmp_path, "property", "register", REF, expect=2)
    assert "--address" in r.stderr or "--token" in r.stderr


def test_unknown_command_and_bad_choice_exit_2(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, ["no-such-command"])
    assert result.exit_code == 2
    keys_dir = tmp_path / "x"
    result = runner.invoke(
        main,
        ["--data-dir", str(keys_dir), "dossier", "decide", "A:1", "maybe", "--review", __file__],
    )
    assert result.exit_code == 2  # 'maybe' is not a valid decision


def test_unreachable_server_exits_3(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main, ["--server", "http://127.0.0.1:9", "--token", "x", "events"]
    )
    assert result.exit_code == 3
    assert "unreachable" in result.stderr.lower() or "error" in result.stderr.lower()


def test_json_lines_format(tmp_path):
    runner = CliRunner()
    r = run(
        runner,
        tmp_path,
        "--format",
        "json-lines",
        "kickoff",
        "--address",
        DEPLOYER,
        "--save-key",
        str(tmp_path / "d.key"),
    )
    body = json.loads(r.output)
    assert body["address"] == DEPLOYER
    assert body["receipt"]["fee_bnb"] == "0.05250531"
    assert len(bytes.fromhex(body["signing_key"])) == 32

    r = run(runner, tmp_path, "--format", "json-lines", "cost-report")
    lines = [json.loads(line) for line in r.output.splitlines() if line.strip()]
    assert lines[-1]["usd_per_bnb"] == "302.80"
    kinds = [l.get("kind") for l in lines[:-1]]
    assert "Kickoff" in kinds and None in kinds


def test_audit_detects_tampering(tmp_path):
    runner = CliRunner()
    keys = onboard(runner, tmp_path)
    run(runner, tmp_path, "property", "register", REF, identity=(STAFF, keys["staff"]))

    log = tmp_path / "data" / CHAIN_LOG
    raw = bytearray(log.read_bytes())
    raw[-20] ^= 0x08
    log.write_bytes(bytes(raw))

    r = run(runner, tmp_path, "audit", expect=1)
    assert "error: IntegrityViolation: chain corrupt at height" in r.stderr


def test_zero_fee_schedule_flag(tmp_path):
    runner = CliRunner()
    r = run(
        runner,
        tmp_path,
        "--fees",
        "zero",
        "--format",
        "json-lines",
        "kickoff",
        "--address",
        DEPLOYER,
    )
    assert json.loads(r.output)["receipt"]["fee_bnb"] == "0.00000000"


def test_svc_reserve_prints_code(tmp_path):
    runner = CliRunner()
    keys = onboard(runner, tmp_path)
    staff_id = (STAFF, keys["staff"])
    run(runner, tmp_path, "property", "register", REF, identity=staff_id)
    run(runner, tmp_path, "dossier", "create", REF, identity=staff_id)
    r = run(runner, tmp_path, "svc", "reserve", f"{REF}:1", identity=staff_id)
    code = r.output.strip()
    assert len(code) == 16

    from coaatchain.documents import checksum_valid

    assert checksum_valid(code)


def test_scenario_command_runs_deterministically(tmp_path):
    runner = CliRunner()
    first = runner.invoke(main, ["scenario", "onboarding"])
    second = runner.invoke(main, ["scenario", "onboarding"])
    assert first.exit_code == 0, first.output
    assert first.output == second.output
    assert "total fees:" in first.output
