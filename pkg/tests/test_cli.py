import json
import subprocess
import sys

import pytest

from conftest import T0
from triauth.cli import main

CERT = ["--name", "Alice", "--program", "CS", "--date", "2023-05-15", "--gpa", "3.90"]


@pytest.fixture
def run(tmp_path, capsys):
    def _run(*argv):
        code = main(["-w", str(tmp_path), "--seed", "7", "--now", str(T0), *argv])
        out = capsys.readouterr()
        return code, out.out.strip(), out.err.strip()
    return _run


def _json(run, *argv):
    code, out, _ = run("--json", *argv)
    return code, json.loads(out)


def test_cert_issue_verify(run):
    code, doc = _json(run, "cert", "issue", *CERT)
    assert code == 0
    cid = doc["certificate_id"]
    assert run("cert", "verify", cid, *CERT)[:2] == (0, "valid")
    altered = CERT[:-1] + ["4.00"]
    code, out, _ = run("cert", "verify", cid, *altered)
    assert code == 1 and out == "invalid: mismatch"
    assert run("cert", "revoke", cid)[0] == 0
    assert run("cert", "verify", cid, *CERT)[:2] == (1, "invalid: revoked")


def test_cert_bad_gpa_exit_1(run):
    code, _, err = run("cert", "issue", *CERT[:-1], "4.50")
    assert code == 1 and "bad gpa" in err


def test_cert_unknown_account_exit_1(run):
    code, doc = _json(run, "cert", "issue", "--caller", "mallory", *CERT)
    assert code == 1 and doc["error"] == "unknown account"


def test_cert_non_owner_exit_1(run):
    run("ledger", "init", "--account", "owner", "--account", "mallory", "--force")
    code, doc = _json(run, "cert", "issue", "--caller", "mallory", *CERT)
    assert code == 1 and doc["error"] == "not owner"


def test_token_flow(run):
    code, doc = _json(run, "token", "issue", "--sub", "alice", "--scope", "read:/data", "--with-refresh")
    assert code == 0
    token, rid = doc["token"], doc["refresh_token"]
    code, doc = _json(run, "token", "verify", token)
    assert code == 0 and doc["valid"] and doc["claims"]["scope"] == "read:/data"
    code, out, _ = run("--now", str(T0 + 600), "token", "verify", token)
    assert code == 1 and out == "invalid: expired"
    assert run("token", "refresh", rid)[0] == 0
    assert run("token", "revoke", rid)[0] == 0
    code, doc = _json(run, "token", "refresh", rid)
    assert code == 1 and doc["error"] == "revoked"


def test_flags_after_subcommand(run):
    code, doc = _json(run, "token", "issue", "--sub", "a", "--scope", "read:/x")
    code2, out, _ = run("token", "verify", doc["token"], "--now", str(T0 + 600))
    assert code2 == 1 and "expired" in out


def test_vc_flow(run, tmp_path):
    assert run("vc", "register-issuer", "uni:ksu", "--key", "uni")[0] == 0
    cred = tmp_path / "cred.json"
    pres = tmp_path / "pres.json"
    code, doc = _json(run, "vc", "issue", "--issuer", "uni:ksu", "--key", "uni", "--holder", "alice",
                      "--attr", "name=Alice", "--attr", "gpa=3.90", "--out", str(cred))
    assert code == 0
    status = doc["credential"]["status_id"]
    assert run("vc", "present", str(cred), "--holder", "alice", "--disclose", "name",
               "--challenge", "n1", "--out", str(pres))[0] == 0
    assert "3.90" not in pres.read_text()
    code, doc = _json(run, "vc", "verify", str(pres), "--challenge", "n1")
    assert code == 0 and doc["disclosed"] == {"name": "Alice"}
    assert run("vc", "verify", str(pres), "--challenge", "n2")[:2] == (1, "invalid: challenge mismatch")
    assert run("vc", "revoke", status)[0] == 0
    assert run("vc", "verify", str(pres), "--challenge", "n1")[:2] == (1, "invalid: revoked")


def test_ledger_commands(run):
    code, doc = _json(run, "ledger", "root")
    assert code == 0
    _json(run, "cert", "issue", *CERT)
    code, after = _json(run, "ledger", "root")
    assert after["height"] > doc["height"]
    code, replayed = _json(run, "ledger", "replay")
    assert code == 0 and replayed["state_root"] == after["state_root"]


def test_ledger_submit_rejected(run):
    run("ledger", "root")
    code, doc = _json(run, "ledger", "submit", "--caller", "owner", "--contract", "student-certificate",
                      "--method", "issue", "--arg", "A", "--arg", "B", "--arg", "2023-01-01", "--arg", "9.99")
    assert code == 1 and doc["accepted"] is False and doc["reason"] == "bad gpa"


def test_permissioned_ledger(run):
    code, _ = _json(run, "ledger", "init", "--profile", "permissioned",
                    "--peer", "p1", "--peer", "p2", "--peer", "p3", "--threshold", "2", "--force")
    assert code == 0
    code, doc = _json(run, "cert", "issue", "--caller", "p1", "--endorser", "p1", *CERT)
    assert code == 1 and doc["error"] == "insufficient endorsements"
    code, doc = _json(run, "cert", "issue", "--caller", "p1", "--endorser", "p1", "--endorser", "p2", *CERT)
    assert code == 0
    cid = doc["certificate_id"]
    assert run("cert", "verify", cid, "--reader", "p3", *CERT)[:2] == (0, "valid")
    assert run("cert", "verify", cid, *CERT)[:2] == (1, "invalid: access denied")


def test_bridge(run):
    code, doc = _json(run, "bridge", "issue", *CERT)
    assert code == 0
    assert run("bridge", "verify", doc["jwt"])[:2] == (0, "valid")


def test_harness_run(run, tmp_path):
    out = tmp_path / "report"
    code, doc = _json(run, "harness", "run", "--out", str(out))
    assert code == 0 and doc["matching"] == 24 == doc["executable"]
    assert {p.name for p in out.iterdir()} == {"matrix.json", "matrix.txt", "matrix.png"}


@pytest.mark.parametrize("argv", [[], ["cert"], ["cert", "issue"], ["token", "issue", "--ttl", "x", "--sub", "a"],
                                  ["nosuch"]])
def test_usage_errors(run, argv):
    assert run(*argv)[0] == 2


def test_bad_attr_is_usage(run):
    assert run("vc", "issue", "--issuer", "u", "--key", "u", "--holder", "h", "--attr", "novalue")[0] == 2


def test_corrupt_journal(run, tmp_path):
    run("cert", "issue", *CERT)
    journal = tmp_path / "ledger.journal"
    lines = journal.read_text().splitlines(keepends=True)
    lines[1] = "garbage\n"
    journal.write_text("".join(lines))
    assert run("ledger", "root")[0] == 3


def test_corrupt_keystore(run, tmp_path):
    run("keygen", "alice")
    (tmp_path / "keystore.json").write_text("{not json")
    assert run("keygen", "bob")[0] == 3


def test_entry_point_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "triauth.cli", "-w", str(tmp_path), "--seed", "1",
                           "keygen", "k"], capture_output=True, text=True)
    assert proc.returncode == 0 and "public_key" in proc.stdout
