import json
import random
import string

import pytest

import oracles
from conftest import ALICE
from triauth import certificate as cert
from triauth import ledger as lg
from triauth.crypto import b64url_decode
from triauth.errors import (
    BadDate,
    BadGpa,
    DuplicateCertificate,
    EmptyField,
    NotOwner,
    UnknownCertificate,
    UnknownToken,
)

ALICE_DIGEST = "5d302f3fb611c63478cb1b85766e69632d0e035f2623872ba0107b33daeb349a"


def _random_tuple(rng):
    word = lambda n: "".join(rng.choice(string.ascii_letters + " éß") for _ in range(rng.randint(1, n)))  # noqa: E731
    date = f"{rng.randint(1990, 2030)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
    return word(20), word(10), date, f"{rng.randint(0, 400) / 100:.2f}"


def _mutate(rng, values):
    i = rng.randrange(4)
    out = list(values)
    if i == 3:
        while out[3] == values[3]:
            out[3] = f"{rng.randint(0, 400) / 100:.2f}"
    elif i == 2:
        y, m, d = out[2].split("-")
        out[2] = f"{int(y) + 1}-{m}-{d}"
    else:
        out[i] = out[i] + rng.choice(string.ascii_letters)
    return tuple(out)


def test_alice_digest_frozen():
    assert cert.certificate_digest(*ALICE).hex() == ALICE_DIGEST
    assert oracles.certificate_signature(*ALICE).hex() == ALICE_DIGEST


def test_issue_and_verify(public_ledger, owner):
    cid = cert.issue_certificate(public_ledger, owner, *ALICE)
    assert b64url_decode(cid).hex() == ALICE_DIGEST
    verdict = cert.verify_certificate(public_ledger, cid, *ALICE)
    assert verdict.valid and verdict.reason == ""
    stored = cert.get_certificate(public_ledger, cid)
    assert (stored.name, stored.program, stored.graduation_date, stored.gpa) == ALICE


def test_random_tuples_roundtrip_and_mutation(public_ledger, owner):
    rng = random.Random(2024)
    issued = {}
    while len(issued) < 1000:
        values = _random_tuple(rng)
        if values in issued:
            continue
        issued[values] = cert.issue_certificate(public_ledger, owner, *values)
    for values, cid in issued.items():
        assert b64url_decode(cid) == oracles.certificate_signature(*values)
        assert cert.verify_certificate(public_ledger, cid, *values).valid
        mutated = _mutate(rng, values)
        assert cert.verify_certificate(public_ledger, cid, *mutated).reason == "mismatch"


def test_non_owner_rejected(public_ledger, stranger):
    with pytest.raises(NotOwner):
        cert.issue_certificate(public_ledger, stranger, *ALICE)
    assert cert.certificate_count(public_ledger) == 0


@pytest.mark.parametrize("gpa", ["4.50", "4.01", "-1.00", "3.9", "3.900", "abc", "1e0"])
def test_bad_gpa(public_ledger, owner, gpa):
    with pytest.raises(BadGpa):
        cert.issue_certificate(public_ledger, owner, "Alice", "CS", "2023-05-15", gpa)


@pytest.mark.parametrize("gpa", ["0.00", "4.00"])
def test_gpa_bounds(public_ledger, owner, gpa):
    cid = cert.issue_certificate(public_ledger, owner, "Alice", "CS", "2023-05-15", gpa)
    assert cert.verify_certificate(public_ledger, cid, "Alice", "CS", "2023-05-15", gpa)


@pytest.mark.parametrize("date", ["2023-5-15", "2023-02-30", "15/05/2023"])
def test_bad_date(public_ledger, owner, date):
    with pytest.raises(BadDate):
        cert.issue_certificate(public_ledger, owner, "Alice", "CS", date, "3.90")


def test_empty_field(public_ledger, owner):
    with pytest.raises(EmptyField):
        cert.issue_certificate(public_ledger, owner, "", "CS", "2023-05-15", "3.90")


def test_duplicate(public_ledger, owner):
    cert.issue_certificate(public_ledger, owner, *ALICE)
    with pytest.raises(DuplicateCertificate):
        cert.issue_certificate(public_ledger, owner, *ALICE)


def test_format_gpa():
    assert cert.format_gpa(3.9) == "3.90"
    assert cert.format_gpa("4") == "4.00"


class TestRevoke:
    def test_revoked_then_mismatch_priority(self, public_ledger, owner):
        cid = cert.issue_certificate(public_ledger, owner, *ALICE)
        cert.revoke_certificate(public_ledger, owner, cid)
        assert cert.verify_certificate(public_ledger, cid, *ALICE).reason == "revoked"
        assert cert.verify_certificate(public_ledger, cid, "Alice", "CS", "2023-05-15", "4.00").reason == "mismatch"
        assert cert.verify_certificate(public_ledger, "bogus", *ALICE).reason == "unknown"

    def test_revoke_twice_is_fine(self, public_ledger, owner):
        cid = cert.issue_certificate(public_ledger, owner, *ALICE)
        cert.revoke_certificate(public_ledger, owner, cid)
        cert.revoke_certificate(public_ledger, owner, cid)
        assert cert.verify_certificate(public_ledger, cid, *ALICE).reason == "revoked"

    def test_revoke_unknown(self, public_ledger, owner):
        with pytest.raises(UnknownCertificate):
            cert.revoke_certificate(public_ledger, owner, "bogus")

    def test_revoke_by_stranger(self, public_ledger, owner, stranger):
        cid = cert.issue_certificate(public_ledger, owner, *ALICE)
        with pytest.raises(NotOwner):
            cert.revoke_certificate(public_ledger, stranger, cid)
        assert cert.verify_certificate(public_ledger, cid, *ALICE).valid


class TestTokens:
    def test_owner_of(self, public_ledger, owner):
        cert.issue_certificate(public_ledger, owner, *ALICE)
        assert cert.owner_of(public_ledger, 1) == "Alice"
        with pytest.raises(UnknownToken):
            cert.owner_of(public_ledger, 2)

    def test_bijection(self, public_ledger, owner):
        rng = random.Random(5)
        cids = [cert.issue_certificate(public_ledger, owner, *_random_tuple(rng)) for _ in range(50)]
        assert cert.certificate_count(public_ledger) == 50
        tokens = {}
        for token_id in range(1, 51):
            entry = public_ledger.read("main", cert.CONTRACT_ID, f"token:{token_id}")
            assert entry is not None
            tokens[token_id] = json.loads(entry)["certificate_id"]
        assert sorted(tokens.values()) == sorted(cids)
        for token_id, cid in tokens.items():
            assert public_ledger.read("main", cert.CONTRACT_ID, f"cert_token:{cid}") == str(token_id)


class TestAttest:
    def test_attest(self, public_ledger, owner):
        cid = cert.issue_certificate(public_ledger, owner, *ALICE)
        assert public_ledger.query(cert.CONTRACT_ID, "attestation", [cid]) is None
        cert.attest_certificate(public_ledger, owner, cid)
        assert public_ledger.query(cert.CONTRACT_ID, "attestation", [cid]).count(".") == 1

    def test_attest_stranger(self, public_ledger, owner, stranger):
        cid = cert.issue_certificate(public_ledger, owner, *ALICE)
        with pytest.raises(NotOwner):
            cert.attest_certificate(public_ledger, stranger, cid)


class TestPermissioned:
    def test_under_endorsed_is_state_neutral(self, private_ledger, peers):
        all3 = [(p, peers[p]) for p in ("p1", "p2", "p3")]
        cert.deploy(private_ledger, peers["p1"], endorsers=all3)
        before = (private_ledger.height, lg.state_root(private_ledger))
        with pytest.raises(Exception, match="insufficient endorsements"):
            cert.issue_certificate(private_ledger, peers["p1"], *ALICE, endorsers=[("p1", peers["p1"])])
        assert (private_ledger.height, lg.state_root(private_ledger)) == before
        cid = cert.issue_certificate(private_ledger, peers["p1"], *ALICE, endorsers=all3[:2])
        assert cert.verify_certificate(private_ledger, cid, *ALICE, reader="p3")

    def test_reader_required(self, private_ledger, peers):
        all3 = [(p, peers[p]) for p in ("p1", "p2", "p3")]
        cert.deploy(private_ledger, peers["p1"], endorsers=all3)
        cid = cert.issue_certificate(private_ledger, peers["p1"], *ALICE, endorsers=all3)
        with pytest.raises(Exception, match="not a member"):
            cert.verify_certificate(private_ledger, cid, *ALICE)

    def test_same_id_across_profiles(self, private_ledger, public_ledger, peers, owner):
        all3 = [(p, peers[p]) for p in ("p1", "p2", "p3")]
        cert.deploy(private_ledger, peers["p1"], endorsers=all3)
        a = cert.issue_certificate(private_ledger, peers["p1"], *ALICE, endorsers=all3)
        b = cert.issue_certificate(public_ledger, owner, *ALICE)
        assert a == b
