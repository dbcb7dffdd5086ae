import hashlib
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from triauth import crypto
from triauth.errors import BadSeedLength, EmptyRecord, MalformedKey, MalformedSignature

ALICE_RECORD = [("N", "Alice"), ("P", "CS"), ("GD", "2023-05-15"), ("G", "3.90")]
# computed with the pure-Python oracle in tests/oracles.py
ALICE_DIGEST = "5d302f3fb611c63478cb1b85766e69632d0e035f2623872ba0107b33daeb349a"


class TestCanonicalEncode:
    def test_single_field_layout(self):
        out = crypto.canonical_encode([("N", "Alice")])
        assert out == b"\x00\x00\x00\x01N\x00\x00\x00\x05Alice"
        assert len(out) == 14

    def test_concatenation_collision_is_separated(self):
        a = crypto.canonical_encode([("N", "Ali"), ("P", "ceCS")])
        b = crypto.canonical_encode([("N", "Alice"), ("P", "CS")])
        assert a != b
        # the raw concatenation would have collided
        assert "Ali" + "ceCS" == "Alice" + "CS"

    def test_student_record(self):
        out = crypto.canonical_encode(ALICE_RECORD)
        assert len(out) == 58
        assert out == oracles.encode_fields(ALICE_RECORD)
        assert crypto.hash(out).hex() == ALICE_DIGEST

    def test_empty_record(self):
        with pytest.raises(EmptyRecord):
            crypto.canonical_encode([])

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            crypto.CanonicalRecord([("N", "a"), ("N", "b")])

    def test_order_is_significant(self):
        assert crypto.canonical_encode([("a", "1"), ("b", "2")]) != crypto.canonical_encode([("b", "2"), ("a", "1")])

    def test_utf8(self):
        out = crypto.canonical_encode([("N", "Zoë")])
        assert out[5:9] == (4).to_bytes(4, "big")

    def test_injective_over_random_pairs(self):
        rng = random.Random(1)
        alphabet = "ab|\x00é"

        def rand_record():
            n = rng.randint(1, 3)
            labels = rng.sample(["N", "P", "GD", "G", "x"], n)
            return tuple((lab, "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 4)))) for lab in labels)

        seen = {}
        pairs = 0
        while pairs < 10_000:
            a, b = rand_record(), rand_record()
            if a == b:
                continue
            pairs += 1
            assert crypto.canonical_encode(a) != crypto.canonical_encode(b)
            for rec in (a, b):
                enc = crypto.canonical_encode(rec)
                assert seen.setdefault(enc, rec) == rec


class TestHash:
    def test_vectors(self):
        assert crypto.hash(b"").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        assert crypto.hash(b"abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_deterministic(self):
        assert crypto.hash(b"x" * 100) == crypto.hash(b"x" * 100)

    def test_matches_oracle_on_random_inputs(self):
        rng = random.Random(2)
        for _ in range(1000):
            data = rng.randbytes(rng.randint(0, 200))
            assert crypto.hash(data) == oracles.sha256(data)

    def test_digest_length_enforced(self):
        with pytest.raises(ValueError):
            crypto.Digest(b"short")


class TestKeys:
    def test_fixed_seed_is_reproducible(self):
        assert crypto.keygen(bytes(32)) == crypto.keygen(bytes(32))

    def test_entropy(self):
        assert crypto.keygen().public_key != crypto.keygen().public_key

    def test_bad_seed_length(self):
        with pytest.raises(BadSeedLength):
            crypto.keygen(bytes(31))

    def test_sign_verify_roundtrip(self):
        kp = crypto.keygen()
        sig = crypto.sign(kp.private_key, b"message")
        assert len(sig) == 64
        assert crypto.verify(kp.public_key, b"message", sig)

    def test_other_key_fails(self):
        a, b = crypto.keygen(), crypto.keygen()
        assert not crypto.verify(b.public_key, b"m", a.sign(b"m"))

    def test_malformed_inputs(self):
        kp = crypto.keygen()
        with pytest.raises(MalformedKey):
            crypto.verify(b"short", b"m", kp.sign(b"m"))
        with pytest.raises(MalformedSignature):
            crypto.verify(kp.public_key, b"m", b"short")
        with pytest.raises(MalformedKey):
            crypto.sign(b"bad", b"m")

    def test_bit_flips_never_verify(self):
        rng = random.Random(3)
        kp = crypto.keygen(bytes(range(32)))
        for _ in range(1000):
            msg = rng.randbytes(rng.randint(1, 64))
            sig = kp.sign(msg)
            if rng.random() < 0.5:
                i = rng.randrange(len(msg) * 8)
                bad = bytearray(msg)
                bad[i // 8] ^= 1 << (i % 8)
                assert not crypto.verify(kp.public_key, bytes(bad), sig)
            else:
                i = rng.randrange(512)
                bad = bytearray(sig)
                bad[i // 8] ^= 1 << (i % 8)
                assert not crypto.verify(kp.public_key, msg, bytes(bad))


class TestBase64:
    @given(st.binary(max_size=80))
    def test_roundtrip(self, data):
        assert crypto.b64url_decode(crypto.b64url_encode(data)) == data

    @pytest.mark.parametrize("text", ["AB==", "A", "a+b/", "AB", "AAB"])
    def test_rejects_non_canonical(self, text):
        # "AB" has non-zero trailing bits; "AAB" likewise
        with pytest.raises(ValueError):
            crypto.b64url_decode(text)


class TestKeystore:
    def test_file_format_and_reload(self, tmp_path):
        path = tmp_path / "keystore.json"
        store = crypto.Keystore(path)
        kp = store.generate("issuer", bytes(32))
        doc = json.loads(path.read_text())
        assert doc["issuer"]["alg"] == "Ed25519"
        assert set(doc["issuer"]) == {"public_key", "private_key", "alg"}
        again = crypto.Keystore(path)
        assert again.get("issuer") == kp

    def test_duplicate_key_id(self, tmp_path):
        store = crypto.Keystore(tmp_path / "k.json")
        store.generate("a")
        with pytest.raises(Exception):
            store.generate("a")

    def test_mismatched_pair_rejected(self, tmp_path):
        path = tmp_path / "k.json"
        a, b = crypto.keygen(), crypto.keygen()
        path.write_text(json.dumps({"x": {"public_key": crypto.b64url_encode(a.public_key),
                                          "private_key": crypto.b64url_encode(b.private_key),
                                          "alg": "Ed25519"}}))
        with pytest.raises(MalformedKey):
            crypto.Keystore(path)


@settings(max_examples=50)
@given(st.binary(max_size=64))
def test_hash_is_hashlib_compatible(data):
    assert crypto.hash(data) == hashlib.sha256(data).digest()


def test_derive_seed_is_stable():
    assert crypto.derive_seed("a", 1) == crypto.derive_seed("a", 1)
    assert len(crypto.derive_seed("x")) == 32
    assert crypto.derive_seed("a", 1) != crypto.derive_seed("a1")
