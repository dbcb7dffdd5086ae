"""Hashing, Ed25519 signatures, key storage and the injective field encoder."""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import (
    BadSeedLength,
    DuplicateKeyId,
    EmptyRecord,
    MalformedKey,
    MalformedSignature,
    UnknownKeyId,
)

DIGEST_SIZE = 32
SIGNATURE_SIZE = 64
_B64URL = re.compile(r"[A-Za-z0-9_-]*")


def b64url_encode(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def b64url_decode(text: str) -> bytes:
    """Strict unpadded base64url decoding.

    Rejects characters outside the url-safe alphabet, padding, and
    non-canonical trailing bits, so every byte string has exactly one
    accepted textual form.
    """
    if not isinstance(text, str) or not _B64URL.fullmatch(text) or len(text) % 4 == 1:
        raise ValueError("invalid base64url")
    try:
        raw = base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))
    except binascii.Error as exc:
        raise ValueError("invalid base64url") from exc
    if b64url_encode(raw) != text:
        raise ValueError("non-canonical base64url")
    return raw


class Digest(bytes):
    """A 32-byte SHA-256 output."""

    def __new__(cls, value: bytes):
        if len(value) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(value)}")
        return super().__new__(cls, value)

    def b64(self) -> str:
        return b64url_encode(self)


ZERO_DIGEST = Digest(bytes(DIGEST_SIZE))


def hash(data: bytes) -> Digest:  # noqa: A001 - mirrors the operation name
    return Digest(hashlib.sha256(data).digest())


@dataclass(frozen=True)
class CanonicalRecord:
    """Ordered (label, value) pairs; order is significant and never sorted."""

    fields: tuple[tuple[str, str], ...]

    def __init__(self, fields: Iterable[tuple[str, str]]):
        items = tuple((str(k), str(v)) for k, v in fields)
        labels = [k for k, _ in items]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in canonical record")
        object.__setattr__(self, "fields", items)


def _field(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def canonical_encode(record: CanonicalRecord | Sequence[tuple[str, str]]) -> bytes:
    if not isinstance(record, CanonicalRecord):
        record = CanonicalRecord(record)
    if not record.fields:
        raise EmptyRecord("canonical record has no fields")
    out = bytearray()
    for label, value in record.fields:
        out += _field(label.encode("utf-8"))
        out += _field(value.encode("utf-8"))
    return bytes(out)


@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    private_key: bytes
    key_id: str

    def sign(self, data: bytes) -> bytes:
        return sign(self.private_key, data)


def key_id_for(public_key: bytes) -> str:
    return hashlib.sha256(public_key).hexdigest()[:16]


def public_key_from_private(private_key: bytes) -> bytes:
    return _load_private(private_key).public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )


def keygen(seed: bytes | None = None, key_id: str | None = None) -> KeyPair:
    """Ed25519 key pair; a 32-byte seed makes it reproducible."""
    if seed is None:
        seed = os.urandom(32)
    elif len(seed) != 32:
        raise BadSeedLength(f"seed must be 32 bytes, got {len(seed)}")
    private = Ed25519PrivateKey.from_private_bytes(bytes(seed))
    public = private.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    return KeyPair(public, bytes(seed), key_id or key_id_for(public))


def derive_seed(*parts: object) -> bytes:
    """Stable 32-byte seed from arbitrary labels, for reproducible fixtures."""
    return hashlib.sha256("\x1f".join(map(str, parts)).encode("utf-8")).digest()


def _load_private(private_key: bytes) -> Ed25519PrivateKey:
    if not isinstance(private_key, (bytes, bytearray)) or len(private_key) != 32:
        raise MalformedKey("Ed25519 private key must be 32 bytes")
    return Ed25519PrivateKey.from_private_bytes(bytes(private_key))


def _load_public(public_key: bytes) -> Ed25519PublicKey:
    if not isinstance(public_key, (bytes, bytearray)) or len(public_key) != 32:
        raise MalformedKey("Ed25519 public key must be 32 bytes")
    try:
        return Ed25519PublicKey.from_public_bytes(bytes(public_key))
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc


def sign(private_key: bytes, data: bytes) -> bytes:
    return _load_private(private_key).sign(data)


def verify(public_key: bytes, data: bytes, sig: bytes) -> bool:
    key = _load_public(public_key)
    if not isinstance(sig, (bytes, bytearray)) or len(sig) != SIGNATURE_SIZE:
        raise MalformedSignature("Ed25519 signature must be 64 bytes")
    try:
        key.verify(bytes(sig), data)
    except InvalidSignature:
        return False
    return True


def verify_quietly(public_key: bytes, data: bytes, sig: bytes) -> bool:
    """Like :func:`verify` but malformed inputs count as a failed check."""
    try:
        return verify(public_key, data, sig)
    except (MalformedKey, MalformedSignature):
        return False


class Keystore:
    """key_id -> KeyPair, persisted as a JSON map when given a path."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._keys: dict[str, KeyPair] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._keys = self._read(self.path)

    @staticmethod
    def _read(path: Path) -> dict[str, KeyPair]:
        doc = json.loads(path.read_text(encoding="utf-8"))
        keys = {}
        for key_id, entry in doc.items():
            if entry.get("alg") != "Ed25519":
                raise MalformedKey(f"unsupported alg for {key_id!r}")
            private = b64url_decode(entry["private_key"])
            public = b64url_decode(entry["public_key"])
            if public_key_from_private(private) != public:
                raise MalformedKey(f"public/private mismatch for {key_id!r}")
            keys[key_id] = KeyPair(public, private, key_id)
        return keys

    def to_json(self) -> dict:
        return {
            kid: {
                "public_key": b64url_encode(kp.public_key),
                "private_key": b64url_encode(kp.private_key),
                "alg": "Ed25519",
            }
            for kid, kp in sorted(self._keys.items())
        }

    def save(self) -> None:
        if self.path is None:
            return
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.path)

    def add(self, pair: KeyPair) -> KeyPair:
        with self._lock:
            if pair.key_id in self._keys:
                raise DuplicateKeyId(pair.key_id)
            self._keys[pair.key_id] = pair
            self.save()
        return pair

    def generate(self, key_id: str, seed: bytes | None = None) -> KeyPair:
        pair = keygen(seed)
        return self.add(KeyPair(pair.public_key, pair.private_key, key_id))

    def get(self, key_id: str) -> KeyPair:
        try:
            return self._keys[key_id]
        except KeyError:
            raise UnknownKeyId(key_id) from None

    def __contains__(self, key_id: str) -> bool:
        return key_id in self._keys

    def __iter__(self):
        return iter(sorted(self._keys))

    def __len__(self) -> int:
        return len(self._keys)
