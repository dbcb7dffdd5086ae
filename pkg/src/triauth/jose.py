"""Compact JWS (EdDSA) with fixed header and payload key order."""

from __future__ import annotations

import json
from typing import Any

from .crypto import KeyPair, b64url_decode, b64url_encode, verify_quietly
from .errors import BadSignature, Malformed


def _dump(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode(payload: dict[str, Any], key: KeyPair, typ: str = "JWT") -> str:
    """Sign ``payload`` keeping its insertion order in the serialized JSON."""
    header = {"alg": "EdDSA", "typ": typ, "kid": key.key_id}
    signing_input = b64url_encode(_dump(header)) + "." + b64url_encode(_dump(payload))
    sig = key.sign(signing_input.encode("ascii"))
    return signing_input + "." + b64url_encode(sig)


def _segment_json(segment: str) -> dict:
    try:
        obj = json.loads(b64url_decode(segment).decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise Malformed(f"undecodable segment: {exc}") from None
    if not isinstance(obj, dict):
        raise Malformed("segment is not a JSON object")
    return obj


def split(compact: str) -> tuple[dict, dict, bytes, bytes]:
    """Return (header, payload, signature, signing_input) without verifying."""
    if not isinstance(compact, str):
        raise Malformed("token must be a string")
    parts = compact.split(".")
    if len(parts) != 3:
        raise Malformed("expected three dot-separated segments")
    header = _segment_json(parts[0])
    payload = _segment_json(parts[1])
    try:
        sig = b64url_decode(parts[2])
    except ValueError:
        raise Malformed("undecodable signature segment") from None
    if header.get("alg") != "EdDSA":
        raise Malformed(f"unsupported alg {header.get('alg')!r}")
    return header, payload, sig, (parts[0] + "." + parts[1]).encode("ascii")


def decode(compact: str, public_key: bytes, typ: str | None = None) -> tuple[dict, dict]:
    header, payload, sig, signing_input = split(compact)
    if typ is not None and header.get("typ") != typ:
        raise Malformed(f"unexpected typ {header.get('typ')!r}")
    if not verify_quietly(public_key, signing_input, sig):
        raise BadSignature("signature does not verify under the issuer key")
    return header, payload
