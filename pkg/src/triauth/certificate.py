"""StudentCertificate: hash-committed certificate issuance on the ledger.

Issuance concatenates the four attributes with the length-prefixed encoder,
hashes the result with SHA-256 and stores that digest as the certificate's
``signature``. Verification recomputes the digest from caller-supplied
attributes and compares. Each issued certificate also mints an ERC721-style
token (dense ids from 1) owned by the certificate subject.

Authority to issue or revoke comes from the ledger, not from the digest:
on a permissionless ledger only the contract owner may call ``issue`` and
``revoke``; on a permissioned ledger the channel's endorsement policy gates
every write.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass
from decimal import Decimal

from .crypto import Digest, KeyPair, b64url_decode, b64url_encode, canonical_encode, hash, verify_quietly
from .errors import (
    BadDate,
    BadGpa,
    ContractError,
    DuplicateCertificate,
    EmptyField,
    NotOwner,
    UnknownCertificate,
    UnknownToken,
    error_for_reason,
)
from .ledger import (
    DEFAULT_CHANNEL,
    PERMISSIONLESS,
    Contract,
    ContractContext,
    Ledger,
    Receipt,
    invoke,
    register_contract,
)

CONTRACT_ID = "student-certificate"
_GPA = re.compile(r"\d\.\d\d")
_DATE = re.compile(r"\d{4}-\d{2}-\d{2}")
GPA_MIN = Decimal("0.00")
GPA_MAX = Decimal("4.00")


@dataclass(frozen=True)
class Certificate:
    name: str
    program: str
    graduation_date: str
    gpa: str
    signature: Digest

    @property
    def id(self) -> str:
        return certificate_id(self.signature)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "program": self.program,
            "graduation_date": self.graduation_date,
            "gpa": self.gpa,
            "signature": self.signature.b64(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Certificate":
        return cls(doc["name"], doc["program"], doc["graduation_date"], doc["gpa"],
                   Digest(b64url_decode(doc["signature"])))


def format_gpa(value) -> str:
    """Render a GPA as the fixed two-decimal string used in the hash input."""
    return f"{Decimal(str(value)).quantize(Decimal('0.01')):.2f}"


def certificate_record(name: str, program: str, graduation_date: str, gpa: str) -> list[tuple[str, str]]:
    return [("N", name), ("P", program), ("GD", graduation_date), ("G", gpa)]


def certificate_digest(name: str, program: str, graduation_date: str, gpa: str) -> Digest:
    return hash(canonical_encode(certificate_record(name, program, graduation_date, gpa)))


def certificate_id(signature: bytes) -> str:
    return b64url_encode(signature)


def _check_inputs(name: str, program: str, graduation_date: str, gpa: str) -> None:
    for label, value in (("name", name), ("program", program),
                         ("graduation_date", graduation_date), ("gpa", gpa)):
        if not value:
            raise EmptyField(f"{label} is empty")
    if not _GPA.fullmatch(gpa) or not GPA_MIN <= Decimal(gpa) <= GPA_MAX:
        raise BadGpa(f"gpa {gpa!r} is not a two-decimal value in [0.00, 4.00]")
    if not _DATE.fullmatch(graduation_date):
        raise BadDate(f"graduation date {graduation_date!r} is not YYYY-MM-DD")
    try:
        _dt.date.fromisoformat(graduation_date)
    except ValueError:
        raise BadDate(f"graduation date {graduation_date!r} is not a calendar date") from None


def _require_owner(ctx: ContractContext) -> None:
    if ctx.profile_kind != PERMISSIONLESS:
        return  # endorsement policy already enforced by the ledger
    owner = ctx.get("owner")
    if owner is None:
        raise ContractError("contract not initialized", reason="not initialized")
    if owner != b64url_encode(ctx.sender):
        raise NotOwner("only the contract owner may issue or revoke")


@register_contract
class StudentCertificateContract(Contract):
    contract_id = CONTRACT_ID
    methods = ("init", "issue", "revoke", "attest")
    queries = ("verify", "get", "owner_of", "attestation", "count")

    def init(self, ctx):
        if ctx.get("owner") is not None:
            raise ContractError("already initialized", reason="already initialized")
        ctx.put("owner", b64url_encode(ctx.sender))
        ctx.put("next_token", "1")
        return {"owner": b64url_encode(ctx.sender)}

    def issue(self, ctx, name, program, graduation_date, gpa):
        _require_owner(ctx)
        _check_inputs(name, program, graduation_date, gpa)
        sig = certificate_digest(name, program, graduation_date, gpa)
        cid = certificate_id(sig)
        if ctx.get(f"cert:{cid}") is not None:
            raise DuplicateCertificate(cid)
        cert = Certificate(name, program, graduation_date, gpa, sig)
        ctx.put_json(f"cert:{cid}", cert.to_json())
        token_id = int(ctx.get("next_token") or "1")
        # tokens are owned by the certificate subject, identified by name
        ctx.put_json(f"token:{token_id}", {"owner": name, "certificate_id": cid})
        ctx.put(f"cert_token:{cid}", str(token_id))
        ctx.put("next_token", str(token_id + 1))
        return {"certificate_id": cid, "token_id": token_id}

    def revoke(self, ctx, cid):
        _require_owner(ctx)
        if ctx.get(f"cert:{cid}") is None:
            raise UnknownCertificate(cid)
        ctx.put(f"revoked:{cid}", "1")
        return {"certificate_id": cid, "revoked": True}

    def attest(self, ctx, cid, issuer_signature):
        # extended mode: issuer Ed25519 signature over the stored digest
        _require_owner(ctx)
        cert = ctx.get_json(f"cert:{cid}")
        if cert is None:
            raise UnknownCertificate(cid)
        sig = b64url_decode(issuer_signature)
        if not verify_quietly(ctx.sender, b64url_decode(cert["signature"]), sig):
            raise ContractError("attestation does not verify under the sender key", reason="bad attestation")
        ctx.put(f"attestation:{cid}", b64url_encode(ctx.sender) + "." + issuer_signature)
        return {"certificate_id": cid}

    def verify(self, ctx, cid, name, program, graduation_date, gpa):
        cert = ctx.get_json(f"cert:{cid}")
        if cert is None:
            return {"valid": False, "reason": "unknown"}
        recomputed = hash(canonical_encode(certificate_record(name, program, graduation_date, gpa)))
        if recomputed.b64() != cert["signature"]:
            return {"valid": False, "reason": "mismatch"}
        if ctx.get(f"revoked:{cid}") is not None:
            return {"valid": False, "reason": "revoked"}
        return {"valid": True, "reason": ""}

    def get(self, ctx, cid):
        cert = ctx.get_json(f"cert:{cid}")
        if cert is None:
            raise UnknownCertificate(cid)
        return cert

    def owner_of(self, ctx, token_id):
        token = ctx.get_json(f"token:{int(token_id)}")
        if token is None:
            raise UnknownToken(str(token_id))
        return token["owner"]

    def attestation(self, ctx, cid):
        return ctx.get(f"attestation:{cid}")

    def count(self, ctx):
        return int(ctx.get("next_token") or "1") - 1


@dataclass(frozen=True)
class Verdict:
    valid: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.valid


def _raise_for(receipt: Receipt) -> None:
    if not receipt.accepted:
        raise error_for_reason(receipt.reason, ContractError)(receipt.reason, reason=receipt.reason)


def deploy(ledger: Ledger, owner: KeyPair, *, channel: str = DEFAULT_CHANNEL, endorsers=(), now: int = 0) -> Receipt:
    receipt = invoke(ledger, owner, CONTRACT_ID, "init", [], channel=channel, endorsers=endorsers, now=now)
    _raise_for(receipt)
    return receipt


def issue_certificate(ledger: Ledger, caller: KeyPair, name: str, program: str, graduation_date: str,
                      gpa: str, *, channel: str = DEFAULT_CHANNEL, endorsers=(), now: int = 0) -> str:
    receipt = invoke(ledger, caller, CONTRACT_ID, "issue", [name, program, graduation_date, gpa],
                     channel=channel, endorsers=endorsers, now=now)
    _raise_for(receipt)
    return receipt.result["certificate_id"]


def revoke_certificate(ledger: Ledger, caller: KeyPair, cid: str, *, channel: str = DEFAULT_CHANNEL,
                       endorsers=(), now: int = 0) -> None:
    _raise_for(invoke(ledger, caller, CONTRACT_ID, "revoke", [cid], channel=channel, endorsers=endorsers, now=now))


def attest_certificate(ledger: Ledger, caller: KeyPair, cid: str, *, channel: str = DEFAULT_CHANNEL,
                       endorsers=(), now: int = 0) -> None:
    cert = get_certificate(ledger, cid, channel=channel, reader=_reader_for(ledger, caller))
    sig = b64url_encode(caller.sign(cert.signature))
    _raise_for(invoke(ledger, caller, CONTRACT_ID, "attest", [cid, sig], channel=channel,
                      endorsers=endorsers, now=now))


def _reader_for(ledger: Ledger, caller: KeyPair) -> str | None:
    return ledger.profile.peer_for_key(caller.public_key)


def verify_certificate(ledger: Ledger, cid: str, name: str, program: str, graduation_date: str, gpa: str,
                       *, channel: str = DEFAULT_CHANNEL, reader: str | None = None) -> Verdict:
    out = ledger.query(CONTRACT_ID, "verify", [cid, name, program, graduation_date, gpa], channel, reader)
    return Verdict(out["valid"], out["reason"])


def get_certificate(ledger: Ledger, cid: str, *, channel: str = DEFAULT_CHANNEL,
                    reader: str | None = None) -> Certificate:
    return Certificate.from_json(ledger.query(CONTRACT_ID, "get", [cid], channel, reader))


def owner_of(ledger: Ledger, token_id: int, *, channel: str = DEFAULT_CHANNEL, reader: str | None = None) -> str:
    return ledger.query(CONTRACT_ID, "owner_of", [str(token_id)], channel, reader)


def certificate_count(ledger: Ledger, *, channel: str = DEFAULT_CHANNEL, reader: str | None = None) -> int:
    return ledger.query(CONTRACT_ID, "count", [], channel, reader)
