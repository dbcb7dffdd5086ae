"""Certificates wrapped as JWT credentials, verified both off and on ledger.

A bridged credential is a ``vc+jwt`` token whose payload repeats the
certificate attributes and id. Verification always runs three checks and
accepts only if all pass: the JWT signature, a field-by-field comparison of
the payload with the stored certificate, and the contract's own
recompute-and-compare verification (which also sees revocation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import jose
from .certificate import get_certificate, issue_certificate, verify_certificate
from .crypto import KeyPair
from .errors import Malformed, SigningFailure, ToolkitError
from .ledger import DEFAULT_CHANNEL, Ledger

TYP = "vc+jwt"
ATTRIBUTES = ("name", "program", "graduation_date", "gpa")


@dataclass(frozen=True)
class BridgedCredential:
    jwt: str

    def __str__(self) -> str:
        return self.jwt


@dataclass
class BridgeReport:
    valid: bool
    reasons: list[str] = field(default_factory=list)
    payload: dict | None = None

    def to_json(self) -> dict:
        return {"valid": self.valid, "reasons": self.reasons}


def issue_bridged_credential(
    ledger: Ledger,
    issuer_key: KeyPair,
    caller: KeyPair,
    attributes: Mapping[str, str],
    issuer_id: str = "",
    *,
    channel: str = DEFAULT_CHANNEL,
    endorsers=(),
    now: int = 0,
) -> BridgedCredential:
    """Issue the certificate on the ledger, then sign its JWT form.

    Contract errors propagate before anything is signed.
    """
    values = [attributes[a] for a in ATTRIBUTES]
    cid = issue_certificate(ledger, caller, *values, channel=channel, endorsers=endorsers, now=now)
    payload = {"certificate_id": cid}
    payload.update(zip(ATTRIBUTES, values))
    payload["ledger_profile"] = ledger.profile.kind
    payload["issuer_id"] = issuer_id or issuer_key.key_id
    try:
        return BridgedCredential(jose.encode(payload, issuer_key, typ=TYP))
    except ToolkitError as exc:
        raise SigningFailure(str(exc)) from exc


def verify_bridged_credential(
    jwt: BridgedCredential | str,
    ledger: Ledger,
    issuer_public_key: bytes,
    *,
    channel: str = DEFAULT_CHANNEL,
    reader: str | None = None,
) -> BridgeReport:
    compact = jwt.jwt if isinstance(jwt, BridgedCredential) else jwt
    reasons: list[str] = []
    try:
        header, payload, _, _ = jose.split(compact)
    except Malformed:
        return BridgeReport(False, ["malformed"])
    try:
        jose.decode(compact, issuer_public_key, typ=TYP)
    except Malformed:
        reasons.append("malformed")
    except ToolkitError as exc:
        reasons.append(exc.reason)

    cid = payload.get("certificate_id")
    values = [payload.get(a) for a in ATTRIBUTES]
    if not isinstance(cid, str) or not all(isinstance(v, str) for v in values):
        reasons.append("malformed payload")
        return BridgeReport(False, reasons, payload)

    try:
        stored = get_certificate(ledger, cid, channel=channel, reader=reader)
    except ToolkitError as exc:
        reasons.append(exc.reason)
    else:
        if [stored.name, stored.program, stored.graduation_date, stored.gpa] != values:
            reasons.append("payload mismatch")

    try:
        verdict = verify_certificate(ledger, cid, *values, channel=channel, reader=reader)
    except ToolkitError as exc:
        reasons.append(exc.reason)
    else:
        if not verdict.valid:
            reasons.append(verdict.reason)

    return BridgeReport(not reasons, reasons, payload)
