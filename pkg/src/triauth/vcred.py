"""Verifiable credentials with salted-commitment selective disclosure.

The issuer commits to each attribute as
``hash(canonical_encode([(label, value), ("salt", b64url(salt))]))`` and signs
the ordered list of digests. The holder keeps the openings (value, salt) and
later reveals any subset, signing the revealed triples together with a
verifier-chosen challenge. Issuer keys and credential status live in a
registry, which may be in memory, a JSON file, or a contract on the ledger.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .crypto import (
    Digest,
    KeyPair,
    b64url_decode,
    b64url_encode,
    canonical_encode,
    hash,
    verify_quietly,
)
from .errors import (
    BadValidity,
    ContractError,
    DuplicateIssuer,
    EmptyAttributes,
    UnknownIssuer,
    UnknownLabel,
    UnknownStatusId,
    WrongHolderKey,
    error_for_reason,
)
from .ledger import (
    DEFAULT_CHANNEL,
    PERMISSIONLESS,
    Contract,
    Ledger,
    invoke,
    register_contract,
)

SALT_SIZE = 16
ACTIVE = "active"
REVOKED = "revoked"
REGISTRY_FORMAT = "triauth-registry"


def commit(label: str, value: str, salt: bytes) -> Digest:
    return hash(canonical_encode([(label, value), ("salt", b64url_encode(salt))]))


@dataclass(frozen=True)
class AttributeCommitment:
    label: str
    salt: bytes
    commitment: Digest


@dataclass(frozen=True)
class VerifiableCredential:
    id: str
    issuer_id: str
    holder_public_key: bytes
    commitments: tuple[Digest, ...]
    valid_from: int
    valid_until: int
    status_id: str
    issuer_signature: bytes = b""

    def signing_bytes(self) -> bytes:
        fields = [
            ("id", self.id),
            ("issuer_id", self.issuer_id),
            ("holder_public_key", b64url_encode(self.holder_public_key)),
            ("commitment_count", str(len(self.commitments))),
        ]
        fields += [(f"commitment{i}", c.b64()) for i, c in enumerate(self.commitments)]
        fields += [
            ("valid_from", str(self.valid_from)),
            ("valid_until", str(self.valid_until)),
            ("status_id", self.status_id),
        ]
        return canonical_encode(fields)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "issuer_id": self.issuer_id,
            "holder_public_key": b64url_encode(self.holder_public_key),
            "commitments": [c.b64() for c in self.commitments],
            "valid_from": self.valid_from,
            "valid_until": self.valid_until,
            "status_id": self.status_id,
            "issuer_signature": b64url_encode(self.issuer_signature),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "VerifiableCredential":
        return cls(
            id=doc["id"],
            issuer_id=doc["issuer_id"],
            holder_public_key=b64url_decode(doc["holder_public_key"]),
            commitments=tuple(Digest(b64url_decode(c)) for c in doc["commitments"]),
            valid_from=int(doc["valid_from"]),
            valid_until=int(doc["valid_until"]),
            status_id=doc["status_id"],
            issuer_signature=b64url_decode(doc["issuer_signature"]),
        )


@dataclass(frozen=True)
class Presentation:
    credential: VerifiableCredential
    disclosed: tuple[tuple[str, str, bytes], ...]
    challenge: str
    holder_signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return presentation_signing_bytes(self.credential.id, self.disclosed, self.challenge)

    def to_json(self) -> dict:
        return {
            "credential": self.credential.to_json(),
            "disclosed": [
                {"label": label, "value": value, "salt": b64url_encode(salt)}
                for label, value, salt in self.disclosed
            ],
            "challenge": self.challenge,
            "holder_signature": b64url_encode(self.holder_signature),
        }

    def serialize(self) -> bytes:
        return json.dumps(self.to_json(), separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    @classmethod
    def from_json(cls, doc: Mapping) -> "Presentation":
        return cls(
            credential=VerifiableCredential.from_json(doc["credential"]),
            disclosed=tuple((d["label"], d["value"], b64url_decode(d["salt"])) for d in doc["disclosed"]),
            challenge=doc["challenge"],
            holder_signature=b64url_decode(doc["holder_signature"]),
        )


def presentation_signing_bytes(credential_id: str, disclosed, challenge: str) -> bytes:
    fields = [("credential_id", credential_id), ("disclosed_count", str(len(disclosed)))]
    for i, (label, value, salt) in enumerate(disclosed):
        fields += [(f"label{i}", label), (f"value{i}", value), (f"salt{i}", b64url_encode(salt))]
    fields.append(("challenge", challenge))
    return canonical_encode(fields)


@dataclass
class HolderStore:
    """The holder's private openings: label -> (value, salt)."""

    openings: dict[str, tuple[str, bytes]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {label: {"value": v, "salt": b64url_encode(s)} for label, (v, s) in self.openings.items()}

    @classmethod
    def from_json(cls, doc: Mapping) -> "HolderStore":
        return cls({label: (e["value"], b64url_decode(e["salt"])) for label, e in doc.items()})


# -- registries -------------------------------------------------------------

class DataRegistry:
    """Issuer keys and credential status. Subclasses provide storage."""

    backend = "abstract"

    def __init__(self):
        self._lock = threading.RLock()

    # storage hooks
    def _issuers(self) -> dict[str, bytes]:
        raise NotImplementedError

    def _status(self) -> dict[str, str]:
        raise NotImplementedError

    def _put_issuer(self, issuer_id: str, public_key: bytes) -> None:
        raise NotImplementedError

    def _put_status(self, status_id: str, status: str) -> None:
        raise NotImplementedError

    # public API
    def register_issuer(self, issuer_id: str, public_key: bytes) -> None:
        with self._lock:
            if issuer_id in self._issuers():
                raise DuplicateIssuer(issuer_id)
            self._put_issuer(issuer_id, public_key)

    def issuer_key(self, issuer_id: str) -> bytes:
        try:
            return self._issuers()[issuer_id]
        except KeyError:
            raise UnknownIssuer(issuer_id) from None

    def register_status(self, status_id: str) -> None:
        with self._lock:
            if status_id in self._status():
                raise ValueError(f"status id {status_id!r} already registered")
            self._put_status(status_id, ACTIVE)

    def status(self, status_id: str) -> str | None:
        return self._status().get(status_id)

    def revoke(self, status_id: str) -> None:
        with self._lock:
            current = self._status().get(status_id)
            if current is None:
                raise UnknownStatusId(status_id)
            if current != REVOKED:
                self._put_status(status_id, REVOKED)

    def to_json(self) -> dict:
        return {
            "format": REGISTRY_FORMAT,
            "version": 1,
            "issuers": {i: b64url_encode(k) for i, k in sorted(self._issuers().items())},
            "status": dict(sorted(self._status().items())),
        }


class InMemoryRegistry(DataRegistry):
    backend = "memory"

    def __init__(self):
        super().__init__()
        self.issuers: dict[str, bytes] = {}
        self.statuses: dict[str, str] = {}

    def _issuers(self):
        return self.issuers

    def _status(self):
        return self.statuses

    def _put_issuer(self, issuer_id, public_key):
        self.issuers[issuer_id] = bytes(public_key)

    def _put_status(self, status_id, status):
        self.statuses[status_id] = status


class FileRegistry(InMemoryRegistry):
    """JSON-document registry, rewritten atomically after every mutation."""

    backend = "file"

    def __init__(self, path: str | os.PathLike):
        super().__init__()
        self.path = Path(path)
        if self.path.exists():
            doc = json.loads(self.path.read_text(encoding="utf-8"))
            if doc.get("format") != REGISTRY_FORMAT:
                raise ValueError("not a registry document")
            self.issuers = {i: b64url_decode(k) for i, k in doc["issuers"].items()}
            for sid, st in doc["status"].items():
                if st not in (ACTIVE, REVOKED):
                    raise ValueError(f"bad status {st!r}")
            self.statuses = dict(doc["status"])

    def _flush(self):
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.path)

    def _put_issuer(self, issuer_id, public_key):
        super()._put_issuer(issuer_id, public_key)
        self._flush()

    def _put_status(self, status_id, status):
        super()._put_status(status_id, status)
        self._flush()


REGISTRY_CONTRACT = "vc-registry"


@register_contract
class RegistryContract(Contract):
    contract_id = REGISTRY_CONTRACT
    methods = ("init", "register_issuer", "set_status")
    queries = ("issuers", "statuses")

    def _operator_only(self, ctx):
        if ctx.profile_kind == PERMISSIONLESS and ctx.get("operator") != b64url_encode(ctx.sender):
            raise ContractError("only the registry operator may write", reason="not owner")

    def init(self, ctx):
        if ctx.get("operator") is not None:
            raise ContractError("already initialized", reason="already initialized")
        ctx.put("operator", b64url_encode(ctx.sender))

    def register_issuer(self, ctx, issuer_id, public_key):
        self._operator_only(ctx)
        issuers = ctx.get_json("issuers", {})
        if issuer_id in issuers:
            raise DuplicateIssuer(issuer_id)
        b64url_decode(public_key)
        issuers[issuer_id] = public_key
        ctx.put_json("issuers", issuers)

    def set_status(self, ctx, status_id, status):
        self._operator_only(ctx)
        if status not in (ACTIVE, REVOKED):
            raise ContractError(f"bad status {status!r}", reason="bad status")
        statuses = ctx.get_json("status", {})
        if statuses.get(status_id) == REVOKED:
            raise ContractError("revocation is permanent", reason="already revoked")
        statuses[status_id] = status
        ctx.put_json("status", statuses)

    def issuers(self, ctx):
        return ctx.get_json("issuers", {})

    def statuses(self, ctx):
        return ctx.get_json("status", {})


class LedgerRegistry(DataRegistry):
    """Registry whose state is a contract on the simulated ledger.

    Writes are transactions signed by ``operator`` (and endorsed by
    ``endorsers`` on a permissioned ledger); reads are contract queries.
    """

    backend = "ledger"

    def __init__(self, ledger: Ledger, operator: KeyPair, *, channel: str = DEFAULT_CHANNEL,
                 endorsers: Iterable = (), reader: str | None = None, deploy: bool = True):
        super().__init__()
        self.ledger = ledger
        self.operator = operator
        self.channel = channel
        self.endorsers = list(endorsers)
        self.reader = reader if reader is not None else ledger.profile.peer_for_key(operator.public_key)
        if deploy:
            self._invoke("init")

    def _invoke(self, method: str, *args: str) -> None:
        receipt = invoke(self.ledger, self.operator, REGISTRY_CONTRACT, method, list(args),
                         channel=self.channel, endorsers=self.endorsers)
        if not receipt.accepted:
            raise error_for_reason(receipt.reason)(receipt.reason, reason=receipt.reason)

    def _issuers(self):
        doc = self.ledger.query(REGISTRY_CONTRACT, "issuers", [], self.channel, self.reader)
        return {i: b64url_decode(k) for i, k in doc.items()}

    def _status(self):
        return self.ledger.query(REGISTRY_CONTRACT, "statuses", [], self.channel, self.reader)

    def _put_issuer(self, issuer_id, public_key):
        self._invoke("register_issuer", issuer_id, b64url_encode(public_key))

    def _put_status(self, status_id, status):
        self._invoke("set_status", status_id, status)


# -- operations -------------------------------------------------------------

def register_issuer(registry: DataRegistry, issuer_id: str, public_key: bytes) -> None:
    registry.register_issuer(issuer_id, public_key)


def _random(rng, n: int) -> bytes:
    return secrets.token_bytes(n) if rng is None else rng.randbytes(n)


def issue_credential(
    issuer_key: KeyPair,
    issuer_id: str,
    holder_public_key: bytes,
    attributes: Mapping[str, str],
    valid_from: int,
    valid_until: int,
    registry: DataRegistry,
    rng=None,
) -> tuple[VerifiableCredential, HolderStore]:
    """Issue a credential; returns it with the holder's openings.

    ``rng`` (a ``random.Random``) makes salts and ids reproducible; by default
    they come from system entropy.
    """
    if registry.issuer_key(issuer_id) != issuer_key.public_key:
        raise UnknownIssuer(f"{issuer_id!r} is not registered with this key")
    if not attributes:
        raise EmptyAttributes("no attributes to attest")
    if not valid_from < valid_until:
        raise BadValidity(f"valid_from {valid_from} must precede valid_until {valid_until}")
    store = HolderStore()
    digests = []
    for label, value in attributes.items():
        salt = _random(rng, SALT_SIZE)
        store.openings[label] = (str(value), salt)
        digests.append(commit(label, str(value), salt))
    cred_id = "urn:vc:" + b64url_encode(_random(rng, 16))
    status_id = "status:" + b64url_encode(_random(rng, 16))
    unsigned = VerifiableCredential(cred_id, issuer_id, bytes(holder_public_key), tuple(digests),
                                    int(valid_from), int(valid_until), status_id)
    credential = VerifiableCredential(**{**unsigned.__dict__,
                                         "issuer_signature": issuer_key.sign(unsigned.signing_bytes())})
    registry.register_status(status_id)
    return credential, store


def derive_presentation(
    credential: VerifiableCredential,
    holder_key: KeyPair,
    disclose: Iterable[str],
    challenge: str,
    holder_attribute_store: HolderStore | Mapping[str, tuple[str, bytes]],
) -> Presentation:
    openings = (holder_attribute_store.openings if isinstance(holder_attribute_store, HolderStore)
                else holder_attribute_store)
    if holder_key.public_key != credential.holder_public_key:
        raise WrongHolderKey("key does not match the credential holder")
    listed = set(credential.commitments)
    disclosed = []
    for label in sorted(set(disclose)):
        if label not in openings:
            raise UnknownLabel(label)
        value, salt = openings[label]
        if commit(label, value, salt) not in listed:
            raise UnknownLabel(f"{label!r} is not committed in this credential")
        disclosed.append((label, value, bytes(salt)))
    disclosed = tuple(disclosed)
    sig = holder_key.sign(presentation_signing_bytes(credential.id, disclosed, challenge))
    return Presentation(credential, disclosed, challenge, sig)


@dataclass
class VerificationReport:
    valid: bool
    disclosed: dict[str, str]
    reasons: list[str]

    def to_json(self) -> dict:
        return {"valid": self.valid, "disclosed": self.disclosed, "reasons": self.reasons}


def _check_status(registry: DataRegistry, status_id: str) -> str | None:
    status = registry.status(status_id)
    if status is None:
        return "unknown status"
    if status == REVOKED:
        return "revoked"
    return None


def verify_presentation(presentation: Presentation, registry: DataRegistry, expected_challenge: str,
                        now: int) -> VerificationReport:
    """Run every check and report all failures; never raises for bad input."""
    cred = presentation.credential
    reasons: list[str] = []
    try:
        issuer_key = registry.issuer_key(cred.issuer_id)
    except UnknownIssuer:
        reasons.append("unknown issuer")
    else:
        if not verify_quietly(issuer_key, cred.signing_bytes(), cred.issuer_signature):
            reasons.append("bad issuer signature")

    listed = set(cred.commitments)
    labels = [label for label, _, _ in presentation.disclosed]
    if len(set(labels)) != len(labels):
        reasons.append("duplicate label")
    if any(commit(label, value, salt) not in listed for label, value, salt in presentation.disclosed):
        reasons.append("commitment mismatch")

    if not verify_quietly(cred.holder_public_key, presentation.signing_bytes(), presentation.holder_signature):
        reasons.append("bad holder signature")
    if presentation.challenge != expected_challenge:
        reasons.append("challenge mismatch")

    if now < cred.valid_from:
        reasons.append("not yet valid")
    elif now >= cred.valid_until:
        reasons.append("expired")

    status_problem = _check_status(registry, cred.status_id)
    if status_problem:
        reasons.append(status_problem)

    valid = not reasons
    disclosed = {label: value for label, value, _ in presentation.disclosed} if valid else {}
    return VerificationReport(valid, disclosed, reasons)


def revoke_credential(registry: DataRegistry, status_id: str) -> None:
    registry.revoke(status_id)
