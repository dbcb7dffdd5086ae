"""File-backed workspace and the operations shared by the CLI and HTTP service.

Layout of a workspace directory::

    config            key=value lines (issuer URI, key ids, token lifetimes)
    keystore.json     key_id -> Ed25519 key pair
    registry.json     credential registry (issuers, status list)
    issuer-state.json token issuer state (jti set, refresh tokens)
    ledger.journal    JSON-lines block journal, one header line first

Every operation returns a JSON-ready dict. Verification results always carry
``valid`` and ``reasons`` so both surfaces render them identically.
"""

from __future__ import annotations

import json
import os
import random
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Mapping

from filelock import FileLock

from . import access_terms, bridge, certificate, scitokens, vcred
from .crypto import Keystore, b64url_encode, derive_seed
from .errors import (
    BrokenChain,
    CorruptWorkspace,
    MalformedKey,
    ToolkitError,
    UnknownKeyId,
)
from .ledger import (
    DEFAULT_CHANNEL,
    PERMISSIONLESS,
    LedgerProfile,
    init_ledger,
    invoke,
    load_journal,
    state_root,
)

DEFAULTS = {
    "iss": "https://issuer.example",
    "issuer_key": "issuer",
    "owner_key": "owner",
    "access_ttl": "600",
    "refresh_ttl": str(scitokens.DEFAULT_REFRESH_TTL),
}

_LOCKS: dict[Path, threading.RLock] = {}


def parse_config(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CorruptWorkspace(f"config line {n}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


class Workspace:
    def __init__(self, root: str | os.PathLike, seed: int | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.seed = seed
        self.config_path = self.root / "config"
        self.keystore_path = self.root / "keystore.json"
        self.registry_path = self.root / "registry.json"
        self.issuer_state_path = self.root / "issuer-state.json"
        self.journal_path = self.root / "ledger.journal"
        self._thread_lock = _LOCKS.setdefault(self.root.resolve(), threading.RLock())
        self._file_lock = FileLock(str(self.root / ".lock"))
        self.config = self._load_config()

    @contextmanager
    def writer(self):
        """Single-writer section across threads and processes."""
        with self._thread_lock, self._file_lock:
            yield

    # -- files -------------------------------------------------------------
    def _load_config(self) -> dict[str, str]:
        if not self.config_path.exists():
            self.config_path.write_text("".join(f"{k}={v}\n" for k, v in DEFAULTS.items()), encoding="utf-8")
        return {**DEFAULTS, **parse_config(self.config_path.read_text(encoding="utf-8"))}

    def rng(self, *label) -> random.Random | None:
        return None if self.seed is None else random.Random(f"{self.seed}:{':'.join(map(str, label))}")

    @property
    def keystore(self) -> Keystore:
        try:
            return Keystore(self.keystore_path)
        except (ValueError, KeyError, TypeError, AttributeError, MalformedKey) as exc:
            raise CorruptWorkspace(f"keystore.json: {exc}") from None

    def key(self, key_id: str, create: bool = True):
        store = self.keystore
        if key_id in store:
            return store.get(key_id)
        if not create:
            raise UnknownKeyId(key_id)
        with self.writer():
            store = self.keystore
            if key_id in store:
                return store.get(key_id)
            seed = None if self.seed is None else derive_seed(self.seed, key_id)
            return store.generate(key_id, seed)

    @property
    def registry(self) -> vcred.FileRegistry:
        try:
            return vcred.FileRegistry(self.registry_path)
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise CorruptWorkspace(f"registry.json: {exc}") from None

    def issuer(self) -> scitokens.IssuerConfig:
        cfg = scitokens.IssuerConfig(
            self.config["iss"], self.key(self.config["issuer_key"]),
            access_ttl=int(self.config["access_ttl"]), refresh_ttl=int(self.config["refresh_ttl"]),
            rng=self.rng("issuer", self._issuer_generation()),
        )
        if self.issuer_state_path.exists():
            try:
                cfg.load_state(json.loads(self.issuer_state_path.read_text(encoding="utf-8")))
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise CorruptWorkspace(f"issuer-state.json: {exc}") from None
        return cfg

    def _issuer_generation(self) -> int:
        # keeps seeded ids fresh across invocations: depends on prior issuance count
        if not self.issuer_state_path.exists():
            return 0
        try:
            doc = json.loads(self.issuer_state_path.read_text(encoding="utf-8"))
            return len(doc.get("issued_jti", [])) + len(doc.get("refresh_tokens", {}))
        except (ValueError, AttributeError):
            return 0

    def save_issuer(self, cfg: scitokens.IssuerConfig) -> None:
        tmp = self.issuer_state_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(cfg.to_state(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.issuer_state_path)

    def ledger(self):
        if not self.journal_path.exists():
            return self._init_ledger(PERMISSIONLESS)
        try:
            return load_journal(self.journal_path)
        except BrokenChain as exc:
            raise CorruptWorkspace(f"ledger.journal: {exc}") from None

    def _init_ledger(self, kind: str, accounts: Iterable[str] = (), peers: Iterable[str] = (),
                     threshold: int = 2, channel: str = DEFAULT_CHANNEL):
        with self.writer():
            owner = self.key(self.config["owner_key"])
            if kind == PERMISSIONLESS:
                keys = {owner.public_key} | {self.key(a).public_key for a in accounts}
                led = init_ledger(LedgerProfile.permissionless(keys), self.journal_path)
                certificate.deploy(led, owner)
                invoke(led, owner, access_terms.CONTRACT_ID, "init", [])
                return led
            peers = list(peers) or ["p1", "p2", "p3"]
            profile = LedgerProfile.permissioned(
                {p: self.key(p).public_key for p in peers}, {channel: peers}, {channel: (threshold, peers)})
            return init_ledger(profile, self.journal_path)


# -- operations -------------------------------------------------------------

def _verdict(valid: bool, reasons: list[str], **extra) -> dict:
    return {"valid": valid, "reasons": reasons, **extra}


def token_issue(ws: Workspace, sub: str, scopes: list[str], now: int, ttl: int | None = None,
                aud: str | None = None, with_refresh: bool = False) -> dict:
    with ws.writer():
        issuer = ws.issuer()
        token = scitokens.issue_access_token(issuer, sub, scopes, now, ttl_override=ttl, aud=aud)
        out = {"token": token.compact}
        if with_refresh:
            out["refresh_token"] = scitokens.issue_refresh_token(issuer, sub, scopes, now).id
        ws.save_issuer(issuer)
    return out


def token_verify(ws: Workspace, token: str, now: int, aud: str | None = None) -> dict:
    key = ws.key(ws.config["issuer_key"])
    try:
        claims = scitokens.verify_access_token(token, key.public_key, now, expected_aud=aud)
    except ToolkitError as exc:
        return _verdict(False, [exc.reason])
    return _verdict(True, [], claims=claims.to_payload())


def token_refresh(ws: Workspace, refresh_id: str, now: int) -> dict:
    with ws.writer():
        issuer = ws.issuer()
        token = scitokens.refresh(issuer, refresh_id, now)
        ws.save_issuer(issuer)
    return {"token": token.compact}


def token_revoke(ws: Workspace, refresh_id: str) -> dict:
    with ws.writer():
        issuer = ws.issuer()
        scitokens.revoke_refresh(issuer, refresh_id)
        ws.save_issuer(issuer)
    return {"revoked": refresh_id}


def vc_register_issuer(ws: Workspace, issuer_id: str, key_id: str) -> dict:
    with ws.writer():
        key = ws.key(key_id)
        ws.registry.register_issuer(issuer_id, key.public_key)
    return {"issuer_id": issuer_id, "public_key": b64url_encode(key.public_key)}


def vc_issue(ws: Workspace, issuer_id: str, key_id: str, holder_key_id: str, attributes: Mapping[str, str],
             valid_from: int, valid_until: int) -> dict:
    with ws.writer():
        registry = ws.registry
        cred, store = vcred.issue_credential(
            ws.key(key_id), issuer_id, ws.key(holder_key_id).public_key, dict(attributes),
            valid_from, valid_until, registry, rng=ws.rng("vc", len(registry.statuses)))
    return {"credential": cred.to_json(), "openings": store.to_json()}


def vc_present(ws: Workspace, issued: Mapping, holder_key_id: str, disclose: Iterable[str], challenge: str) -> dict:
    try:
        cred = vcred.VerifiableCredential.from_json(issued["credential"])
        store = vcred.HolderStore.from_json(issued["openings"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad credential document: {exc}") from None
    pres = vcred.derive_presentation(cred, ws.key(holder_key_id, create=False), disclose, challenge, store)
    return pres.to_json()


def vc_verify(ws: Workspace, presentation: Mapping, challenge: str, now: int) -> dict:
    try:
        pres = vcred.Presentation.from_json(presentation)
    except (KeyError, TypeError, ValueError, AttributeError):
        return _verdict(False, ["malformed"], disclosed={})
    report = vcred.verify_presentation(pres, ws.registry, challenge, now)
    return _verdict(report.valid, report.reasons, disclosed=report.disclosed)


def vc_revoke(ws: Workspace, status_id: str) -> dict:
    with ws.writer():
        vcred.revoke_credential(ws.registry, status_id)
    return {"revoked": status_id}


def ledger_init(ws: Workspace, kind: str = PERMISSIONLESS, accounts: Iterable[str] = (),
                peers: Iterable[str] = (), threshold: int = 2, channel: str = DEFAULT_CHANNEL,
                force: bool = False) -> dict:
    if ws.journal_path.exists():
        if not force:
            raise ToolkitError("ledger already initialized (use --force)", reason="already initialized")
        ws.journal_path.unlink()
    led = ws._init_ledger(kind, accounts, peers, threshold, channel)
    return {"profile": kind, "height": led.height, "state_root": state_root(led).hex()}


def _endorsers(ws: Workspace, peers: Iterable[str]):
    return [(p, ws.key(p, create=False)) for p in peers]


def ledger_submit(ws: Workspace, caller: str, contract: str, method: str, args: list[str],
                  channel: str = DEFAULT_CHANNEL, endorsers: Iterable[str] = (), now: int = 0) -> dict:
    with ws.writer():
        led = ws.ledger()
        receipt = invoke(led, ws.key(caller), contract, method, args, channel=channel,
                         endorsers=_endorsers(ws, endorsers), now=now)
    return {"accepted": receipt.accepted, "block_height": receipt.block_height, "reason": receipt.reason,
            "result": receipt.result, "tx_id": receipt.tx_id}


def ledger_replay(ws: Workspace) -> dict:
    with ws.writer():
        led = ws.ledger()
    return {"height": led.height, "state_root": state_root(led).hex(), "profile": led.profile.kind}


def ledger_root(ws: Workspace) -> dict:
    led = ws.ledger()
    return {"state_root": state_root(led).hex(), "height": led.height}


def cert_issue(ws: Workspace, caller: str, name: str, program: str, graduation_date: str, gpa: str,
               channel: str = DEFAULT_CHANNEL, endorsers: Iterable[str] = (), now: int = 0) -> dict:
    with ws.writer():
        led = ws.ledger()
        cid = certificate.issue_certificate(led, ws.key(caller), name, program, graduation_date, gpa,
                                            channel=channel, endorsers=_endorsers(ws, endorsers), now=now)
    return {"certificate_id": cid}


def cert_verify(ws: Workspace, cid: str, name: str, program: str, graduation_date: str, gpa: str,
                channel: str = DEFAULT_CHANNEL, reader: str | None = None) -> dict:
    led = ws.ledger()
    try:
        verdict = certificate.verify_certificate(led, cid, name, program, graduation_date, gpa,
                                                 channel=channel, reader=reader)
    except ToolkitError as exc:
        return _verdict(False, [exc.reason])
    return _verdict(verdict.valid, [] if verdict.valid else [verdict.reason])


def cert_revoke(ws: Workspace, caller: str, cid: str, channel: str = DEFAULT_CHANNEL,
                endorsers: Iterable[str] = (), now: int = 0) -> dict:
    with ws.writer():
        led = ws.ledger()
        certificate.revoke_certificate(led, ws.key(caller), cid, channel=channel,
                                       endorsers=_endorsers(ws, endorsers), now=now)
    return {"revoked": cid}


def bridge_issue(ws: Workspace, caller: str, issuer_key: str, attributes: Mapping[str, str],
                 issuer_id: str = "", channel: str = DEFAULT_CHANNEL, endorsers: Iterable[str] = (),
                 now: int = 0) -> dict:
    with ws.writer():
        led = ws.ledger()
        cred = bridge.issue_bridged_credential(led, ws.key(issuer_key), ws.key(caller), attributes, issuer_id,
                                               channel=channel, endorsers=_endorsers(ws, endorsers), now=now)
    return {"jwt": cred.jwt}


def bridge_verify(ws: Workspace, jwt: str, issuer_key: str, channel: str = DEFAULT_CHANNEL,
                  reader: str | None = None) -> dict:
    led = ws.ledger()
    report = bridge.verify_bridged_credential(jwt, led, ws.key(issuer_key, create=False).public_key,
                                              channel=channel, reader=reader)
    return _verdict(report.valid, report.reasons)
