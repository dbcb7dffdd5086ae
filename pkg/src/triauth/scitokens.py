"""Capability tokens: issuer-signed JWT access tokens with path scopes and
revocable refresh tokens.

Every time-dependent call takes ``now`` explicitly (seconds since epoch);
nothing here reads the system clock.
"""

from __future__ import annotations

import re
import secrets
import threading
from dataclasses import dataclass, field
from typing import Iterable

from . import jose
from .crypto import KeyPair, b64url_encode
from .errors import (
    AudienceMismatch,
    BadScope,
    Expired,
    Malformed,
    NotYetValid,
    RevokedToken,
    TtlTooLong,
    UnknownRefreshToken,
)

ACTIONS = ("read", "write")
DEFAULT_ACCESS_TTL = 600
DEFAULT_REFRESH_TTL = 30 * 24 * 3600

_SCOPE = re.compile(r"(read|write):(/\S*)")


def parse_scope(scope: str) -> tuple[str, str]:
    m = _SCOPE.fullmatch(scope)
    if m is None:
        raise BadScope(f"scope {scope!r} does not match <read|write>:/path")
    return m.group(1), m.group(2)


def _check_scopes(scopes: Iterable[str]) -> list[str]:
    scopes = list(scopes)
    for s in scopes:
        parse_scope(s)
    return scopes


@dataclass(frozen=True)
class TokenClaims:
    iss: str
    sub: str
    scope: str
    iat: int
    exp: int
    jti: str
    aud: str | None = None
    nbf: int | None = None

    @property
    def scopes(self) -> list[str]:
        return self.scope.split()

    def to_payload(self) -> dict:
        # key order is part of the wire format
        out: dict = {"iss": self.iss, "sub": self.sub}
        if self.aud is not None:
            out["aud"] = self.aud
        out["scope"] = self.scope
        if self.nbf is not None:
            out["nbf"] = self.nbf
        out["iat"] = self.iat
        out["exp"] = self.exp
        out["jti"] = self.jti
        return out

    @classmethod
    def from_payload(cls, payload: dict) -> "TokenClaims":
        try:
            claims = cls(
                iss=payload["iss"],
                sub=payload["sub"],
                scope=payload["scope"],
                iat=payload["iat"],
                exp=payload["exp"],
                jti=payload["jti"],
                aud=payload.get("aud"),
                nbf=payload.get("nbf"),
            )
        except KeyError as exc:
            raise Malformed(f"missing claim {exc}") from None
        for name in ("iat", "exp") + (("nbf",) if claims.nbf is not None else ()):
            value = getattr(claims, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise Malformed(f"claim {name} must be an integer")
        for name in ("iss", "sub", "scope", "jti"):
            if not isinstance(getattr(claims, name), str):
                raise Malformed(f"claim {name} must be a string")
        if claims.aud is not None and not isinstance(claims.aud, str):
            raise Malformed("claim aud must be a string")
        return claims


@dataclass(frozen=True)
class AccessToken:
    compact: str

    def __str__(self) -> str:
        return self.compact


@dataclass
class RefreshToken:
    id: str
    sub: str
    scope: list[str]
    issued_at: int
    revoked: bool = False


@dataclass(frozen=True)
class ResourceRequest:
    action: str
    path: str

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"action must be one of {ACTIONS}")
        if not self.path.startswith("/"):
            raise ValueError("path must start with '/'")


@dataclass
class IssuerConfig:
    """Issuer identity plus its mutable state (issued jtis, refresh tokens)."""

    iss: str
    keys: KeyPair
    access_ttl: int = DEFAULT_ACCESS_TTL
    refresh_ttl: int = DEFAULT_REFRESH_TTL
    revocations: set[str] = field(default_factory=set)
    issued_jti: set[str] = field(default_factory=set)
    refresh_tokens: dict[str, RefreshToken] = field(default_factory=dict)
    rng: object = None  # random.Random for reproducible ids; None = system entropy
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.access_ttl <= self.refresh_ttl:
            raise ValueError("need 0 < access_ttl <= refresh_ttl")

    def _random_bytes(self, n: int) -> bytes:
        if self.rng is None:
            return secrets.token_bytes(n)
        return self.rng.randbytes(n)

    def to_state(self) -> dict:
        return {
            "issued_jti": sorted(self.issued_jti),
            "revocations": sorted(self.revocations),
            "refresh_tokens": {
                rid: {"sub": rt.sub, "scope": rt.scope, "issued_at": rt.issued_at, "revoked": rt.revoked}
                for rid, rt in sorted(self.refresh_tokens.items())
            },
        }

    def load_state(self, state: dict) -> None:
        self.issued_jti = set(state.get("issued_jti", []))
        self.revocations = set(state.get("revocations", []))
        self.refresh_tokens = {
            rid: RefreshToken(rid, e["sub"], list(e["scope"]), int(e["issued_at"]), bool(e["revoked"]))
            for rid, e in state.get("refresh_tokens", {}).items()
        }


def issue_access_token(
    issuer: IssuerConfig,
    sub: str,
    scopes: Iterable[str],
    now: int,
    ttl_override: int | None = None,
    aud: str | None = None,
    nbf: int | None = None,
) -> AccessToken:
    scopes = _check_scopes(scopes)
    ttl = issuer.access_ttl
    if ttl_override is not None:
        if ttl_override > issuer.access_ttl:
            raise TtlTooLong(f"{ttl_override}s exceeds issuer limit {issuer.access_ttl}s")
        if ttl_override <= 0:
            raise ValueError("ttl must be positive")
        ttl = ttl_override
    with issuer._lock:
        jti = b64url_encode(issuer._random_bytes(16))
        while jti in issuer.issued_jti:
            jti = b64url_encode(issuer._random_bytes(16))
        issuer.issued_jti.add(jti)
    claims = TokenClaims(
        iss=issuer.iss, sub=sub, scope=" ".join(scopes), iat=now, exp=now + ttl,
        jti=jti, aud=aud, nbf=nbf,
    )
    return AccessToken(jose.encode(claims.to_payload(), issuer.keys))


def verify_access_token(
    token: AccessToken | str,
    issuer_public_key: bytes,
    now: int,
    expected_aud: str | None = None,
) -> TokenClaims:
    compact = token.compact if isinstance(token, AccessToken) else token
    header, payload = jose.decode(compact, issuer_public_key)
    if header.get("typ") != "JWT":
        raise Malformed(f"unexpected typ {header.get('typ')!r}")
    claims = TokenClaims.from_payload(payload)
    if now >= claims.exp:
        raise Expired(f"token expired at {claims.exp}")
    if claims.nbf is not None and now < claims.nbf:
        raise NotYetValid(f"token not valid before {claims.nbf}")
    if expected_aud is not None and claims.aud != expected_aud:
        raise AudienceMismatch(f"audience {claims.aud!r} != {expected_aud!r}")
    return claims


def path_covers(granted: str, requested: str) -> bool:
    if granted == "/" or granted == requested:
        return True
    return requested.startswith(granted.rstrip("/") + "/")


def authorize(claims: TokenClaims, request: ResourceRequest) -> bool:
    """Whether any scope grants ``request``; write scopes also grant read."""
    for scope in claims.scopes:
        try:
            action, path = parse_scope(scope)
        except BadScope:
            continue
        if action != request.action and not (action == "write" and request.action == "read"):
            continue
        if path_covers(path, request.path):
            return True
    return False


def issue_refresh_token(issuer: IssuerConfig, sub: str, scopes: Iterable[str], now: int) -> RefreshToken:
    scopes = _check_scopes(scopes)
    with issuer._lock:
        rid = b64url_encode(issuer._random_bytes(32))
        while rid in issuer.refresh_tokens:
            rid = b64url_encode(issuer._random_bytes(32))
        token = RefreshToken(rid, sub, scopes, now)
        issuer.refresh_tokens[rid] = token
    return token


def refresh(issuer: IssuerConfig, refresh_id: str, now: int) -> AccessToken:
    token = issuer.refresh_tokens.get(refresh_id)
    if token is None:
        raise UnknownRefreshToken(refresh_id)
    if token.revoked or refresh_id in issuer.revocations:
        raise RevokedToken("refresh token has been revoked")
    if now >= token.issued_at + issuer.refresh_ttl:
        raise Expired("refresh token expired")
    return issue_access_token(issuer, token.sub, token.scope, now)


def revoke_refresh(issuer: IssuerConfig, refresh_id: str) -> None:
    with issuer._lock:
        token = issuer.refresh_tokens.get(refresh_id)
        if token is None:
            raise UnknownRefreshToken(refresh_id)
        token.revoked = True
        issuer.revocations.add(refresh_id)
