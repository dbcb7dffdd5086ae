"""The 24 comparison scenarios: 8 criteria x 3 mechanisms.

Each script gets a private :class:`Environment` seeded from the run seed and
its own name, so scenarios share nothing and can run in any order. Scripts
return an observed-behaviour string; toolkit errors that a script expects are
folded into that string by :func:`outcome`, anything else is a panic.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import random
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .. import access_terms, bridge, certificate, jose, scitokens, vcred
from ..crypto import KeyPair, b64url_encode, derive_seed, keygen
from ..errors import ToolkitError
from ..ledger import (
    LedgerProfile,
    decode_blocks,
    init_ledger,
    invoke,
    make_transaction,
    replay,
    state_root,
)

CRITERIA = ("trust", "revocation", "privacy", "security", "validity",
            "verification", "authentication", "functionality")
MECHANISMS = ("scitokens", "vc", "contract")
T0 = 1_700_000_000
STUDENT = {"name": "Alice", "program": "CS", "graduation_date": "2023-05-15", "gpa": "3.90"}


class Environment:
    """Seeded keys, clock origin and RNG for one scenario."""

    def __init__(self, seed: int = 0, label: str = ""):
        self.seed = seed
        self.label = label
        self.rng = random.Random(f"{seed}:{label}")
        self.now = T0
        self._keys: dict[str, KeyPair] = {}

    def key(self, name: str) -> KeyPair:
        if name not in self._keys:
            self._keys[name] = keygen(derive_seed(self.seed, self.label, name), key_id=name)
        return self._keys[name]

    def issuer(self, **kw) -> scitokens.IssuerConfig:
        return scitokens.IssuerConfig("https://issuer.example", self.key("issuer"), rng=self.rng, **kw)

    def registry(self) -> vcred.InMemoryRegistry:
        reg = vcred.InMemoryRegistry()
        reg.register_issuer("uni:ksu", self.key("uni").public_key)
        return reg

    def credential(self, registry, attributes=None, valid_from=None, valid_until=None):
        return vcred.issue_credential(
            self.key("uni"), "uni:ksu", self.key("holder").public_key, attributes or STUDENT,
            self.now if valid_from is None else valid_from,
            self.now + 86_400 if valid_until is None else valid_until,
            registry, rng=self.rng,
        )

    def public_ledger(self):
        owner = self.key("owner")
        led = init_ledger(LedgerProfile.permissionless(
            [owner.public_key, self.key("stranger").public_key]))
        certificate.deploy(led, owner, now=self.now)
        return led

    def peers(self) -> dict[str, KeyPair]:
        return {p: self.key(p) for p in ("p1", "p2", "p3")}

    def private_ledger(self, threshold: int = 2):
        peers = self.peers()
        profile = LedgerProfile.permissioned(
            {p: k.public_key for p, k in peers.items()}, {"main": peers}, {"main": (threshold, peers)})
        return init_ledger(profile)


def outcome(fn: Callable, ok: str = "valid") -> str:
    """``ok`` if fn returns truthy, its reason if it raises a toolkit error."""
    try:
        result = fn()
    except ToolkitError as exc:
        return exc.reason
    if result is False:
        return "denied"
    return ok


def _report(report) -> str:
    return "valid" if report.valid else "invalid (" + ", ".join(report.reasons) + ")"


def _receipt(receipt) -> str:
    return "accepted" if receipt.accepted else f"rejected ({receipt.reason})"


def _facts(**items: str) -> str:
    return "; ".join(f"{k.replace('_', ' ')}: {v}" for k, v in items.items())


@dataclass(frozen=True)
class Scenario:
    name: str
    criterion: str
    mechanism: str
    script: Callable[[Environment], str]
    table_cell: str = ""
    expected: str = ""


SCRIPTS: dict[tuple[str, str], Callable[[Environment], str]] = {}


def script(criterion: str, mechanism: str):
    def wrap(fn):
        SCRIPTS[(criterion, mechanism)] = fn
        return fn
    return wrap


# -- trust ------------------------------------------------------------------

@script("trust", "scitokens")
def trust_scitokens(env):
    issuer = env.issuer()
    pk = issuer.keys.public_key
    token = scitokens.issue_access_token(issuer, "u1", ["read:/data"], env.now)
    rogue = scitokens.IssuerConfig(issuer.iss, KeyPair(env.key("rogue").public_key,
                                                       env.key("rogue").private_key, "issuer"), rng=env.rng)
    forged = scitokens.issue_access_token(rogue, "u1", ["read:/data"], env.now)
    return _facts(
        trusted_issuer_token=outcome(lambda: scitokens.verify_access_token(token, pk, env.now + 1)),
        same_claims_other_key=outcome(lambda: scitokens.verify_access_token(forged, pk, env.now + 1)),
    )


@script("trust", "vc")
def trust_vc(env):
    registry = env.registry()
    cred, store = env.credential(registry)
    holder = env.key("holder")
    good = vcred.derive_presentation(cred, holder, {"name"}, "n1", store)

    rogue_registry = vcred.InMemoryRegistry()
    rogue_registry.register_issuer("diploma-mill", env.key("mill").public_key)
    rogue_registry.register_issuer("uni:ksu", env.key("mill").public_key)
    mill = vcred.issue_credential(env.key("mill"), "diploma-mill", holder.public_key, STUDENT,
                                  env.now, env.now + 86_400, rogue_registry, rng=env.rng)
    fake = vcred.issue_credential(env.key("mill"), "uni:ksu", holder.public_key, STUDENT,
                                  env.now, env.now + 86_400, rogue_registry, rng=env.rng)
    # let the verifier's registry know the status ids so only attestation differs
    for c, _ in (mill, fake):
        registry.register_status(c.status_id)
    p_mill = vcred.derive_presentation(mill[0], holder, {"name"}, "n1", mill[1])
    p_fake = vcred.derive_presentation(fake[0], holder, {"name"}, "n1", fake[1])
    return _facts(
        registered_issuer=_report(vcred.verify_presentation(good, registry, "n1", env.now)),
        unregistered_issuer=_report(vcred.verify_presentation(p_mill, registry, "n1", env.now)),
        impersonated_issuer_id=_report(vcred.verify_presentation(p_fake, registry, "n1", env.now)),
    )


@script("trust", "contract")
def trust_contract(env):
    public = env.public_ledger()
    non_owner = invoke(public, env.key("stranger"), certificate.CONTRACT_ID, "issue", list(STUDENT.values()))
    private = env.private_ledger(threshold=2)
    peers = env.peers()
    one = invoke(private, peers["p1"], certificate.CONTRACT_ID, "issue", list(STUDENT.values()),
                 endorsers=[("p1", peers["p1"])])
    two = invoke(private, peers["p1"], certificate.CONTRACT_ID, "issue", list(STUDENT.values()),
                 endorsers=[("p1", peers["p1"]), ("p3", peers["p3"])])
    return _facts(
        non_owner_issuance=_receipt(non_owner),
        one_of_three_endorsed=_receipt(one),
        two_of_three_endorsed=_receipt(two),
    )


# -- revocation -------------------------------------------------------------

@script("revocation", "scitokens")
def revocation_scitokens(env):
    issuer = env.issuer()
    pk = issuer.keys.public_key
    rt = scitokens.issue_refresh_token(issuer, "u1", ["read:/data"], env.now)
    access = scitokens.refresh(issuer, rt.id, env.now)
    scitokens.revoke_refresh(issuer, rt.id)
    exp = scitokens.verify_access_token(access, pk, env.now).exp
    return _facts(
        refresh_after_revoke=outcome(lambda: scitokens.refresh(issuer, rt.id, env.now + 10)),
        pre_issued_access_token_before_exp=outcome(lambda: scitokens.verify_access_token(access, pk, exp - 1)),
        at_exp=outcome(lambda: scitokens.verify_access_token(access, pk, exp)),
    )


@script("revocation", "vc")
def revocation_vc(env):
    registry = env.registry()
    cred, store = env.credential(registry)
    pres = vcred.derive_presentation(cred, env.key("holder"), {"name", "gpa"}, "n1", store)
    before = _report(vcred.verify_presentation(pres, registry, "n1", env.now))
    vcred.revoke_credential(registry, cred.status_id)
    return _facts(
        before_revoke=before,
        after_registry_revoke=_report(vcred.verify_presentation(pres, registry, "n1", env.now)),
    )


@script("revocation", "contract")
def revocation_contract(env):
    led = env.public_ledger()
    owner = env.key("owner")
    cred = bridge.issue_bridged_credential(led, env.key("uni"), owner, STUDENT, "uni:ksu")
    cid = jose.split(cred.jwt)[1]["certificate_id"]
    before = certificate.verify_certificate(led, cid, *STUDENT.values())
    certificate.revoke_certificate(led, owner, cid)
    after = certificate.verify_certificate(led, cid, *STUDENT.values())
    report = bridge.verify_bridged_credential(cred, led, env.key("uni").public_key)
    return _facts(
        before_revoke="valid" if before else before.reason,
        after_in_contract_revoke="valid" if after else f"invalid ({after.reason})",
        bridged_jwt_signature=outcome(lambda: jose.decode(cred.jwt, env.key("uni").public_key), ok="intact"),
        bridged_credential=_report(report),
    )


# -- privacy ----------------------------------------------------------------

@script("privacy", "scitokens")
def privacy_scitokens(env):
    issuer = env.issuer()
    token = scitokens.issue_access_token(issuer, "alice@example.org", ["read:/data"], env.now)
    segment = token.compact.split(".")[1]
    claims = json.loads(base64.urlsafe_b64decode(segment + "=" * (-len(segment) % 4)))
    return _facts(
        payload_readable_without_key="yes",
        subject_exposed="yes" if claims.get("sub") == "alice@example.org" else "no",
        permissions_exposed="yes" if claims.get("scope") == "read:/data" else "no",
    )


@script("privacy", "vc")
def privacy_vc(env):
    registry = env.registry()
    cred, store = env.credential(registry)
    pres = vcred.derive_presentation(cred, env.key("holder"), {"name"}, "n1", store)
    report = vcred.verify_presentation(pres, registry, "n1", env.now)
    return _facts(
        verifier_sees=",".join(sorted(report.disclosed)) or "nothing",
        gpa_in_report="yes" if "gpa" in report.disclosed else "no",
        gpa_value_in_presentation_bytes="yes" if STUDENT["gpa"].encode() in pres.serialize() else "no",
    )


@script("privacy", "contract")
def privacy_contract(env):
    peers = env.peers()
    profile = LedgerProfile.permissioned(
        {p: k.public_key for p, k in peers.items()},
        {"registrar": ["p1", "p2"]}, {"registrar": (2, ["p1", "p2"])})
    led = init_ledger(profile)
    cid = certificate.issue_certificate(led, peers["p1"], *STUDENT.values(), channel="registrar",
                                        endorsers=[("p1", peers["p1"]), ("p2", peers["p2"])])
    public = env.public_ledger()
    pub_cid = certificate.issue_certificate(public, env.key("owner"), *STUDENT.values())
    return _facts(
        channel_member_read=outcome(lambda: certificate.get_certificate(led, cid, channel="registrar",
                                                                        reader="p2"), ok="allowed"),
        non_member_read=outcome(lambda: certificate.get_certificate(led, cid, channel="registrar",
                                                                    reader="p3"), ok="allowed"),
        permissionless_read=outcome(lambda: certificate.get_certificate(public, pub_cid), ok="public"),
    )


# -- security ---------------------------------------------------------------

@script("security", "scitokens")
def security_scitokens(env):
    issuer = env.issuer()
    pk = issuer.keys.public_key
    token = scitokens.issue_access_token(issuer, "u1", ["read:/data"], env.now)
    header, payload, sig = token.compact.split(".")
    claims = jose.split(token.compact)[1]
    claims["scope"] = "write:/"
    forged_payload = json.dumps(claims, separators=(",", ":")).encode()
    escalated = ".".join([header, b64url_encode(forged_payload), sig])
    other = scitokens.IssuerConfig(issuer.iss, env.key("other"), rng=env.rng)
    foreign = scitokens.issue_access_token(other, "u1", ["read:/data"], env.now)
    return _facts(
        escalated_scope_original_signature=outcome(lambda: scitokens.verify_access_token(escalated, pk, env.now)),
        token_signed_by_unknown_key=outcome(lambda: scitokens.verify_access_token(foreign, pk, env.now)),
    )


@script("security", "vc")
def security_vc(env):
    registry = env.registry()
    holder = env.key("holder")
    cred, store = env.credential(registry)
    lied = vcred.HolderStore({**store.openings, "gpa": ("4.00", store.openings["gpa"][1])})
    altered_value = _report(vcred.verify_presentation(
        _unchecked_presentation(cred, holder, lied, ["gpa"], "n1"), registry, "n1", env.now))
    stretched = vcred.VerifiableCredential(**{**cred.__dict__, "valid_until": cred.valid_until + 10**8})
    pres = vcred.derive_presentation(stretched, holder, {"name"}, "n1", store)
    return _facts(
        altered_disclosed_value=altered_value,
        extended_validity=_report(vcred.verify_presentation(pres, registry, "n1", env.now)),
    )


def _unchecked_presentation(cred, holder, store, labels, challenge):
    disclosed = tuple((label, *store.openings[label]) for label in sorted(labels))
    sig = holder.sign(vcred.presentation_signing_bytes(cred.id, disclosed, challenge))
    return vcred.Presentation(cred, disclosed, challenge, sig)


@script("security", "contract")
def security_contract(env):
    led = env.public_ledger()
    owner = env.key("owner")
    certificate.issue_certificate(led, owner, *STUDENT.values())
    lines = [b.serialize() for b in led.chain]
    target = lines[-1]
    pos = target.index('"Alice"') + 1
    lines[-1] = target[:pos] + "B" + target[pos + 1:]
    try:
        replay(led.genesis_profile, decode_blocks(lines))
        tampered = "replayed"
    except ToolkitError as exc:
        tampered = exc.reason
    root = state_root(led)
    rejected = invoke(led, env.key("stranger"), certificate.CONTRACT_ID, "issue",
                      ["Mallory", "CS", "2023-05-15", "4.00"])
    return _facts(
        tampered_block_on_replay=tampered,
        rejected_transaction="state root unchanged" if state_root(led) == root and not rejected.accepted
        else "state changed",
    )


# -- validity ---------------------------------------------------------------

@script("validity", "scitokens")
def validity_scitokens(env):
    issuer = env.issuer()
    pk = issuer.keys.public_key
    token = scitokens.issue_access_token(issuer, "u1", ["read:/data"], env.now, ttl_override=300)
    exp = env.now + 300
    return _facts(
        at_iat=outcome(lambda: scitokens.verify_access_token(token, pk, env.now)),
        one_second_before_exp=outcome(lambda: scitokens.verify_access_token(token, pk, exp - 1)),
        at_exp=outcome(lambda: scitokens.verify_access_token(token, pk, exp)),
        ttl_beyond_issuer_limit=outcome(lambda: scitokens.issue_access_token(
            issuer, "u1", ["read:/data"], env.now, ttl_override=issuer.access_ttl + 1)),
    )


@script("validity", "vc")
def validity_vc(env):
    registry = env.registry()
    start, end = env.now + 100, env.now + 200
    cred, store = env.credential(registry, valid_from=start, valid_until=end)
    pres = vcred.derive_presentation(cred, env.key("holder"), {"name"}, "n1", store)

    def at(t):
        return _report(vcred.verify_presentation(pres, registry, "n1", t))
    return _facts(before_valid_from=at(start - 1), inside_window=at(start), at_valid_until=at(end))


@script("validity", "contract")
def validity_contract(env):
    owner = env.key("owner")
    led = env.public_ledger()
    invoke(led, owner, access_terms.CONTRACT_ID, "init", [])
    start, end = env.now + 100, env.now + 200
    access_terms.grant(led, owner, "alice", "read:/data", start, end)

    def at(t):
        return "granted" if access_terms.check_access(led, "alice", "read", "/data/x", t) else "denied"
    bad_gpa = outcome(lambda: certificate.issue_certificate(led, owner, "Bob", "CS", "2023-05-15", "4.50"),
                      ok="accepted")
    return _facts(before_window=at(start - 1), inside_window=at(start), at_window_end=at(end),
                  out_of_range_gpa_issuance=bad_gpa)


# -- verification -----------------------------------------------------------

@script("verification", "scitokens")
def verification_scitokens(env):
    issuer = env.issuer()
    pk = issuer.keys.public_key
    token = scitokens.issue_access_token(issuer, "u1", ["read:/data"], env.now)
    del issuer  # verification must not need issuer state
    return _facts(
        issuer_public_key_only=outcome(lambda: scitokens.verify_access_token(token.compact, pk, env.now + 1)),
        other_public_key=outcome(lambda: scitokens.verify_access_token(
            token.compact, env.key("other").public_key, env.now + 1)),
    )


@script("verification", "vc")
def verification_vc(env):
    outcomes = {}
    with tempfile.TemporaryDirectory() as tmp:
        backends = {
            "memory_registry": vcred.InMemoryRegistry(),
            "file_registry": vcred.FileRegistry(Path(tmp) / "registry.json"),
            "ledger_registry": vcred.LedgerRegistry(
                init_ledger(LedgerProfile.permissionless([env.key("operator").public_key])), env.key("operator")),
        }
        holder = env.key("holder")
        for name, reg in backends.items():
            reg.register_issuer("uni:ksu", env.key("uni").public_key)
            # identical salts and ids for every backend
            rng_state = env.rng.getstate()
            cred, store = env.credential(reg)
            env.rng.setstate(rng_state)
            pres = vcred.derive_presentation(cred, holder, {"name"}, "n1", store)
            outcomes[name] = _report(vcred.verify_presentation(pres, reg, "n1", env.now))
        bare = vcred.InMemoryRegistry()
        bare.register_status(cred.status_id)
        outcomes["issuer_missing_from_registry"] = _report(vcred.verify_presentation(pres, bare, "n1", env.now))
    return _facts(**outcomes)


@script("verification", "contract")
def verification_contract(env):
    led = env.public_ledger()
    owner = env.key("owner")
    cid = certificate.issue_certificate(led, owner, *STUDENT.values())
    # owner key doubles as the JWT issuer key here; revocation/contract uses separate keys
    bridged = bridge.issue_bridged_credential(led, owner, owner, dict(STUDENT, name="Bob"), "uni:ksu")
    replayed = replay(led.genesis_profile, led.chain)
    altered = dict(STUDENT, program="EE")
    v = certificate.verify_certificate(replayed, cid, *STUDENT.values())
    w = certificate.verify_certificate(replayed, cid, *altered.values())
    return _facts(
        replayed_state_root="equal" if state_root(replayed) == state_root(led) else "different",
        verify_on_replayed_ledger="valid" if v else v.reason,
        altered_program=w.reason or "valid",
        bridged_same_key_on_replayed_ledger=_report(
            bridge.verify_bridged_credential(bridged, replayed, owner.public_key)),
    )


# -- authentication ---------------------------------------------------------

@script("authentication", "scitokens")
def authentication_scitokens(env):
    issuer = env.issuer()
    pk = issuer.keys.public_key
    token = scitokens.issue_access_token(issuer, "u1", ["read:/data"], env.now)
    copied = scitokens.AccessToken(str(token))
    return _facts(
        presented_by_subject=outcome(lambda: scitokens.verify_access_token(token, pk, env.now + 1)),
        copy_presented_by_third_party=outcome(lambda: scitokens.verify_access_token(copied, pk, env.now + 1)),
    )


@script("authentication", "vc")
def authentication_vc(env):
    registry = env.registry()
    cred, store = env.credential(registry)
    holder, thief = env.key("holder"), env.key("thief")
    good = vcred.derive_presentation(cred, holder, {"name"}, "n1", store)
    stolen = vcred.Presentation(cred, good.disclosed, "n1",
                                thief.sign(vcred.presentation_signing_bytes(cred.id, good.disclosed, "n1")))
    return _facts(
        holder_signed=_report(vcred.verify_presentation(good, registry, "n1", env.now)),
        signed_by_other_key=_report(vcred.verify_presentation(stolen, registry, "n1", env.now)),
        derive_with_other_key=outcome(lambda: vcred.derive_presentation(cred, thief, {"name"}, "n1", store)),
    )


@script("authentication", "contract")
def authentication_contract(env):
    led = env.public_ledger()
    owner = env.key("owner")
    ok = invoke(led, owner, certificate.CONTRACT_ID, "issue", list(STUDENT.values()))
    outsider = invoke(led, env.key("outsider"), certificate.CONTRACT_ID, "issue",
                      ["Bob", "CS", "2023-05-15", "3.00"])
    tx = make_transaction(owner, certificate.CONTRACT_ID, "issue", ["Eve", "CS", "2023-05-15", "4.00"],
                          led.next_nonce())
    forged = dataclasses.replace(tx, sender_signature=env.key("outsider").sign(tx.body()))
    return _facts(
        owner_signed=_receipt(ok),
        unknown_account=_receipt(outsider),
        forged_sender_signature=_receipt(led.submit(forged, env.now)),
    )


# -- functionality ----------------------------------------------------------

@script("functionality", "scitokens")
def functionality_scitokens(env):
    issuer = env.issuer()
    token = scitokens.issue_access_token(issuer, "u1", ["read:/data"], env.now)
    claims = scitokens.verify_access_token(token, issuer.keys.public_key, env.now)

    def ask(action, path):
        allowed = scitokens.authorize(claims, scitokens.ResourceRequest(action, path))
        return "granted" if allowed else "denied"
    return _facts(**{
        "read /data/run1/file.csv": ask("read", "/data/run1/file.csv"),
        "read /database": ask("read", "/database"),
        "write /data/x": ask("write", "/data/x"),
    })


@script("functionality", "vc")
def functionality_vc(env):
    registry = env.registry()
    cred, store = env.credential(registry)
    holder = env.key("holder")

    def policy(disclose):
        pres = vcred.derive_presentation(cred, holder, disclose, "n1", store)
        report = vcred.verify_presentation(pres, registry, "n1", env.now)
        return "granted" if report.valid and report.disclosed.get("program") == "CS" else "denied"
    return _facts(program_disclosed=policy({"program"}), program_withheld=policy({"name"}))


@script("functionality", "contract")
def functionality_contract(env):
    owner = env.key("owner")
    led = env.public_ledger()
    invoke(led, owner, access_terms.CONTRACT_ID, "init", [])
    access_terms.grant(led, owner, "alice", "read:/data", env.now, env.now + 3600)

    def ask(party, action, path):
        return "granted" if access_terms.check_access(led, party, action, path, env.now) else "denied"
    return _facts(**{
        "alice read /data/run1": ask("alice", "read", "/data/run1"),
        "alice write /data/run1": ask("alice", "write", "/data/run1"),
        "bob read /data/run1": ask("bob", "read", "/data/run1"),
    })
