"""Deterministic ledger simulator.

Two profiles: *permissionless* (account set, contract owners) and
*permissioned* (peers, channels, m-of-n endorsement policies). Consensus is a
single sequencer: every accepted transaction becomes its own block. Contracts
are native Python classes registered by id; their storage lives in the world
state keyed by (channel, contract, key).
"""

from __future__ import annotations

import copy
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .crypto import (
    ZERO_DIGEST,
    Digest,
    KeyPair,
    b64url_decode,
    b64url_encode,
    canonical_encode,
    hash,
    verify_quietly,
)
from .errors import (
    AccessDenied,
    BadPolicy,
    BrokenChain,
    ContractError,
    DuplicateChannel,
    NotInPolicy,
    NotPermissioned,
    ToolkitError,
    UnknownChannel,
    UnknownPeer,
)

PERMISSIONLESS = "permissionless"
PERMISSIONED = "permissioned"
DEFAULT_CHANNEL = "main"
LIFECYCLE = "_lifecycle"
JOURNAL_FORMAT = "triauth-ledger-journal"
JOURNAL_VERSION = 1


@dataclass(frozen=True)
class Policy:
    threshold: int
    peers: frozenset[str]


@dataclass
class LedgerProfile:
    kind: str
    accounts: set[bytes] = field(default_factory=set)
    peers: dict[str, bytes] = field(default_factory=dict)
    channels: dict[str, set[str]] = field(default_factory=dict)
    policy: dict[str, Policy] = field(default_factory=dict)

    @classmethod
    def permissionless(cls, accounts: Iterable[bytes]) -> "LedgerProfile":
        return cls(PERMISSIONLESS, accounts=set(accounts))

    @classmethod
    def permissioned(
        cls,
        peers: dict[str, bytes],
        channels: dict[str, Iterable[str]] | None = None,
        policy: dict[str, tuple[int, Iterable[str]]] | None = None,
    ) -> "LedgerProfile":
        return cls(
            PERMISSIONED,
            peers=dict(peers),
            channels={c: set(m) for c, m in (channels or {}).items()},
            policy={c: Policy(m, frozenset(ps)) for c, (m, ps) in (policy or {}).items()},
        )

    def validate(self) -> None:
        if self.kind not in (PERMISSIONLESS, PERMISSIONED):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        for channel, pol in self.policy.items():
            if channel not in self.channels:
                raise BadPolicy(f"policy for unknown channel {channel!r}")
            if not pol.peers <= set(self.peers):
                raise UnknownPeer(f"policy for {channel!r} names unknown peers")
            if not 1 <= pol.threshold <= len(pol.peers):
                raise BadPolicy(f"threshold {pol.threshold} with {len(pol.peers)} peers on {channel!r}")
        for channel, members in self.channels.items():
            if not members <= set(self.peers):
                raise UnknownPeer(f"channel {channel!r} names unknown peers")
            if channel not in self.policy:
                raise BadPolicy(f"channel {channel!r} has no endorsement policy")

    def peer_for_key(self, public_key: bytes) -> str | None:
        for peer_id, key in self.peers.items():
            if key == public_key:
                return peer_id
        return None

    def to_json(self) -> dict:
        if self.kind == PERMISSIONLESS:
            return {"kind": self.kind, "accounts": sorted(b64url_encode(a) for a in self.accounts)}
        return {
            "kind": self.kind,
            "peers": {p: b64url_encode(k) for p, k in sorted(self.peers.items())},
            "channels": {c: sorted(m) for c, m in sorted(self.channels.items())},
            "policy": {
                c: {"threshold": p.threshold, "peers": sorted(p.peers)}
                for c, p in sorted(self.policy.items())
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LedgerProfile":
        if doc["kind"] == PERMISSIONLESS:
            return cls.permissionless(b64url_decode(a) for a in doc["accounts"])
        return cls.permissioned(
            {p: b64url_decode(k) for p, k in doc["peers"].items()},
            doc["channels"],
            {c: (p["threshold"], p["peers"]) for c, p in doc["policy"].items()},
        )


@dataclass(frozen=True)
class Transaction:
    sender: bytes
    channel: str
    contract: str
    method: str
    args: tuple[str, ...]
    nonce: str
    sender_signature: bytes = b""
    endorsements: tuple[tuple[str, bytes], ...] = ()

    def body(self) -> bytes:
        fields = [
            ("sender", b64url_encode(self.sender)),
            ("channel", self.channel),
            ("contract", self.contract),
            ("method", self.method),
            ("nonce", self.nonce),
            ("argc", str(len(self.args))),
        ]
        fields += [(f"arg{i}", a) for i, a in enumerate(self.args)]
        return canonical_encode(fields)

    @property
    def tx_id(self) -> Digest:
        return hash(self.body())

    def witness_hash(self) -> Digest:
        """Digest over the signature material that tx_id does not cover."""
        fields = [("sender_signature", b64url_encode(self.sender_signature))]
        fields += [(f"endorsement{i}", f"{p}:{b64url_encode(s)}") for i, (p, s) in enumerate(self.endorsements)]
        return hash(canonical_encode(fields))

    def to_json(self) -> dict:
        return {
            "tx_id": self.tx_id.b64(),
            "sender": b64url_encode(self.sender),
            "channel": self.channel,
            "contract": self.contract,
            "method": self.method,
            "args": list(self.args),
            "nonce": self.nonce,
            "sender_signature": b64url_encode(self.sender_signature),
            "endorsements": [[p, b64url_encode(s)] for p, s in self.endorsements],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Transaction":
        _expect_keys(doc, {"tx_id", "sender", "channel", "contract", "method", "args",
                           "nonce", "sender_signature", "endorsements"})
        args = doc["args"]
        if not isinstance(args, list) or not all(isinstance(a, str) for a in args):
            raise ValueError("args must be a list of strings")
        for name in ("channel", "contract", "method", "nonce"):
            if not isinstance(doc[name], str):
                raise ValueError(f"{name} must be a string")
        tx = cls(
            sender=b64url_decode(doc["sender"]),
            channel=doc["channel"],
            contract=doc["contract"],
            method=doc["method"],
            args=tuple(args),
            nonce=doc["nonce"],
            sender_signature=b64url_decode(doc["sender_signature"]),
            endorsements=tuple((_str(p), b64url_decode(s)) for p, s in doc["endorsements"]),
        )
        if tx.tx_id.b64() != doc["tx_id"]:
            raise ValueError("tx_id does not match transaction body")
        return tx


def _str(value) -> str:
    if not isinstance(value, str):
        raise ValueError("expected string")
    return value


def _expect_keys(doc, keys: set[str]) -> None:
    if not isinstance(doc, dict) or set(doc) != keys:
        raise ValueError(f"expected keys {sorted(keys)}")


def make_transaction(
    sender: KeyPair,
    contract: str,
    method: str,
    args: Sequence[str],
    nonce: str,
    channel: str = DEFAULT_CHANNEL,
) -> Transaction:
    unsigned = Transaction(sender.public_key, channel, contract, method, tuple(map(str, args)), nonce)
    return Transaction(
        unsigned.sender, channel, contract, method, unsigned.args, nonce,
        sender_signature=sender.sign(unsigned.body()),
    )


def with_endorsements(tx: Transaction, endorsements: Iterable[tuple[str, bytes]]) -> Transaction:
    return Transaction(
        tx.sender, tx.channel, tx.contract, tx.method, tx.args, tx.nonce,
        tx.sender_signature, tuple(endorsements),
    )


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: Digest
    tx_list: tuple[Transaction, ...]
    timestamp: int = 0

    @property
    def block_hash(self) -> Digest:
        fields = [
            ("height", str(self.height)),
            ("prev_hash", self.prev_hash.b64()),
            ("timestamp", str(self.timestamp)),
        ]
        for i, tx in enumerate(self.tx_list):
            fields += [(f"tx{i}", tx.tx_id.b64()), (f"witness{i}", tx.witness_hash().b64())]
        return hash(canonical_encode(fields))

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash.b64(),
            "timestamp": self.timestamp,
            "tx_list": [tx.to_json() for tx in self.tx_list],
            "block_hash": self.block_hash.b64(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Block":
        _expect_keys(doc, {"height", "prev_hash", "timestamp", "tx_list", "block_hash"})
        for name in ("height", "timestamp"):
            if type(doc[name]) is not int:
                raise ValueError(f"{name} must be an integer")
        if not isinstance(doc["tx_list"], list):
            raise ValueError("tx_list must be a list")
        block = cls(
            doc["height"],
            Digest(b64url_decode(doc["prev_hash"])),
            tuple(Transaction.from_json(t) for t in doc["tx_list"]),
            doc["timestamp"],
        )
        if block.block_hash.b64() != doc["block_hash"]:
            raise ValueError("block_hash mismatch")
        return block

    def serialize(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def deserialize(cls, line: str | bytes) -> "Block":
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        return cls.from_json(json.loads(line))


@dataclass
class Receipt:
    accepted: bool
    block_height: int | None
    reason: str = ""
    result: Any = None
    tx_id: str = ""


class ContractContext:
    """What contract code sees: caller identity, profile and scoped storage."""

    def __init__(self, ledger: "Ledger", channel: str, contract: str, sender: bytes,
                 writes: dict | None, endorsed_by: frozenset[str] = frozenset()):
        self.ledger = ledger
        self.channel = channel
        self.contract = contract
        self.sender = sender
        self.endorsed_by = endorsed_by
        self._writes = writes

    @property
    def profile_kind(self) -> str:
        return self.ledger.profile.kind

    @property
    def read_only(self) -> bool:
        return self._writes is None

    def get(self, key: str) -> str | None:
        full = (self.channel, self.contract, key)
        if self._writes is not None and full in self._writes:
            return self._writes[full]
        return self.ledger.world_state.get(full)

    def put(self, key: str, value: str) -> None:
        if self._writes is None:
            raise ContractError("write attempted in a read-only call", reason="read only")
        self._writes[(self.channel, self.contract, key)] = str(value)

    def get_json(self, key: str, default=None):
        raw = self.get(key)
        return default if raw is None else json.loads(raw)

    def put_json(self, key: str, value) -> None:
        self.put(key, json.dumps(value, separators=(",", ":"), sort_keys=True))


class Contract:
    """Base for native contracts. Methods are looked up by name; a method
    listed in ``queries`` is read-only and may be called without a block."""

    contract_id = ""
    methods: tuple[str, ...] = ()
    queries: tuple[str, ...] = ()

    def dispatch(self, ctx: ContractContext, method: str, args: Sequence[str]):
        if method not in self.methods and method not in self.queries:
            raise ContractError(f"unknown method {method!r}", reason="unknown method")
        return getattr(self, method)(ctx, *args)


CONTRACTS: dict[str, Callable[[], Contract]] = {}


def register_contract(cls):
    CONTRACTS[cls.contract_id] = cls
    return cls


class Ledger:
    def __init__(self, profile: LedgerProfile, journal: str | os.PathLike | None = None):
        self.profile = profile
        self.chain: list[Block] = []
        self.world_state: dict[tuple[str, str, str], str] = {}
        self.contracts: dict[str, Contract] = {}
        self.journal = Path(journal) if journal is not None else None
        self._lock = threading.RLock()
        self._seen_tx: set[bytes] = set()
        self.genesis_profile = copy.deepcopy(profile)

    # -- helpers ---------------------------------------------------------
    @property
    def height(self) -> int:
        return self.chain[-1].height

    @property
    def head(self) -> Block:
        return self.chain[-1]

    def contract(self, contract_id: str) -> Contract:
        if contract_id not in self.contracts:
            try:
                self.contracts[contract_id] = CONTRACTS[contract_id]()
            except KeyError:
                raise ContractError(f"unknown contract {contract_id!r}", reason="unknown contract") from None
        return self.contracts[contract_id]

    def next_nonce(self) -> str:
        return str(len(self.chain))

    def _append(self, block: Block) -> None:
        self.chain.append(block)
        for tx in block.tx_list:
            self._seen_tx.add(bytes(tx.tx_id))
        if self.journal is not None:
            with open(self.journal, "a", encoding="utf-8") as fh:
                fh.write(block.serialize() + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def _write_journal_header(self) -> None:
        if self.journal is None:
            return
        header = {"format": JOURNAL_FORMAT, "version": JOURNAL_VERSION, "profile": self.profile.to_json()}
        with open(self.journal, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, separators=(",", ":")) + "\n")

    # -- validation / execution ------------------------------------------
    def _validate(self, tx: Transaction) -> str | None:
        """Reason the transaction may not run, or None."""
        if bytes(tx.tx_id) in self._seen_tx:
            return "duplicate transaction"
        if tx.contract == LIFECYCLE:
            return "lifecycle transactions are ledger-internal"
        if not verify_quietly(tx.sender, tx.body(), tx.sender_signature):
            return "bad sender signature"
        if self.profile.kind == PERMISSIONLESS:
            if tx.channel != DEFAULT_CHANNEL:
                return "unknown channel"
            if tx.sender not in self.profile.accounts:
                return "unknown account"
            return None
        if tx.channel not in self.profile.channels:
            return "unknown channel"
        sender_peer = self.profile.peer_for_key(tx.sender)
        if sender_peer is None or sender_peer not in self.profile.channels[tx.channel]:
            return "sender not a channel member"
        if len(self._endorsers(tx)) < self.profile.policy[tx.channel].threshold:
            return "insufficient endorsements"
        return None

    def _endorsers(self, tx: Transaction) -> frozenset[str]:
        """Distinct in-policy peers with a valid endorsement on this tx."""
        policy = self.profile.policy.get(tx.channel)
        if policy is None:
            return frozenset()
        body = tx.body()
        valid = set()
        for peer_id, sig in tx.endorsements:
            if peer_id in valid or peer_id not in policy.peers:
                continue
            if verify_quietly(self.profile.peers[peer_id], body, sig):
                valid.add(peer_id)
        return frozenset(valid)

    def _execute(self, tx: Transaction) -> tuple[dict, Any]:
        writes: dict = {}
        ctx = ContractContext(self, tx.channel, tx.contract, tx.sender, writes, self._endorsers(tx))
        result = self.contract(tx.contract).dispatch(ctx, tx.method, tx.args)
        return writes, result

    def _apply_lifecycle(self, tx: Transaction) -> None:
        if tx.method != "create_channel" or len(tx.args) != 3:
            raise ValueError("bad lifecycle transaction")
        channel_id, members, threshold = tx.args
        policy_members = [m for m in members.split(",") if m]
        _create_channel(self.profile, channel_id, policy_members, int(threshold))

    def submit(self, tx: Transaction, now: int = 0) -> Receipt:
        with self._lock:
            reason = self._validate(tx)
            if reason is not None:
                return Receipt(False, None, reason, tx_id=tx.tx_id.b64())
            try:
                writes, result = self._execute(tx)
            except ToolkitError as exc:
                return Receipt(False, None, exc.reason, tx_id=tx.tx_id.b64())
            except (TypeError, ValueError) as exc:
                return Receipt(False, None, f"contract failure: {exc}", tx_id=tx.tx_id.b64())
            block = Block(self.height + 1, self.head.block_hash, (tx,), now)
            self.world_state.update(writes)
            self._append(block)
            return Receipt(True, block.height, "", result, tx.tx_id.b64())

    def query(self, contract: str, method: str, args: Sequence[str], channel: str = DEFAULT_CHANNEL,
              reader: str | None = None):
        """Run a read-only contract method without producing a block."""
        with self._lock:
            self.check_read(channel, reader)
            contract_obj = self.contract(contract)
            if method not in contract_obj.queries:
                raise ContractError(f"{method!r} is not a query", reason="not a query")
            ctx = ContractContext(self, channel, contract, b"", None)
            return contract_obj.dispatch(ctx, method, args)

    def check_read(self, channel: str, reader: str | None) -> None:
        if self.profile.kind == PERMISSIONLESS:
            if channel != DEFAULT_CHANNEL:
                raise UnknownChannel(channel)
            return
        if channel not in self.profile.channels:
            raise UnknownChannel(channel)
        if reader is None or reader not in self.profile.channels[channel]:
            raise AccessDenied(f"{reader!r} is not a member of channel {channel!r}")

    def read(self, channel: str, contract: str, key: str, reader: str | None = None) -> str | None:
        """Raw world-state read, gated by channel membership."""
        self.check_read(channel, reader)
        return self.world_state.get((channel, contract, key))


def _create_channel(profile: LedgerProfile, channel_id: str, members: Sequence[str], threshold: int) -> None:
    if profile.kind != PERMISSIONED:
        raise NotPermissioned("channels exist only on permissioned ledgers")
    if channel_id in profile.channels:
        raise DuplicateChannel(channel_id)
    unknown = set(members) - set(profile.peers)
    if unknown:
        raise UnknownPeer(f"unknown peers {sorted(unknown)}")
    if not 1 <= threshold <= len(members):
        raise BadPolicy(f"threshold {threshold} with {len(members)} peers")
    profile.channels[channel_id] = set(members)
    profile.policy[channel_id] = Policy(threshold, frozenset(members))


def init_ledger(profile: LedgerProfile, journal: str | os.PathLike | None = None) -> Ledger:
    profile.validate()
    ledger = Ledger(profile, journal)
    ledger._write_journal_header()
    ledger._append(Block(0, ZERO_DIGEST, ()))
    return ledger


def create_channel(ledger: Ledger, channel_id: str, members: Iterable[str], threshold: int) -> None:
    """Add a channel whose policy is ``threshold``-of-``members``.

    Recorded on chain as a ledger-internal lifecycle transaction so that
    journal replay rebuilds the same channel table.
    """
    members = sorted(set(members))
    with ledger._lock:
        _create_channel(ledger.profile, channel_id, members, threshold)
        tx = Transaction(b"", channel_id, LIFECYCLE, "create_channel",
                         (channel_id, ",".join(members), str(threshold)), ledger.next_nonce())
        ledger._append(Block(ledger.height + 1, ledger.head.block_hash, (tx,), ledger.head.timestamp))


def endorse(ledger: Ledger, peer_id: str, peer_key: KeyPair, tx: Transaction) -> tuple[str, bytes]:
    profile = ledger.profile
    if profile.kind != PERMISSIONED:
        raise NotPermissioned("endorsement requires a permissioned ledger")
    if peer_id not in profile.peers or profile.peers[peer_id] != peer_key.public_key:
        raise UnknownPeer(peer_id)
    policy = profile.policy.get(tx.channel)
    if policy is None:
        raise UnknownChannel(tx.channel)
    if peer_id not in policy.peers:
        raise NotInPolicy(f"{peer_id} is not in the policy for {tx.channel}")
    return peer_id, peer_key.sign(tx.body())


def invoke(
    ledger: Ledger,
    caller: KeyPair,
    contract: str,
    method: str,
    args: Sequence[str],
    *,
    channel: str = DEFAULT_CHANNEL,
    endorsers: Iterable[tuple[str, KeyPair]] = (),
    now: int = 0,
) -> Receipt:
    """Build, sign, endorse and submit a transaction in one step."""
    tx = make_transaction(caller, contract, method, args, ledger.next_nonce(), channel)
    if ledger.profile.kind == PERMISSIONED:
        tx = with_endorsements(tx, [endorse(ledger, pid, key, tx) for pid, key in endorsers])
    return ledger.submit(tx, now)


def _entry_bytes(entry: tuple[str, str, str, str]) -> bytes:
    out = bytearray()
    for part in entry:
        data = part.encode("utf-8")
        out += len(data).to_bytes(4, "big") + data
    return bytes(out)


def state_root(ledger: Ledger) -> Digest:
    """SHA-256 over the sorted world state, each entry as four length-prefixed
    strings (channel, contract, key, value)."""
    entries = sorted((c, k, key, v) for (c, k, key), v in ledger.world_state.items())
    return hash(b"".join(_entry_bytes(e) for e in entries))


def replay(profile: LedgerProfile, chain: Sequence[Block], journal: str | os.PathLike | None = None) -> Ledger:
    """Rebuild a ledger by re-validating and re-executing every block."""
    if not chain:
        raise BrokenChain("empty chain")
    genesis = chain[0]
    if genesis.height != 0 or genesis.prev_hash != ZERO_DIGEST or genesis.tx_list:
        raise BrokenChain("bad genesis block")
    ledger = init_ledger(copy.deepcopy(profile), journal)
    if ledger.head.block_hash != genesis.block_hash:
        raise BrokenChain("genesis hash mismatch")
    for block in chain[1:]:
        if block.height != ledger.height + 1:
            raise BrokenChain(f"height {block.height} follows {ledger.height}")
        if block.prev_hash != ledger.head.block_hash:
            raise BrokenChain(f"prev_hash mismatch at height {block.height}")
        if len(block.tx_list) != 1:
            raise BrokenChain(f"block {block.height} must carry exactly one transaction")
        tx = block.tx_list[0]
        if tx.contract == LIFECYCLE:
            if tx.sender or tx.sender_signature or tx.endorsements or tx.nonce != ledger.next_nonce():
                raise BrokenChain(f"malformed lifecycle transaction at height {block.height}")
            try:
                with ledger._lock:
                    ledger._apply_lifecycle(tx)
                    ledger._append(block)
            except (ToolkitError, ValueError) as exc:
                raise BrokenChain(f"lifecycle failure at height {block.height}: {exc}") from None
            continue
        receipt = ledger.submit(tx, block.timestamp)
        if not receipt.accepted:
            raise BrokenChain(f"transaction at height {block.height} rejected on replay: {receipt.reason}")
        if ledger.head.block_hash != block.block_hash:
            raise BrokenChain(f"block hash mismatch at height {block.height}")
    return ledger


# -- journal ----------------------------------------------------------------

def read_journal(path: str | os.PathLike) -> tuple[LedgerProfile, list[Block], bool]:
    """Parse a journal file into (profile, blocks, truncated).

    A final line without a newline terminator or that fails to parse is
    treated as a torn append and dropped; damage anywhere else is BrokenChain.
    """
    raw = Path(path).read_bytes()
    lines = raw.split(b"\n")
    truncated = False
    if lines and lines[-1] == b"":
        lines.pop()
    elif lines:
        lines.pop()
        truncated = True
    if not lines:
        raise BrokenChain("journal has no header")
    try:
        header = json.loads(lines[0].decode("utf-8"))
        if header.get("format") != JOURNAL_FORMAT or header.get("version") != JOURNAL_VERSION:
            raise ValueError("unsupported journal format")
        profile = LedgerProfile.from_json(header["profile"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise BrokenChain(f"bad journal header: {exc}") from None
    blocks = []
    for i, line in enumerate(lines[1:], start=1):
        try:
            blocks.append(Block.deserialize(line))
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            if i == len(lines) - 1 and not truncated:
                # torn final line that happened to end with a newline byte
                truncated = True
                break
            raise BrokenChain(f"journal line {i}: {exc}") from None
    return profile, blocks, truncated


def load_journal(path: str | os.PathLike, repair: bool = True) -> Ledger:
    """Replay a journal from disk, recovering from a torn final append."""
    path = Path(path)
    profile, blocks, truncated = read_journal(path)
    if truncated and repair:
        tmp = path.with_suffix(".recover")
        ledger = replay(profile, blocks, tmp)
        os.replace(tmp, path)
    else:
        ledger = replay(profile, blocks)
    ledger.journal = path
    return ledger


def decode_blocks(lines: Iterable[str | bytes]) -> list[Block]:
    """Deserialize stored blocks; any damage surfaces as BrokenChain."""
    out = []
    for i, line in enumerate(lines):
        try:
            out.append(Block.deserialize(line))
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            raise BrokenChain(f"block {i}: {exc}") from None
    return out
