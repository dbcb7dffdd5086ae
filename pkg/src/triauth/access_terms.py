"""Resource-access contract: time-bounded path grants held on the ledger.

Used to exercise contract-side validity periods and resource authorization
with the same scope grammar as the capability tokens.
"""

from __future__ import annotations

from .crypto import KeyPair, b64url_encode
from .errors import ContractError, NotOwner
from .ledger import DEFAULT_CHANNEL, PERMISSIONLESS, Contract, Ledger, invoke, register_contract
from .scitokens import parse_scope, path_covers

CONTRACT_ID = "resource-access"


@register_contract
class ResourceAccessContract(Contract):
    contract_id = CONTRACT_ID
    methods = ("init", "grant", "revoke_grant")
    queries = ("check",)

    def _owner_only(self, ctx):
        if ctx.profile_kind == PERMISSIONLESS and ctx.get("owner") != b64url_encode(ctx.sender):
            raise NotOwner("only the contract owner may change grants")

    def init(self, ctx):
        if ctx.get("owner") is not None:
            raise ContractError("already initialized", reason="already initialized")
        ctx.put("owner", b64url_encode(ctx.sender))

    def grant(self, ctx, party, scope, valid_from, valid_until):
        self._owner_only(ctx)
        parse_scope(scope)
        if int(valid_from) >= int(valid_until):
            raise ContractError("empty validity window", reason="bad validity")
        grants = ctx.get_json(f"grants:{party}", {})
        grants[scope] = [int(valid_from), int(valid_until)]
        ctx.put_json(f"grants:{party}", grants)

    def revoke_grant(self, ctx, party, scope):
        self._owner_only(ctx)
        grants = ctx.get_json(f"grants:{party}", {})
        grants.pop(scope, None)
        ctx.put_json(f"grants:{party}", grants)

    def check(self, ctx, party, action, path, now):
        now = int(now)
        for scope, (start, end) in ctx.get_json(f"grants:{party}", {}).items():
            granted_action, granted_path = parse_scope(scope)
            if not start <= now < end:
                continue
            if granted_action == action or (granted_action == "write" and action == "read"):
                if path_covers(granted_path, path):
                    return True
        return False


def check_access(ledger: Ledger, party: str, action: str, path: str, now: int,
                 *, channel: str = DEFAULT_CHANNEL, reader: str | None = None) -> bool:
    return ledger.query(CONTRACT_ID, "check", [party, action, path, str(now)], channel, reader)


def grant(ledger: Ledger, caller: KeyPair, party: str, scope: str, valid_from: int, valid_until: int, **kw):
    return invoke(ledger, caller, CONTRACT_ID, "grant", [party, scope, str(valid_from), str(valid_until)], **kw)
