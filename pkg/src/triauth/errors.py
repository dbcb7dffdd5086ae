"""Exception hierarchy shared by every mechanism.

Each error carries a short machine ``reason`` string. Verification paths that
report failures instead of raising reuse the same strings in their ``reasons``
lists, so CLI, HTTP and library callers see one vocabulary.
"""


class ToolkitError(Exception):
    reason = "error"

    def __init__(self, message: str = "", *, reason: str | None = None):
        if reason is not None:
            self.reason = reason
        super().__init__(message or self.reason)


# crypto-core
class EmptyRecord(ToolkitError):
    reason = "empty record"


class BadSeedLength(ToolkitError):
    reason = "bad seed length"


class MalformedKey(ToolkitError):
    reason = "malformed key"


class MalformedSignature(ToolkitError):
    reason = "malformed signature"


class DuplicateKeyId(ToolkitError):
    reason = "duplicate key id"


class UnknownKeyId(ToolkitError):
    reason = "unknown key id"


# tokens
class BadScope(ToolkitError):
    reason = "bad scope"


class TtlTooLong(ToolkitError):
    reason = "ttl too long"


class Malformed(ToolkitError):
    reason = "malformed"


class BadSignature(ToolkitError):
    reason = "bad signature"


class Expired(ToolkitError):
    reason = "expired"


class NotYetValid(ToolkitError):
    reason = "not yet valid"


class AudienceMismatch(ToolkitError):
    reason = "audience mismatch"


class UnknownRefreshToken(ToolkitError):
    reason = "unknown refresh token"


class RevokedToken(ToolkitError):
    reason = "revoked"


# credentials
class DuplicateIssuer(ToolkitError):
    reason = "duplicate issuer"


class UnknownIssuer(ToolkitError):
    reason = "unknown issuer"


class EmptyAttributes(ToolkitError):
    reason = "empty attributes"


class BadValidity(ToolkitError):
    reason = "bad validity"


class UnknownLabel(ToolkitError):
    reason = "unknown label"


class WrongHolderKey(ToolkitError):
    reason = "wrong holder key"


class UnknownStatusId(ToolkitError):
    reason = "unknown status id"


# ledger
class BadPolicy(ToolkitError):
    reason = "bad policy"


class NotPermissioned(ToolkitError):
    reason = "not permissioned"


class UnknownPeer(ToolkitError):
    reason = "unknown peer"


class DuplicateChannel(ToolkitError):
    reason = "duplicate channel"


class UnknownChannel(ToolkitError):
    reason = "unknown channel"


class NotInPolicy(ToolkitError):
    reason = "not in policy"


class AccessDenied(ToolkitError):
    reason = "access denied"


class BrokenChain(ToolkitError):
    reason = "broken chain"


class ContractError(ToolkitError):
    """Raised inside contract code; aborts the transaction."""


# contracts
class NotOwner(ContractError):
    reason = "not owner"


class InsufficientEndorsements(ContractError):
    reason = "insufficient endorsements"


class DuplicateCertificate(ContractError):
    reason = "duplicate certificate"


class BadGpa(ContractError):
    reason = "bad gpa"


class EmptyField(ContractError):
    reason = "empty field"


class BadDate(ContractError):
    reason = "bad date"


class UnknownCertificate(ContractError):
    reason = "unknown certificate"


class UnknownToken(ContractError):
    reason = "unknown token"


class SigningFailure(ToolkitError):
    reason = "signing failure"


class ScenarioPanic(ToolkitError):
    reason = "scenario panic"


class CorruptWorkspace(ToolkitError):
    reason = "corrupt workspace"


def error_for_reason(reason: str, base: type[ToolkitError] = ToolkitError) -> type[ToolkitError]:
    """Map a reason string back to its exception class under ``base``."""
    stack = [base]
    while stack:
        cls = stack.pop()
        if cls.__dict__.get("reason") == reason and cls is not base:
            return cls
        stack.extend(cls.__subclasses__())
    return base
