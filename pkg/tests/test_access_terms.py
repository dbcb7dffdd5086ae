import pytest

from conftest import T0
from triauth import access_terms as at
from triauth import ledger as lg


@pytest.fixture
def led(owner, stranger):
    ledger = lg.init_ledger(lg.LedgerProfile.permissionless([owner.public_key, stranger.public_key]))
    assert lg.invoke(ledger, owner, at.CONTRACT_ID, "init", []).accepted
    return ledger


def test_window_and_scope(led, owner):
    assert at.grant(led, owner, "alice", "write:/data", T0, T0 + 100).accepted
    assert at.check_access(led, "alice", "read", "/data/x", T0)
    assert at.check_access(led, "alice", "write", "/data", T0 + 99)
    assert not at.check_access(led, "alice", "write", "/data", T0 + 100)
    assert not at.check_access(led, "alice", "write", "/data", T0 - 1)
    assert not at.check_access(led, "alice", "read", "/database", T0)
    assert not at.check_access(led, "bob", "read", "/data", T0)


def test_read_does_not_grant_write(led, owner):
    at.grant(led, owner, "alice", "read:/data", T0, T0 + 100)
    assert not at.check_access(led, "alice", "write", "/data", T0)


def test_revoke_grant(led, owner):
    at.grant(led, owner, "alice", "read:/data", T0, T0 + 100)
    assert lg.invoke(led, owner, at.CONTRACT_ID, "revoke_grant", ["alice", "read:/data"]).accepted
    assert not at.check_access(led, "alice", "read", "/data", T0)


def test_rejections(led, owner, stranger):
    assert at.grant(led, stranger, "alice", "read:/data", T0, T0 + 1).reason == "not owner"
    assert at.grant(led, owner, "alice", "read:/data", T0, T0).reason == "bad validity"
    assert not at.grant(led, owner, "alice", "delete:/data", T0, T0 + 1).accepted
    assert not at.check_access(led, "alice", "read", "/data", T0)
