import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from triauth import certificate, crypto, scitokens, vcred  # noqa: E402
from triauth.ledger import LedgerProfile, init_ledger  # noqa: E402

T0 = 1_700_000_000
ALICE = ("Alice", "CS", "2023-05-15", "3.90")


def seeded(name: str) -> crypto.KeyPair:
    return crypto.keygen(crypto.derive_seed("tests", name), key_id=name)


@pytest.fixture
def issuer_key():
    return seeded("issuer")


@pytest.fixture
def issuer(issuer_key):
    return scitokens.IssuerConfig("https://issuer.example", issuer_key)


@pytest.fixture
def owner():
    return seeded("owner")


@pytest.fixture
def stranger():
    return seeded("stranger")


@pytest.fixture
def public_ledger(owner, stranger):
    led = init_ledger(LedgerProfile.permissionless([owner.public_key, stranger.public_key]))
    certificate.deploy(led, owner)
    return led


@pytest.fixture
def peers():
    return {p: seeded(p) for p in ("p1", "p2", "p3")}


@pytest.fixture
def private_ledger(peers):
    profile = LedgerProfile.permissioned(
        {p: k.public_key for p, k in peers.items()}, {"main": list(peers)}, {"main": (2, list(peers))})
    return init_ledger(profile)


@pytest.fixture
def registry(issuer_key):
    reg = vcred.InMemoryRegistry()
    reg.register_issuer("uni:ksu", issuer_key.public_key)
    return reg


@pytest.fixture
def holder():
    return seeded("holder")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    lines = list(module.RESULTS)
    recorded = {line.split()[1] for line in lines}
    for report in terminalreporter.stats.get("failed", []):
        name = report.nodeid.rsplit("::", 1)[-1]
        if report.nodeid.startswith("tests/test_acceptance.py") and name.split("_")[2] not in recorded:
            lines.append(f"criterion {name.split('_')[2]} FAIL: {name} raised before reporting")
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
