"""Single-field mutations of a selective-disclosure presentation."""

import dataclasses

from conftest import seeded
from triauth import vcred


def presentation_mutations(pres: vcred.Presentation):
    """Every single-field mutation of a presentation."""
    cred = pres.credential
    flip = lambda b: bytes([b[0] ^ 1]) + b[1:]  # noqa: E731
    for i, (label, value, salt) in enumerate(pres.disclosed):
        d = list(pres.disclosed)
        d[i] = (label, value + "x", salt)
        yield f"value[{label}]", dataclasses.replace(pres, disclosed=tuple(d))
        d = list(pres.disclosed)
        d[i] = (label, value, flip(salt))
        yield f"salt[{label}]", dataclasses.replace(pres, disclosed=tuple(d))
        d = list(pres.disclosed)
        d[i] = (label + "x", value, salt)
        yield f"label[{label}]", dataclasses.replace(pres, disclosed=tuple(d))
    for i in range(len(cred.commitments)):
        cs = list(cred.commitments)
        cs[i] = vcred.Digest(flip(cs[i]))
        yield f"commitment[{i}]", dataclasses.replace(pres, credential=dataclasses.replace(cred, commitments=tuple(cs)))
    for name in ("valid_from", "valid_until"):
        changed = dataclasses.replace(cred, **{name: getattr(cred, name) - 1})
        yield name, dataclasses.replace(pres, credential=changed)
    for name in ("id", "issuer_id", "status_id"):
        changed = dataclasses.replace(cred, **{name: getattr(cred, name) + "x"})
        yield name, dataclasses.replace(pres, credential=changed)
    yield "holder_public_key", dataclasses.replace(
        pres, credential=dataclasses.replace(cred, holder_public_key=seeded("thief").public_key))
    yield "issuer_signature", dataclasses.replace(
        pres, credential=dataclasses.replace(cred, issuer_signature=flip(cred.issuer_signature)))
    yield "challenge", dataclasses.replace(pres, challenge=pres.challenge + "x")
    yield "holder_signature", dataclasses.replace(pres, holder_signature=flip(pres.holder_signature))
