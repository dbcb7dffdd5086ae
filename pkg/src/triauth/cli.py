"""Command-line front end.

Exit codes: 0 success, 1 negative result (failed verification or a refused
operation), 2 usage error, 3 corrupt workspace file.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import workspace as ops
from .crypto import b64url_encode
from .errors import CorruptWorkspace, ToolkitError
from .ledger import DEFAULT_CHANNEL

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_CORRUPT = 0, 1, 2, 3


def _common(leaf: bool = False) -> argparse.ArgumentParser:
    # leaf copies use SUPPRESS so they never overwrite a value given before the subcommand
    d = (lambda v: argparse.SUPPRESS) if leaf else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--json", action="store_true", default=d(False), help="machine-readable output")
    p.add_argument("--now", type=int, default=d(None), help="clock override, epoch seconds")
    p.add_argument("--seed", type=int, default=d(None), help="seed for keys and random ids")
    p.add_argument("-w", "--workspace", default=d(None), help="workspace directory")
    return p


def _attrs(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise argparse.ArgumentTypeError(f"attribute {pair!r} is not label=value")
        k, v = pair.split("=", 1)
        out[k] = v
    return out


def _cert_fields(p):
    p.add_argument("--name", required=True)
    p.add_argument("--program", required=True)
    p.add_argument("--date", dest="graduation_date", required=True, help="YYYY-MM-DD")
    p.add_argument("--gpa", required=True, help="two decimals, e.g. 3.90")


def _ledger_target(p, write: bool):
    p.add_argument("--channel", default=DEFAULT_CHANNEL)
    if write:
        p.add_argument("--endorser", action="append", default=[], help="peer key id (repeatable)")
    else:
        p.add_argument("--reader", default=None, help="peer id for channel reads")


def build_parser() -> argparse.ArgumentParser:
    common = _common(leaf=True)
    parser = argparse.ArgumentParser(prog="triauth", parents=[_common()],
                                     description="Capability tokens, verifiable credentials and ledger contracts.")
    sub = parser.add_subparsers(dest="group", required=True)

    def leaf(parent, name, **kw):
        return parent.add_parser(name, parents=[common], **kw)

    p = leaf(sub, "keygen", help="create a key in the workspace keystore")
    p.add_argument("key_id")

    token = sub.add_parser("token", help="capability tokens").add_subparsers(dest="cmd", required=True)
    p = leaf(token, "issue")
    p.add_argument("--sub", required=True)
    p.add_argument("--scope", action="append", default=[], help="<read|write>:/path (repeatable)")
    p.add_argument("--ttl", type=int, default=None)
    p.add_argument("--aud", default=None)
    p.add_argument("--with-refresh", action="store_true")
    p = leaf(token, "verify")
    p.add_argument("token")
    p.add_argument("--aud", default=None)
    p = leaf(token, "refresh")
    p.add_argument("refresh_id")
    p = leaf(token, "revoke")
    p.add_argument("refresh_id")

    vc = sub.add_parser("vc", help="verifiable credentials").add_subparsers(dest="cmd", required=True)
    p = leaf(vc, "register-issuer")
    p.add_argument("issuer_id")
    p.add_argument("--key", required=True, help="issuer key id")
    p = leaf(vc, "issue")
    p.add_argument("--issuer", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--holder", required=True, help="holder key id")
    p.add_argument("--attr", action="append", default=[], help="label=value (repeatable)")
    p.add_argument("--valid-from", type=int, default=None)
    p.add_argument("--valid-until", type=int, default=None)
    p.add_argument("--out", default=None, help="write credential + openings here")
    p = leaf(vc, "present")
    p.add_argument("credential", help="file written by 'vc issue'")
    p.add_argument("--holder", required=True)
    p.add_argument("--disclose", action="append", default=[])
    p.add_argument("--challenge", required=True)
    p.add_argument("--out", default=None)
    p = leaf(vc, "verify")
    p.add_argument("presentation", help="presentation JSON file")
    p.add_argument("--challenge", required=True)
    p = leaf(vc, "revoke")
    p.add_argument("status_id")

    ledger = sub.add_parser("ledger", help="simulated ledger").add_subparsers(dest="cmd", required=True)
    p = leaf(ledger, "init")
    p.add_argument("--profile", choices=["permissionless", "permissioned"], default="permissionless")
    p.add_argument("--account", action="append", default=[])
    p.add_argument("--peer", action="append", default=[])
    p.add_argument("--threshold", type=int, default=2)
    p.add_argument("--channel", default=DEFAULT_CHANNEL)
    p.add_argument("--force", action="store_true")
    p = leaf(ledger, "submit")
    p.add_argument("--caller", required=True)
    p.add_argument("--contract", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--arg", action="append", default=[])
    _ledger_target(p, write=True)
    leaf(ledger, "replay")
    leaf(ledger, "root")

    cert = sub.add_parser("cert", help="certificate contract").add_subparsers(dest="cmd", required=True)
    p = leaf(cert, "issue")
    p.add_argument("--caller", default=None, help="key id (default: config owner_key)")
    _cert_fields(p)
    _ledger_target(p, write=True)
    p = leaf(cert, "verify")
    p.add_argument("certificate_id")
    _cert_fields(p)
    _ledger_target(p, write=False)
    p = leaf(cert, "revoke")
    p.add_argument("certificate_id")
    p.add_argument("--caller", default=None)
    _ledger_target(p, write=True)

    br = sub.add_parser("bridge", help="JWT credentials backed by the contract").add_subparsers(
        dest="cmd", required=True)
    p = leaf(br, "issue")
    p.add_argument("--caller", default=None)
    p.add_argument("--issuer-key", default=None)
    p.add_argument("--issuer-id", default="")
    _cert_fields(p)
    _ledger_target(p, write=True)
    p = leaf(br, "verify")
    p.add_argument("jwt")
    p.add_argument("--issuer-key", default=None)
    _ledger_target(p, write=False)

    harness = sub.add_parser("harness", help="comparison matrix").add_subparsers(dest="cmd", required=True)
    p = leaf(harness, "run")
    p.add_argument("--out", default=".", help="directory for matrix.json / matrix.txt / matrix.png")
    p.add_argument("--no-figure", action="store_true")

    p = leaf(sub, "serve", help="HTTP issuer/verifier")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _now(args) -> int:
    return args.now if args.now is not None else int(time.time())


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ToolkitError(f"no such file: {path}", reason="missing file") from None
    except ValueError as exc:
        raise ToolkitError(f"{path}: {exc}", reason="malformed") from None


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def dispatch(args, ws: ops.Workspace) -> dict:
    g, c = args.group, getattr(args, "cmd", None)
    now = _now(args)
    owner = ws.config["owner_key"]
    if g == "keygen":
        key = ws.key(args.key_id)
        return {"key_id": key.key_id, "public_key": b64url_encode(key.public_key)}
    if g == "token":
        if c == "issue":
            return ops.token_issue(ws, args.sub, args.scope, now, args.ttl, args.aud, args.with_refresh)
        if c == "verify":
            return ops.token_verify(ws, args.token, now, args.aud)
        if c == "refresh":
            return ops.token_refresh(ws, args.refresh_id, now)
        return ops.token_revoke(ws, args.refresh_id)
    if g == "vc":
        if c == "register-issuer":
            return ops.vc_register_issuer(ws, args.issuer_id, args.key)
        if c == "issue":
            start = args.valid_from if args.valid_from is not None else now
            end = args.valid_until if args.valid_until is not None else start + 365 * 86_400
            doc = ops.vc_issue(ws, args.issuer, args.key, args.holder, _attrs(args.attr), start, end)
            if args.out:
                _write_json(args.out, doc)
            return doc
        if c == "present":
            doc = ops.vc_present(ws, _read_json(args.credential), args.holder, args.disclose, args.challenge)
            if args.out:
                _write_json(args.out, doc)
            return doc
        if c == "verify":
            return ops.vc_verify(ws, _read_json(args.presentation), args.challenge, now)
        return ops.vc_revoke(ws, args.status_id)
    if g == "ledger":
        if c == "init":
            return ops.ledger_init(ws, args.profile, args.account, args.peer, args.threshold, args.channel,
                                   args.force)
        if c == "submit":
            return ops.ledger_submit(ws, args.caller, args.contract, args.method, args.arg, args.channel,
                                     args.endorser, now)
        if c == "replay":
            return ops.ledger_replay(ws)
        return ops.ledger_root(ws)
    if g == "cert":
        fields = lambda: (args.name, args.program, args.graduation_date, args.gpa)  # noqa: E731
        if c == "issue":
            return ops.cert_issue(ws, args.caller or owner, *fields(), args.channel, args.endorser, now)
        if c == "verify":
            return ops.cert_verify(ws, args.certificate_id, *fields(), args.channel, args.reader)
        return ops.cert_revoke(ws, args.caller or owner, args.certificate_id, args.channel, args.endorser, now)
    if g == "bridge":
        issuer_key = args.issuer_key or ws.config["issuer_key"]
        if c == "issue":
            attrs = {"name": args.name, "program": args.program,
                     "graduation_date": args.graduation_date, "gpa": args.gpa}
            return ops.bridge_issue(ws, args.caller or owner, issuer_key, attrs, args.issuer_id,
                                    args.channel, args.endorser, now)
        return ops.bridge_verify(ws, args.jwt, issuer_key, args.channel, args.reader)
    raise AssertionError(f"unhandled command {g} {c}")


def _render(result: dict) -> str:
    if "valid" in result:
        if result["valid"]:
            return "valid"
        return "invalid: " + ", ".join(result["reasons"])
    if "accepted" in result and not result["accepted"]:
        return f"rejected: {result['reason']}"
    return "\n".join(f"{k}: {v}" for k, v in result.items())


def _negative(result: dict) -> bool:
    return result.get("valid") is False or result.get("accepted") is False


def run_harness(args) -> int:
    from .harness import run_matrix, write_outputs

    seed = args.seed if args.seed is not None else 0
    matrix = run_matrix(seed)
    paths = write_outputs(matrix, args.out, figure=not args.no_figure)
    summary = matrix.to_json()["summary"]
    if args.json:
        print(json.dumps({**summary, "outputs": {k: str(v) for k, v in paths.items()}}))
    else:
        print(matrix.to_text(), end="")
    return EXIT_OK if matrix.all_match else EXIT_NEGATIVE


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.group == "harness":
            return run_harness(args)
        ws = ops.Workspace(args.workspace or ".", seed=args.seed)
        if args.group == "serve":
            from .service import serve

            serve(ws, args.host, args.port)
            return EXIT_OK
        result = dispatch(args, ws)
    except CorruptWorkspace as exc:
        _emit_error(args, exc.reason, str(exc))
        return EXIT_CORRUPT
    except argparse.ArgumentTypeError as exc:
        print(f"triauth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ToolkitError as exc:
        _emit_error(args, exc.reason, str(exc))
        return EXIT_NEGATIVE
    except ValueError as exc:
        print(f"triauth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(result, ensure_ascii=False) if args.json else _render(result))
    return EXIT_NEGATIVE if _negative(result) else EXIT_OK


def _emit_error(args, reason: str, message: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps({"error": reason, "message": message}))
    else:
        print(f"error: {reason}: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
