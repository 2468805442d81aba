"""Command-line entry point: ``evolvekit <subcommand> ...``.

Exit codes: 0 ok, 1 usage, 2 validation/constraint failure, 3 migration
failure, 4 merge conflicts.  Reports go to stdout; model outputs are written
atomically so a failed run never leaves a truncated file behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Callable

from .constraints import evaluate_suite, parse_constraints, render_report
from .diffmerge import diff_models, match_models, merge3
from .errors import EvolveError
from .mcl import lint_delta, migrate_model, parse_mcl
from .model import Metamodel, check_conformance, load_metamodel, load_model, save_model
from .refactor import flatten_statechart, pull_up, push_down
from .ummie import load_rulegraph, migrate_rules, save_rulegraph

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_MIGRATION, EXIT_CONFLICT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def write_atomic(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load(loader: Callable, path: str, fail: int):
    try:
        return loader(_read(path))
    except EvolveError as exc:
        raise _Fail(fail, f"{path}: {exc}") from None


def _text(path: str) -> str:
    data = _read(path)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        raise UsageError(f"{path}: not UTF-8") from None


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _same_mm(mm: Metamodel, *models) -> None:
    for m in models:
        if m.metamodel_name != mm.name:
            raise _Fail(EXIT_INVALID, f"model is an instance of {m.metamodel_name}, not {mm.name}")


def cmd_validate(args, out) -> int:
    mm = _load(load_metamodel, args.metamodel, EXIT_INVALID)
    model = _load(load_model, args.model, EXIT_INVALID)
    report = check_conformance(model, mm)
    out.write(json.dumps(report.to_data(), indent=2) + "\n" if args.format == "json" else report.render())
    return EXIT_OK if report.conformant else EXIT_INVALID


def cmd_check(args, out) -> int:
    mm = _load(load_metamodel, args.metamodel, EXIT_INVALID)
    model = _load(load_model, args.model, EXIT_INVALID)
    try:
        _, suite = parse_constraints(_text(args.constraints), mm)
    except EvolveError as exc:
        raise _Fail(EXIT_INVALID, f"{args.constraints}: {exc}") from None
    report = evaluate_suite(suite, model, mm, args.phase)
    out.write(render_report(report, args.format))
    return EXIT_OK if report.valid else EXIT_INVALID


def cmd_diff(args, out) -> int:
    mm = _load(load_metamodel, args.metamodel, EXIT_INVALID)
    left = _load(load_model, args.left, EXIT_INVALID)
    right = _load(load_model, args.right, EXIT_INVALID)
    _same_mm(mm, left, right)
    report = diff_models(left, right, match_models(left, right))
    out.write(report.render(args.format))
    return EXIT_OK


def cmd_merge(args, out) -> int:
    mm = _load(load_metamodel, args.metamodel, EXIT_INVALID)
    base, left, right = (_load(load_model, p, EXIT_INVALID) for p in (args.base, args.left, args.right))
    _same_mm(mm, base, left, right)
    result = merge3(base, left, right)
    write_atomic(args.out, save_model(result.merged))
    out.write(result.render(args.format))
    return EXIT_CONFLICT if result.conflicts else EXIT_OK


def cmd_migrate(args, out) -> int:
    mm_src = _load(load_metamodel, args.src, EXIT_MIGRATION)
    mm_dst = _load(load_metamodel, args.dst, EXIT_MIGRATION)
    model = _load(load_model, args.model, EXIT_MIGRATION)
    try:
        spec = parse_mcl(_text(args.delta), mm_src, mm_dst)
    except EvolveError as exc:
        raise _Fail(EXIT_MIGRATION, f"{args.delta}: {exc}") from None
    if args.policy:
        spec = replace(spec, identity_for_unmapped=args.policy == "identity")
    lint = lint_delta(spec, mm_src, mm_dst)
    lint_lines = [f"lint {e.severity} {e.code} {e.subject}: {e.message}" for e in lint.entries]
    if lint.errors or (args.strict and lint.entries):
        out.write("\n".join(lint_lines) + "\n")
        return EXIT_MIGRATION
    try:
        migrated, report = migrate_model(model, spec, mm_src, mm_dst)
    except EvolveError as exc:
        out.write("\n".join(lint_lines + [str(exc)]) + "\n")
        conf = (exc.details or {}).get("conformance") if isinstance(exc.details, dict) else None
        if conf is not None:
            out.write(conf.render())
        return EXIT_MIGRATION
    if args.format == "json":
        data = report.to_data()
        data["lint"] = [{"severity": e.severity, "code": e.code, "subject": e.subject,
                         "message": e.message} for e in lint.entries]
        out.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    else:
        out.write("".join(line + "\n" for line in lint_lines) + report.render())
    if args.strict and report.warnings:
        return EXIT_MIGRATION
    write_atomic(args.out, save_model(migrated))
    return EXIT_OK


def cmd_migrate_rules(args, out) -> int:
    mm_src = _load(load_metamodel, args.src, EXIT_MIGRATION)
    mm_evolved = _load(load_metamodel, args.dst, EXIT_MIGRATION)
    mm_dest = _load(load_metamodel, args.dest, EXIT_MIGRATION)
    rules = _load(load_rulegraph, args.rules, EXIT_MIGRATION)
    try:
        spec = parse_mcl(_text(args.delta), mm_src, mm_evolved)
        migrated, warnings = migrate_rules(rules, spec, mm_src, mm_evolved, mm_dest)
    except EvolveError as exc:
        raise _Fail(EXIT_MIGRATION, str(exc)) from None
    write_atomic(args.out, save_rulegraph(migrated))
    out.write(warnings.render(args.format))
    return EXIT_OK


def cmd_refactor(args, out) -> int:
    model = _load(load_model, args.model, EXIT_INVALID)
    try:
        if args.action == "push-down":
            if not (args.component and args.container):
                raise UsageError("push-down needs --component and --container")
            result = push_down(model, args.component, args.container)
        elif args.action == "pull-up":
            if not args.component:
                raise UsageError("pull-up needs --component")
            result = pull_up(model, args.component)
        else:
            result = flatten_statechart(model)
    except EvolveError as exc:
        raise _Fail(EXIT_INVALID, str(exc)) from None
    write_atomic(args.out, save_model(result))
    summary = {"action": args.action, "objects": len(result.objects), "links": len(result.links)}
    out.write(json.dumps(summary, sort_keys=True) + "\n" if args.format == "json"
              else f"{args.action}: {summary['objects']} objects, {summary['links']} links\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt_default = os.environ.get("EVOLVEKIT_FORMAT", "text")
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json"),
                        default=fmt_default if fmt_default in ("text", "json") else "text")
    p = _Parser(prog="evolvekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="check a model against its metamodel")
    s.add_argument("--metamodel", required=True)
    s.add_argument("--model", required=True)
    s.set_defaults(run=cmd_validate)

    s = sub.add_parser("check", parents=[common], help="evaluate a constraint suite")
    s.add_argument("--metamodel", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--constraints", required=True)
    s.add_argument("--phase")
    s.set_defaults(run=cmd_check)

    s = sub.add_parser("diff", parents=[common], help="match and diff two models")
    s.add_argument("--metamodel", required=True)
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.set_defaults(run=cmd_diff)

    s = sub.add_parser("merge", parents=[common], help="three-way merge")
    for flag in ("--metamodel", "--base", "--left", "--right", "--out"):
        s.add_argument(flag, required=True)
    s.set_defaults(run=cmd_merge)

    s = sub.add_parser("migrate", parents=[common], help="migrate a model along a delta")
    s.add_argument("--from", dest="src", required=True)
    s.add_argument("--to", dest="dst", required=True)
    for flag in ("--delta", "--model", "--out"):
        s.add_argument(flag, required=True)
    s.add_argument("--strict", action="store_true", help="treat warnings as errors")
    s.add_argument("--policy", choices=("identity", "noidentity"))
    s.set_defaults(run=cmd_migrate)

    s = sub.add_parser("migrate-rules", parents=[common], help="migrate a transformation rule graph")
    s.add_argument("--from", dest="src", required=True)
    s.add_argument("--to", dest="dst", required=True)
    for flag in ("--delta", "--dest", "--rules", "--out"):
        s.add_argument(flag, required=True)
    s.set_defaults(run=cmd_migrate_rules)

    s = sub.add_parser("refactor", parents=[common], help="push-down, pull-up or flatten")
    s.add_argument("action", choices=("push-down", "pull-up", "flatten"))
    s.add_argument("--model", required=True)
    s.add_argument("--component")
    s.add_argument("--container")
    s.add_argument("--out", required=True)
    s.set_defaults(run=cmd_refactor)
    return p


def run(argv: list[str], out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.run(args, out)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except _Fail as exc:
        err.write(f"error: {exc}\n")
        return exc.code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
