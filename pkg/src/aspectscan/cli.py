"""Command-line entry point: ``aspectscan analyze|dump-scfg|check|eval``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import library, metrics
from .engine import DEFAULT_MAX_LOOP_ITERS, analyze, program_order
from .errors import AspectScanError
from .frontend import list_procedures, parse_procedure
from .report import render_machine, render_report
from .sable import SableProgram, SourceAnnotation, parse_sable, parse_source_annotation
from .scfg import build_scfg

EXIT_CLEAN = 0
EXIT_ALARMS = 1
EXIT_ERROR = 2


class UsageError(AspectScanError):
    pass


def _with_context(exc: AspectScanError, prefix: str) -> AspectScanError:
    # keep the exception object (and its fields), only prefix the message
    exc.args = (f"{prefix}: {exc}",)
    return exc


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _qualifier(source: str, procedure: str) -> str:
    if ":" in procedure:
        return procedure
    return f"{Path(source).name}:{procedure}"


def _load_sable_files(paths) -> SableProgram:
    program = None
    for path in paths:
        try:
            part = parse_sable(_read(path))
        except AspectScanError as exc:
            raise _with_context(exc, str(path)) from None
        program = part if program is None else program.combined(part)
    return program


def _annotation_for(args, program: SableProgram) -> tuple:
    if args.annotation:
        return parse_source_annotation(_read(args.annotation)), Path(args.annotation).name
    # fall back to the path named in a sourceAnnotation declaration
    base = Path(args.sable[0]).parent if args.sable else Path(".")
    for t in program.traversals:
        if t.annotation_path:
            path = base / t.annotation_path
            return parse_source_annotation(_read(path)), path.name
    return SourceAnnotation(), ""


def cmd_analyze(args, out) -> int:
    if bool(args.sable) == bool(args.library_entry):
        raise UsageError("give either --sable or --library-entry")
    if args.sable:
        program = _load_sable_files(args.sable)
        definition_name = ", ".join(Path(p).name for p in args.sable)
    else:
        program = library.load_program(args.library_entry, args.library_dir)
        definition_name = library.entry_path(args.library_entry, args.library_dir).name
    annotation, annotation_name = _annotation_for(args, program)
    source_text = _read(args.source)
    procedures = args.procedure or list_procedures(source_text)
    results = []
    for proc in procedures:
        qualifier = _qualifier(args.source, proc)
        try:
            results.append(analyze(source_text, qualifier, program, annotation,
                                   annotation_name=annotation_name,
                                   definition_name=definition_name,
                                   max_loop_iters=args.max_loop_iters))
        except AspectScanError as exc:
            raise _with_context(exc, f"{args.source}, {qualifier}") from None
    if args.format == "machine":
        out.write(render_machine(results))
    else:
        out.write("".join(render_report(r) for r in results))
    return EXIT_ALARMS if any(r.alarms for r in results) else EXIT_CLEAN


def cmd_dump_scfg(args, out) -> int:
    source_text = _read(args.source)
    procedures = args.procedure or list_procedures(source_text)
    for proc in procedures:
        g = build_scfg(parse_procedure(source_text, _qualifier(args.source, proc)))
        out.write(g.to_dot() if args.dot else g.dump())
    return EXIT_CLEAN


def cmd_check(args, out) -> int:
    for path in args.files:
        program = _load_sable_files([path])
        try:
            order = program_order(program)
        except AspectScanError as exc:
            raise _with_context(exc, str(path)) from None
        out.write(f"{path}: ok; traversal order: {' -> '.join(order)}\n")
    return EXIT_CLEAN


def _pct(x: float) -> str:
    return "   n/a" if math.isnan(x) else f"{100 * x:5.1f}%"


def _table(doc: dict) -> str:
    head = f"{'id':<24} {'tp':>4} {'fn':>4} {'tn':>4} {'fp':>4}  {'sens':>6} {'spec':>6} {'prec':>6}"
    lines = [f"mode: {doc['mode']}", head]
    rows = doc["records"] + [{"id": "TOTAL", **doc["aggregate"]}]
    for r in rows:
        lines.append(f"{r['id']:<24} {r['tp']:>4} {r['fn']:>4} {r['tn']:>4} {r['fp']:>4}  "
                     f"{_pct(r['sensitivity'])} {_pct(r['specificity'])} {_pct(r['precision'])}")
    return "\n".join(lines) + "\n"


def _jsonable(value):
    # NaN is not valid JSON
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def cmd_eval(args, out) -> int:
    records = metrics.load_records(args.records)
    if not records:
        raise UsageError(f"no records found in {args.records}")
    doc = metrics.summary(records, args.mode)
    if args.compare:
        doc["comparison"] = metrics.compare(records, metrics.load_records(args.compare), args.mode)
    if args.format == "machine":
        out.write(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
        return EXIT_CLEAN
    out.write(_table(doc))
    for which, res in doc.get("comparison", {}).items():
        if res is None:
            out.write(f"{which}: no comparable records\n")
        else:
            out.write(f"{which}: R+ = {res['r_plus']:g}, R- = {res['r_minus']:g}, "
                      f"p = {res['p_value']:.4g}, E = {res['effect_size']:.4g} (n = {res['n']})\n")
    return EXIT_CLEAN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aspectscan",
                                     description="Static aspect analysis of Python procedures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run static-aspect definitions over procedures")
    p.add_argument("source")
    p.add_argument("--procedure", action="append",
                   help="procedure name or file:name qualifier (repeatable; default: all)")
    p.add_argument("--sable", nargs="+", help="definition file(s)")
    p.add_argument("--library-entry", help="name of a shipped definition")
    p.add_argument("--library-dir", help=f"library directory (default: ${library.ENV_VAR} or bundled)")
    p.add_argument("--annotation", help="source annotation JSON")
    p.add_argument("--max-loop-iters", type=int, default=DEFAULT_MAX_LOOP_ITERS)
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dump-scfg", help="print the symbolic control-flow graph")
    p.add_argument("source")
    p.add_argument("--procedure", action="append")
    p.add_argument("--dot", action="store_true", help="Graphviz output")
    p.set_defaults(func=cmd_dump_scfg)

    p = sub.add_parser("check", help="parse and validate definition files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", help="confusion matrices and metrics over evaluation records")
    p.add_argument("records", help="directory of record files")
    p.add_argument("--mode", choices=("strict", "relaxed"), default="strict")
    p.add_argument("--compare", help="second record directory for a paired Wilcoxon test")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if getattr(args, "max_loop_iters", 1) < 1:
        err.write("error: --max-loop-iters must be positive\n")
        return EXIT_ERROR
    try:
        return args.func(args, out)
    except AspectScanError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
