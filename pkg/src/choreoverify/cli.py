"""Command-line front end.

Exit codes: 0 all checks pass, 1 violations, 2 usage or parse error,
3 only Unknown verdicts stand in the way.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import ExitStack
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .bench import LaneParams, gen_lanes, lanes_source
from .logic.checker import DEFAULT_DEPTH, query_hook
from .logic.smtlib import SexpError, validate_script
from .projection import ProjectionError, project
from .semantics import simulate
from .solver import DEFAULT_TIMEOUT, SmtDumper, SolverBridge
from .syntax.parser import ParseFailure, load_file
from .syntax.render import render_local
from .typecheck import type_session
from .wellformed import check_wellformed, compat_report

SCHEMA = 1
EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3


@dataclass
class RunConfig:
    subcommand: str
    inputs: list = field(default_factory=list)
    depth: int = DEFAULT_DEPTH
    dt: Fraction = Fraction(1, 100)
    seed: int = 0
    max_steps: int = 1000
    solver_cmd: str | None = None
    solver_timeout: float = DEFAULT_TIMEOUT
    output: str = "json"
    dump_smt: str | None = None
    unknown_ok: bool = False
    timing: bool = False


class UsageError(Exception):
    pass


def _fraction(text):
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text}")
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--depth", type=int, default=DEFAULT_DEPTH,
                        help="bisection depth of the internal checker")
    common.add_argument("--assume-unknown-valid", action="store_true",
                        help="treat Unknown verdicts as valid (report is marked unsound)")
    common.add_argument("--solver", default=os.environ.get("CHOREOVERIFY_SOLVER"),
                        help="external solver command for Unknown queries "
                             "(default: $CHOREOVERIFY_SOLVER)")
    common.add_argument("--solver-timeout", type=float, default=DEFAULT_TIMEOUT)
    common.add_argument("--dump-smt", metavar="DIR", help="write every validity query here")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--timing", action="store_true", help="include wall-clock times")

    ap = argparse.ArgumentParser(prog="choreoverify",
                                 description="Check and simulate motion choreographies.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("wf", parents=[common], help="well-formedness of the global type")
    p.add_argument("file")
    p = sub.add_parser("project", parents=[common], help="project the global type")
    p.add_argument("file")
    p.add_argument("participant", nargs="?", help="default: every participant")
    p = sub.add_parser("typecheck", parents=[common], help="type every process")
    p.add_argument("file")
    p = sub.add_parser("compat", parents=[common], help="compose every joint motion")
    p.add_argument("file")
    p = sub.add_parser("simulate", parents=[common], help="run the monitored interpreter")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=_fraction, default=Fraction(1, 100))
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--trace", metavar="FILE", help="write the trace as JSON lines")
    p = sub.add_parser("emit-smt", parents=[common],
                       help="write the wf and typing queries as .smt2 files")
    p.add_argument("file")
    p.add_argument("--out", required=True, metavar="DIR")
    p = sub.add_parser("bench", parents=[common], help="benchmark families")
    p.add_argument("family", choices=("lanes",))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--spacing", type=_fraction, default=Fraction(3))
    p.add_argument("--emit", metavar="FILE", help="also write the generated .mcc")
    return ap


def _config(args) -> RunConfig:
    inputs = [args.file] if hasattr(args, "file") else []
    return RunConfig(
        subcommand=args.subcommand, inputs=inputs, depth=args.depth,
        dt=getattr(args, "dt", Fraction(1, 100)), seed=getattr(args, "seed", 0),
        max_steps=getattr(args, "steps", 1000), solver_cmd=args.solver or None,
        solver_timeout=args.solver_timeout, output=args.format, dump_smt=args.dump_smt,
        unknown_ok=args.assume_unknown_valid, timing=args.timing)


FIXTURES = Path(__file__).parent / "fixtures"


def _load(path):
    p = Path(path)
    if not p.exists() and p.parts[:1] == ("fixtures",) and (FIXTURES / p.name).exists():
        p = FIXTURES / p.name   # shipped fixtures work from any directory
    try:
        return load_file(p)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


# -- subcommands: each returns (exit code, report dict, text lines) ---------

def _verdict_code(ok, only_unknown):
    if ok:
        return EXIT_OK
    return EXIT_UNKNOWN if only_unknown else EXIT_VIOLATION


def cmd_wf(cfg, args):
    r = check_wellformed(_load(args.file), cfg.depth, cfg.unknown_ok)
    lines = [f"{c}: {'ok' if not vs else 'FAIL'}" for c, vs in r.by_clause().items()]
    lines += [f"  {v.kind}: {v.message}" for v in r.violations]
    return _verdict_code(r.ok, r.only_unknown), r.to_json(), lines


def cmd_project(cfg, args):
    system = _load(args.file)
    names = [args.participant] if args.participant else list(system.participants)
    if args.participant and args.participant not in system.participants:
        raise UsageError(f"unknown participant {args.participant}")
    out, errors, lines = {}, [], []
    for r in names:
        try:
            text = render_local(project(system.global_type, r))
            out[r] = text
            lines.append(f"{r}: {text}" if len(names) > 1 else text)
        except ProjectionError as exc:
            errors.append(exc.to_json())
            lines.append(f"{r}: {exc}")
    code = EXIT_OK if not errors else EXIT_VIOLATION
    return code, {"local_types": out, "errors": errors}, lines


def cmd_typecheck(cfg, args):
    r = type_session(_load(args.file), depth=cfg.depth, unknown_ok=cfg.unknown_ok)
    rep = r.to_json()
    lines = [f"{p}: {row.get('verdict', {}).get('status', row) if isinstance(row, dict) else row}"
             for p, row in sorted(r.participants.items())]
    lines += [f"  {e}" for e in r.errors]
    return _verdict_code(r.ok, r.only_unknown), rep, lines


def cmd_compat(cfg, args):
    rows = compat_report(_load(args.file), cfg.depth, cfg.unknown_ok)
    bad = [r for r in rows.values() if not r["ok"]]
    only_unknown = bool(bad) and all(r["error"]["kind"] == "UnknownVerdict" for r in bad)
    lines = []
    for path, r in rows.items():
        what = " | ".join(r["executors"])
        lines.append(f"{'ok' if r['ok'] else r['error']['kind']}: {what}")
    return _verdict_code(not bad, only_unknown), {"motions": rows}, lines


def cmd_simulate(cfg, args):
    tr = simulate(_load(args.file), seed=cfg.seed, dt=cfg.dt, max_steps=cfg.max_steps)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for line in tr.lines():
                fh.write(line + "\n")
    rep = tr.summary()
    lines = [f"{tr.steps} steps, {len(tr.alarms)} alarm(s), digest {rep['digest'][:16]}"]
    lines += [f"  {a['kind']} at step {a.get('step')}" for a in tr.alarms]
    return (EXIT_OK if tr.ok else EXIT_VIOLATION), rep, lines


def cmd_emit_smt(cfg, args):
    system = _load(args.file)
    dumper = SmtDumper(args.out)
    with query_hook(dumper):
        wf = check_wellformed(system, cfg.depth, cfg.unknown_ok)
        ty = type_session(system, depth=cfg.depth, unknown_ok=cfg.unknown_ok)
    bad = []
    for path in dumper.written:
        try:
            validate_script(path.read_text())
        except SexpError as exc:
            bad.append({"file": path.name, "error": str(exc)})
    rep = {"files": [p.name for p in dumper.written], "reparse_errors": bad,
           "well_formed": wf.ok, "well_typed": ty.ok}
    lines = [f"wrote {len(dumper.written)} queries to {args.out}"]
    lines += [f"  cannot re-parse {b['file']}: {b['error']}" for b in bad]
    return (EXIT_OK if not bad else EXIT_VIOLATION), rep, lines


def cmd_bench(cfg, args):
    try:
        params = LaneParams(args.n, lane_spacing=args.spacing, check=False)
    except ValueError as exc:
        raise UsageError(str(exc))
    if args.emit:
        Path(args.emit).write_text(lanes_source(params))
    t0 = time.perf_counter()
    system = gen_lanes(params)
    t1 = time.perf_counter()
    wf = check_wellformed(system, cfg.depth, cfg.unknown_ok)
    t2 = time.perf_counter()
    rows = compat_report(system, cfg.depth, cfg.unknown_ok)
    t3 = time.perf_counter()
    compat_ok = all(r["ok"] for r in rows.values())
    rep = {"family": "lanes", "n": args.n, "spacing": str(params.lane_spacing),
           "well_formed": wf.ok, "violations": wf.kinds(), "compat_ok": compat_ok,
           "motions": len(rows)}
    timings = {"generate": t1 - t0, "wf": t2 - t1, "compat": t3 - t2, "wf+compat": t3 - t1}
    lines = [f"lanes n={args.n}: wf {'ok' if wf.ok else 'FAIL'}, compat {'ok' if compat_ok else 'FAIL'}"]
    if cfg.timing:
        rep["seconds"] = {k: round(v, 4) for k, v in timings.items()}
        lines.append(f"  wf+compat {timings['wf+compat']:.3f} s")
    return _verdict_code(wf.ok and compat_ok, wf.only_unknown), rep, lines


COMMANDS = {"wf": cmd_wf, "project": cmd_project, "typecheck": cmd_typecheck,
            "compat": cmd_compat, "simulate": cmd_simulate, "emit-smt": cmd_emit_smt,
            "bench": cmd_bench}


def run(argv=None, stdout=None, stderr=None):
    """Returns the exit code; the report goes to stdout, diagnostics to stderr."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    cfg = _config(args)
    started = time.perf_counter()
    with ExitStack() as stack:
        bridge = None
        if cfg.solver_cmd:
            bridge = stack.enter_context(query_hook(SolverBridge(cfg.solver_cmd, cfg.solver_timeout)))
        if cfg.dump_smt and cfg.subcommand != "emit-smt":
            stack.enter_context(query_hook(SmtDumper(cfg.dump_smt)))
        try:
            code, report, lines = COMMANDS[cfg.subcommand](cfg, args)
        except ParseFailure as exc:
            for d in exc.diagnostics:
                print(str(d), file=stderr)
            return EXIT_USAGE
        except UsageError as exc:
            print(f"choreoverify: {exc}", file=stderr)
            return EXIT_USAGE
    if cfg.output == "text":
        for line in lines:
            print(line, file=stdout)
        return code
    report = dict(report, schema=SCHEMA, command=cfg.subcommand)
    if cfg.inputs:
        report["input"] = cfg.inputs[0]
    if bridge is not None:
        report["solver"] = {"calls": bridge.calls, "upgraded": bridge.upgraded}
    if cfg.timing:
        report["elapsed_seconds"] = round(time.perf_counter() - started, 4)
    print(json.dumps(report, sort_keys=True, indent=2, default=str), file=stdout)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
