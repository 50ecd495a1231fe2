"""``plan2bn`` command line.

    plan2bn validate  recon.plan
    plan2bn compile   recon.plan --overlay recon_overlay.json
    plan2bn dump-dot  recon.plan --no-evidence-vars
    plan2bn recognize recon.plan --overlay recon_overlay.json --obs bound.obsl

Exit status: 0 on success, 1 on validation / compile / observation errors,
2 on usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import TextIO

from .bayes_net import to_dot
from .compiler import (CompileError, CompileOptions, CptOverlay, compile_library,
                       dump_network)
from .plan_model import PlanSyntaxError, parse_plan_file, validate_library
from .recognition import RecognitionError, new_session, read_observations

COMMANDS = ("compile", "recognize", "dump-dot", "validate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="plan2bn",
                description="Compile procedural plans into belief networks "
                            "and run plan recognition over observations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("plan_file")
    p.add_argument("--overlay", help="CPT overlay JSON")
    p.add_argument("--obs", help="observation stream (JSON lines), for recognize")
    p.add_argument("--track", action="append", metavar="GOAL",
                   help="goal to report on (repeatable; default: top-level goals)")
    p.add_argument("--no-temporal-arcs", action="store_true")
    p.add_argument("--no-evidence-vars", action="store_true")
    p.add_argument("--no-or-inhibition", action="store_true")
    p.add_argument("--no-goal-inhibition", action="store_true")
    p.add_argument("--output", choices=("json", "table"))
    p.add_argument("--out", help="write output here instead of stdout")
    return p


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: cannot read {what}: {exc}") from None


def _options(args) -> CompileOptions:
    return CompileOptions(
        explicit_evidence_vars=not args.no_evidence_vars,
        temporal_arcs=not args.no_temporal_arcs,
        or_branch_inhibition=not args.no_or_inhibition,
        top_level_inhibition=not args.no_goal_inhibition,
    )


def _network_table(net, vmap) -> str:
    rows = [("variable", "role", "domain", "parents")]
    for var in net.variables.values():
        rows.append((var.name, vmap.role(var.name), "|".join(var.domain),
                     ", ".join(var.parents) or "-"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths + [0])).rstrip()
                   + "\n" for r in rows)


def _execute(args, out: list[str], err: TextIO) -> int:
    if args.command == "recognize" and not args.obs:
        raise UsageError("recognize requires --obs")
    text = _read(args.plan_file, "plan file")
    overlay_text = _read(args.overlay, "overlay") if args.overlay else None
    obs_text = _read(args.obs, "observations") if args.obs else None

    try:
        lib = parse_plan_file(text)
    except PlanSyntaxError as exc:
        print(f"{args.plan_file}:{exc.line}:{exc.column}: {exc.reason}"
              + (f" (expected {', '.join(exc.expected)})" if exc.expected else ""),
              file=err)
        return 1

    report = validate_library(lib)
    if args.command == "validate":
        if (args.output or "table") == "json":
            out.append(report.to_json() + "\n")
        else:
            for d in report.errors + report.warnings:
                out.append(f"{args.plan_file}: {d.code} at {d.location}: "
                           f"{d.message}\n")
            out.append(f"{len(report.errors)} errors, "
                       f"{len(report.warnings)} warnings\n")
        return 1 if report.errors else 0
    for d in report.errors:
        print(f"{args.plan_file}: {d.code} at {d.location}: {d.message}", file=err)
    if report.errors:
        return 1

    try:
        overlay = None
        if overlay_text is not None:
            overlay = CptOverlay.from_dict(json.loads(overlay_text))
        net, vmap = compile_library(lib, overlay, _options(args))
    except (CompileError, ValueError, TypeError) as exc:
        print(f"{args.overlay or args.plan_file}: {exc}", file=err)
        return 1

    if args.command == "compile":
        if args.output == "table":
            out.append(_network_table(net, vmap))
        else:
            out.append(dump_network(net, vmap))
        return 0
    if args.command == "dump-dot":
        out.append(to_dot(net, Path(args.plan_file).stem))
        return 0

    try:
        observations = read_observations(obs_text)
    except ValueError as exc:
        print(f"{args.obs}: {exc}", file=err)
        return 1
    try:
        session = new_session(net, vmap, args.track)
    except RecognitionError as exc:
        print(f"--track: {exc}", file=err)
        return 1
    for obs in observations:
        try:
            report = session.observe(obs)
        except RecognitionError as exc:
            print(f"{args.obs}: t={obs.t}: {exc}", file=err)
            return 1
        out.append(report.to_table() if args.output == "table"
                   else report.to_json() + "\n")
    return 0


def run(argv=None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    out: list[str] = []
    try:
        args = build_parser().parse_args(argv)
        code = _execute(args, out, stderr)
        if args.out:
            try:
                Path(args.out).write_text("".join(out), encoding="utf-8")
            except OSError as exc:
                raise UsageError(f"{args.out}: cannot write output: {exc}") from None
        else:
            stdout.write("".join(out))
        return code
    except UsageError as exc:
        print(f"plan2bn: error: {exc}", file=stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
