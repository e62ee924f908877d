"""Command-line surface: minimize-input, minimize-changes, reduce-trace,
and a bench mode exercising the engine's complexity claims.

Exit status: 0 on success, 1 on usage or hard errors, 2 when the test
oracle violates an axiom (the full scenario does not fail, or the empty
one does).
"""

from __future__ import annotations

import argparse
import signal
import sys
from pathlib import Path
from typing import Optional

from . import bench as bench_mod
from . import changes as changes_mod
from . import inputmin
from . import report as report_mod
from . import tracered
from . import toylang
from .core import (
    AxiomViolation,
    Configuration,
    DeltaDebugError,
    EngineOptions,
    MinimizationResult,
    Outcome,
    VerifyBudgetExceeded,
    verify_n_minimal,
)
from .proc import CommandOracleSpec, OracleExecutionError, kill_active_process_tree

PROGRESS_EVERY = 25
VERIFY_FINAL_LIMIT = 64  # skip spawning per-delta re-tests above this size


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI reserves 2 for axiom
    violations, so remap usage errors to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


class _Progress:
    """Per-test reporting: one bitmap row per test when verbose, otherwise
    a summary line every PROGRESS_EVERY tests."""

    def __init__(self, verbose: bool):
        self.verbose = verbose
        self.count = 0
        self.tallies = {o: 0 for o in Outcome}

    def __call__(self, record, state) -> None:
        self.count += 1
        self.tallies[record.outcome] += 1
        if self.verbose:
            print(report_mod.render_log_line(record, record.config.universe_size))
        elif self.count % PROGRESS_EVERY == 0:
            print(
                f"... {self.count} tests "
                f"(fail={self.tallies[Outcome.FAIL]} "
                f"pass={self.tallies[Outcome.PASS]} "
                f"unresolved={self.tallies[Outcome.UNRESOLVED]})"
            )


def _engine_options(args) -> EngineOptions:
    return EngineOptions(
        monotone=getattr(args, "monotone_cache", False),
        on_record=_Progress(getattr(args, "verbose", False)),
    )


def _command_spec(args) -> CommandOracleSpec:
    argv = list(args.test)
    # The command runs with the workspace as its working directory, but
    # flags are relative to the invocation directory: pin path-like
    # commands (./check.sh) down now.  Bare names still resolve via PATH.
    if "/" in argv[0]:
        argv[0] = str(Path(argv[0]).resolve())
    return CommandOracleSpec(
        argv=argv,
        timeout_ms=args.timeout,
        workspace_root=args.workspace,
        keep_failing=args.keep_failing,
    )


def _write_run_report(
    args, result: Optional[MinimizationResult], log=None, verified=None
) -> None:
    if not getattr(args, "report", None):
        return
    doc = report_mod.build_report(result, log_=log, verified=verified)
    report_mod.write_report(
        doc, args.report, deterministic=getattr(args, "deterministic_report", False)
    )
    print(f"report: {args.report}")


def _summarize(result: MinimizationResult, label: str) -> None:
    log = result.log
    print(
        f"{label}: {log.universe_size} -> {len(result.final)} deltas "
        f"({log.oracle_test_count} oracle tests, {log.cached_test_count} cached, "
        f"{log.axiom_test_count} axiom checks)"
    )


# --- minimize-input ----------------------------------------------------------

def cmd_minimize_input(args) -> int:
    data = Path(args.input).read_bytes()
    schedule = [g.strip() for g in args.granularity.split(",") if g.strip()]
    spec = _command_spec(args)
    options = _engine_options(args)
    outcome = inputmin.minimize_input(
        data,
        spec,
        schedule=schedule,
        candidate_name=Path(args.input).name,
        options=options,
    )
    output = args.output or f"{args.input}.min"
    Path(output).write_bytes(outcome.minimized)
    for p in outcome.passes:
        _summarize(p.result, f"{p.granularity} pass")
    print(f"minimized input: {output} ({len(outcome.minimized)} bytes)")

    verified = None
    if not args.no_verify_final:
        verified = _verify_final_input(outcome, spec, Path(args.input).name)
    last = outcome.passes[-1]
    if last.oracle.kept_workspace:
        print(f"failing workspace kept: {last.oracle.kept_workspace}")
    _write_run_report(args, last.result, verified=verified)
    return 0


def _verify_final_input(
    outcome: inputmin.InputMinimization, spec: CommandOracleSpec, name: str
) -> Optional[bool]:
    granularity = outcome.passes[-1].granularity
    tokenized = inputmin.tokenize(outcome.minimized, granularity)
    if len(tokenized) == 0 or len(tokenized) > VERIFY_FINAL_LIMIT:
        return None
    oracle = inputmin.CommandOracle(
        spec.with_materializer(inputmin.candidate_materializer(tokenized, name))
    )
    full = Configuration.full(len(tokenized))
    if oracle.evaluate(full) != Outcome.FAIL:
        print("warning: minimized input no longer fails on re-test", file=sys.stderr)
        return False
    try:
        verified = verify_n_minimal(full, oracle, 1)
    except VerifyBudgetExceeded:
        return None
    print(f"verified 1-minimal at {granularity} granularity: {verified}")
    return verified


# --- minimize-changes --------------------------------------------------------

def cmd_minimize_changes(args) -> int:
    baseline = changes_mod.load_tree(args.baseline)
    diff_text = Path(args.diff).read_text(encoding="utf-8")
    atomic = changes_mod.split_unified_diff(diff_text)
    dependencies = {}
    if args.deps:
        dependencies = changes_mod.parse_dependencies(
            Path(args.deps).read_text(encoding="utf-8")
        )
    changeset = changes_mod.ChangeSet(
        baseline_digest=changes_mod.digest_tree(baseline),
        changes=tuple(atomic),
        dependencies=dependencies,
    )
    print(f"split diff into {len(changeset)} atomic changes")

    groups: Optional[changes_mod.GroupKey] = None
    if args.groups:
        if args.groups in ("file", "dir"):
            groups = "file" if args.groups == "file" else "directory"
        else:
            groups = changes_mod.parse_group_map(
                Path(args.groups).read_text(encoding="utf-8")
            )

    spec = _command_spec(args)
    options = _engine_options(args)
    outcome = changes_mod.minimize_changes(
        baseline, changeset, spec, groups=groups, options=options
    )
    for p in outcome.passes:
        _summarize(p.result, f"{p.label} pass")

    output = args.output_diff or f"{args.diff}.min"
    Path(output).write_text(outcome.diff_text, encoding="utf-8")
    print(f"minimal failure-inducing diff: {output} ({len(outcome.final)} changes)")
    if outcome.oracle.kept_workspace:
        print(f"failing workspace kept: {outcome.oracle.kept_workspace}")
    _write_run_report(args, outcome.final_result)
    return 0


# --- reduce-trace ------------------------------------------------------------

def cmd_reduce_trace(args) -> int:
    program = toylang.parse_program(Path(args.program).read_text(encoding="utf-8"))
    tokens = [int(t) for t in args.stdin.split(",") if t.strip()] if args.stdin else []
    prefixes = (
        [p for p in args.filter.split(",") if p] if args.filter else None
    )
    expectation = tracered.OutputExpectation.derive(_unescape(args.expect), prefixes)
    options = _engine_options(args)
    reduction = tracered.reduce_trace(program, tokens, expectation, options=options)

    trace_out = args.trace_out or f"{args.program}.trace"
    toylang.write_trace(reduction.trace, trace_out)
    slice_out = args.slice_out or f"{args.program}.slice"
    Path(slice_out).write_text(tracered.render_two_column(reduction), encoding="utf-8")

    _summarize(reduction.result, "trace reduction")
    labels = " ".join(reduction.slice_labels)
    print(f"critical slice ({len(reduction.slice_events)} events): {labels}")
    print(f"trace file: {trace_out}")
    print(f"slice: {slice_out}")
    _write_run_report(
        args, reduction.result, verified=reduction.result.verified_1_minimal
    )
    return 0


# --- bench -------------------------------------------------------------------

def cmd_bench(args) -> int:
    sizes = bench_mod.parse_sizes(args.sizes)
    rows, violations = bench_mod.run_bench(
        args.oracle, sizes, monotone=args.monotone_cache
    )
    lines = [bench_mod.CSV_HEADER] + [row.csv() for row in rows]
    text = "\n".join(lines) + "\n"
    if args.csv and args.csv != "-":
        Path(args.csv).write_text(text, encoding="utf-8")
        print(f"wrote {args.csv}")
    else:
        sys.stdout.write(text)
    for violation in violations:
        print(f"BOUND VIOLATION: {violation}", file=sys.stderr)
    return 1 if violations else 0


# --- parser ------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, command_oracle: bool) -> None:
    p.add_argument("--report", help="write a JSON run report to this path")
    p.add_argument(
        "--deterministic-report", action="store_true",
        help="zero timing fields in the report (for golden-file comparison)",
    )
    p.add_argument("--verbose", action="store_true",
                   help="print one log row per test instead of summaries")
    p.add_argument("--monotone-cache", action="store_true",
                   help="assume monotony: subsets of passing configurations pass")
    if command_oracle:
        p.add_argument("--test", nargs="+", required=True, metavar="CMD",
                       help="test command; exit 0 = failure reproduced, "
                            "125 = unresolved, other = pass")
        p.add_argument("--timeout", type=int, default=60_000, metavar="MS",
                       help="per-test timeout in milliseconds (default 60000)")
        p.add_argument("--workspace", help="directory for per-test workspaces")
        p.add_argument("--keep-failing", action="store_true",
                       help="keep the workspace of the last failing test")
        p.add_argument("--no-verify-final", action="store_true",
                       help="skip the final 1-minimality re-test")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ddmin",
        description="Delta debugging toolkit: minimize failure-inducing "
                    "inputs, change sets, and execution traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("minimize-input", help="shrink a failing input file")
    p.add_argument("--input", required=True, help="the failing input file")
    p.add_argument("--granularity", default="line,char",
                   help="comma-separated pass schedule: line, char, byte "
                        "(default line,char)")
    p.add_argument("--output", help="where to write the minimized input "
                                    "(default INPUT.min)")
    _add_common(p, command_oracle=True)
    p.set_defaults(func=cmd_minimize_input)

    p = sub.add_parser("minimize-changes",
                       help="shrink a failure-inducing patch set")
    p.add_argument("--baseline", required=True, help="baseline source tree")
    p.add_argument("--diff", required=True, help="unified diff against the baseline")
    p.add_argument("--deps", help="TSV dependency file: CHILD<TAB>PARENT change ids")
    p.add_argument("--groups",
                   help="grouping pass: 'file', 'dir', or a TSV map "
                        "CHANGE-ID<TAB>KEY")
    p.add_argument("--output-diff", help="where to write the minimal diff "
                                         "(default DIFF.min)")
    _add_common(p, command_oracle=True)
    p.set_defaults(func=cmd_minimize_changes)

    p = sub.add_parser("reduce-trace",
                       help="reduce an execution trace to a critical slice")
    p.add_argument("--program", required=True, help="program in the toy language")
    p.add_argument("--stdin", default="", metavar="TOKENS",
                   help="comma-separated integer input tokens, e.g. 0,5")
    p.add_argument("--expect", required=True,
                   help="expected filtered output (\\n escapes accepted)")
    p.add_argument("--filter", metavar="PREFIXES",
                   help="comma-separated line prefixes to keep (default: "
                        "derived from the expected text)")
    p.add_argument("--trace-out", help="trace file path (default PROGRAM.trace)")
    p.add_argument("--slice-out", help="two-column slice path (default PROGRAM.slice)")
    _add_common(p, command_oracle=False)
    p.set_defaults(func=cmd_reduce_trace)

    p = sub.add_parser("bench", help="run synthetic oracles and check the "
                                     "test-count bounds")
    p.add_argument("--oracle", required=True,
                   help="single | conjunction:K | random-monotone:SEED | adversarial")
    p.add_argument("--sizes", required=True,
                   help="comma-separated sizes; A..B ranges allowed")
    p.add_argument("--monotone-cache", action="store_true",
                   help="enable the monotony shortcut")
    p.add_argument("--csv", help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_bench)

    return parser


def _install_signal_handlers() -> None:
    def handler(signum, frame):
        kill_active_process_tree()
        print(f"interrupted by signal {signum}", file=sys.stderr)
        raise SystemExit(1)

    for signum in (signal.SIGINT, signal.SIGTERM):
        try:
            signal.signal(signum, handler)
        except ValueError:  # not the main thread
            pass


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except AxiomViolation as exc:
        print(f"axiom violation: {exc}", file=sys.stderr)
        if exc.log is not None:
            _write_run_report(args, None, log=exc.log)
        return 2
    except (DeltaDebugError, OracleExecutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (changes_mod.DiffParseError, toylang.ToyParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    _install_signal_handlers()
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
