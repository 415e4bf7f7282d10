"""Command-line entry point.

Exit codes: 0 every result matched its expected class, 1 some result did
not, 2 bad arguments or unknown scenario, 3 a verification was inconclusive.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional, Sequence

from .harness import (
    SchedulerConfig,
    SchedulerKind,
    ViolationStats,
    WitnessReport,
    classify_partial_atomicity,
    run_stochastic,
    verify_escalation_closure,
    verify_external_state,
    verify_theorem,
)
from .kernel import PartitionDescriptor, ScenarioError, ScenarioSpec, adm_dependency
from .live import run_live_race
from .report import RunReport, render_run
from .scenarios import builtin_names, dumps, resolve
from .systems import DEFAULT_MAX_TRACES, Mode, TraceOverflow

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _split_attrs(text: str) -> List[str]:
    return [a for a in text.split(",") if a]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adb", description="Check decision boundaries of governance scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, depth=True):
        p.add_argument("--scenario", required=True, help="builtin name or scenario file")
        p.add_argument("--format", choices=("human", "structured"), default="human")
        if depth:
            p.add_argument("--depth", type=int, default=None,
                           help="step bound (default: state count + 2)")
            p.add_argument("--max-traces", type=int, default=DEFAULT_MAX_TRACES)

    v = sub.add_parser("verify", help="witness search and absence certificates")
    common(v)
    v.add_argument("--which", choices=("theorem", "escalation", "external"), default="theorem")

    r = sub.add_parser("race", help="stochastic or live concurrent runs")
    common(r, depth=False)
    r.add_argument("--mode", choices=("split", "atomic", "both"), default="both")
    how = r.add_mutually_exclusive_group()
    how.add_argument("--stochastic", dest="live", action="store_false", default=False)
    how.add_argument("--live", dest="live", action="store_true")
    r.add_argument("--p", type=float, default=0.5, help="env step probability (stochastic)")
    r.add_argument("--trials", type=int, default=10_000)
    r.add_argument("--seed", type=int, default=None, help="default: $ADB_SEED, else 0")
    r.add_argument("--requests", type=int, default=3, help="agent requests per stochastic trial")
    r.add_argument("--no-yield", dest="yield_injection", action="store_false",
                   help="live: no forced pause between decision and commit")
    r.add_argument("--workers", type=int, default=4)
    r.add_argument("--env-workers", type=int, default=2)

    c = sub.add_parser("classify", help="Atomic / PartiallyAtomic / Split")
    common(c)
    c.add_argument("--mode", choices=("split", "atomic"), default="split")
    c.add_argument("--local", type=_split_attrs, default=None, metavar="A,B")
    c.add_argument("--global", dest="global_", type=_split_attrs, default=None, metavar="A,B")
    c.add_argument("--adm", type=_split_attrs, default=None, metavar="A,B",
                   help="attributes admissibility reads (default: computed)")

    e = sub.add_parser("export", help="print a scenario in file format")
    e.add_argument("--scenario", required=True)

    sub.add_parser("list", help="list builtin scenarios")
    return parser


# -- commands ----------------------------------------------------------------------

def _load(name: str) -> ScenarioSpec:
    try:
        return resolve(name)
    except KeyError as err:
        raise UsageError(err.args[0]) from None
    except (ScenarioError, OSError) as err:
        raise UsageError(str(err)) from None


def _witness_status(reports: Sequence[WitnessReport]) -> int:
    if any(r.kind == "inconclusive" for r in reports):
        return EXIT_INCONCLUSIVE
    return EXIT_OK if all(r.matched for r in reports) else EXIT_MISMATCH


def cmd_verify(args, argv) -> tuple:
    spec = _load(args.scenario)
    if args.depth is not None and args.depth < 0:
        raise UsageError("--depth must be non-negative")
    kw = {"depth": args.depth, "max_traces": args.max_traces}
    if args.which == "theorem":
        reports = list(verify_theorem(spec, **kw))
    elif args.which == "escalation":
        reports = list(verify_escalation_closure(spec, **kw))
    else:
        reports = [verify_external_state(spec, fused=False, **kw),
                   verify_external_state(spec, fused=True, **kw)]
    run = RunReport(argv, spec.name, args.which, reports, _witness_status(reports))
    inconclusive = [r.outcome.reason for r in reports if r.kind == "inconclusive"]
    if inconclusive:
        run.message = f"inconclusive: {inconclusive[0]}"
    return run, spec


def expected_sign(stats: ViolationStats, config: SchedulerConfig) -> Optional[bool]:
    """Whether violations must be positive (True), zero (False), or either (None)."""
    if stats.mode.startswith("atomic"):
        return False
    if config.kind is SchedulerKind.STOCHASTIC:
        return config.p > 0
    if config.env_workers == 0:
        return False
    return True if config.yield_injection else None


def _stats_ok(stats: ViolationStats, config: SchedulerConfig) -> bool:
    want = expected_sign(stats, config)
    if want is not None and (stats.violations > 0) != want:
        return False
    if stats.replay_consistent is False or (
            stats.replay_violations is not None and stats.replay_violations != stats.violations):
        return False
    return True


def cmd_race(args, argv) -> tuple:
    spec = _load(args.scenario)
    seed = args.seed
    if seed is None:
        env_seed = os.environ.get("ADB_SEED")
        try:
            seed = int(env_seed) if env_seed else 0
        except ValueError:
            raise UsageError(f"ADB_SEED is not an integer: {env_seed!r}") from None
    try:
        config = SchedulerConfig(
            kind=SchedulerKind.LIVE_RACE if args.live else SchedulerKind.STOCHASTIC,
            p=args.p, trials=args.trials, seed=seed, yield_injection=args.yield_injection,
            requests=args.requests, workers=args.workers, env_workers=args.env_workers)
    except ValueError as err:
        raise UsageError(str(err)) from None
    modes = [Mode.SPLIT, Mode.ATOMIC] if args.mode == "both" else [Mode(args.mode)]
    runner = run_live_race if args.live else run_stochastic
    stats = [runner(spec, m, config) for m in modes]
    status = EXIT_OK if all(_stats_ok(s, config) for s in stats) else EXIT_MISMATCH
    return RunReport(argv, spec.name, args.mode, stats, status), spec


def _partition_from_flags(args, spec: ScenarioSpec) -> PartitionDescriptor:
    """The scenario's partition block, overridden by whatever flags were given."""
    base = spec.partition
    if (args.local is None) != (args.global_ is None):
        raise UsageError("a partition needs both --local and --global")
    if args.local is None and base is None:
        raise UsageError(f"{spec.name} declares no partition; pass --local and --global")
    local = args.local if args.local is not None else base.local_attrs
    global_ = args.global_ if args.global_ is not None else base.global_attrs
    if args.adm is not None:
        adm = args.adm
    elif base is not None:
        adm = base.adm_dependency
    else:
        adm = adm_dependency(spec)
    return PartitionDescriptor(local, global_, adm)


def cmd_classify(args, argv) -> tuple:
    spec = _load(args.scenario)
    partition = _partition_from_flags(args, spec)
    try:
        result = classify_partial_atomicity(spec, partition, args.depth, args.mode,
                                            args.max_traces)
    except ScenarioError as err:
        raise UsageError(f"ill-formed partition: {err}") from None
    return RunReport(argv, spec.name, args.mode, [result], EXIT_OK), spec


# -- dispatch ----------------------------------------------------------------------

def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad arguments

    if args.command == "list":
        print("\n".join(builtin_names()))
        return EXIT_OK
    fmt = getattr(args, "format", "human")
    try:
        if args.command == "export":
            sys.stdout.write(dumps(_load(args.scenario)))
            return EXIT_OK
        handler = {"verify": cmd_verify, "race": cmd_race, "classify": cmd_classify}
        result, spec = handler[args.command](args, argv)
    except UsageError as err:
        if fmt == "structured":
            print(RunReport(argv, getattr(args, "scenario", None), None, [], EXIT_USAGE,
                            f"error: {err}").to_json())
        else:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except TraceOverflow as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INCONCLUSIVE

    if fmt == "structured":
        print(result.to_json())
    else:
        print(render_run(result, spec))
    return result.exit_status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
