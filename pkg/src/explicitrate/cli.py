"""Command-line front end.

    explicitrate oracle   --scenario FILE [--at T]
    explicitrate simulate --scenario FILE [--seed N | --seeds A..B] [--perturb [SEED]]
                          [--policy-4-1 on|off] [--duration T] [--out DIR]
    explicitrate verify   --scenario FILE --rates FILE [--at T]

Exit codes: 0 success, 1 usage or parse error, 2 monitor violation or
failed verification, 3 no convergence within the duration.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import output
from .model import ScenarioError, as_time, validate_scenario
from .oracle import compute_maxmin, verify_maxmin
from .scenario_file import ScenarioSyntaxError, load_scenario_file
from .simulator import MonitorViolation, fixed_point_violations, inject_initial_conditions, run

EXIT_OK, EXIT_USAGE, EXIT_MONITOR, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _time(text: str):
    try:
        return as_time(text)
    except (TypeError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact time: {text!r}") from None


def _seed_range(text: str) -> range:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError
        a, b = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if b < a:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return range(a, b + 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="explicitrate", description="Maxmin-fair explicit-rate control.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, type=Path, help="scenario file (YAML)")

    p = sub.add_parser("oracle", help="print the maxmin-fair rates of the flows active at a time")
    common(p)
    p.add_argument("--at", type=_time, default=None, help="time whose active flow set is used (default 0)")

    p = sub.add_parser("simulate", help="run the distributed protocol and write trace, report and series")
    common(p)
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    seeds.add_argument("--seeds", type=_seed_range, default=None, metavar="A..B", help="run every seed in A..B")
    p.add_argument(
        "--perturb",
        nargs="?",
        const=-1,
        type=int,
        default=None,
        metavar="SEED",
        help="start from arbitrary state (seeded by SEED, or by the run seed)",
    )
    p.add_argument("--policy-4-1", dest="policy", choices=("on", "off"), default=None,
                   help="delayed increase of actual rates (default: scenario setting, on)")
    p.add_argument("--duration", type=_time, default=None, help="override the scenario duration")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")

    p = sub.add_parser("verify", help="check a rate vector for maxmin fairness")
    common(p)
    p.add_argument("--rates", required=True, help="rates file with 'flow <id> <rate>' lines, or - for stdin")
    p.add_argument("--at", type=_time, default=None, help="time whose active flow set is checked (default 0)")
    return parser


def _load(path: Path, seed=None, duration=None):
    try:
        doc = load_scenario_file(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except ScenarioSyntaxError as exc:
        raise UsageError(f"{path}: {exc}") from None
    except ScenarioError as exc:
        raise UsageError(f"{path}: " + "\n  ".join(exc.errors)) from None
    config = doc.config
    if seed is not None:
        config = replace(config, seed=seed)
    if duration is not None:
        config = replace(config, duration=duration)
    try:
        return doc, validate_scenario(config)
    except ScenarioError as exc:
        raise UsageError(f"{path}: " + "\n  ".join(exc.errors)) from None


def _active(scenario, at):
    return sorted(scenario.active_flows(0 if at is None else at))


def cmd_oracle(args, out=None) -> int:
    out = out or sys.stdout
    _, scenario = _load(args.scenario)
    out.write(output.format_oracle(compute_maxmin(scenario, _active(scenario, args.at))))
    return EXIT_OK


def cmd_verify(args, out=None) -> int:
    out = out or sys.stdout
    _, scenario = _load(args.scenario)
    try:
        text = sys.stdin.read() if args.rates == "-" else Path(args.rates).read_text()
        rates = output.parse_rates(text)
    except OSError as exc:
        raise UsageError(f"{args.rates}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{args.rates}: {exc}") from None
    active = _active(scenario, args.at)
    missing = [fid for fid in active if fid not in rates]
    if missing:
        raise UsageError(f"{args.rates}: no rate for active flow(s) {', '.join(missing)}")
    unknown = sorted(set(rates) - set(active))
    if unknown:
        raise UsageError(f"{args.rates}: flow(s) not active: {', '.join(unknown)}")
    counter = verify_maxmin(scenario, rates, active)
    if counter is None:
        out.write("pass\n")
        return EXIT_OK
    where = " ".join(
        part for part in (f"flow {counter.flow}" if counter.flow else "", f"link {counter.link}" if counter.link else "") if part
    )
    out.write(f"fail {counter.kind} {where}: {counter.detail}\n")
    return EXIT_MONITOR


def simulate_one(doc, scenario, outdir: Path, perturb: Optional[int], delayed_increase: bool, log=None) -> int:
    log = log or sys.stderr
    outdir.mkdir(parents=True, exist_ok=True)
    world = None
    if perturb is not None:
        world = inject_initial_conditions(scenario, scenario.seed if perturb < 0 else perturb)
    try:
        trace, report = run(scenario, world, delayed_increase=delayed_increase, monitors=doc.monitors)
    except MonitorViolation as exc:
        (outdir / "violation.txt").write_text(f"time {exc.time}\nevent {exc.event}\ndetail {exc.detail}\n{exc.digest}\n")
        log.write(f"{outdir}: monitor violation at t={exc.time} during {exc.event}: {exc.detail}\n")
        return EXIT_MONITOR

    fixed = fixed_point_violations(trace, report)
    extra = {"delayed_increase": delayed_increase, "perturbed": world is not None,
             "fixed_point_violations": fixed}
    (outdir / "trace.txt").write_text(trace.dumps())
    (outdir / "report.yaml").write_text(output.format_report(report, scenario, extra))
    (outdir / "series.txt").write_text(output.format_series(trace))

    if fixed:
        log.write(f"{outdir}: {fixed[0]}\n")
        return EXIT_MONITOR
    if delayed_increase and report.feasibility_violations:
        t, lid, load, cap = report.feasibility_violations[0]
        log.write(f"{outdir}: link {lid} load {load} exceeds capacity {cap} at t={t}\n")
        return EXIT_MONITOR
    if not report.converged:
        bad = [e.index for e in report.epochs if not e.converged]
        log.write(f"{outdir}: no convergence in epoch(s) {bad}\n")
        return EXIT_NOT_CONVERGED
    for e in report.epochs:
        if not e.within_budget:
            log.write(f"{outdir}: epoch {e.index} took {e.convergence_time}, over 4ND = {e.budget}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.seeds is None:
        doc, scenario = _load(args.scenario, args.seed, args.duration)
        runs = [(doc, scenario, args.out)]
    else:
        runs = []
        for seed in args.seeds:
            doc, scenario = _load(args.scenario, seed, args.duration)
            runs.append((doc, scenario, args.out / f"seed-{seed}"))
    worst = EXIT_OK
    for doc, scenario, outdir in runs:
        policy = doc.delayed_increase if args.policy is None else args.policy == "on"
        worst = max(worst, simulate_one(doc, scenario, outdir, args.perturb, policy))
    return worst


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "oracle":
            return cmd_oracle(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_simulate(args)
    except UsageError as exc:
        print(f"explicitrate: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
