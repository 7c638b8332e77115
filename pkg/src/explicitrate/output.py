"""Text renderings of oracle solutions, convergence reports and rate series.

Every format starts with a versioned header line.  Rates are printed as an
exact fraction followed by a 6-significant-digit decimal in parentheses.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Optional

import yaml

from .model import Scenario, as_rate, is_inf
from .oracle import MaxminSolution
from .simulator import ConvergenceReport, SimTrace

ORACLE_HEADER = "# explicitrate-oracle v1"
REPORT_HEADER = "# explicitrate-report v1"
SERIES_HEADER = "# explicitrate-series v1"
RATES_HEADER = "# explicitrate-rates v1"


def fmt_rate(value) -> str:
    if value is None:
        return "-"
    if is_inf(value):
        return "inf"
    return f"{Fraction(value)} ({float(value):.6g})"


def _exact(value) -> str:
    if value is None:
        return "-"
    return "inf" if is_inf(value) else str(value)


def format_oracle(solution: MaxminSolution) -> str:
    """One ``flow`` line per active flow, one ``level`` line per bottleneck level, then ``N``."""
    lines = [ORACLE_HEADER]
    for fid in sorted(solution.rates):
        lines.append(f"flow {fid} {fmt_rate(solution.rates[fid])}")
    for level in solution.levels:
        links = ",".join(sorted(level.links)) or "-"
        limited = ",".join(sorted(level.demand_limited)) or "-"
        flows = ",".join(sorted(level.flows))
        lines.append(
            f"level {level.index} rate {fmt_rate(level.rate)} links {links} demand {limited} flows {flows}"
        )
    lines.append(f"N {solution.n_levels}")
    return "\n".join(lines) + "\n"


def parse_rates(text: str) -> dict[str, Fraction]:
    """Read ``flow <id> <rate>`` lines; oracle output is accepted as is.

    Blank lines, ``#`` comments and non-``flow`` lines are skipped.  Anything
    after the rate (such as the decimal in parentheses) is ignored.
    """
    rates: dict[str, Fraction] = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "flow":
            continue
        if len(parts) < 3:
            raise ValueError(f"line {number}: expected 'flow <id> <rate>'")
        if parts[1] in rates:
            raise ValueError(f"line {number}: flow {parts[1]} listed twice")
        try:
            rates[parts[1]] = as_rate(parts[2])
        except (TypeError, ValueError, ZeroDivisionError):
            raise ValueError(f"line {number}: bad rate {parts[2]!r}") from None
    return rates


def format_rates(rates: Mapping[str, Fraction]) -> str:
    lines = [RATES_HEADER] + [f"flow {fid} {_exact(rates[fid])}" for fid in sorted(rates)]
    return "\n".join(lines) + "\n"


def report_dict(report: ConvergenceReport, scenario: Optional[Scenario] = None) -> dict:
    epochs = []
    for e in report.epochs:
        epochs.append(
            {
                "index": e.index,
                "start": _exact(e.start),
                "end": _exact(e.end),
                "active": list(e.active),
                "levels": e.n_levels,
                "oracle": {fid: fmt_rate(r) for fid, r in sorted(e.oracle.rates.items())},
                "t0": _exact(e.t0),
                "converged": e.converged,
                "converged_at": _exact(e.converged_at),
                "convergence_time": _exact(e.convergence_time),
                "budget_4ND": _exact(e.budget),
                "within_budget": e.within_budget,
                "over_2ND": e.over_soft_bound,
            }
        )
    over = sum(e.over_soft_bound for e in report.epochs)
    out = {
        "d_bound": _exact(report.d_bound),
        "max_round_trip": _exact(report.max_round_trip),
        "converged": report.converged,
        "within_budget": report.within_budget,
        "epochs_over_2ND": f"{over}/{len(report.epochs)}",
        "m_consistency_checks": report.m_checks,
        "fair_share_checks": report.fair_share_checks,
        "feasibility_violations": [
            {"time": _exact(t), "link": lid, "load": fmt_rate(load), "capacity": fmt_rate(cap)}
            for t, lid, load, cap in report.feasibility_violations
        ],
        "epochs": epochs,
    }
    if scenario is not None:
        out["seed"] = scenario.seed
        out["duration"] = _exact(scenario.duration)
    return out


def format_report(report: ConvergenceReport, scenario: Optional[Scenario] = None, extra: Optional[dict] = None) -> str:
    data = report_dict(report, scenario)
    if extra:
        data.update(extra)
    return REPORT_HEADER + "\n" + yaml.safe_dump(data, sort_keys=False, default_flow_style=False)


def series_rows(trace: SimTrace) -> Iterable[tuple]:
    """``(time, series, value)`` rows: ``mu:<link>``, ``est:<flow>`` and ``act:<flow>``."""
    for record in trace.records:
        kind = record[0]
        if kind == "mu":
            yield record[1], f"mu:{record[2]}", record[3]
        elif kind in ("est", "act"):
            yield record[1], f"{kind}:{record[2]}", record[3]
        elif kind == "leave":
            # the flow's series end here
            yield record[1], f"est:{record[2]}", None
            yield record[1], f"act:{record[2]}", None


def format_series(trace: SimTrace) -> str:
    lines = [SERIES_HEADER, "time series value"]
    for t, name, value in series_rows(trace):
        value_text = "nan" if value is None else ("inf" if is_inf(value) else f"{float(value):.6g}")
        lines.append(f"{float(t):.6g} {name} {value_text}")
    return "\n".join(lines) + "\n"
