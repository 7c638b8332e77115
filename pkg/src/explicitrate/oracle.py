"""Global maxmin-fair rate computation with k-weighted feedback load.

:func:`compute_maxmin` runs the synchronized bottleneck-peeling procedure:
find every link with the smallest remaining capacity per weighted flow,
fix the flows crossing it at that share, subtract their load everywhere
and repeat on the reduced network.  A finite demand is handled by giving
the flow a private link of capacity equal to its demand.

:func:`verify_maxmin` is an independent check that does not share code with
the procedure: it tests feasibility and the bottleneck characterization of
maxmin fairness directly on a rate vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .model import Scenario, is_inf, link_load

__all__ = [
    "BottleneckLevel",
    "Counterexample",
    "MaxminSolution",
    "bottleneck_levels",
    "capacity_per_flow",
    "check_level_properties",
    "compute_maxmin",
    "verify_maxmin",
]


def capacity_per_flow(remaining_capacity, forward, feedback, k) -> Fraction:
    """Fair share ``C / (f + k*b)`` of a link; the caller guarantees ``f + k*b > 0``."""
    return Fraction(remaining_capacity) / (forward + Fraction(k) * feedback)


@dataclass(frozen=True)
class BottleneckLevel:
    index: int
    rate: Fraction
    links: frozenset  # real links saturated at this level
    demand_limited: frozenset  # flows fixed by their own demand at this level
    flows: frozenset
    weighted_counts: Mapping[str, Fraction]  # link -> weight of this level's flows on it


@dataclass(frozen=True)
class MaxminSolution:
    rates: Mapping[str, Fraction]
    levels: tuple[BottleneckLevel, ...]

    @property
    def n_levels(self) -> int:
        return len(self.levels)


def _demand_key(fid: str) -> tuple[str, str]:
    return ("demand", fid)


def _weighted_members(scenario: Scenario, flow_ids: Iterable[str]):
    """Link key -> {flow: weight}, artificial demand links included; capacities alongside."""
    members: dict = {}
    capacity: dict = {}
    for fid in sorted(flow_ids):
        for lid, w in scenario.crossings(fid).items():
            members.setdefault(lid, {})[fid] = w
            capacity[lid] = scenario.links[lid].capacity
        demand = scenario.flows[fid].demand
        if not is_inf(demand):
            key = _demand_key(fid)
            members[key] = {fid: Fraction(1)}
            capacity[key] = demand
    return members, capacity


def compute_maxmin(scenario: Scenario, flow_ids: Optional[Iterable[str]] = None) -> MaxminSolution:
    """Maxmin-fair rates for ``flow_ids`` (default: every flow in the scenario)."""
    flow_ids = set(scenario.flows if flow_ids is None else flow_ids)
    members, remaining = _weighted_members(scenario, flow_ids)
    unassigned = set(flow_ids)
    rates: dict[str, Fraction] = {}
    levels: list[BottleneckLevel] = []

    while unassigned:
        shares = {}
        for key, flows in members.items():
            n = sum((w for fid, w in flows.items() if fid in unassigned), Fraction(0))
            if n > 0:
                shares[key] = remaining[key] / n
        tau = min(shares.values())
        bottlenecks = [key for key, share in shares.items() if share == tau]
        fixed = {fid for key in bottlenecks for fid in members[key] if fid in unassigned}

        counts = {}
        for key, flows in members.items():
            n_fixed = sum((w for fid, w in flows.items() if fid in fixed), Fraction(0))
            if n_fixed:
                remaining[key] -= tau * n_fixed
                if isinstance(key, str):
                    counts[key] = n_fixed
        for fid in fixed:
            rates[fid] = tau
        unassigned -= fixed

        levels.append(
            BottleneckLevel(
                index=len(levels) + 1,
                rate=tau,
                links=frozenset(k for k in bottlenecks if isinstance(k, str)),
                demand_limited=frozenset(k[1] for k in bottlenecks if not isinstance(k, str)),
                flows=frozenset(fixed),
                weighted_counts=counts,
            )
        )

    return MaxminSolution(rates=dict(sorted(rates.items())), levels=tuple(levels))


def bottleneck_levels(solution: MaxminSolution) -> tuple[int, tuple[Fraction, ...]]:
    """Number of distinct bottleneck rates and the increasing list of them."""
    taus = tuple(level.rate for level in solution.levels)
    return len(taus), taus


@dataclass(frozen=True)
class Counterexample:
    kind: str  # missing | negative | demand | infeasible | not_maxmin
    flow: Optional[str]
    link: Optional[str]
    detail: str

    def __str__(self) -> str:
        return self.detail


def verify_maxmin(
    scenario: Scenario,
    rates: Mapping[str, Fraction],
    flow_ids: Optional[Iterable[str]] = None,
) -> Optional[Counterexample]:
    """Return ``None`` when ``rates`` is the maxmin-fair vector, else a counterexample.

    A feasible vector is maxmin fair iff every flow below its demand crosses
    a saturated link on which no other flow has a larger rate.  Otherwise the
    flow can be raised at the expense of strictly larger flows only.
    """
    flow_ids = sorted(scenario.flows if flow_ids is None else flow_ids)
    for fid in flow_ids:
        if fid not in rates:
            return Counterexample("missing", fid, None, f"no rate given for flow {fid}")
    rates = {fid: Fraction(rates[fid]) for fid in flow_ids}
    for fid, r in rates.items():
        if r < 0:
            return Counterexample("negative", fid, None, f"flow {fid} has negative rate {r}")
        if r > scenario.flows[fid].demand:
            return Counterexample("demand", fid, None, f"flow {fid} rate {r} exceeds demand")

    users: dict[str, list[str]] = {}
    for fid in flow_ids:
        for lid in scenario.crossings(fid):
            users.setdefault(lid, []).append(fid)

    saturated = set()
    for lid in sorted(users):
        load = link_load(rates, lid, scenario)
        cap = scenario.links[lid].capacity
        if load > cap:
            return Counterexample(
                "infeasible", None, lid, f"link {lid} load {load} exceeds capacity {cap}"
            )
        if load == cap:
            saturated.add(lid)

    for fid in flow_ids:
        if rates[fid] == scenario.flows[fid].demand:
            continue
        blocked = [lid for lid in scenario.crossings(fid) if lid in saturated]
        if not blocked:
            return Counterexample(
                "not_maxmin", fid, None, f"flow {fid} can be increased: no saturated link on its route"
            )
        if not any(all(rates[g] <= rates[fid] for g in users[lid]) for lid in blocked):
            lid = blocked[0]
            bigger = max(users[lid], key=lambda g: (rates[g], g))
            return Counterexample(
                "not_maxmin",
                fid,
                lid,
                f"flow {fid} at {rates[fid]} could grow by shrinking larger flow {bigger} "
                f"at {rates[bigger]} on saturated link {lid}",
            )
    return None


def check_level_properties(
    scenario: Scenario, solution: MaxminSolution, flow_ids: Optional[Iterable[str]] = None
) -> list[str]:
    """Check the level decomposition; returns a list of failures (empty when sound).

    Covered: strictly increasing level rates, flow partition, membership of
    every level's flows on its bottleneck links, exclusivity of bottleneck
    links, saturation, and the per-level closed form of each rate, with
    strict inequality on links that still carry unassigned flows.
    """
    flow_ids = set(scenario.flows if flow_ids is None else flow_ids)
    members, capacity = _weighted_members(scenario, flow_ids)
    failures = []
    levels = solution.levels

    for prev, cur in zip(levels, levels[1:]):
        if not prev.rate < cur.rate:
            failures.append(f"level rates not increasing at level {cur.index}")

    seen: set[str] = set()
    for level in levels:
        if seen & level.flows:
            failures.append(f"level {level.index} repeats flows {sorted(seen & level.flows)}")
        seen |= level.flows
    if seen != flow_ids:
        failures.append("levels do not partition the flow set")

    def crosses(fid, key):
        return fid in members.get(key, {})

    assigned: set[str] = set()
    marked: set = set()
    for level in levels:
        bottlenecks = set(level.links) | {_demand_key(fid) for fid in level.demand_limited}
        assigned_now = assigned | level.flows
        for fid in level.flows:
            if not any(crosses(fid, key) for key in bottlenecks):
                failures.append(f"flow {fid} of level {level.index} crosses none of its bottlenecks")
        for key in bottlenecks:
            outsiders = set(members[key]) - assigned_now
            if outsiders:
                failures.append(f"link {key} of level {level.index} carries later flows {sorted(outsiders)}")
        marked |= bottlenecks

        for key, flows in members.items():
            earlier = sum((w * solution.rates[f] for f, w in flows.items() if f in assigned), Fraction(0))
            n_left = sum((w for f, w in flows.items() if f not in assigned), Fraction(0))
            if key in bottlenecks:
                if n_left == 0 or level.rate != (capacity[key] - earlier) / n_left:
                    failures.append(f"level {level.index} rate differs from closed form on bottleneck {key}")
            elif key not in marked and any(f not in assigned_now for f in flows):
                if not level.rate < (capacity[key] - earlier) / n_left:
                    failures.append(f"level {level.index} rate not below closed form on link {key}")
        assigned = assigned_now

    rates = {fid: solution.rates[fid] for fid in flow_ids}
    for level in levels:
        for lid in level.links:
            if link_load(rates, lid, scenario) != scenario.links[lid].capacity:
                failures.append(f"bottleneck link {lid} of level {level.index} not saturated")
    for lid, link in scenario.links.items():
        if link_load(rates, lid, scenario) > link.capacity:
            failures.append(f"link {lid} overloaded")
    return failures
