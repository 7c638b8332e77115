"""Network, flow and scenario types shared by the oracle, switches and simulator.

Every rate and time quantity is an exact :class:`fractions.Fraction`.  An
unbounded demand is the float ``INF``; it only ever takes part in
comparisons, never in arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

INF = math.inf

Rate = Union[Fraction, float]  # float only for INF

__all__ = [
    "INF",
    "DirectedLink",
    "FlowSpec",
    "Scenario",
    "ScenarioConfig",
    "ScenarioError",
    "as_rate",
    "as_time",
    "is_inf",
    "link_id",
    "link_load",
    "reverse_link",
    "reverse_route",
    "validate_scenario",
]


def is_inf(value) -> bool:
    return isinstance(value, float) and value == INF


def as_rate(value) -> Rate:
    """Convert ints, decimal strings, ``"a/b"`` strings or ``"inf"`` to an exact rate."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError(f"not a rate: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value == INF:
            return INF
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"not a rate: {value!r}")
        # shortest repr, so 0.1 means 1/10 rather than its binary expansion
        return Fraction(repr(value))
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("inf", "infinity", "+inf"):
            return INF
        return Fraction(text)
    raise TypeError(f"not a rate: {value!r}")


def as_time(value) -> Fraction:
    t = as_rate(value)
    if is_inf(t):
        raise ValueError("time must be finite")
    return t


def link_id(src: str, dst: str) -> str:
    return f"{src}->{dst}"


def reverse_link(lid: str) -> str:
    src, dst = lid.split("->")
    return link_id(dst, src)


@dataclass(frozen=True)
class DirectedLink:
    src: str
    dst: str
    capacity: Fraction
    delay: Fraction = Fraction(0)

    @property
    def id(self) -> str:
        return link_id(self.src, self.dst)


@dataclass(frozen=True)
class FlowSpec:
    id: str
    route: tuple[str, ...]
    demand: Rate = INF
    start: Fraction = Fraction(0)
    stop: Optional[Fraction] = None  # None: never stops
    rejoins: tuple = ()  # further (start, stop) periods after the first

    @classmethod
    def from_path(cls, id: str, nodes: Iterable[str], **kwargs) -> "FlowSpec":
        nodes = list(nodes)
        route = tuple(link_id(a, b) for a, b in zip(nodes, nodes[1:]))
        return cls(id, route, **kwargs)

    @property
    def periods(self) -> tuple:
        return ((self.start, self.stop),) + tuple(self.rejoins)

    def active_at(self, t) -> bool:
        return any(a <= t and (b is None or t < b) for a, b in self.periods)

    def stop_after(self, t) -> Optional[Fraction]:
        """End of the active period containing ``t`` (None if it never ends)."""
        for a, b in self.periods:
            if a <= t and (b is None or t < b):
                return b
        return None


def _periods_text(flow: FlowSpec) -> str:
    return ", ".join(f"[{a}, {'inf' if b is None else b})" for a, b in flow.periods)


def reverse_route(flow: FlowSpec) -> tuple[str, ...]:
    """Links used by the flow's feedback: direction-flipped, in reverse order."""
    return tuple(reverse_link(lid) for lid in reversed(flow.route))


@dataclass(frozen=True)
class ScenarioConfig:
    links: tuple[DirectedLink, ...]
    flows: tuple[FlowSpec, ...]
    k: Fraction = Fraction(0)
    control_interval: Fraction = Fraction(1)
    d_bound: Optional[Fraction] = None  # None: smallest bound consistent with the topology
    seed: int = 0
    duration: Fraction = Fraction(100)
    jitter: Fraction = Fraction(0)  # max extra per-hop delay, drawn from the seed
    initial_actual: Mapping[str, Fraction] = field(default_factory=dict)


class ScenarioError(ValueError):
    """Raised by :func:`validate_scenario`; ``errors`` lists every violation."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Scenario:
    """A validated scenario with every route resolved against the link table."""

    config: ScenarioConfig
    links: dict[str, DirectedLink]
    flows: dict[str, FlowSpec]
    reverse_routes: dict[str, tuple[str, ...]]
    d_bound: Fraction

    @property
    def k(self) -> Fraction:
        return self.config.k

    @property
    def control_interval(self) -> Fraction:
        return self.config.control_interval

    @property
    def duration(self) -> Fraction:
        return self.config.duration

    @property
    def seed(self) -> int:
        return self.config.seed

    def round_trip(self, flow_id: str) -> tuple[str, ...]:
        """Forward links followed by feedback links, in traversal order."""
        return self.flows[flow_id].route + self.reverse_routes[flow_id]

    def max_round_trip(self, flow_id: str) -> Fraction:
        jitter = self.config.jitter
        return sum((self.links[lid].delay + jitter for lid in self.round_trip(flow_id)), Fraction(0))

    def crossings(self, flow_id: str) -> dict[str, Fraction]:
        """Per-link weight of one flow: 1 on forward links, k on feedback links.

        Feedback links are omitted when k is zero; such a flow does not load them.
        """
        weights = {lid: Fraction(1) for lid in self.flows[flow_id].route}
        if self.k:
            for lid in self.reverse_routes[flow_id]:
                weights[lid] = self.k
        return weights

    def active_flows(self, t) -> list[str]:
        return [fid for fid, f in self.flows.items() if f.active_at(t)]

    def with_flows(self, flow_ids: Iterable[str]) -> "Scenario":
        keep = set(flow_ids)
        flows = {fid: f for fid, f in self.flows.items() if fid in keep}
        return Scenario(
            self.config,
            self.links,
            flows,
            {fid: r for fid, r in self.reverse_routes.items() if fid in keep},
            self.d_bound,
        )


def validate_scenario(config: ScenarioConfig) -> Scenario:
    errors: list[str] = []
    links: dict[str, DirectedLink] = {}
    for link in config.links:
        if link.id in links:
            errors.append(f"duplicate link {link.id}")
        links[link.id] = link
        if not link.capacity > 0:
            errors.append(f"non-positive capacity on link {link.id}")
        if link.delay < 0:
            errors.append(f"negative delay on link {link.id}")

    if config.k < 0:
        errors.append("k must be >= 0")
    if not config.control_interval > 0:
        errors.append("control_interval must be > 0")
    if config.duration < 0:
        errors.append("duration must be >= 0")
    if config.jitter < 0:
        errors.append("jitter must be >= 0")

    flows: dict[str, FlowSpec] = {}
    reverse_routes: dict[str, tuple[str, ...]] = {}
    for flow in config.flows:
        if flow.id in flows:
            errors.append(f"duplicate flow {flow.id}")
        flows[flow.id] = flow
        if not flow.route:
            errors.append(f"empty route for flow {flow.id}")
            continue
        if len(set(flow.route)) != len(flow.route):
            errors.append(f"repeated link in route of flow {flow.id}")
        unknown = [lid for lid in flow.route if lid not in links]
        for lid in unknown:
            errors.append(f"unknown link {lid} in route of flow {flow.id}")
        if not unknown:
            rev = reverse_route(flow)
            for lid in rev:
                if lid not in links:
                    errors.append(f"unknown link {lid} on feedback route of flow {flow.id}")
            if set(rev) & set(flow.route):
                errors.append(f"flow {flow.id} crosses a link in both directions")
            reverse_routes[flow.id] = rev
        for a, b in zip(flow.route, flow.route[1:]):
            if a.split("->")[1] != b.split("->")[0]:
                errors.append(f"route of flow {flow.id} is not contiguous at {a}, {b}")
        if not is_inf(flow.demand) and not flow.demand > 0:
            errors.append(f"non-positive demand for flow {flow.id}")
        if flow.start < 0:
            errors.append(f"negative start time for flow {flow.id}")
        previous_stop = Fraction(-1)
        for a, b in flow.periods:
            if previous_stop is None or not previous_stop < a or (b is not None and not a < b):
                errors.append(f"inconsistent times for flow {flow.id}: periods {_periods_text(flow)}")
                break
            previous_stop = b

    for fid, rate in config.initial_actual.items():
        if fid not in flows:
            errors.append(f"initial actual rate for unknown flow {fid}")
        elif rate < 0 or rate > flows[fid].demand:
            errors.append(f"initial actual rate of flow {fid} outside [0, demand]")

    if errors:
        raise ScenarioError(errors)

    scenario = Scenario(config, links, flows, reverse_routes, Fraction(0))
    needed = config.control_interval + max(
        (scenario.max_round_trip(fid) for fid in flows), default=Fraction(0)
    )
    d_bound = config.d_bound if config.d_bound is not None else needed
    if d_bound < needed:
        raise ScenarioError([f"d_bound {d_bound} below control_interval plus max round trip {needed}"])
    return Scenario(config, links, flows, reverse_routes, d_bound)


def link_load(rates: Mapping[str, Fraction], lid: str, scenario: Scenario) -> Fraction:
    """Forward rates crossing ``lid`` plus k times the feedback rates crossing it."""
    load = Fraction(0)
    for fid, rate in rates.items():
        if lid in scenario.flows[fid].route:
            load += rate
        elif lid in scenario.reverse_routes[fid]:
            load += scenario.k * rate
    return load
