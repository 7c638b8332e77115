"""Ready-made scenarios: small worked examples and seeded random networks."""

from __future__ import annotations

import random
from dataclasses import replace
from fractions import Fraction

from .model import INF, DirectedLink, FlowSpec, Scenario, ScenarioConfig, validate_scenario
from .oracle import compute_maxmin

__all__ = [
    "bidirectional",
    "chain",
    "dynamic_experiment",
    "feedback_pair",
    "finite_demand",
    "random_scenario",
    "single_link",
]

F = Fraction


def bidirectional(a: str, b: str, capacity, delay=0, back_capacity=None) -> list[DirectedLink]:
    back = capacity if back_capacity is None else back_capacity
    return [DirectedLink(a, b, F(capacity), F(delay)), DirectedLink(b, a, F(back), F(delay))]


def single_link(n_flows=3, capacity=30, k=0, delay=1, control_interval=1, duration=40) -> Scenario:
    flows = tuple(FlowSpec.from_path(f"f{i}", "ab") for i in range(1, n_flows + 1))
    return validate_scenario(
        ScenarioConfig(
            links=tuple(bidirectional("a", "b", capacity, delay)),
            flows=flows,
            k=F(k),
            control_interval=F(control_interval),
            duration=F(duration),
        )
    )


def chain(k=0, delay=1, duration=80) -> Scenario:
    """A, B share a->b (capacity 10); B, C share b->c (capacity 100)."""
    links = bidirectional("a", "b", 10, delay) + bidirectional("b", "c", 100, delay)
    flows = (
        FlowSpec.from_path("A", "ab"),
        FlowSpec.from_path("B", "abc"),
        FlowSpec.from_path("C", "bc"),
    )
    return validate_scenario(
        ScenarioConfig(links=tuple(links), flows=flows, k=F(k), duration=F(duration))
    )


def feedback_pair(k=2, delay=1, duration=60) -> Scenario:
    """A forward on x->y (capacity 30), which also carries B's feedback; B forward on x->z (12)."""
    links = (
        DirectedLink("x", "y", F(30), F(delay)),
        DirectedLink("y", "x", F(1000), F(delay)),
        DirectedLink("x", "z", F(12), F(delay)),
        DirectedLink("z", "x", F(1000), F(delay)),
    )
    flows = (FlowSpec.from_path("A", "xy"), FlowSpec.from_path("B", "yxz"))
    return validate_scenario(ScenarioConfig(links=links, flows=flows, k=F(k), duration=F(duration)))


def finite_demand(duration=40) -> Scenario:
    flows = (
        FlowSpec.from_path("A", "ab", demand=F(5)),
        FlowSpec.from_path("B", "ab"),
        FlowSpec.from_path("C", "ab"),
    )
    return validate_scenario(
        ScenarioConfig(links=tuple(bidirectional("a", "b", 30, 1)), flows=flows, duration=F(duration))
    )


def dynamic_experiment(seed=0, jitter=0) -> Scenario:
    """Five flows with demand 70 entering and leaving across four epochs.

    Flow 3 leaves at 15, flows 1 and 2 leave at 48 and flow 1 comes back at
    67.  Bottleneck capacities: u->v 60 (flows 1, 2), w->z 60 (2, 3, 4),
    v->w 150 (1, 4, 5) and e->v 60 (5); v->m->w is a slack detour for flow 2.
    Optimal rates per epoch::

        flow    0-15  15-48  48-67  67-100
        1        40    30     -      50
        2        20    30     -      -
        3        20    -      -      -
        4        20    30     60     50
        5        60    60     60     50

    The first epoch has three bottleneck levels (20, 40, 60).
    """
    links = (
        bidirectional("u", "v", 60, F(1, 4))
        + bidirectional("v", "w", 150, F(1, 4))
        + bidirectional("w", "z", 60, F(1, 4))
        + bidirectional("v", "m", 100, F(1, 4))
        + bidirectional("m", "w", 100, F(1, 4))
        + bidirectional("e", "v", 60, F(1, 4))
    )
    demand = F(70)
    flows = (
        FlowSpec.from_path("1", "uvw", demand=demand, stop=F(48), rejoins=((F(67), None),)),
        FlowSpec.from_path("2", "uvmwz", demand=demand, stop=F(48)),
        FlowSpec.from_path("3", "wz", demand=demand, stop=F(15)),
        FlowSpec.from_path("4", "vwz", demand=demand),
        FlowSpec.from_path("5", "evw", demand=demand),
    )
    return validate_scenario(
        ScenarioConfig(
            links=tuple(links),
            flows=flows,
            k=F(0),
            control_interval=F(1, 2),
            seed=seed,
            duration=F(100),
            jitter=F(jitter),
        )
    )


_TOPOLOGIES = [
    [("a", "b"), ("b", "c"), ("c", "d")],  # line
    [("a", "b"), ("b", "c"), ("c", "a")],  # triangle
    [("h", "a"), ("h", "b"), ("h", "c")],  # star
    [("a", "b"), ("b", "c")],
    [("a", "b")],
]


def _simple_paths(edges):
    adj: dict[str, set[str]] = {}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    paths = []

    def extend(path):
        if len(path) > 1:
            paths.append(list(path))
        for nxt in sorted(adj[path[-1]]):
            if nxt not in path:
                extend(path + [nxt])

    for node in sorted(adj):
        extend([node])
    return paths


def random_scenario(
    seed: int,
    max_flows: int = 8,
    ks=(F(0), F(1, 2), F(1)),
    finite_share: float = 0.3,
    jitter: bool = True,
    slack_rounds: int = 3,
) -> Scenario:
    """Random network of at most 6 directed links and ``max_flows`` flows.

    The duration is 4*N*D plus ``slack_rounds`` round-trip bounds, where N
    is the number of bottleneck levels of the oracle solution.
    """
    rng = random.Random(f"scenario:{seed}")
    edges = rng.choice(_TOPOLOGIES)
    delays = [F(0), F(1, 4), F(1, 2), F(1)]
    links = []
    for a, b in edges:
        links.append(DirectedLink(a, b, F(rng.randint(1, 100)), rng.choice(delays)))
        links.append(DirectedLink(b, a, F(rng.randint(1, 100)), rng.choice(delays)))
    paths = _simple_paths(edges)
    flows = []
    for i in range(rng.randint(1, max_flows)):
        demand = F(rng.randint(1, 60)) if rng.random() < finite_share else INF
        flows.append(FlowSpec.from_path(f"f{i}", rng.choice(paths), demand=demand))
    config = ScenarioConfig(
        links=tuple(links),
        flows=tuple(flows),
        k=rng.choice(list(ks)),
        control_interval=F(1),
        seed=seed,
        duration=F(0),
        jitter=F(1, 4) if jitter and rng.random() < 0.5 else F(0),
    )
    scenario = validate_scenario(config)
    n_levels = compute_maxmin(scenario).n_levels
    duration = (4 * n_levels + slack_rounds) * scenario.d_bound
    return validate_scenario(replace(config, duration=duration, d_bound=scenario.d_bound))
