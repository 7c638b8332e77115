"""Maxmin-fair explicit-rate congestion control: global oracle, switch and
source state machines, and a deterministic simulator that checks the
protocol's convergence against the oracle."""

from .endpoint import ControlPacket, Leg, Source, destination_reflect
from .model import (
    INF,
    DirectedLink,
    FlowSpec,
    Scenario,
    ScenarioConfig,
    ScenarioError,
    link_load,
    reverse_route,
    validate_scenario,
)
from .oracle import (
    BottleneckLevel,
    Counterexample,
    MaxminSolution,
    bottleneck_levels,
    capacity_per_flow,
    check_level_properties,
    compute_maxmin,
    verify_maxmin,
)
from .simulator import (
    ConvergenceReport,
    MonitorViolation,
    SimTrace,
    convergence_time,
    feasibility_monitor,
    fixed_point_violations,
    inject_initial_conditions,
    run,
)
from .switch import FlowEntry, LinkControlState

__version__ = "0.1.0"
