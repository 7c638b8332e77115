"""Deterministic discrete-event simulation of the explicit-rate protocol.

A control packet of a flow visits every link of its round trip in order:
the forward links, the destination (which reflects it), then the feedback
links back to the source.  The switch owning a link processes the packet
before sending it on.  Feedback links are processed only when ``k > 0``;
with ``k = 0`` the feedback path carries no modeled load.

Events at equal times are ordered by (kind rank, flow id, sequence number),
so a run is a pure function of the scenario, the initial world and the seed.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .endpoint import ControlPacket, Leg, Source, destination_reflect
from .model import INF, Scenario
from .oracle import MaxminSolution, compute_maxmin
from .switch import FlowEntry, LinkControlState

__all__ = [
    "ConvergenceReport",
    "EpochReport",
    "Monitors",
    "MonitorViolation",
    "SimTrace",
    "World",
    "convergence_time",
    "epoch_boundaries",
    "feasibility_monitor",
    "fixed_point_violations",
    "initial_world",
    "inject_initial_conditions",
    "run",
]

# tie-break ranks for events at the same instant
EPOCH, LEAVE, JOIN, PACKET, PENDING, TIMER = range(6)

JITTER_STEPS = 8


class MonitorViolation(AssertionError):
    def __init__(self, time, event: str, detail: str, digest: str):
        self.time = time
        self.event = event
        self.detail = detail
        self.digest = digest
        super().__init__(f"t={time} during {event}: {detail}\n{digest}")


@dataclass
class Monitors:
    m_consistency: bool = True
    fair_share: bool = True
    round_trip: bool = True


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and value == INF:
        return "inf"
    return str(value)


class SimTrace:
    """Append-only list of records ``(kind, time, *fields)``.

    Kinds: ``epoch``, ``join``, ``leave``, ``reg``, ``dereg``, ``mu``,
    ``mark``, ``hop``, ``fb``, ``est`` (rate estimate), ``act`` (actual
    rate), ``load``.
    """

    HEADER = "# explicitrate-trace v1"

    def __init__(self):
        self.records: list[tuple] = []

    def add(self, *record) -> None:
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def of_kind(self, kind: str) -> list[tuple]:
        return [r for r in self.records if r[0] == kind]

    def lines(self) -> Iterable[str]:
        yield self.HEADER
        for record in self.records:
            yield " ".join(_fmt(v) for v in record)

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"


@dataclass
class EpochReport:
    index: int
    start: Fraction
    end: Fraction
    active: tuple[str, ...]
    oracle: MaxminSolution
    d_bound: Fraction
    demand_limited: frozenset = frozenset()
    t0: Optional[Fraction] = None
    converged_at: Optional[Fraction] = None

    @property
    def n_levels(self) -> int:
        return self.oracle.n_levels

    @property
    def budget(self) -> Fraction:
        return 4 * self.n_levels * self.d_bound

    @property
    def converged(self) -> bool:
        return self.converged_at is not None

    @property
    def convergence_time(self) -> Optional[Fraction]:
        """Time from the epoch boundary until estimates settle on the oracle rates."""
        return None if self.converged_at is None else self.converged_at - self.start

    @property
    def since_t0(self) -> Optional[Fraction]:
        if self.converged_at is None or self.t0 is None:
            return None
        return max(Fraction(0), self.converged_at - self.t0)

    @property
    def within_budget(self) -> bool:
        return self.converged and self.convergence_time <= self.budget

    @property
    def over_soft_bound(self) -> bool:
        return self.converged and self.convergence_time > 2 * self.n_levels * self.d_bound


@dataclass
class ConvergenceReport:
    d_bound: Fraction
    epochs: list[EpochReport] = field(default_factory=list)
    feasibility_violations: list[tuple] = field(default_factory=list)
    max_round_trip: Optional[Fraction] = None
    m_checks: int = 0
    fair_share_checks: int = 0

    @property
    def converged(self) -> bool:
        return all(e.converged for e in self.epochs)

    @property
    def within_budget(self) -> bool:
        return all(e.within_budget for e in self.epochs)


@dataclass
class World:
    """Initial state handed to :func:`run`; the clean world is empty."""

    switches: dict[str, LinkControlState] = field(default_factory=dict)
    estimates: dict[str, object] = field(default_factory=dict)
    allocations: dict[str, Fraction] = field(default_factory=dict)
    in_flight: list[tuple[Fraction, int, ControlPacket]] = field(default_factory=list)
    perturbed: bool = False


def initial_world(scenario: Scenario) -> World:
    return World()


def _random_rate(rng: random.Random, scale: Fraction):
    roll = rng.random()
    if roll < 0.1:
        return INF
    if roll < 0.2:
        return Fraction(0)
    return Fraction(rng.randint(0, 64), 32) * scale


def inject_initial_conditions(scenario: Scenario, seed: int) -> World:
    """Arbitrary switch tables, in-flight packets and source estimates.

    Tables may violate marking consistency and carry a garbage advertized
    rate; each switch repairs itself on its first event.  Only flows active
    at time 0 get entries and packets.
    """
    rng = random.Random(f"perturb:{seed}")
    world = World(perturbed=True)
    active = sorted(scenario.active_flows(Fraction(0)))
    scale = max((link.capacity for link in scenario.links.values()), default=Fraction(1))

    for fid in active:
        for lid, weight in scenario.crossings(fid).items():
            link = scenario.links[lid]
            state = world.switches.setdefault(lid, LinkControlState(lid, link.capacity, scenario.k))
            if rng.random() < 0.1:
                continue  # this switch has not heard of the flow yet
            recorded = None if rng.random() < 0.15 else _random_rate(rng, scale)
            state.entries[fid] = FlowEntry(fid, weight, recorded, rng.random() < 0.5)
    for state in world.switches.values():
        state.mu = Fraction(rng.randint(0, 64), 16) * scale

    for fid in active:
        world.estimates[fid] = _random_rate(rng, scale)
        if rng.random() < 0.5:
            world.allocations[fid] = Fraction(rng.randint(1, 64), 32) * scale
        path = scenario.round_trip(fid)
        for _ in range(rng.randint(0, 3)):
            hop = rng.randrange(len(path) + 1)
            leg = Leg.OUTBOUND if hop < len(scenario.flows[fid].route) else Leg.RETURNING
            reach = sum(
                (scenario.links[lid].delay + scenario.config.jitter for lid in path[:hop]), Fraction(0)
            )
            at = Fraction(rng.randint(0, 16), 16) * reach
            packet = ControlPacket(fid, leg, _random_rate(rng, scale), rng.randint(0, 1), Fraction(-1))
            world.in_flight.append((at, hop, packet))
    return world


def epoch_boundaries(scenario: Scenario) -> list[Fraction]:
    times = {Fraction(0)}
    for flow in scenario.flows.values():
        for period in flow.periods:
            for t in period:
                if t is not None and 0 < t < scenario.duration:
                    times.add(t)
    return sorted(times)


class _Engine:
    def __init__(self, scenario: Scenario, world: World, delayed_increase: bool, monitors: Monitors):
        self.sc = scenario
        self.monitors = monitors
        self.delayed_increase = delayed_increase
        self.d_bound = scenario.d_bound
        self.rng = random.Random(f"jitter:{scenario.seed}")
        self.trace = SimTrace()
        self.report = ConvergenceReport(scenario.d_bound)
        self.queue: list = []
        self.seq = 0
        self.now = Fraction(0)

        self.switches: dict[str, LinkControlState] = dict(world.switches)
        self.unrepaired = set(self.switches) if world.perturbed else set()
        self.world = world
        self.sources: dict[str, Source] = {}
        self.incarnation: dict[str, int] = {}
        self.last_arrival: dict[tuple[str, int], Fraction] = {}
        self.dirty_links: set[str] = set()

        self.hops = {}
        for fid, flow in scenario.flows.items():
            weights = scenario.crossings(fid)
            path = scenario.round_trip(fid)
            self.hops[fid] = [
                (lid, weights.get(lid, Fraction(0)), scenario.links[lid].delay) for lid in path
            ]
        self.route_len = {fid: len(f.route) for fid, f in scenario.flows.items()}

        self.registered: set[tuple[str, str]] = {
            (lid, fid) for lid, st in self.switches.items() for fid in st.entries
        }
        self.expected: set[tuple[str, str]] = set()
        self.epoch: Optional[EpochReport] = None
        self.oracle_cache: dict[frozenset, MaxminSolution] = {}

    # -- scheduling

    def push(self, at, rank, flow, payload=None):
        self.seq += 1
        heapq.heappush(self.queue, (at, rank, flow, self.seq, payload))

    def send(self, packet, fid, hop, now):
        """Transmit over hop ``hop`` and schedule arrival at ``hop + 1``, FIFO per flow and hop."""
        lid, _, delay = self.hops[fid][hop]
        at = now + delay
        if self.sc.config.jitter:
            at += Fraction(self.rng.randint(0, JITTER_STEPS), JITTER_STEPS) * self.sc.config.jitter
        key = (fid, hop + 1)
        at = max(at, self.last_arrival.get(key, at))
        self.last_arrival[key] = at
        self.push(at, PACKET, fid, (hop + 1, packet))

    # -- monitors

    def digest(self, lid=None) -> str:
        parts = [repr(self.switches[lid])] if lid in self.switches else []
        parts += [repr(s) for s in self.sources.values()]
        return "\n".join(parts)

    def after_switch_event(self, state: LinkControlState, before, event: str):
        if self.monitors.m_consistency:
            self.report.m_checks += 1
            problem = state.check_m_consistency()
            if problem:
                raise MonitorViolation(self.now, event, problem, self.digest(state.link_id))
        mu_before, entries_before = before
        if state.mu != mu_before:
            self.trace.add("mu", self.now, state.link_id, state.mu)
        old_marks = {e[0]: e[3] for e in entries_before}
        for e in state.entries.values():
            if old_marks.get(e.flow) != e.restricted:
                self.trace.add("mark", self.now, state.link_id, e.flow, "R" if e.restricted else "U")
        if self.epoch is not None and self.epoch.t0 is not None:
            self.check_fair_share(state, event)

    def check_fair_share(self, state: LinkControlState, event: str):
        if not self.monitors.fair_share or state.link_id in self.unrepaired:
            return
        self.report.fair_share_checks += 1
        if state.mu < state.fair_share_floor():
            raise MonitorViolation(
                self.now,
                event,
                f"advertized rate {state.mu} below fair share {state.fair_share_floor()} on {state.link_id}",
                self.digest(state.link_id),
            )

    def update_t0(self):
        epoch = self.epoch
        if epoch is None or epoch.t0 is not None or self.registered != self.expected:
            return
        epoch.t0 = self.now
        for state in self.switches.values():
            self.check_fair_share(state, "t0")

    # -- switch access

    def switch(self, lid) -> LinkControlState:
        state = self.switches.get(lid)
        if state is None:
            link = self.sc.links[lid]
            state = self.switches[lid] = LinkControlState(lid, link.capacity, self.sc.k)
        if lid in self.unrepaired:
            self.unrepaired.discard(lid)
            before = state.snapshot()
            state.compute_advertized_rate()
            self.after_switch_event(state, before, "repair")
        return state

    # -- event handlers

    def on_epoch(self, index):
        boundaries = self.boundaries
        start = boundaries[index]
        end = boundaries[index + 1] if index + 1 < len(boundaries) else self.sc.duration
        active = tuple(sorted(self.sc.active_flows(start)))
        key = frozenset(active)
        if key not in self.oracle_cache:
            self.oracle_cache[key] = compute_maxmin(self.sc, active)
        oracle = self.oracle_cache[key]
        limited = frozenset(fid for fid in active if oracle.rates[fid] == self.sc.flows[fid].demand)
        self.epoch = EpochReport(index, start, end, active, oracle, self.d_bound, limited)
        self.report.epochs.append(self.epoch)
        self.expected = {(lid, fid) for fid in active for lid in self.sc.crossings(fid)}
        self.trace.add("epoch", self.now, index)
        self.update_t0()

    def on_join(self, fid):
        flow = self.sc.flows[fid]
        self.incarnation[fid] = self.incarnation.get(fid, -1) + 1
        source = Source(
            fid,
            flow.demand,
            self.d_bound,
            Fraction(self.sc.config.initial_actual.get(fid, 0)),
            self.delayed_increase,
            self.incarnation[fid],
        )
        if self.now == 0:
            if fid in self.world.estimates:
                source.rate_estimate = self.world.estimates[fid]
            if fid in self.world.allocations:
                source.last_allocation = self.world.allocations[fid]
        self.sources[fid] = source
        self.trace.add("join", self.now, fid)
        self.trace.add("est", self.now, fid, source.rate_estimate)
        self.trace.add("act", self.now, fid, source.actual_rate)
        self.mark_dirty(fid)
        self.push(self.now, TIMER, fid, source.incarnation)

    def on_leave(self, fid):
        self.sources.pop(fid, None)
        self.trace.add("leave", self.now, fid)
        self.mark_dirty(fid)
        self.hop(fid, 0, None)

    def on_timer(self, fid, incarnation):
        source = self.sources.get(fid)
        if source is None or source.incarnation != incarnation:
            return
        self.hop(fid, 0, source.emit(self.now))
        nxt = self.now + self.sc.control_interval
        stop = self.sc.flows[fid].stop_after(self.now)
        if (stop is None or nxt < stop) and nxt <= self.sc.duration:
            self.push(nxt, TIMER, fid, incarnation)

    def hop(self, fid, index, packet):
        """Packet (or teardown, when ``packet`` is None) arriving at hop ``index`` of its round trip."""
        hops = self.hops[fid]
        if index == len(hops):
            if packet is not None:
                self.deliver(packet)
            return
        if packet is not None and index == self.route_len[fid] and packet.leg is Leg.OUTBOUND:
            packet = destination_reflect(packet)
        lid, weight, _ = hops[index]
        if weight:
            if packet is None:
                self.teardown(fid, lid)
            else:
                packet = self.process(fid, lid, weight, packet)
        self.send(packet, fid, index, self.now)

    def teardown(self, fid, lid):
        state = self.switches.get(lid)
        if state is None or fid not in state.entries:
            return
        state = self.switch(lid)
        before = state.snapshot()
        state.deregister_flow(fid)
        self.registered.discard((lid, fid))
        self.trace.add("dereg", self.now, lid, fid)
        self.after_switch_event(state, before, f"deregister {fid} at {lid}")
        self.update_t0()

    def process(self, fid, lid, weight, packet):
        state = self.switch(lid)
        if fid not in state.entries:
            before = state.snapshot()
            state.register_flow(fid, weight)
            self.registered.add((lid, fid))
            self.trace.add("reg", self.now, lid, fid)
            self.after_switch_event(state, before, f"register {fid} at {lid}")
            self.update_t0()
        before = state.snapshot()
        out = state.process_control_packet(packet)
        self.trace.add("hop", self.now, fid, lid, packet.leg.value, packet.stamped, out.stamped, out.u_bit)
        self.after_switch_event(state, before, f"packet of {fid} at {lid}")
        return out

    def deliver(self, packet: ControlPacket):
        source = self.sources.get(packet.flow)
        if source is None or packet.incarnation != source.incarnation:
            return
        self.trace.add("fb", self.now, packet.flow, packet.stamped, packet.u_bit)
        if packet.sent_at >= 0:
            rtt = self.now - packet.sent_at
            if self.report.max_round_trip is None or rtt > self.report.max_round_trip:
                self.report.max_round_trip = rtt
            if self.monitors.round_trip and rtt + self.sc.control_interval > self.d_bound:
                raise MonitorViolation(
                    self.now, f"feedback of {packet.flow}", f"round trip {rtt} exceeds bound", ""
                )
        estimate, actual, pending = source.rate_estimate, source.actual_rate, source.pending
        source.on_feedback(packet, self.now)
        if source.rate_estimate != estimate:
            self.trace.add("est", self.now, packet.flow, source.rate_estimate)
        if source.actual_rate != actual:
            self.trace.add("act", self.now, packet.flow, source.actual_rate)
            self.mark_dirty(packet.flow)
        if source.pending is not None and source.pending != pending:
            self.push(source.pending.apply_at, PENDING, packet.flow, source.incarnation)

    def on_pending(self, fid, incarnation):
        source = self.sources.get(fid)
        if source is None or source.incarnation != incarnation:
            return
        if source.apply_pending(self.now):
            self.trace.add("act", self.now, fid, source.actual_rate)
            self.mark_dirty(fid)

    # -- feasibility sampling

    def mark_dirty(self, fid):
        self.dirty_links.update(lid for lid, w, _ in self.hops[fid] if w)

    def flush_loads(self):
        if not self.dirty_links:
            return
        for lid in sorted(self.dirty_links):
            load = Fraction(0)
            for fid, source in self.sources.items():
                w = self.sc.crossings(fid).get(lid)
                if w:
                    load += w * source.actual_rate
            self.trace.add("load", self.now, lid, load)
            capacity = self.sc.links[lid].capacity
            if load > capacity:
                self.report.feasibility_violations.append((self.now, lid, load, capacity))
        self.dirty_links.clear()

    # -- main loop

    def run(self):
        if self.sc.duration <= 0:
            return self.trace, self.report
        self.boundaries = epoch_boundaries(self.sc) if self.sc.flows else []
        for i, t in enumerate(self.boundaries):
            self.push(t, EPOCH, "", i)
        for fid, flow in self.sc.flows.items():
            for start, stop in flow.periods:
                if start <= self.sc.duration:
                    self.push(start, JOIN, fid)
                if stop is not None and stop <= self.sc.duration:
                    self.push(stop, LEAVE, fid)
        for at, hop, packet in sorted(self.world.in_flight, key=lambda x: (x[0], x[2].flow, x[1])):
            key = (packet.flow, hop)
            self.last_arrival[key] = max(at, self.last_arrival.get(key, at))
            self.push(at, PACKET, packet.flow, (hop, packet))

        while self.queue and self.queue[0][0] <= self.sc.duration:
            at, rank, fid, _, payload = heapq.heappop(self.queue)
            if at > self.now:
                self.flush_loads()
            self.now = at
            if rank == EPOCH:
                self.on_epoch(payload)
            elif rank == LEAVE:
                self.on_leave(fid)
            elif rank == JOIN:
                self.on_join(fid)
            elif rank == PACKET:
                self.hop(fid, *payload)
            elif rank == PENDING:
                self.on_pending(fid, payload)
            elif rank == TIMER:
                self.on_timer(fid, payload)
        self.flush_loads()

        for epoch in self.report.epochs:
            epoch.converged_at = _converged_at(self.trace, epoch)
        return self.trace, self.report


def run(
    scenario: Scenario,
    world: Optional[World] = None,
    delayed_increase: bool = True,
    monitors: Optional[Monitors] = None,
) -> tuple[SimTrace, ConvergenceReport]:
    """Simulate ``scenario`` up to its duration; raises :class:`MonitorViolation` on a broken invariant."""
    engine = _Engine(scenario, world or initial_world(scenario), delayed_increase, monitors or Monitors())
    return engine.run()


def _estimates_before(trace: SimTrace, t) -> dict[str, object]:
    current = {}
    for record in trace.records:
        if record[1] >= t:
            break
        if record[0] == "est":
            current[record[2]] = record[3]
        elif record[0] == "leave":
            current.pop(record[2], None)
    return current


def _converged_at(trace: SimTrace, epoch: EpochReport) -> Optional[Fraction]:
    offset = convergence_time(trace, epoch, epoch.oracle.rates)
    return None if offset is None else epoch.start + offset


def convergence_time(trace: SimTrace, epoch: EpochReport, oracle_rates: Mapping[str, Fraction]):
    """Offset from the epoch start after which every estimate equals its oracle rate.

    Returns ``None`` if the estimates do not all sit on the oracle rates at
    the end of the epoch.
    """
    current = _estimates_before(trace, epoch.start)
    settled = epoch.start
    for record in trace.records:
        t = record[1]
        if t < epoch.start:
            continue
        if t >= epoch.end:
            break
        if record[0] == "est":
            if current.get(record[2]) != record[3]:
                settled = t
            current[record[2]] = record[3]
        elif record[0] == "leave":
            current.pop(record[2], None)
    for fid in epoch.active:
        if current.get(fid) != oracle_rates[fid]:
            return None
    return settled - epoch.start


def feasibility_monitor(trace: SimTrace, scenario: Scenario) -> list[tuple]:
    """Load samples (time, link, load, capacity) exceeding link capacity."""
    out = []
    for record in trace.records:
        if record[0] == "load":
            _, t, lid, load = record
            capacity = scenario.links[lid].capacity
            if load > capacity:
                out.append((t, lid, load, capacity))
    return out


def fixed_point_violations(trace: SimTrace, report: ConvergenceReport) -> list[str]:
    """State changes or clear u-bits after an epoch has converged and settled.

    Switch state may still gain restricted marks during the first two round
    trips after the estimates settle; the check starts after that.
    Returning packets are checked from one round trip after settling, for
    flows whose demand exceeds their oracle rate.
    """
    problems = []
    d = report.d_bound
    for epoch in report.epochs:
        if epoch.converged_at is None:
            continue
        quiet_from = epoch.converged_at + 2 * d
        ubit_from = epoch.converged_at + d
        for record in trace.records:
            kind, t = record[0], record[1]
            if t >= epoch.end:
                break
            if kind in ("mu", "mark", "est") and t >= quiet_from:
                problems.append(f"epoch {epoch.index}: {kind} change at {t} after convergence: {record[2:]}")
            elif kind == "fb" and t >= ubit_from and record[2] not in epoch.demand_limited and record[4] != 1:
                problems.append(f"epoch {epoch.index}: clear u-bit for {record[2]} at {t}")
    return problems

