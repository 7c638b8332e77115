from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explicitrate.endpoint import ControlPacket, Leg
from explicitrate.model import FlowSpec, ScenarioConfig, validate_scenario
from explicitrate.oracle import compute_maxmin
from explicitrate.scenarios import bidirectional, chain, dynamic_experiment, feedback_pair, finite_demand, single_link
from explicitrate.simulator import (
    Monitors,
    MonitorViolation,
    World,
    convergence_time,
    feasibility_monitor,
    fixed_point_violations,
    inject_initial_conditions,
    run,
)
from explicitrate.switch import LinkControlState


def final_estimates(trace):
    est = {}
    for record in trace.records:
        if record[0] == "est":
            est[record[2]] = record[3]
        elif record[0] == "leave":
            est.pop(record[2], None)
    return est


class TestRun:
    def test_single_link(self):
        sc = single_link()
        trace, report = run(sc)
        (epoch,) = report.epochs
        assert final_estimates(trace) == {"f1": 10, "f2": 10, "f3": 10}
        assert epoch.convergence_time <= 4 * 1 * sc.d_bound
        assert fixed_point_violations(trace, report) == []
        late = [r for r in trace.of_kind("fb") if r[1] >= epoch.converged_at + sc.d_bound]
        assert late and all(r[4] == 1 for r in late)

    def test_chain(self):
        sc = chain()
        trace, report = run(sc)
        assert final_estimates(trace) == {"A": 5, "B": 5, "C": 95}
        assert report.epochs[0].n_levels == 2
        assert report.epochs[0].convergence_time <= 4 * 2 * sc.d_bound

    @pytest.mark.parametrize("k", [F(1, 2), F(1), F(2)])
    def test_feedback_weighting(self, k):
        sc = feedback_pair(k=k)
        trace, report = run(sc)
        assert final_estimates(trace) == compute_maxmin(sc).rates
        assert report.within_budget

    def test_finite_demand_u_bit(self):
        trace, report = run(finite_demand())
        assert final_estimates(trace) == {"A": 5, "B": F(25, 2), "C": F(25, 2)}
        assert report.epochs[0].demand_limited == {"A"}
        assert fixed_point_violations(trace, report) == []

    def test_no_flows(self):
        sc = validate_scenario(ScenarioConfig(links=tuple(bidirectional("a", "b", 1)), flows=()))
        trace, report = run(sc)
        assert len(trace) == 0 and report.epochs == []
        assert trace.dumps() == "# explicitrate-trace v1\n"

    def test_zero_duration(self):
        sc = validate_scenario(replace(single_link().config, duration=F(0)))
        trace, report = run(sc)
        assert len(trace) == 0 and report.epochs == []

    def test_round_trip_within_bound(self):
        sc = single_link()
        _, report = run(sc)
        assert report.max_round_trip == 2 and report.max_round_trip + sc.control_interval <= sc.d_bound


class TestDynamic:
    def test_epochs_follow_oracle(self):
        sc = dynamic_experiment()
        trace, report = run(sc)
        assert [e.start for e in report.epochs] == [0, 15, 48, 67]
        assert [e.active for e in report.epochs] == [
            ("1", "2", "3", "4", "5"),
            ("1", "2", "4", "5"),
            ("4", "5"),
            ("1", "4", "5"),
        ]
        assert all(e.within_budget for e in report.epochs)
        assert fixed_point_violations(trace, report) == []

    def test_rejoin_uses_new_incarnation(self):
        trace, _ = run(dynamic_experiment())
        joins = [r[1] for r in trace.of_kind("join") if r[2] == "1"]
        assert joins == [0, 67]
        regs = [r for r in trace.of_kind("reg") if r[3] == "1"]
        deregs = [r for r in trace.of_kind("dereg") if r[3] == "1"]
        assert len(regs) == 4 and len(deregs) == 2  # two forward links, registered twice

    def test_teardown_clears_switches(self):
        trace, _ = run(dynamic_experiment())
        for fid in ("2", "3"):
            regs = {r[2] for r in trace.of_kind("reg") if r[3] == fid}
            deregs = {r[2] for r in trace.of_kind("dereg") if r[3] == fid}
            assert regs == deregs


class TestPerturbation:
    @pytest.mark.parametrize("seed", range(8))
    def test_single_link_recovers(self, seed):
        sc = single_link()
        world = inject_initial_conditions(sc, seed)
        trace, report = run(sc, world)
        assert final_estimates(trace) == {"f1": 10, "f2": 10, "f3": 10}
        assert report.within_budget

    def test_zero_rate_garbage_absorbed(self):
        sc = single_link()
        garbage = ControlPacket("f1", Leg.OUTBOUND, F(0), 0, F(-1))
        world = World(in_flight=[(F(1, 2), 0, garbage), (F(1, 2), 1, replace(garbage, leg=Leg.RETURNING))])
        trace, report = run(sc, world)
        assert final_estimates(trace) == {"f1": 10, "f2": 10, "f3": 10}
        assert report.converged

    def test_identity_injection(self):
        sc = chain()
        assert run(sc, World())[0].dumps() == run(sc)[0].dumps()

    def test_injection_is_seeded(self):
        sc = chain()
        a = inject_initial_conditions(sc, 4)
        b = inject_initial_conditions(sc, 4)
        assert a.estimates == b.estimates and a.in_flight == b.in_flight
        assert {lid: s.snapshot() for lid, s in a.switches.items()} == {
            lid: s.snapshot() for lid, s in b.switches.items()
        }


class TestConvergenceTime:
    def test_correct_from_start(self):
        flows = (FlowSpec.from_path("f", "ab", demand=F(5)),)
        sc = validate_scenario(ScenarioConfig(links=tuple(bidirectional("a", "b", 30, 1)), flows=flows, duration=F(20)))
        trace, report = run(sc)
        assert convergence_time(trace, report.epochs[0], {"f": F(5)}) == 0

    def test_not_converged(self):
        sc = single_link()
        trace, report = run(sc)
        assert convergence_time(trace, report.epochs[0], {"f1": F(9), "f2": F(10), "f3": F(10)}) is None

    def test_too_short_to_converge(self):
        sc = validate_scenario(replace(chain().config, duration=F(3)))
        _, report = run(sc)
        assert not report.converged


class TestFeasibility:
    def test_zero_start_no_violations(self):
        trace, report = run(single_link())
        assert feasibility_monitor(trace, single_link()) == [] == report.feasibility_violations

    def test_negative_control(self):
        sc = single_link()
        trace, report = run(sc, delayed_increase=False)
        assert feasibility_monitor(trace, sc)
        t, lid, load, capacity = report.feasibility_violations[0]
        assert lid == "a->b" and load > capacity

    def test_feasible_start_stays_feasible(self):
        sc = validate_scenario(replace(single_link().config, initial_actual={"f1": F(30)}))
        trace, report = run(sc)
        assert report.feasibility_violations == []
        assert report.converged

    def test_no_flows(self):
        sc = validate_scenario(ScenarioConfig(links=tuple(bidirectional("a", "b", 1)), flows=()))
        assert feasibility_monitor(run(sc)[0], sc) == []


class TestMonitors:
    def test_broken_switch_caught(self, monkeypatch):
        def broken(self, prefer=None):
            self.mu = self.capacity + 1
            return self.mu

        monkeypatch.setattr(LinkControlState, "compute_advertized_rate", broken)
        with pytest.raises(MonitorViolation, match="condition 2"):
            run(single_link())

    def test_m_consistency_can_be_disabled(self, monkeypatch):
        def broken(self, prefer=None):
            self.mu = self.capacity + 1
            return self.mu

        monkeypatch.setattr(LinkControlState, "compute_advertized_rate", broken)
        run(single_link(), monitors=Monitors(m_consistency=False))

    def test_fair_share_floor_caught(self, monkeypatch):
        monkeypatch.setattr(LinkControlState, "fair_share_floor", lambda self: self.capacity + 1)
        with pytest.raises(MonitorViolation, match="below fair share"):
            run(single_link())

    def test_round_trip_bound_caught(self):
        sc = replace(single_link(), d_bound=F(2))
        with pytest.raises(MonitorViolation, match="round trip"):
            run(sc)


class TestDeterminism:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 1000))
    def test_same_seed_same_trace(self, seed):
        sc = dynamic_experiment(seed=seed, jitter=F(1, 8))
        assert run(sc)[0].dumps() == run(sc)[0].dumps()

    def test_seed_drives_jitter(self):
        a = run(dynamic_experiment(seed=1, jitter=F(1, 8)))[0].dumps()
        b = run(dynamic_experiment(seed=2, jitter=F(1, 8)))[0].dumps()
        assert a != b
