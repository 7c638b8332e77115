from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from explicitrate.model import link_load
from explicitrate.oracle import (
    bottleneck_levels,
    capacity_per_flow,
    check_level_properties,
    compute_maxmin,
    verify_maxmin,
)
from explicitrate.scenarios import chain, dynamic_experiment, feedback_pair, finite_demand, random_scenario, single_link


def lp_maxmin(scenario, flow_ids=None):
    """Lexicographic maxmin by repeated LPs in floating point.

    Raise a common floor for all unfrozen flows as far as capacities allow,
    then freeze every flow that cannot individually exceed the floor.
    """
    fids = sorted(scenario.flows if flow_ids is None else flow_ids)
    idx = {f: i for i, f in enumerate(fids)}
    n = len(fids)
    rows, caps = [], []
    for lid, link in sorted(scenario.links.items()):
        row = np.zeros(n)
        for f in fids:
            row[idx[f]] = float(scenario.crossings(f).get(lid, 0))
        if row.any():
            rows.append(row)
            caps.append(float(link.capacity))
    A, b = np.array(rows), np.array(caps)
    upper = [None if scenario.flows[f].demand == float("inf") else float(scenario.flows[f].demand) for f in fids]
    frozen: dict[int, float] = {}
    while len(frozen) < n:
        # variables: rates then the floor t; maximize t
        free = [i for i in range(n) if i not in frozen]
        c = np.zeros(n + 1)
        c[-1] = -1
        A_ub = [np.append(r, 0) for r in A]
        b_ub = list(b)
        for i in free:
            row = np.zeros(n + 1)
            row[i], row[-1] = -1, 1
            A_ub.append(row)
            b_ub.append(0)
        bounds = [(frozen[i], frozen[i]) if i in frozen else (0, upper[i]) for i in range(n)] + [(0, None)]
        res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, bounds=bounds)
        t = res.x[-1]
        for i in free:
            c2 = np.zeros(n + 1)
            c2[i] = -1
            bounds2 = [(frozen[j], frozen[j]) if j in frozen else (t - 1e-9, upper[j]) for j in range(n)] + [(0, 0)]
            res2 = linprog(c2, A_ub=np.array([np.append(r, 0) for r in A]), b_ub=b, bounds=bounds2)
            if -res2.fun <= t + 1e-7:
                frozen[i] = t
    return {f: frozen[idx[f]] for f in fids}


class TestCapacityPerFlow:
    def test_equal_share(self):
        for k in (0, F(1, 2), 3):
            assert capacity_per_flow(60, 3, 0, k) == 20

    def test_half_weight(self):
        assert capacity_per_flow(100, 2, 2, F(1, 2)) == F(100, 3)

    def test_unit_weight(self):
        assert capacity_per_flow(40, 1, 3, 1) == 10


class TestComputeMaxmin:
    def test_single_link(self):
        sol = compute_maxmin(single_link())
        assert sol.rates == {"f1": 10, "f2": 10, "f3": 10}
        assert sol.n_levels == 1

    def test_chain(self):
        sol = compute_maxmin(chain())
        assert sol.rates == {"A": 5, "B": 5, "C": 95}
        assert bottleneck_levels(sol) == (2, (5, 95))

    def test_feedback_weighting(self):
        sol = compute_maxmin(feedback_pair(k=2))
        assert sol.rates == {"A": 10, "B": 10}
        assert sol.levels[0].links == {"x->y"}

    def test_finite_demand(self):
        sol = compute_maxmin(finite_demand())
        assert sol.rates == {"A": 5, "B": F(25, 2), "C": F(25, 2)}
        assert sol.levels[0].demand_limited == {"A"}
        assert not sol.levels[0].links

    def test_empty_flow_set(self):
        sol = compute_maxmin(chain(), [])
        assert sol.rates == {} and sol.n_levels == 0

    @pytest.mark.parametrize(
        "at, expected",
        [
            (0, {"1": 40, "2": 20, "3": 20, "4": 20, "5": 60}),
            (15, {"1": 30, "2": 30, "4": 30, "5": 60}),
            (48, {"4": 60, "5": 60}),
            (67, {"1": 50, "4": 50, "5": 50}),
        ],
    )
    def test_dynamic_epochs(self, at, expected):
        # optimal rates per epoch as tabulated for the join/leave experiment
        sc = dynamic_experiment()
        assert compute_maxmin(sc, sc.active_flows(F(at))).rates == expected

    def test_dynamic_first_epoch_has_three_levels(self):
        sc = dynamic_experiment()
        assert bottleneck_levels(compute_maxmin(sc, sc.active_flows(0))) == (3, (20, 40, 60))


class TestVerify:
    @pytest.mark.parametrize("build", [single_link, chain, feedback_pair, finite_demand, dynamic_experiment])
    def test_oracle_passes(self, build):
        sc = build()
        assert verify_maxmin(sc, compute_maxmin(sc).rates) is None

    def test_infeasible(self):
        cx = verify_maxmin(chain(), {"A": F(5), "B": F(6), "C": F(94)})
        assert cx.kind == "infeasible" and cx.link == "a->b"

    def test_not_maxmin(self):
        cx = verify_maxmin(chain(), {"A": F(4), "B": F(6), "C": F(94)})
        assert cx.kind == "not_maxmin" and cx.flow == "A"

    def test_underused(self):
        cx = verify_maxmin(single_link(), {"f1": F(10), "f2": F(10), "f3": F(9)})
        assert cx.kind == "not_maxmin"  # link not saturated, any flow can grow

    def test_missing_and_demand(self):
        assert verify_maxmin(chain(), {"A": F(5), "B": F(5)}).kind == "missing"
        assert verify_maxmin(finite_demand(), {"A": F(6), "B": F(12), "C": F(12)}).kind == "demand"

    @pytest.mark.parametrize("seed", range(20))
    def test_inflating_any_rate_fails(self, seed):
        sc = random_scenario(seed)
        rates = compute_maxmin(sc).rates
        for fid in rates:
            bumped = dict(rates, **{fid: rates[fid] + 1})
            assert verify_maxmin(sc, bumped) is not None


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_random_networks(self, seed):
        sc = random_scenario(seed)
        sol = compute_maxmin(sc)
        assert verify_maxmin(sc, sol.rates) is None
        assert check_level_properties(sc, sol) == []
        for lid in sc.links:
            assert link_load(sol.rates, lid, sc) <= sc.links[lid].capacity

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000), st.randoms(use_true_random=False))
    def test_flow_order_irrelevant(self, seed, rnd):
        sc = random_scenario(seed)
        ids = list(sc.flows)
        rnd.shuffle(ids)
        assert compute_maxmin(sc, ids).rates == compute_maxmin(sc).rates

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_lp(self, seed):
        sc = random_scenario(seed)
        exact = compute_maxmin(sc).rates
        approx = lp_maxmin(sc)
        for fid in exact:
            assert float(exact[fid]) == pytest.approx(approx[fid], rel=1e-6, abs=1e-6)
