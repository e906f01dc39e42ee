import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxlearn.acceptance import stopping_bruteforce
from ctxlearn.policies import (
    PandoraInstance,
    PandoraPolicy,
    PricePolicy,
    StoppingPolicy,
    check_stability,
    check_strong_monotonicity,
    deploy_learned,
    evaluate_pandora,
    evaluate_pandora_bruteforce,
    evaluate_stopping,
    fair_cap,
    optimal_price,
    policy_from_dict,
    revenue,
    stopping_thresholds,
    weitzman_policy,
)
from ctxlearn.valuedist import DiscreteValueDistribution

from conftest import value_dists

D = DiscreteValueDistribution
PM = D.point_mass
U01 = D.uniform([0.0, 1.0])


class TestRevenue:
    def test_examples(self):
        assert revenue(PM(0.7), 0.7) == pytest.approx(0.7)
        assert revenue(D.uniform([0.4, 0.8]), 0.8) == pytest.approx(0.4)
        assert revenue(U01, 0.0) == 0.0

    def test_optimal_price_examples(self):
        assert optimal_price(PM(0.7)) == pytest.approx((0.7, 0.7))
        assert optimal_price(D.uniform([0.4, 0.8])) == pytest.approx((0.4, 0.4))
        assert optimal_price(D([0.4, 1.0], [0.5, 0.5])) == pytest.approx((1.0, 0.5))

    @given(value_dists())
    def test_beats_price_grid(self, d):
        p = np.linspace(0, 1, 1001)
        assert optimal_price(d)[1] >= np.max(p * d.survival(p)) - 1e-12


class TestPandora:
    def test_fair_cap_examples(self):
        assert fair_cap(PM(1.0), 0.25) == pytest.approx(0.75)
        assert fair_cap(D.uniform([0.2, 1.0]), 0.1) == pytest.approx(0.8)
        assert fair_cap(D.uniform([0.2, 1.0]), 0.7) == pytest.approx(-0.1)
        assert fair_cap(D.uniform([0.2, 1.0]), 0.0) == 1.0

    @given(value_dists(), st.floats(0.001, 0.8))
    def test_fair_cap_solves_equation(self, d, o):
        sigma = fair_cap(d, o)
        assert float(d.weights @ np.maximum(0.0, d.atoms - sigma)) == pytest.approx(o, abs=1e-12) or sigma < d.atoms[0]

    def test_weitzman_examples(self):
        one = weitzman_policy(PandoraInstance((PM(1.0),), (0.25,)))
        assert one.fair_caps == pytest.approx((0.75,)) and one.visit_order == (0,)
        two = weitzman_policy(PandoraInstance((PM(0.5), PM(1.0)), (0.0, 0.6)))
        assert two.fair_caps == pytest.approx((0.5, 0.4)) and two.visit_order == (0, 1)
        tie = weitzman_policy(PandoraInstance((PM(0.5), PM(0.5)), (0.1, 0.1)))
        assert tie.visit_order == (0, 1)

    def test_evaluate_examples(self):
        assert evaluate_pandora(PandoraInstance((), ()), PandoraPolicy(())).value == 0.0
        inst = PandoraInstance((PM(1.0),), (0.25,))
        assert evaluate_pandora(inst, weitzman_policy(inst)).value == pytest.approx(0.75)
        inst = PandoraInstance((PM(0.5), PM(1.0)), (0.0, 0.6))
        assert evaluate_pandora(inst, PandoraPolicy((0.5, 0.4))).value == pytest.approx(0.5)

    def test_exact_matches_bruteforce(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 5))
            boxes = tuple(D(rng.random(3), rng.dirichlet(np.ones(3))) for _ in range(n))
            inst = PandoraInstance(boxes, tuple(rng.uniform(0, 0.4, n)))
            for pol in (weitzman_policy(inst), PandoraPolicy(tuple(rng.uniform(-0.2, 1, n)))):
                assert evaluate_pandora(inst, pol).value == pytest.approx(
                    evaluate_pandora_bruteforce(inst, pol), abs=1e-9)

    def test_monte_carlo_fallback(self, rng):
        boxes = tuple(D(rng.random(4), rng.dirichlet(np.ones(4))) for _ in range(3))
        inst = PandoraInstance(boxes, (0.05, 0.1, 0.02))
        pol = weitzman_policy(inst)
        exact = evaluate_pandora(inst, pol).value
        mc = evaluate_pandora(inst, pol, budget=10, rng=np.random.default_rng(0))
        assert not mc.exact and mc.stderr > 0
        assert abs(mc.value - exact) <= 5 * mc.stderr

    def test_weitzman_beats_random_caps(self, rng):
        boxes = tuple(D(rng.random(3), rng.dirichlet(np.ones(3))) for _ in range(3))
        inst = PandoraInstance(boxes, (0.1, 0.05, 0.2))
        best = evaluate_pandora(inst, weitzman_policy(inst)).value
        for _ in range(200):
            other = PandoraPolicy(tuple(rng.uniform(-0.2, 1.2, 3)))
            assert evaluate_pandora(inst, other).value <= best + 1e-12

    def test_rejects_bad_costs(self):
        with pytest.raises(ValueError):
            PandoraInstance((PM(0.5),), (-0.1,))
        with pytest.raises(ValueError):
            fair_cap(PM(0.5), -1.0)


class TestStopping:
    def test_threshold_examples(self):
        assert stopping_thresholds([PM(0.3)]).thresholds == (0.0,)
        assert stopping_thresholds([U01, U01]).thresholds == pytest.approx((0.5, 0.0))
        assert stopping_thresholds([U01, U01, U01]).thresholds == pytest.approx((0.75, 0.5, 0.0))

    def test_evaluate_examples(self):
        assert evaluate_stopping([PM(0.3)], StoppingPolicy((0.0,))) == pytest.approx(0.3)
        assert evaluate_stopping([U01, U01], StoppingPolicy((0.5, 0.0))) == pytest.approx(0.75)
        assert evaluate_stopping([U01, U01], StoppingPolicy((1.1, 0.0))) == pytest.approx(0.5)

    def test_accepts_at_equality(self):
        assert evaluate_stopping([PM(0.5), PM(0.9)], StoppingPolicy((0.5, 0.0))) == pytest.approx(0.5)

    @settings(max_examples=40)
    @given(st.lists(value_dists(3), min_size=1, max_size=3))
    def test_matches_enumeration_and_beats_random(self, ds):
        pol = stopping_thresholds(ds)
        v = evaluate_stopping(ds, pol)
        assert v == pytest.approx(stopping_bruteforce(ds, pol.thresholds), abs=1e-9)
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert evaluate_stopping(ds, StoppingPolicy(tuple(rng.random(len(ds))))) <= v + 1e-12


class TestDeploy:
    def test_revenue(self):
        assert deploy_learned("revenue", [PM(0.5)], 0.0) == PricePolicy(0.5)
        assert deploy_learned("revenue", [PM(0.5)], 0.1).price == pytest.approx(0.4)

    def test_stopping_no_shift(self):
        ds = [U01, D.uniform([0.2, 0.6])]
        assert deploy_learned("stopping", ds, 0.0) == stopping_thresholds(ds)

    def test_problem_checks(self):
        with pytest.raises(ValueError, match="exactly one"):
            deploy_learned("revenue", [PM(0.5), PM(0.2)], 0.0)
        with pytest.raises(ValueError, match="costs"):
            deploy_learned("pandora", [PM(0.5)], 0.0)
        with pytest.raises(ValueError, match="unknown"):
            deploy_learned("auction", [PM(0.5)], 0.0)

    def test_policy_round_trip(self):
        for pol in (PricePolicy(0.3), PandoraPolicy((0.5, 0.2)), StoppingPolicy((0.4, 0.0))):
            assert policy_from_dict(pol.to_dict()) == pol


class TestMonotonicityStability:
    def test_equal_distributions(self):
        ds = [D.uniform([0.2, 0.7])]
        rep = check_strong_monotonicity("revenue", ds, ds)
        assert rep.lhs == rep.rhs and rep.holds
        st_rep = check_stability("revenue", ds, ds)
        assert st_rep.opt_d == st_rep.opt_dp and st_rep.eps == 0.0 and st_rep.holds

    def test_stopping_point_masses(self):
        a = [0.6, 0.3, 0.8]
        eps = 0.1
        rep = check_strong_monotonicity("stopping", [PM(x) for x in a], [PM(x - eps) for x in a])
        # thresholds on the lowered values are (0.7, 0.7, 0): only the last box is taken
        assert rep.rhs == pytest.approx(0.7) and rep.lhs == pytest.approx(0.8)

    def test_rejects_non_dominating(self):
        with pytest.raises(ValueError, match="dominate"):
            check_strong_monotonicity("revenue", [PM(0.2)], [PM(0.5)])

    @settings(max_examples=40, deadline=None)
    @given(value_dists(4), value_dists(4))
    def test_single_buyer_stability_random_pairs(self, a, b):
        assert check_stability("revenue", [a], [b]).holds

    def test_pandora_two_boxes(self, rng):
        for _ in range(50):
            ds = [D(rng.random(3), rng.dirichlet(np.ones(3))) for _ in range(2)]
            dps = [d.shift_plus_eps(0.05) for d in ds]
            costs = (0.1, 0.05)
            assert check_stability("pandora", ds, dps, gamma=8, costs=costs).holds
            assert check_strong_monotonicity("pandora", ds, dps, costs).holds
