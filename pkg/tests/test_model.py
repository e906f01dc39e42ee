import numpy as np
import pytest

from ctxlearn.model import (
    ContextDistribution,
    InstanceSpec,
    RewardFunction,
    WeightDistribution,
    certify_lipschitz,
    draw_samples,
    eval_reward,
    induced_value_distribution,
)
from ctxlearn.valuedist import DiscreteValueDistribution

LIN1 = RewardFunction.linear(1)


class TestWeightDistribution:
    def test_uniform(self):
        w = WeightDistribution.uniform([[0.1, 0.2], [0.3, 0.4]])
        assert w.k == 2 and w.dim == 2 and w.is_uniform()

    def test_rejects_out_of_box(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            WeightDistribution.uniform([[1.2]])

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError, match="sum"):
            WeightDistribution(np.array([[0.1], [0.2]]), np.array([0.5, 0.6]))

    def test_round_trip(self):
        w = WeightDistribution(np.array([[0.1, 0.9], [0.5, 0.5]]), np.array([0.25, 0.75]))
        back = WeightDistribution.from_dict(w.to_dict())
        assert np.array_equal(back.atoms, w.atoms) and np.array_equal(back.weights, w.weights)


class TestContextDistribution:
    def test_product_grid_levels(self):
        c = ContextDistribution.product_uniform(2, 0.25)
        np.testing.assert_allclose(c.grid_levels(), [0, 0.25, 0.5, 0.75, 1.0])
        xs = c.sample(np.random.default_rng(0), 500)
        assert set(np.unique(xs)) <= {0, 0.25, 0.5, 0.75, 1.0}

    def test_step_must_divide_one(self):
        with pytest.raises(ValueError, match="divide"):
            ContextDistribution.product_uniform(1, 0.3)

    def test_finite_default_weights(self):
        c = ContextDistribution.finite([[0.0], [1.0]])
        assert c.weights.tolist() == [0.5, 0.5]


class TestReward:
    def test_examples(self):
        lin = RewardFunction.linear(2)
        assert eval_reward(lin, [0.5, 0.5], [1, 1]) == 1.0
        assert eval_reward(lin, [0.3, 0.9], [0, 0]) == 0.0
        assert eval_reward(RewardFunction.gate(), [1, 0.8], [1, 0.4]) == 0.0

    def test_constants(self):
        lin = RewardFunction.linear(3)
        assert lin.c_max == 3 and lin.xi == pytest.approx(np.sqrt(3))
        assert not RewardFunction.gate().convex

    def test_dimension_mismatch_names_sizes(self):
        with pytest.raises(ValueError, match="d=2"):
            eval_reward(RewardFunction.linear(2), [0.1], [0.1, 0.2])

    def test_max_affine_clamps_and_counts(self):
        f = RewardFunction.max_affine([[1.0], [-1.0]], intercepts=[0.5, -0.2], c_max=1.0)
        assert eval_reward(f, [0.2], [0.0]) == pytest.approx(0.7)
        assert eval_reward(f, [0.9], [0.0]) == 1.0
        assert f.clamps.count >= 1

    def test_grad_matches_finite_difference(self, rng):
        f = RewardFunction.max_affine(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), [0.5, 0.6, 0.7], c_max=5)
        V, X = rng.random((4, 2)), rng.random((3, 2))
        _, g = f.grad_v(V, X)
        h = 1e-7
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            fd = (f.values(V + step, X) - f.values(V - step, X)) / (2 * h)
            np.testing.assert_allclose(g[:, :, j], fd, atol=1e-6)

    def test_dict_round_trip(self):
        f = RewardFunction.max_affine([[0.5, 0.5]], [[0.1, 0.0]], [0.2], c_max=2.0)
        g = RewardFunction.from_dict(f.to_dict())
        assert g.kind == f.kind and np.array_equal(g.slopes, f.slopes) and g.c_max == 2.0


class TestSampling:
    def test_zero_samples(self, rng):
        assert draw_samples(WeightDistribution.uniform([[0.5]]), ContextDistribution.finite([[1.0]]), LIN1, 0, rng) == []

    def test_degenerate_copies(self, rng):
        S = draw_samples(WeightDistribution.point_mass([0.3, 0.6]), ContextDistribution.finite([[0.5, 1.0]]),
                         RewardFunction.linear(2), 5, rng)
        assert all(s.context == (0.5, 1.0) and s.label == pytest.approx(0.75) for s in S)

    def test_label_mean_clt(self, rng):
        V = WeightDistribution.uniform([[0.2, 0.4], [0.8, 0.6]])
        X = ContextDistribution.product_uniform(2, 0.5)
        S = draw_samples(V, X, RewardFunction.linear(2), 10**4, rng)
        y = np.array([s.label for s in S])
        # E<v, x> = <E v, E x> by independence
        expected = V.atoms.mean(axis=0) @ np.array([0.5, 0.5])
        assert abs(y.mean() - expected) <= 3 * y.std() / np.sqrt(y.size)

    def test_deterministic(self):
        V = WeightDistribution.uniform([[0.2], [0.8]])
        X = ContextDistribution.product_uniform(1, 0.25)
        a = draw_samples(V, X, LIN1, 20, np.random.default_rng(5))
        b = draw_samples(V, X, LIN1, 20, np.random.default_rng(5))
        assert a == b


class TestInducedDistribution:
    V = WeightDistribution.uniform([[0.2], [0.8]])

    def test_identity_context(self):
        d = induced_value_distribution(self.V, LIN1, [1.0])
        assert d == DiscreteValueDistribution([0.2, 0.8], [0.5, 0.5])

    def test_zero_context_merges(self):
        d = induced_value_distribution(self.V, LIN1, [0.0])
        assert d.atoms.tolist() == [0.0] and d.weights.tolist() == [1.0]

    def test_scaled(self):
        d = induced_value_distribution(self.V, LIN1, [0.5])
        np.testing.assert_allclose(d.atoms, [0.1, 0.4])


class TestLipschitz:
    def test_linear_within_declared(self, rng):
        rep = certify_lipschitz(RewardFunction.linear(2), 2000, rng)
        assert rep.max_ratio_v <= np.sqrt(2) + 1e-9 and not rep.exceeds_v

    def test_constant_reward_has_zero_ratio(self, rng):
        f = RewardFunction.max_affine([[0.0, 0.0]], intercepts=[0.4], c_max=1.0)
        assert certify_lipschitz(f, 200, rng).max_ratio_v == 0.0

    def test_gate_flagged(self, rng):
        assert certify_lipschitz(RewardFunction.gate(), 100, rng).nonconvex


class TestInstanceSpec:
    def test_dimension_check(self):
        with pytest.raises(ValueError, match="dimension"):
            InstanceSpec((WeightDistribution.uniform([[0.5]]),), ContextDistribution.finite([[0.5, 0.5]]),
                         RewardFunction.linear(2))

    def test_errors_name_field(self):
        inst = InstanceSpec((WeightDistribution.uniform([[0.5]]),), ContextDistribution.finite([[1.0]]), LIN1)
        data = inst.to_dict()
        data["weights"][0]["weights"] = [2.0]
        with pytest.raises(ValueError, match=r"weights\[0\]"):
            InstanceSpec.from_dict(data)
        data = inst.to_dict()
        del data["reward"]
        with pytest.raises(ValueError, match="'reward'"):
            InstanceSpec.from_dict(data)
