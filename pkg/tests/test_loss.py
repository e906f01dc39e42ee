import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxlearn.loss import (
    cap_grid,
    empirical_loss,
    loss_gap_decomposition,
    loss_subgradient,
    mean_shift_identity,
    sample_loss,
    true_loss_at_context,
)
from ctxlearn.model import LabeledSample, RewardFunction, WeightDistribution

LIN1 = RewardFunction.linear(1)
U01 = WeightDistribution.uniform([[0.0], [1.0]])
HALF_GRID = cap_grid(1.0, 0.5)


class TestCapGrid:
    @pytest.mark.parametrize(
        "c_max, eps, expected",
        [(1, 0.25, [0, 0.25, 0.5, 0.75]), (1, 1, [0]), (1, 0.3, [0, 0.3, 0.6, 0.9]), (2, 0.5, [0, 0.5, 1, 1.5])],
    )
    def test_examples(self, c_max, eps, expected):
        np.testing.assert_allclose(cap_grid(c_max, eps).values, expected)

    def test_float_step_not_dropping_or_adding(self):
        assert len(cap_grid(1.0, 0.1)) == 10

    @pytest.mark.parametrize("c_max, eps", [(1, 0), (0, 0.1), (1, 2)])
    def test_rejects(self, c_max, eps):
        with pytest.raises(ValueError):
            cap_grid(c_max, eps)


class TestSampleLoss:
    def test_perfect_point_mass(self):
        V = WeightDistribution.point_mass([0.4])
        assert sample_loss(V, LabeledSample((1.0,), 0.4), LIN1, cap_grid(1, 0.25)) == 0.0

    def test_examples(self):
        s1 = LabeledSample((1.0,), 0.5)
        s2 = LabeledSample((1.0,), 1.0)
        assert sample_loss(U01, s1, LIN1, HALF_GRID) == pytest.approx(0.0625)
        assert sample_loss(U01, s2, LIN1, HALF_GRID) == pytest.approx(0.3125)
        assert empirical_loss(U01, [s1, s2], LIN1, HALF_GRID) == pytest.approx(0.1875)

    def test_repeated_sample(self):
        s = LabeledSample((0.7,), 0.2)
        assert empirical_loss(U01, [s] * 7, LIN1, HALF_GRID) == pytest.approx(sample_loss(U01, s, LIN1, HALF_GRID))

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            empirical_loss(U01, [], LIN1, HALF_GRID)


class TestTrueLoss:
    def test_point_mass_truth_is_zero(self):
        V = WeightDistribution.point_mass([0.3])
        assert true_loss_at_context(V, V, LIN1, [1.0], HALF_GRID) == pytest.approx(0.0)

    def test_examples(self):
        assert true_loss_at_context(U01, U01, LIN1, [1.0], HALF_GRID) == pytest.approx(0.3125)
        half = WeightDistribution.point_mass([0.5])
        assert true_loss_at_context(half, U01, LIN1, [1.0], HALF_GRID) == pytest.approx(0.375)

    def test_decomposition_example(self):
        half = WeightDistribution.point_mass([0.5])
        np.testing.assert_allclose(loss_gap_decomposition(half, U01, LIN1, [1.0], HALF_GRID), [0.0, 0.0625])
        np.testing.assert_allclose(loss_gap_decomposition(U01, U01, LIN1, [1.0], HALF_GRID), [0.0, 0.0])

    def test_truth_minimizes(self, rng):
        f = RewardFunction.linear(2)
        grid = cap_grid(f.c_max, 0.25)
        vs = WeightDistribution(rng.random((4, 2)), rng.dirichlet(np.ones(4)))
        x = rng.random(2)
        base = true_loss_at_context(vs, vs, f, x, grid)
        for _ in range(50):
            vp = WeightDistribution.uniform(rng.random((3, 2)))
            assert true_loss_at_context(vp, vs, f, x, grid) >= base - 1e-12


class TestSubgradient:
    def test_zero_at_smooth_minimum(self):
        V = WeightDistribution.point_mass([0.6])
        S = [LabeledSample((1.0,), 0.6), LabeledSample((0.5,), 0.3)]
        # 0.6 and 0.3 are off the caps {0, 0.25, 0.5, 0.75}
        np.testing.assert_allclose(loss_subgradient(V, S, LIN1, cap_grid(1, 0.25)), [[0.0]], atol=1e-15)

    def test_finite_difference_small_instance(self, rng):
        f = RewardFunction.linear(2)
        grid = cap_grid(f.c_max, 0.25)
        V = WeightDistribution.uniform([[0.31, 0.47], [0.58, 0.12], [0.83, 0.66]])
        S = [LabeledSample(tuple(rng.random(2)), float(rng.random() * 2)) for _ in range(5)]
        g = loss_subgradient(V, S, f, grid)
        fd = np.zeros_like(g)
        h = 1e-6
        for i in range(3):
            for j in range(2):
                up, dn = V.atoms.copy(), V.atoms.copy()
                up[i, j] += h
                dn[i, j] -= h
                fd[i, j] = (empirical_loss(WeightDistribution.uniform(up), S, f, grid)
                            - empirical_loss(WeightDistribution.uniform(dn), S, f, grid)) / (2 * h)
        assert np.linalg.norm(g - fd) / np.linalg.norm(g) <= 1e-5

    def test_rejects_nonuniform(self):
        V = WeightDistribution(np.array([[0.1], [0.2]]), np.array([0.3, 0.7]))
        with pytest.raises(ValueError, match="uniform"):
            loss_subgradient(V, [LabeledSample((1.0,), 0.5)], LIN1, HALF_GRID)


@settings(max_examples=200)
@given(
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.lists(st.tuples(st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=6),
)
def test_mean_shift_identity(z, z2, pairs):
    vals = np.array([p[0] for p in pairs])
    probs = np.array([p[1] for p in pairs])
    lhs, rhs = mean_shift_identity(z, z2, vals, probs / probs.sum())
    assert lhs == pytest.approx(rhs, abs=1e-12)
