"""Capped squared loss: per-sample, empirical and true-at-context forms.

For a cap grid ``C`` the loss of a weight distribution ``V`` on a sample
``(x, y)`` is ``sum_c (E_V[max{c, f(v, x)}] - max{c, y})**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import LabeledSample, RewardFunction, WeightDistribution, samples_to_arrays


@dataclass(frozen=True, eq=False)
class CapGrid:
    epsilon: float
    c_max: float
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


def cap_grid(c_max: float, epsilon: float) -> CapGrid:
    """Caps ``{0, eps, 2 eps, ...}`` strictly below ``c_max``."""
    if c_max <= 0 or epsilon <= 0:
        raise ValueError("c_max and epsilon must be positive")
    if epsilon > c_max:
        raise ValueError("epsilon must not exceed c_max")
    ratio = c_max / epsilon
    size = int(round(ratio)) if abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio) else math.ceil(ratio)
    values = np.arange(size) * epsilon
    values.setflags(write=False)
    return CapGrid(float(epsilon), float(c_max), values)


def _check_dims(V: WeightDistribution, f: RewardFunction, X: np.ndarray) -> None:
    if V.dim != f.dim or X.shape[1] != f.dim:
        raise ValueError(
            f"dimension mismatch: reward d={f.dim}, weights d={V.dim}, contexts d={X.shape[1]}"
        )


def _capped_expectations(values: np.ndarray, weights: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """``E_V[max{c, f}]`` for each context row and cap: shape ``(m, C)``."""
    return np.maximum(values[:, :, None], caps[None, None, :]).transpose(0, 2, 1) @ weights


def per_sample_losses(V: WeightDistribution, X: np.ndarray, y: np.ndarray, f: RewardFunction,
                      grid: CapGrid) -> np.ndarray:
    _check_dims(V, f, X)
    caps = grid.values
    est = _capped_expectations(f.values(V.atoms, X), V.weights, caps)
    target = np.maximum(y[:, None], caps[None, :])
    return ((est - target) ** 2).sum(axis=1)


def sample_loss(V: WeightDistribution, s: LabeledSample, f: RewardFunction, grid: CapGrid) -> float:
    X = np.asarray([s.context], dtype=float)
    return float(per_sample_losses(V, X, np.array([s.label]), f, grid)[0])


def empirical_loss(V: WeightDistribution, S: Sequence[LabeledSample], f: RewardFunction,
                   grid: CapGrid) -> float:
    """Mean of the per-sample losses over ``S``."""
    if len(S) == 0:
        raise ValueError("sample set is empty")
    X, y = samples_to_arrays(S)
    return float(np.mean(per_sample_losses(V, X, y, f, grid)))


def _per_cap_terms(Vp: WeightDistribution, Vstar: WeightDistribution, f: RewardFunction, x,
                   grid: CapGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if Vp.dim != f.dim or Vstar.dim != f.dim or x.shape[1] != f.dim:
        raise ValueError(
            f"dimension mismatch: reward d={f.dim}, V' d={Vp.dim}, V* d={Vstar.dim}, x d={x.shape[1]}"
        )
    caps = grid.values
    est = _capped_expectations(f.values(Vp.atoms, x), Vp.weights, caps)[0]  # (C,)
    truth = np.maximum(f.values(Vstar.atoms, x)[0][:, None], caps[None, :])  # (k*, C)
    return est, truth, Vstar.weights


def true_loss_at_context(Vp: WeightDistribution, Vstar: WeightDistribution, f: RewardFunction, x,
                         grid: CapGrid) -> float:
    """Exact ``E_{v* ~ V*}`` of the capped squared loss of ``Vp`` at context ``x``."""
    est, truth, w = _per_cap_terms(Vp, Vstar, f, x, grid)
    return float(w @ ((est[None, :] - truth) ** 2).sum(axis=1))


def loss_gap_decomposition(Vp: WeightDistribution, Vstar: WeightDistribution, f: RewardFunction, x,
                           grid: CapGrid) -> np.ndarray:
    """Squared capped-expectation gap per cap; sums to the true-loss gap."""
    est, truth, w = _per_cap_terms(Vp, Vstar, f, x, grid)
    return (est - w @ truth) ** 2


def loss_and_subgradient(atoms: np.ndarray, X: np.ndarray, y: np.ndarray, f: RewardFunction,
                         caps: np.ndarray) -> tuple[float, np.ndarray]:
    """Empirical loss and its subgradient for uniform weights over ``atoms``.

    At a kink ``f(v_i, x) == c`` the cap-active branch is taken.
    """
    k = atoms.shape[0]
    vals, grads = f.grad_v(atoms, X)  # (m, k), (m, k, d)
    active = vals[:, :, None] >= caps[None, None, :]  # (m, k, C)
    est = np.maximum(vals[:, :, None], caps[None, None, :]).mean(axis=1)  # (m, C)
    resid = est - np.maximum(y[:, None], caps[None, :])
    loss = float(np.mean((resid ** 2).sum(axis=1)))
    coef = (2.0 / k) * np.einsum("mc,mkc->mk", resid, active)  # (m, k)
    sub = np.einsum("mk,mkd->kd", coef, grads) / X.shape[0]
    return loss, sub


def loss_subgradient(V: WeightDistribution, S: Sequence[LabeledSample], f: RewardFunction,
                     grid: CapGrid) -> np.ndarray:
    """Subgradient of :func:`empirical_loss` in the ``k x d`` atom coordinates."""
    if not V.is_uniform():
        raise ValueError("subgradient is defined for uniform-weight distributions only")
    X, y = samples_to_arrays(S)
    _check_dims(V, f, X)
    return loss_and_subgradient(np.asarray(V.atoms), X, y, f, grid.values)[1]


def mean_shift_identity(z: float, z2: float, values, probs) -> tuple[float, float]:
    """Both sides of ``(z - E y)^2 - (z2 - E y)^2 = E(z - y)^2 - E(z2 - y)^2``."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    mean = float(probs @ values)
    lhs = (z - mean) ** 2 - (z2 - mean) ** 2
    rhs = float(probs @ (z - values) ** 2 - probs @ (z2 - values) ** 2)
    return lhs, rhs
