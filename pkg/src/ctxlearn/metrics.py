"""Distances between discrete value distributions."""

from __future__ import annotations

import math

import numpy as np

from .valuedist import DiscreteValueDistribution

LEVY_TOL = 1e-9


def capped_gap_sup(d: DiscreteValueDistribution, dp: DiscreteValueDistribution,
                   resolution: float = 1e-3) -> float:
    """``max_c |E_d[max{c, r}] - E_dp[max{c, r}]|`` over ``c`` in ``[0, c_max]``.

    The gap is piecewise linear with breakpoints at the atoms, so the atoms
    plus the endpoints already give the exact maximum; the uniform grid of
    step ``resolution`` is evaluated as well.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    c_max = max(d.c_max, dp.c_max)
    grid = np.arange(0.0, c_max + 0.5 * resolution, resolution)
    caps = np.concatenate((grid, d.atoms, dp.atoms, [0.0, c_max]))
    return float(np.max(np.abs(d.capped_expectation(caps) - dp.capped_expectation(caps))))


def levy_feasible(d: DiscreteValueDistribution, dp: DiscreteValueDistribution, eps: float) -> bool:
    """Whether ``F(z - eps) - eps <= G(z) <= F(z + eps) + eps`` for all ``z``.

    ``F`` is the CDF of ``d`` and ``G`` that of ``dp``. Both sides are
    right-continuous step functions of ``z``, so each inequality only needs
    checking where one of them jumps.
    """
    a, g = d.atoms, dp.atoms
    # upper side: jumps of G at g, jumps of F(. + eps) at a - eps
    if np.any(dp.cdf(g) > d.cdf(g + eps) + eps):
        return False
    if np.any(dp.cdf(a - eps) > d.cdf(a) + eps):
        return False
    # lower side: jumps of G at g, jumps of F(. - eps) at a + eps
    if np.any(d.cdf(g - eps) - eps > dp.cdf(g)):
        return False
    if np.any(d.cdf(a) - eps > dp.cdf(a + eps)):
        return False
    return True


def levy_distance(d: DiscreteValueDistribution, dp: DiscreteValueDistribution,
                  tol: float = LEVY_TOL) -> float:
    """Lévy distance by bisection on ``eps`` to absolute tolerance ``tol``."""
    if levy_feasible(d, dp, 0.0):
        return 0.0
    lo, hi = 0.0, 1.0  # vertical slack 1 is always enough
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if levy_feasible(d, dp, mid):
            hi = mid
        else:
            lo = mid
    return hi


def levy_distance_oracle(d: DiscreteValueDistribution, dp: DiscreteValueDistribution,
                         grid_step: float) -> float:
    """Brute-force Lévy distance: smallest multiple of ``grid_step`` that is
    feasible on a uniform ``z`` grid of the same step."""
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    lo = math.floor((min(d.atoms[0], dp.atoms[0]) - 1.0) / grid_step)
    hi = math.ceil((max(d.atoms[-1], dp.atoms[-1]) + 1.0) / grid_step)
    z = np.arange(lo, hi + 1) * grid_step
    G = dp.cdf(z)
    n_steps = math.ceil(1.0 / grid_step)
    for j in range(n_steps + 1):
        eps = j * grid_step
        if np.all(G <= d.cdf(z + eps) + eps) and np.all(d.cdf(z - eps) - eps <= G):
            return eps
    return n_steps * grid_step


def wasserstein_distance(d: DiscreteValueDistribution, dp: DiscreteValueDistribution) -> float:
    """``integral |F_d - F_dp| dz`` summed exactly over the step breakpoints."""
    t = np.union1d(d.atoms, dp.atoms)
    if t.size < 2:
        return 0.0
    diff = np.abs(d.cdf(t[:-1]) - dp.cdf(t[:-1]))
    return float(diff @ np.diff(t))
