"""Regularized ERM over uniform-weight distributions on ``k`` atoms, plus the
sample-size and Lipschitz calculators that go with it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .loss import cap_grid, loss_and_subgradient
from .model import LabeledSample, RewardFunction, WeightDistribution, samples_to_arrays

STEP_SCHEDULES = ("sqrt", "constant")
K_CAP = 64


def lipschitz_bound(c_max: float, epsilon: float, xi: float, k: int) -> float:
    """Lipschitz constant ``2 c_max^2 xi / (eps sqrt(k))`` of the capped loss on k atoms."""
    if min(c_max, epsilon, xi, k) <= 0:
        raise ValueError("all inputs must be positive")
    return 2.0 * c_max**2 * xi / (epsilon * math.sqrt(k))


def regularization_lambda(rho: float, B: float, m: int) -> float:
    """``sqrt(2 rho^2 / (B^2 m))``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if B <= 0:
        raise ValueError("B must be positive")
    return math.sqrt(2.0 * rho**2 / (B**2 * m))


def _loss_samples_exact(d, xi, c_max, epsilon, delta) -> Fraction:
    for name, v in (("d", d), ("xi", xi), ("c_max", c_max), ("epsilon", epsilon), ("delta", delta)):
        if v <= 0:
            raise ValueError(f"{name} must be positive")
    d, xi, c_max, epsilon, delta = (Fraction(v) for v in (d, xi, c_max, epsilon, delta))
    return 32 * d * xi**2 * c_max**4 / (epsilon**4 * delta**2)


def required_samples_loss(d, xi, c_max, epsilon, delta) -> int:
    """Samples so that the true loss at a random context is within ``2 eps``
    of the optimum with probability ``1 - delta``:
    ``ceil(32 d xi^2 c_max^4 / (eps^4 delta^2))``.

    Arithmetic is exact on the binary values of the inputs.
    """
    return math.ceil(_loss_samples_exact(d, xi, c_max, epsilon, delta))


def required_samples_capped(d, xi, c_max, epsilon, delta) -> int:
    """Capped-expectation accuracy ``eps`` needs loss accuracy ``eps^2``."""
    eps = Fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    return math.ceil(_loss_samples_exact(d, xi, c_max, eps**2, delta))


def required_samples_levy(d, xi, c_max, epsilon, delta) -> int:
    """Lévy accuracy ``eps`` needs capped accuracy ``eps^2 / 2``, hence loss
    accuracy ``(eps^2 / 2)^2``."""
    eps = Fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    return math.ceil(_loss_samples_exact(d, xi, c_max, (eps**2 / 2) ** 2, delta))


def support_size_heuristic(d: int, c_max: float, epsilon: float) -> int:
    """``ceil(2 c^3/eps^2 (d ln(d c) + (d+1) ln(2/eps)))``, at least 1."""
    if min(d, c_max, epsilon) <= 0:
        raise ValueError("all inputs must be positive")
    value = 2.0 * c_max**3 / epsilon**2 * (d * math.log(d * c_max) + (d + 1) * math.log(2.0 / epsilon))
    return max(1, math.ceil(value))


@dataclass(frozen=True)
class LearnerConfig:
    """Settings for :func:`learn`.

    ``k`` of ``None`` takes the support-size heuristic, capped at ``K_CAP``.
    ``eta0`` of ``None`` selects ``B / rho`` for the ``sqrt`` schedule and
    ``B / (rho sqrt(T))`` for the ``constant`` one. With ``average=True`` the
    uniform average of the iterates is appended as a final candidate.
    """

    k: int | None = None
    epsilon: float = 0.25
    iterations: int = 500
    step_schedule: str = "sqrt"
    eta0: float | None = None
    seed: int = 0
    lambda_override: float | None = None
    average: bool = False

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be at least 1")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.eta0 is not None and self.eta0 <= 0:
            raise ValueError("eta0 must be positive")
        if self.step_schedule not in STEP_SCHEDULES:
            raise ValueError(f"step_schedule must be one of {STEP_SCHEDULES}")
        if self.lambda_override is not None and self.lambda_override < 0:
            raise ValueError("lambda_override must be nonnegative")

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LearnerConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown learner field(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class LearnResult:
    learned: WeightDistribution
    objective_trajectory: list[tuple[int, float]] = field(repr=False)
    lambda_used: float
    rho_used: float
    best_iteration: int

    @property
    def best_objective(self) -> float:
        return min(v for _, v in self.objective_trajectory)

    def to_dict(self) -> dict[str, Any]:
        return {
            "learned": self.learned.to_dict(),
            "objective_trajectory": [[int(t), float(v)] for t, v in self.objective_trajectory],
            "lambda_used": self.lambda_used,
            "rho_used": self.rho_used,
            "best_iteration": self.best_iteration,
        }


def resolve_k(cfg: LearnerConfig, f: RewardFunction) -> int:
    if cfg.k is not None:
        return cfg.k
    return min(K_CAP, support_size_heuristic(f.dim, f.c_max, cfg.epsilon))


def learn(S: Sequence[LabeledSample], f: RewardFunction, cfg: LearnerConfig) -> LearnResult:
    """Projected subgradient descent on ``empirical loss + lambda ||V||^2``.

    The atoms of a ``k``-atom uniform distribution are optimized inside
    ``[0, 1]^(k d)``; the best recorded iterate is returned.
    """
    if len(S) == 0:
        raise ValueError("sample set is empty")
    X, y = samples_to_arrays(S)
    if X.shape[1] != f.dim:
        raise ValueError(f"samples have dimension {X.shape[1]}, reward expects {f.dim}")
    grid = cap_grid(f.c_max, cfg.epsilon)
    caps = grid.values
    k, d = resolve_k(cfg, f), f.dim
    B = math.sqrt(k * d)
    rho = lipschitz_bound(f.c_max, cfg.epsilon, max(f.xi, 1e-12), k)
    lam = regularization_lambda(rho, B, len(S)) if cfg.lambda_override is None else cfg.lambda_override
    eta0 = cfg.eta0 if cfg.eta0 is not None else B / rho
    if cfg.step_schedule == "constant" and cfg.eta0 is None:
        eta0 = B / (rho * math.sqrt(cfg.iterations))

    rng = np.random.default_rng(cfg.seed)
    atoms = rng.random((k, d))

    def objective(V: np.ndarray) -> tuple[float, np.ndarray]:
        loss, sub = loss_and_subgradient(V, X, y, f, caps)
        return loss + lam * float(np.sum(V * V)), sub + 2.0 * lam * V

    trajectory: list[tuple[int, float]] = []
    best_val, best_atoms, best_t = math.inf, atoms.copy(), 0
    running_sum = np.zeros_like(atoms)
    for t in range(cfg.iterations + 1):
        val, sub = objective(atoms)
        trajectory.append((t, val))
        if val < best_val:
            best_val, best_atoms, best_t = val, atoms.copy(), t
        if t == cfg.iterations:
            break
        running_sum += atoms
        eta = eta0 / math.sqrt(t + 1) if cfg.step_schedule == "sqrt" else eta0
        atoms = np.clip(atoms - eta * sub, 0.0, 1.0)

    if cfg.average:
        avg = np.clip(running_sum / cfg.iterations, 0.0, 1.0)
        val, _ = objective(avg)
        trajectory.append((cfg.iterations + 1, val))
        if val < best_val:
            best_val, best_atoms, best_t = val, avg, cfg.iterations + 1

    return LearnResult(WeightDistribution.uniform(best_atoms), trajectory, lam, rho, best_t)
