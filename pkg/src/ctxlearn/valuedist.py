"""Exact discrete real-valued distributions on [0, c_max]."""

from __future__ import annotations

import logging
from typing import Any, Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

ATOM_TOL = 1e-12
NORMALIZE_WARN_TOL = 1e-9


class DiscreteValueDistribution:
    """A finite distribution over reals in ``[0, c_max]``.

    Atoms are kept strictly increasing; duplicate atoms (within ``ATOM_TOL``)
    are merged by summing their weights and zero-weight atoms are dropped.
    Instances are immutable.
    """

    __slots__ = ("_atoms", "_weights", "_cum", "c_max")

    def __init__(self, atoms: Iterable[float], weights: Iterable[float], c_max: float = 1.0):
        a = np.asarray(list(atoms), dtype=float).ravel()
        w = np.asarray(list(weights), dtype=float).ravel()
        if a.shape != w.shape:
            raise ValueError(f"atoms and weights differ in length ({a.size} vs {w.size})")
        if a.size == 0:
            raise ValueError("a distribution needs at least one atom")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(w)):
            raise ValueError("atoms and weights must be finite")
        if c_max <= 0:
            raise ValueError("c_max must be positive")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > NORMALIZE_WARN_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        lo, hi = a.min(), a.max()
        if lo < -ATOM_TOL or hi > c_max + ATOM_TOL:
            raise ValueError(f"atoms must lie in [0, {c_max}], got [{lo}, {hi}]")
        a = np.clip(a, 0.0, c_max)

        order = np.argsort(a, kind="stable")
        a, w = a[order], w[order]
        # merge runs of atoms closer than ATOM_TOL onto the run's first atom
        new_group = np.empty(a.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = np.diff(a) > ATOM_TOL
        starts = np.flatnonzero(new_group)
        merged_a = a[starts]
        merged_w = np.add.reduceat(w, starts)
        keep = merged_w > 0
        merged_a, merged_w = merged_a[keep], merged_w[keep]
        merged_w = merged_w / merged_w.sum()

        merged_a.setflags(write=False)
        merged_w.setflags(write=False)
        cum = np.cumsum(merged_w)
        cum[-1] = 1.0
        cum.setflags(write=False)
        self._atoms = merged_a
        self._weights = merged_w
        self._cum = cum
        self.c_max = float(c_max)

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------
    @classmethod
    def point_mass(cls, atom: float, c_max: float = 1.0) -> "DiscreteValueDistribution":
        return cls([atom], [1.0], c_max)

    @classmethod
    def uniform(cls, atoms: Iterable[float], c_max: float = 1.0) -> "DiscreteValueDistribution":
        a = list(atoms)
        return cls(a, [1.0 / len(a)] * len(a), c_max)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DiscreteValueDistribution":
        """Load from ``{"atoms": [...], "weights": [...], "c_max": x}``.

        Weights are renormalized; a warning is logged when they were off by
        more than ``1e-9``.
        """
        for key in ("atoms", "weights", "c_max"):
            if key not in data:
                raise ValueError(f"value distribution is missing field {key!r}")
        w = np.asarray(data["weights"], dtype=float)
        total = w.sum()
        if total <= 0:
            raise ValueError("field 'weights' must have positive total mass")
        if abs(total - 1.0) > NORMALIZE_WARN_TOL:
            logger.warning("weights sum to %r; normalizing", float(total))
        return cls(data["atoms"], w / total, float(data["c_max"]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "atoms": [float(x) for x in self._atoms],
            "weights": [float(x) for x in self._weights],
            "c_max": self.c_max,
        }

    # ------------------------------------------------------------------
    # accessors
    # ------------------------------------------------------------------
    @property
    def atoms(self) -> np.ndarray:
        return self._atoms

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def __len__(self) -> int:
        return self._atoms.size

    def __repr__(self) -> str:
        pairs = ", ".join(f"{a:.6g}:{w:.6g}" for a, w in zip(self._atoms, self._weights))
        return f"DiscreteValueDistribution({{{pairs}}}, c_max={self.c_max:g})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteValueDistribution):
            return NotImplemented
        return self.equals(other, tol=0.0)

    __hash__ = None  # type: ignore[assignment]

    def equals(self, other: "DiscreteValueDistribution", tol: float = ATOM_TOL) -> bool:
        """Atom/weight equality within ``tol``."""
        if len(self) != len(other):
            return False
        return bool(
            np.all(np.abs(self._atoms - other._atoms) <= tol)
            and np.all(np.abs(self._weights - other._weights) <= tol)
        )

    # ------------------------------------------------------------------
    # distribution functions
    # ------------------------------------------------------------------
    def cdf(self, z):
        """Right-continuous CDF ``Pr[r <= z]``; accepts scalars or arrays."""
        idx = np.searchsorted(self._atoms, z, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def cdf_left(self, z):
        """Left limit ``Pr[r < z]``."""
        idx = np.searchsorted(self._atoms, z, side="left")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def survival(self, z):
        """``Pr[r >= z]``."""
        left = self.cdf_left(z)
        return 1.0 - left

    def mean(self) -> float:
        return float(np.dot(self._weights, self._atoms))

    def capped_expectation(self, c):
        """``E[max{c, r}]``; nondecreasing and 1-Lipschitz in ``c``."""
        c_arr = np.asarray(c, dtype=float)
        out = np.maximum(c_arr[..., None], self._atoms) @ self._weights
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw atoms with probability equal to their weights."""
        if len(self) == 1:
            return float(self._atoms[0]) if size is None else np.full(size, self._atoms[0])
        idx = rng.choice(len(self), size=size, p=self._weights)
        return float(self._atoms[idx]) if size is None else self._atoms[idx]

    def shift_plus_eps(self, eps: float) -> "DiscreteValueDistribution":
        """Distribution with CDF ``min{F(z + eps) + eps, 1}``.

        Every atom moves down by ``eps``, mass ``eps`` is added at the bottom
        and the same amount is removed from the top of the CDF. Mass landing
        below 0 is collapsed onto the atom 0. The result is stochastically
        dominated by ``self``.
        """
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        if eps == 0:
            return self
        shifted_cum = np.minimum(self._cum + eps, 1.0)
        jumps = np.diff(shifted_cum, prepend=min(eps, 1.0))
        atoms = np.concatenate(([0.0], np.maximum(self._atoms - eps, 0.0)))
        weights = np.concatenate(([min(eps, 1.0)], jumps))
        return DiscreteValueDistribution(atoms, weights, self.c_max)


def sample_value(dist: DiscreteValueDistribution, rng: np.random.Generator) -> float:
    return dist.sample(rng)


def shift_plus_eps(dist: DiscreteValueDistribution, eps: float) -> DiscreteValueDistribution:
    return dist.shift_plus_eps(eps)


def stochastically_dominates(
    d: DiscreteValueDistribution, dp: DiscreteValueDistribution, tol: float = 1e-12
) -> bool:
    """True when ``F_d(z) <= F_dp(z) + tol`` for every ``z``."""
    points = np.union1d(d.atoms, dp.atoms)
    return bool(np.all(d.cdf(points) <= dp.cdf(points) + tol))
