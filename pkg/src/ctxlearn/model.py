"""Ground-truth contextual value distributions.

A sample is a pair ``(x, f(v, x))`` with the context ``x`` drawn from a
:class:`ContextDistribution`, the weight vector ``v`` drawn from a
:class:`WeightDistribution`, and ``f`` a known :class:`RewardFunction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .valuedist import ATOM_TOL, DiscreteValueDistribution


def _as_unit_box(points, dim: int | None, what: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{what} must be a list of vectors")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{what} have dimension {arr.shape[1]}, expected {dim}")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"every coordinate of {what} must lie in [0, 1]")
    return arr


def _as_probs(weights, n: int, what: str) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != n:
        raise ValueError(f"{what}: {n} atoms but {w.size} weights")
    if np.any(w <= 0):
        raise ValueError(f"{what}: weights must be positive")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"{what}: weights sum to {w.sum()!r}, expected 1")
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class WeightDistribution:
    """Finite distribution over weight vectors in ``[0, 1]^d``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _as_unit_box(self.atoms, None, "weight atoms")
        weights = _as_probs(self.weights, atoms.shape[0], "weight distribution")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def k(self) -> int:
        return self.atoms.shape[0]

    @classmethod
    def uniform(cls, atoms) -> "WeightDistribution":
        """Uniform weights over ``k`` atoms, the learner's hypothesis class."""
        arr = np.atleast_2d(np.asarray(atoms, dtype=float))
        return cls(arr, np.full(arr.shape[0], 1.0 / arr.shape[0]))

    @classmethod
    def point_mass(cls, atom) -> "WeightDistribution":
        return cls(np.atleast_2d(np.asarray(atom, dtype=float)), np.ones(1))

    def is_uniform(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0 / self.k) <= tol))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(self.k, size=size, p=self.weights)
        return self.atoms[idx]

    def to_dict(self) -> dict[str, Any]:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WeightDistribution":
        for key in ("atoms", "weights"):
            if key not in data:
                raise ValueError(f"weight distribution is missing field {key!r}")
        return cls(np.asarray(data["atoms"], dtype=float), np.asarray(data["weights"], dtype=float))


@dataclass(frozen=True, eq=False)
class ContextDistribution:
    """Context distribution over ``[0, 1]^d``.

    ``kind="finite"`` carries explicit atoms and weights;
    ``kind="product_uniform"`` draws every coordinate independently and
    uniformly from the grid ``{0, step, 2*step, ..., 1}``.
    """

    dim: int
    kind: str = "finite"
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None
    step: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("context dimension must be positive")
        if self.kind == "finite":
            if self.atoms is None or self.weights is None:
                raise ValueError("finite context distribution needs atoms and weights")
            atoms = _as_unit_box(self.atoms, self.dim, "context atoms")
            weights = _as_probs(self.weights, atoms.shape[0], "context distribution")
            atoms.setflags(write=False)
            weights.setflags(write=False)
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "weights", weights)
        elif self.kind == "product_uniform":
            if self.step is None or not 0 < self.step <= 1:
                raise ValueError("product_uniform context needs a step in (0, 1]")
            levels = 1.0 / self.step
            if abs(levels - round(levels)) > 1e-9:
                raise ValueError("product_uniform step must divide 1")
        else:
            raise ValueError(f"unknown context kind {self.kind!r}")

    @classmethod
    def finite(cls, atoms, weights=None) -> "ContextDistribution":
        arr = np.atleast_2d(np.asarray(atoms, dtype=float))
        if weights is None:
            weights = np.full(arr.shape[0], 1.0 / arr.shape[0])
        return cls(arr.shape[1], "finite", arr, np.asarray(weights, dtype=float))

    @classmethod
    def product_uniform(cls, dim: int, step: float) -> "ContextDistribution":
        return cls(dim, "product_uniform", step=step)

    def grid_levels(self) -> np.ndarray:
        n = int(round(1.0 / self.step))
        return np.arange(n + 1) / n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "finite":
            idx = rng.choice(self.atoms.shape[0], size=size, p=self.weights)
            return self.atoms[idx]
        levels = self.grid_levels()
        return levels[rng.integers(0, levels.size, size=(size, self.dim))]

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "finite":
            return {
                "kind": "finite",
                "dim": self.dim,
                "atoms": self.atoms.tolist(),
                "weights": self.weights.tolist(),
            }
        return {"kind": "product_uniform", "dim": self.dim, "step": self.step}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ContextDistribution":
        kind = data.get("kind")
        if kind == "finite":
            for key in ("atoms", "weights"):
                if key not in data:
                    raise ValueError(f"context distribution is missing field {key!r}")
            atoms = np.atleast_2d(np.asarray(data["atoms"], dtype=float))
            return cls(int(data.get("dim", atoms.shape[1])), "finite", atoms,
                       np.asarray(data["weights"], dtype=float))
        if kind == "product_uniform":
            for key in ("dim", "step"):
                if key not in data:
                    raise ValueError(f"context distribution is missing field {key!r}")
            return cls(int(data["dim"]), "product_uniform", step=float(data["step"]))
        raise ValueError(f"context field 'kind' must be 'finite' or 'product_uniform', got {kind!r}")


class ClampCounter:
    """Mutable tally of reward evaluations that fell outside ``[0, c_max]``."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def __repr__(self):
        return f"ClampCounter({self.count})"


REWARD_KINDS = ("linear", "max_affine", "gate")


@dataclass(frozen=True, eq=False)
class RewardFunction:
    """Known reward map ``f(v, x)`` with range bound and Lipschitz constant.

    * ``linear``: ``<v, x>``; ``c_max = d`` and ``xi = sqrt(d)``.
    * ``max_affine``: ``max_j <a_j, v> + <b_j, x> + e_j``.
    * ``gate``: ``(1 - x_1 v_1) v_2``; not convex in ``v``.
    """

    kind: str
    dim: int
    c_max: float = 0.0
    xi: float = 0.0
    slopes: np.ndarray | None = None
    context_slopes: np.ndarray | None = None
    intercepts: np.ndarray | None = None
    clamps: ClampCounter = field(default_factory=ClampCounter, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in REWARD_KINDS:
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("reward dimension must be positive")
        if self.kind == "linear":
            object.__setattr__(self, "c_max", float(self.dim))
            object.__setattr__(self, "xi", math.sqrt(self.dim))
        elif self.kind == "gate":
            if self.dim < 2:
                raise ValueError("gate reward needs dim >= 2")
            object.__setattr__(self, "c_max", 1.0)
            object.__setattr__(self, "xi", math.sqrt(2.0))
        else:
            a = np.atleast_2d(np.asarray(self.slopes, dtype=float))
            if a.shape[1] != self.dim:
                raise ValueError("max_affine slopes must have one column per dimension")
            b = (np.zeros_like(a) if self.context_slopes is None
                 else np.atleast_2d(np.asarray(self.context_slopes, dtype=float)))
            e = (np.zeros(a.shape[0]) if self.intercepts is None
                 else np.asarray(self.intercepts, dtype=float).ravel())
            if b.shape != a.shape or e.size != a.shape[0]:
                raise ValueError("max_affine pieces have inconsistent shapes")
            for arr in (a, b, e):
                arr.setflags(write=False)
            object.__setattr__(self, "slopes", a)
            object.__setattr__(self, "context_slopes", b)
            object.__setattr__(self, "intercepts", e)
            if self.c_max <= 0:
                raise ValueError("max_affine reward needs a positive c_max")
            if self.xi <= 0:
                object.__setattr__(self, "xi", float(np.linalg.norm(a, axis=1).max()) or 0.0)

    @classmethod
    def linear(cls, dim: int) -> "RewardFunction":
        return cls("linear", dim)

    @classmethod
    def gate(cls, dim: int = 2) -> "RewardFunction":
        return cls("gate", dim)

    @classmethod
    def max_affine(cls, slopes, context_slopes=None, intercepts=None, c_max: float = 1.0,
                   xi: float = 0.0) -> "RewardFunction":
        a = np.atleast_2d(np.asarray(slopes, dtype=float))
        return cls("max_affine", a.shape[1], c_max, xi, a, context_slopes, intercepts)

    @property
    def convex(self) -> bool:
        return self.kind != "gate"

    # ------------------------------------------------------------------
    def _raw(self, V: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Unclamped values, shape ``(m, k)`` for ``V`` (k, d) and ``X`` (m, d)."""
        if self.kind == "linear":
            return X @ V.T
        if self.kind == "gate":
            return (1.0 - X[:, None, 0] * V[None, :, 0]) * V[None, :, 1]
        pieces = (V @ self.slopes.T)[None, :, :] + (X @ self.context_slopes.T + self.intercepts)[:, None, :]
        return pieces.max(axis=2)

    def _check(self, V, X) -> tuple[np.ndarray, np.ndarray]:
        V = np.atleast_2d(np.asarray(V, dtype=float))
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if V.shape[1] != self.dim or X.shape[1] != self.dim:
            raise ValueError(
                f"dimension mismatch: reward has d={self.dim}, got v with {V.shape[1]} "
                f"and x with {X.shape[1]} coordinates"
            )
        return V, X

    def values(self, V, X) -> np.ndarray:
        """Clamped rewards for every (context, weight) pair, shape ``(m, k)``."""
        V, X = self._check(V, X)
        raw = self._raw(V, X)
        outside = (raw < 0) | (raw > self.c_max)
        if outside.any():
            self.clamps.add(outside.sum())
        return np.clip(raw, 0.0, self.c_max)

    def grad_v(self, V, X) -> tuple[np.ndarray, np.ndarray]:
        """Clamped values ``(m, k)`` and gradients in ``v``, shape ``(m, k, d)``.

        Where the raw value is clamped the gradient is zero. For
        ``max_affine`` ties pick the lowest-index active piece.
        """
        V, X = self._check(V, X)
        m, k = X.shape[0], V.shape[0]
        if self.kind == "linear":
            raw = X @ V.T
            grad = np.broadcast_to(X[:, None, :], (m, k, self.dim)).copy()
        elif self.kind == "gate":
            raw = self._raw(V, X)
            grad = np.zeros((m, k, self.dim))
            grad[:, :, 0] = -X[:, None, 0] * V[None, :, 1]
            grad[:, :, 1] = 1.0 - X[:, None, 0] * V[None, :, 0]
        else:
            pieces = (V @ self.slopes.T)[None, :, :] + (X @ self.context_slopes.T + self.intercepts)[:, None, :]
            best = pieces.argmax(axis=2)
            raw = np.take_along_axis(pieces, best[..., None], axis=2)[..., 0]
            grad = self.slopes[best]
        inside = (raw >= 0) & (raw <= self.c_max)
        grad = grad * inside[..., None]
        return np.clip(raw, 0.0, self.c_max), grad

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "dim": self.dim}
        if self.kind == "max_affine":
            out.update(
                slopes=self.slopes.tolist(),
                context_slopes=self.context_slopes.tolist(),
                intercepts=self.intercepts.tolist(),
                c_max=self.c_max,
                xi=self.xi,
            )
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RewardFunction":
        kind = data.get("kind")
        if kind not in REWARD_KINDS:
            raise ValueError(f"reward field 'kind' must be one of {REWARD_KINDS}, got {kind!r}")
        if "dim" not in data and kind != "max_affine":
            raise ValueError("reward is missing field 'dim'")
        if kind == "max_affine":
            if "slopes" not in data or "c_max" not in data:
                raise ValueError("max_affine reward needs fields 'slopes' and 'c_max'")
            return cls.max_affine(data["slopes"], data.get("context_slopes"), data.get("intercepts"),
                                  float(data["c_max"]), float(data.get("xi", 0.0)))
        return cls(kind, int(data["dim"]))


def eval_reward(f: RewardFunction, v, x) -> float:
    """``f(v, x)`` clamped to ``[0, c_max]``."""
    v = np.asarray(v, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if v.size != f.dim or x.size != f.dim:
        raise ValueError(f"dimension mismatch: reward has d={f.dim}, got |v|={v.size}, |x|={x.size}")
    return float(f.values(v[None, :], x[None, :])[0, 0])


@dataclass(frozen=True)
class LabeledSample:
    context: tuple[float, ...]
    label: float


def draw_samples(V: WeightDistribution, X: ContextDistribution, f: RewardFunction, m: int,
                 rng: np.random.Generator) -> list[LabeledSample]:
    """Draw ``m`` labeled samples; the weight vectors stay hidden."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return []
    if not V.dim == X.dim == f.dim:
        raise ValueError("weight, context and reward dimensions differ")
    xs = X.sample(rng, m)
    vs = V.sample(rng, m)
    labels = _paired_values(f, vs, xs)
    return [LabeledSample(tuple(float(c) for c in x), float(y)) for x, y in zip(xs, labels)]


def _paired_values(f: RewardFunction, vs: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """``f(vs[j], xs[j])`` for every row ``j`` without forming the full grid."""
    out = np.empty(vs.shape[0])
    chunk = 4096
    for s in range(0, vs.shape[0], chunk):
        v, x = vs[s:s + chunk], xs[s:s + chunk]
        if f.kind == "linear":
            raw = np.einsum("ij,ij->i", v, x)
        elif f.kind == "gate":
            raw = (1.0 - x[:, 0] * v[:, 0]) * v[:, 1]
        else:
            raw = (v @ f.slopes.T + x @ f.context_slopes.T + f.intercepts).max(axis=1)
        outside = (raw < 0) | (raw > f.c_max)
        if outside.any():
            f.clamps.add(outside.sum())
        out[s:s + chunk] = np.clip(raw, 0.0, f.c_max)
    return out


def samples_to_arrays(samples: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        raise ValueError("sample set is empty")
    X = np.array([s.context for s in samples], dtype=float)
    y = np.array([s.label for s in samples], dtype=float)
    return X, y


def induced_value_distribution(V: WeightDistribution, f: RewardFunction, x) -> DiscreteValueDistribution:
    """Exact push-forward of ``V`` through ``f(., x)``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != f.dim or V.dim != f.dim:
        raise ValueError(f"dimension mismatch: reward has d={f.dim}, context has {x.size}, weights {V.dim}")
    vals = f.values(V.atoms, x[None, :])[0]
    return DiscreteValueDistribution(vals, V.weights, f.c_max)


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio_v: float
    max_ratio_x: float
    declared_xi: float
    declared_context: float
    exceeds_v: bool
    exceeds_x: bool
    nonconvex: bool

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def certify_lipschitz(f: RewardFunction, trials: int, rng: np.random.Generator) -> LipschitzReport:
    """Empirical Lipschitz ratios in ``v`` and in ``x`` over random pairs."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    d = f.dim
    v1, v2, x1, x2 = (rng.random((trials, d)) for _ in range(4))
    fv1 = _paired_values(f, v1, x1)
    fv2 = _paired_values(f, v2, x1)
    fx2 = _paired_values(f, v1, x2)
    dv = np.linalg.norm(v1 - v2, axis=1)
    dx = np.linalg.norm(x1 - x2, axis=1)
    ok_v, ok_x = dv > ATOM_TOL, dx > ATOM_TOL
    ratio_v = float(np.max(np.abs(fv1 - fv2)[ok_v] / dv[ok_v], initial=0.0))
    ratio_x = float(np.max(np.abs(fv1 - fx2)[ok_x] / dx[ok_x], initial=0.0))
    ctx = math.sqrt(d)
    return LipschitzReport(
        max_ratio_v=ratio_v,
        max_ratio_x=ratio_x,
        declared_xi=f.xi,
        declared_context=ctx,
        exceeds_v=ratio_v > f.xi + 1e-9,
        exceeds_x=ratio_x > ctx + 1e-9,
        nonconvex=not f.convex,
    )


@dataclass(frozen=True, eq=False)
class InstanceSpec:
    """``n`` contextual value distributions sharing a context distribution and reward."""

    weights: tuple[WeightDistribution, ...]
    context: ContextDistribution
    reward: RewardFunction
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))
        if not self.weights:
            raise ValueError("instance needs at least one weight distribution")
        dims = {w.dim for w in self.weights} | {self.context.dim, self.reward.dim}
        if len(dims) != 1:
            raise ValueError(f"instance components disagree on dimension: {sorted(dims)}")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.context.dim

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "dim": self.dim,
            "seed": self.seed,
            "context": self.context.to_dict(),
            "reward": self.reward.to_dict(),
            "weights": [w.to_dict() for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InstanceSpec":
        for key in ("context", "reward", "weights"):
            if key not in data:
                raise ValueError(f"instance is missing field {key!r}")
        weights = []
        for i, w in enumerate(data["weights"]):
            try:
                weights.append(WeightDistribution.from_dict(w))
            except ValueError as exc:
                raise ValueError(f"weights[{i}]: {exc}") from None
        try:
            context = ContextDistribution.from_dict(data["context"])
        except ValueError as exc:
            raise ValueError(f"context: {exc}") from None
        try:
            reward = RewardFunction.from_dict(data["reward"])
        except ValueError as exc:
            raise ValueError(f"reward: {exc}") from None
        if "n" in data and int(data["n"]) != len(weights):
            raise ValueError(f"field 'n' is {data['n']} but {len(weights)} weight distributions given")
        return cls(tuple(weights), context, reward, int(data.get("seed", 0)))
