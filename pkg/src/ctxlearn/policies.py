"""Optimal policies and exact evaluators for posted pricing, Pandora's box
and optimal stopping on discrete value distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .metrics import levy_distance
from .valuedist import DiscreteValueDistribution, stochastically_dominates

PROBLEMS = ("revenue", "pandora", "stopping")
DEFAULT_EXACT_BUDGET = 10**6
DEFAULT_MC_DRAWS = 10**5


# ----------------------------------------------------------------------
# policy types
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class PricePolicy:
    price: float

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "revenue", "price": self.price}


@dataclass(frozen=True)
class PandoraPolicy:
    fair_caps: tuple[float, ...]
    visit_order: tuple[int, ...] = field(default=())

    def __post_init__(self):
        caps = tuple(float(c) for c in self.fair_caps)
        object.__setattr__(self, "fair_caps", caps)
        if not self.visit_order:
            object.__setattr__(self, "visit_order", visit_order(caps))
        elif sorted(self.visit_order) != list(range(len(caps))):
            raise ValueError("visit_order must be a permutation of the box indices")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "pandora", "fair_caps": list(self.fair_caps), "visit_order": list(self.visit_order)}


@dataclass(frozen=True)
class StoppingPolicy:
    thresholds: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "stopping", "thresholds": list(self.thresholds)}


PolicySpec = PricePolicy | PandoraPolicy | StoppingPolicy


def policy_from_dict(data: dict[str, Any]) -> PolicySpec:
    kind = data.get("kind")
    if kind == "revenue":
        return PricePolicy(float(data["price"]))
    if kind == "pandora":
        return PandoraPolicy(tuple(data["fair_caps"]), tuple(data.get("visit_order", ())))
    if kind == "stopping":
        return StoppingPolicy(tuple(data["thresholds"]))
    raise ValueError(f"unknown policy kind {kind!r}")


@dataclass(frozen=True)
class PolicyValue:
    """Expected reward of a policy; ``stderr`` is 0 for exact evaluations."""

    value: float
    exact: bool = True
    stderr: float = 0.0


# ----------------------------------------------------------------------
# single-buyer posted price
# ----------------------------------------------------------------------
def revenue(d: DiscreteValueDistribution, p: float) -> float:
    """``p * Pr[r >= p]``; the buyer accepts at equality."""
    return float(p * d.survival(p))


def optimal_price(d: DiscreteValueDistribution) -> tuple[float, float]:
    """Revenue-maximizing posted price among the atoms, lowest on ties."""
    revs = d.atoms * (1.0 - np.concatenate(([0.0], np.cumsum(d.weights)[:-1])))
    best = int(np.flatnonzero(revs >= revs.max() - 1e-12)[0])
    return float(d.atoms[best]), float(revs[best])


# ----------------------------------------------------------------------
# Pandora's box
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PandoraInstance:
    boxes: tuple[DiscreteValueDistribution, ...]
    costs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "costs", tuple(float(o) for o in self.costs))
        if len(self.boxes) != len(self.costs):
            raise ValueError("every box needs exactly one opening cost")
        if any(o < 0 for o in self.costs):
            raise ValueError("opening costs must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.boxes)


def fair_cap(d: DiscreteValueDistribution, o: float) -> float:
    """Solve ``E[max{0, r - sigma}] = o`` for ``sigma``.

    ``o = 0`` gives the largest atom; below the smallest atom the equation is
    extended linearly, so ``o >= E[r] - min atom`` gives ``E[r] - o``.
    """
    if o < 0:
        raise ValueError("opening cost must be nonnegative")
    a, w = d.atoms, d.weights
    if o == 0:
        return float(a[-1])
    # on [a[j-1], a[j]] the excess is tail_mass[j] * (tail_mean[j] - sigma)
    tail_w = np.cumsum(w[::-1])[::-1]
    tail_aw = np.cumsum((w * a)[::-1])[::-1]
    for j in range(a.size - 1, 0, -1):
        excess_at_lower = tail_aw[j] - tail_w[j] * a[j - 1]
        if excess_at_lower >= o:
            return float((tail_aw[j] - o) / tail_w[j])
    return float(d.mean() - o)


def visit_order(caps: Sequence[float]) -> tuple[int, ...]:
    """Indices by decreasing cap; ties go to the lower index."""
    return tuple(sorted(range(len(caps)), key=lambda i: (-caps[i], i)))


def weitzman_policy(inst: PandoraInstance) -> PandoraPolicy:
    caps = tuple(fair_cap(d, o) for d, o in zip(inst.boxes, inst.costs))
    return PandoraPolicy(caps)


def _outcome_grid(boxes: Sequence[DiscreteValueDistribution]) -> tuple[np.ndarray, np.ndarray]:
    """All outcome tuples (rows) and their probabilities."""
    values = np.stack([g.ravel() for g in np.meshgrid(*(d.atoms for d in boxes), indexing="ij")], axis=1)
    probs = np.ones(1)
    for d in boxes:
        probs = np.multiply.outer(probs, d.weights).ravel()
    return values, probs


def _run_pandora(values: np.ndarray, caps: Sequence[float], order: Sequence[int],
                 costs: Sequence[float]) -> np.ndarray:
    """Net reward on each row of ``values`` (one realized tuple per row)."""
    best = np.zeros(values.shape[0])
    paid = np.zeros(values.shape[0])
    active = np.ones(values.shape[0], dtype=bool)
    for i in order:
        opens = active & (best < caps[i])
        paid = paid + opens * costs[i]
        best = np.where(opens, np.maximum(best, values[:, i]), best)
        active = opens
    return best - paid


def outcome_count(boxes: Sequence[DiscreteValueDistribution]) -> int:
    return math.prod(len(d) for d in boxes)


def evaluate_pandora(inst: PandoraInstance, policy: PandoraPolicy,
                     budget: int = DEFAULT_EXACT_BUDGET, rng: np.random.Generator | None = None,
                     draws: int = DEFAULT_MC_DRAWS) -> PolicyValue:
    """Expected net reward of a cap policy.

    Boxes are opened in ``visit_order`` while the best value seen so far is
    strictly below the next box's cap. Exact over all outcome tuples when
    there are at most ``budget`` of them, otherwise seeded Monte Carlo.
    """
    if inst.n == 0:
        return PolicyValue(0.0)
    if len(policy.fair_caps) != inst.n:
        raise ValueError("policy and instance disagree on the number of boxes")
    if outcome_count(inst.boxes) <= budget:
        values, probs = _outcome_grid(inst.boxes)
        net = _run_pandora(values, policy.fair_caps, policy.visit_order, inst.costs)
        return PolicyValue(float(probs @ net))
    if rng is None:
        rng = np.random.default_rng(0)
    values = np.column_stack([d.sample(rng, draws) for d in inst.boxes])
    net = _run_pandora(values, policy.fair_caps, policy.visit_order, inst.costs)
    return PolicyValue(float(net.mean()), exact=False, stderr=float(net.std(ddof=1) / math.sqrt(draws)))


def evaluate_pandora_bruteforce(inst: PandoraInstance, policy: PandoraPolicy) -> float:
    """Independent exact evaluator: recursion over the boxes in visit order,
    branching on each opened box's outcomes."""

    def go(pos: int, best: float) -> float:
        if pos == inst.n:
            return best
        i = policy.visit_order[pos]
        if not best < policy.fair_caps[i]:
            return best
        box = inst.boxes[i]
        return -inst.costs[i] + sum(
            float(w) * go(pos + 1, max(best, float(a))) for a, w in zip(box.atoms, box.weights)
        )

    return go(0, 0.0)


# ----------------------------------------------------------------------
# optimal stopping
# ----------------------------------------------------------------------
def stopping_thresholds(ds: Sequence[DiscreteValueDistribution]) -> StoppingPolicy:
    """Backward induction: ``tau_n = 0`` and ``tau_i = E[max{tau_{i+1}, r_{i+1}}]``."""
    if not ds:
        raise ValueError("need at least one distribution")
    tau = [0.0] * len(ds)
    for i in range(len(ds) - 2, -1, -1):
        tau[i] = ds[i + 1].capped_expectation(tau[i + 1])
    return StoppingPolicy(tuple(tau))


def evaluate_stopping(ds: Sequence[DiscreteValueDistribution], policy: StoppingPolicy) -> float:
    """Exact expected reward of a threshold policy, accepting ``r_i >= tau_i``."""
    if len(ds) != len(policy.thresholds):
        raise ValueError("one threshold per distribution required")
    tail = 0.0
    for d, tau in zip(reversed(ds), reversed(policy.thresholds)):
        take = d.atoms >= tau
        tail = float(d.weights @ np.where(take, d.atoms, tail))
    return tail


# ----------------------------------------------------------------------
# problem dispatch
# ----------------------------------------------------------------------
def _check_problem(problem: str, n: int, costs) -> None:
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    if problem == "revenue" and n != 1:
        raise ValueError("single-buyer revenue needs exactly one distribution")
    if problem == "pandora":
        if costs is None:
            raise ValueError("pandora needs opening costs")
        if len(costs) != n:
            raise ValueError("pandora needs one opening cost per distribution")


def optimal_policy(problem: str, ds: Sequence[DiscreteValueDistribution], costs=None) -> PolicySpec:
    _check_problem(problem, len(ds), costs)
    if problem == "revenue":
        return PricePolicy(optimal_price(ds[0])[0])
    if problem == "pandora":
        return weitzman_policy(PandoraInstance(tuple(ds), tuple(costs)))
    return stopping_thresholds(ds)


def policy_value(problem: str, ds: Sequence[DiscreteValueDistribution], policy: PolicySpec,
                 costs=None, budget: int = DEFAULT_EXACT_BUDGET,
                 rng: np.random.Generator | None = None) -> PolicyValue:
    _check_problem(problem, len(ds), costs)
    if problem == "revenue":
        return PolicyValue(revenue(ds[0], policy.price))
    if problem == "pandora":
        return evaluate_pandora(PandoraInstance(tuple(ds), tuple(costs)), policy, budget, rng)
    return PolicyValue(evaluate_stopping(ds, policy))


def deploy_learned(problem: str, learned: Sequence[DiscreteValueDistribution], eps: float,
                   costs=None) -> PolicySpec:
    """Optimal policy on the downward-shifted learned distributions."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    shifted = [d.shift_plus_eps(eps) for d in learned]
    return optimal_policy(problem, shifted, costs)


@dataclass(frozen=True)
class MonotonicityReport:
    lhs: float
    rhs: float
    holds: bool


def check_strong_monotonicity(problem: str, d_list: Sequence[DiscreteValueDistribution],
                              dp_list: Sequence[DiscreteValueDistribution], costs=None,
                              slack: float = 1e-9) -> MonotonicityReport:
    """Compare ``R_D(pi*_{D'})`` against ``R_{D'}(pi*_{D'})`` for dominating ``D``."""
    if len(d_list) != len(dp_list):
        raise ValueError("distribution lists differ in length")
    for i, (d, dp) in enumerate(zip(d_list, dp_list)):
        if not stochastically_dominates(d, dp):
            raise ValueError(f"D[{i}] does not stochastically dominate D'[{i}]")
    pi = optimal_policy(problem, dp_list, costs)
    lhs = policy_value(problem, d_list, pi, costs).value
    rhs = policy_value(problem, dp_list, pi, costs).value
    return MonotonicityReport(lhs, rhs, lhs >= rhs - slack)


@dataclass(frozen=True)
class StabilityReport:
    opt_d: float
    opt_dp: float
    eps: float
    gamma: float
    bound: float
    holds: bool


def stability_gamma(problem: str, n: int, c_max: float) -> float:
    """Stability constants: ``c_max + 1`` for a single buyer, ``4n`` for
    Pandora's box, and ``8n`` for stopping (a Lévy distance of ``eps/4``
    costs at most ``2n eps``)."""
    if problem == "revenue":
        return c_max + 1.0
    if problem == "pandora":
        return 4.0 * n
    if problem == "stopping":
        return 8.0 * n
    raise ValueError(f"unknown problem {problem!r}")


def check_stability(problem: str, d_list: Sequence[DiscreteValueDistribution],
                    dp_list: Sequence[DiscreteValueDistribution], gamma: float | None = None,
                    costs=None, slack: float = 1e-9) -> StabilityReport:
    """Check ``OPT(D) >= OPT(D') - gamma * eps`` with ``eps`` the largest
    per-coordinate Lévy distance."""
    if len(d_list) != len(dp_list):
        raise ValueError("distribution lists differ in length")
    if gamma is None:
        gamma = stability_gamma(problem, len(d_list), max(d.c_max for d in d_list))
    eps = max(levy_distance(d, dp) for d, dp in zip(d_list, dp_list))
    opt_d = policy_value(problem, d_list, optimal_policy(problem, d_list, costs), costs).value
    opt_dp = policy_value(problem, dp_list, optimal_policy(problem, dp_list, costs), costs).value
    bound = opt_dp - gamma * eps
    return StabilityReport(opt_d, opt_dp, eps, gamma, bound, opt_d >= bound - slack)
