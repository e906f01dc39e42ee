"""Acceptance criteria as runnable checks.

Each ``criterion_*`` function returns a :class:`CriterionResult`; ``run_all``
runs every criterion. ``quick=True`` shrinks trial counts for smoke runs;
the tolerances never change.
"""

from __future__ import annotations

import contextlib
import io
import itertools
import json
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .harness import ExperimentConfig, per_context_eval, run_pipeline
from .learner import (
    LearnerConfig,
    learn,
    lipschitz_bound,
    required_samples_capped,
    required_samples_levy,
    required_samples_loss,
)
from .loss import (
    cap_grid,
    empirical_loss,
    loss_gap_decomposition,
    loss_subgradient,
    mean_shift_identity,
    true_loss_at_context,
)
from .metrics import capped_gap_sup, levy_distance, levy_distance_oracle, wasserstein_distance
from .model import (
    ContextDistribution,
    InstanceSpec,
    LabeledSample,
    RewardFunction,
    WeightDistribution,
    draw_samples,
)
from .policies import (
    PandoraInstance,
    PandoraPolicy,
    StoppingPolicy,
    check_stability,
    check_strong_monotonicity,
    evaluate_pandora,
    evaluate_pandora_bruteforce,
    evaluate_stopping,
    fair_cap,
    optimal_price,
    revenue,
    stopping_thresholds,
    weitzman_policy,
)
from .valuedist import DiscreteValueDistribution


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:>2}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


def random_value_dist(rng: np.random.Generator, max_atoms: int = 5, c_max: float = 1.0) -> DiscreteValueDistribution:
    n = int(rng.integers(1, max_atoms + 1))
    return DiscreteValueDistribution(rng.random(n) * c_max, rng.dirichlet(np.ones(n)), c_max)


def random_pair(rng: np.random.Generator) -> tuple[DiscreteValueDistribution, DiscreteValueDistribution]:
    """Independent pairs mixed with nearby pairs (jittered atoms and weights)."""
    d = random_value_dist(rng)
    if rng.random() < 0.5:
        return d, random_value_dist(rng)
    atoms = np.clip(d.atoms + rng.normal(0, 0.05, len(d)), 0, 1)
    w = d.weights * np.exp(rng.normal(0, 0.3, len(d)))
    return d, DiscreteValueDistribution(atoms, w / w.sum())


def random_weight_dist(rng: np.random.Generator, dim: int, max_atoms: int = 5,
                       uniform: bool = False) -> WeightDistribution:
    k = int(rng.integers(1, max_atoms + 1))
    atoms = rng.random((k, dim))
    if uniform:
        return WeightDistribution.uniform(atoms)
    return WeightDistribution(atoms, rng.dirichlet(np.ones(k)))


def _timed(number: int, name: str, limit: float | None, body: Callable[[], tuple[bool, str]]) -> CriterionResult:
    start = time.perf_counter()
    ok, detail = body()
    elapsed = time.perf_counter() - start
    if limit is not None and elapsed > limit:
        ok = False
        detail += f"; runtime {elapsed:.1f}s exceeds {limit:.0f}s"
    return CriterionResult(number, name, ok, detail, elapsed)


def _n(full: int, quick: bool, small: int) -> int:
    return small if quick else full


# ----------------------------------------------------------------------
def criterion_1(quick: bool = False) -> CriterionResult:
    def body():
        rng = np.random.default_rng(101)
        worst = 0.0
        for _ in range(_n(10_000, quick, 1000)):
            z, z2 = rng.uniform(-1, 2, 2)
            k = int(rng.integers(1, 7))
            lhs, rhs = mean_shift_identity(z, z2, rng.random(k), rng.dirichlet(np.ones(k)))
            worst = max(worst, abs(lhs - rhs))
        return worst <= 1e-12, f"max |lhs - rhs| = {worst:.2e} (tol 1e-12)"

    return _timed(1, "mean-shift identity", 1.0, body)


def criterion_2(quick: bool = False) -> CriterionResult:
    def body():
        rng = np.random.default_rng(102)
        worst = 0.0
        for _ in range(_n(1000, quick, 200)):
            d = int(rng.integers(1, 4))
            f = RewardFunction.linear(d)
            grid = cap_grid(f.c_max, float(rng.choice([0.1, 0.25, 0.5, 0.3])))
            vp, vs = random_weight_dist(rng, d), random_weight_dist(rng, d)
            x = rng.random(d)
            gap = true_loss_at_context(vp, vs, f, x, grid) - true_loss_at_context(vs, vs, f, x, grid)
            worst = max(worst, abs(loss_gap_decomposition(vp, vs, f, x, grid).sum() - gap))
        return worst <= 1e-9, f"max |sum of per-cap gaps - loss gap| = {worst:.2e} (tol 1e-9)"

    return _timed(2, "loss-gap decomposition", 10.0, body)


def _min_kink_distance(V, S, f, caps) -> float:
    X = np.array([s.context for s in S])
    vals = f.values(V.atoms, X)
    return float(np.min(np.abs(vals[:, :, None] - caps[None, None, :])))


def criterion_3(quick: bool = False) -> CriterionResult:
    def body():
        rng = np.random.default_rng(103)
        h = 1e-6
        worst_rel, worst_norm_excess, done = 0.0, -math.inf, 0
        target = _n(100, quick, 30)
        while done < target:
            d = int(rng.integers(1, 4))
            k = int(rng.integers(1, 5))
            if rng.random() < 0.7:
                f = RewardFunction.linear(d)
            else:
                f = RewardFunction.max_affine(rng.normal(0, 0.5, (3, d)), rng.normal(0, 0.3, (3, d)),
                                              rng.uniform(0.2, 0.6, 3), c_max=2.0)
            eps = float(rng.choice([0.1, 0.25, 0.5]))
            grid = cap_grid(f.c_max, eps)
            V = WeightDistribution.uniform(rng.random((k, d)))
            S = [LabeledSample(tuple(rng.random(d)), float(rng.uniform(0, f.c_max))) for _ in range(5)]
            X = np.array([s.context for s in S])
            raw = f._raw(V.atoms, X)
            if _min_kink_distance(V, S, f, grid.values) < 1e-4 or np.any(raw < 1e-4) or np.any(raw > f.c_max - 1e-4):
                continue
            if f.kind == "max_affine":
                pieces = np.sort((V.atoms @ f.slopes.T)[None] + (X @ f.context_slopes.T + f.intercepts)[:, None], axis=2)
                if np.min(pieces[..., -1] - pieces[..., -2]) < 1e-4:
                    continue
            g = loss_subgradient(V, S, f, grid)
            fd = np.zeros_like(g)
            for i in range(k):
                for j in range(d):
                    up, dn = V.atoms.copy(), V.atoms.copy()
                    up[i, j] += h
                    dn[i, j] -= h
                    fd[i, j] = (empirical_loss(WeightDistribution.uniform(up), S, f, grid)
                                - empirical_loss(WeightDistribution.uniform(dn), S, f, grid)) / (2 * h)
            rel = np.linalg.norm(g - fd) / np.linalg.norm(g)
            rho = lipschitz_bound(f.c_max, eps, f.xi, k)
            worst_rel = max(worst_rel, rel)
            worst_norm_excess = max(worst_norm_excess, np.linalg.norm(g) - rho)
            done += 1
        ok = worst_rel <= 1e-5 and worst_norm_excess <= 1e-9
        return ok, (f"max relative FD error {worst_rel:.2e} (tol 1e-5); "
                    f"max(||g|| - rho) = {worst_norm_excess:.3g} (tol 1e-9) over {done} instances")

    return _timed(3, "subgradient vs finite differences", 30.0, body)


def _pairs(seed: int, count: int):
    rng = np.random.default_rng(seed)
    return [random_pair(rng) for _ in range(count)]


def criterion_4(quick: bool = False) -> CriterionResult:
    def body():
        worst = -math.inf
        for d, dp in _pairs(104, _n(1000, quick, 200)):
            worst = max(worst, levy_distance(d, dp) - math.sqrt(2 * capped_gap_sup(d, dp, 1e-3)))
        return worst <= 1e-6, f"max(levy - sqrt(2 capped gap)) = {worst:.3g} (tol 1e-6)"

    return _timed(4, "Lévy bounded by capped-expectation gap", 30.0, body)


def criterion_5(quick: bool = False) -> CriterionResult:
    def body():
        worst = -math.inf
        for d, dp in _pairs(104, _n(1000, quick, 200)):
            worst = max(worst, wasserstein_distance(d, dp) - 4 * levy_distance(d, dp))
        return worst <= 1e-9, f"max(W1 - 4 levy) = {worst:.3g} (tol 1e-9)"

    return _timed(5, "Wasserstein within 4x Lévy", None, body)


def criterion_6(quick: bool = False) -> CriterionResult:
    def body():
        step = 0.0025
        worst = 0.0
        for d, dp in _pairs(106, _n(1000, quick, 150)):
            worst = max(worst, abs(levy_distance(d, dp) - levy_distance_oracle(d, dp, step)))
        pm = DiscreteValueDistribution.point_mass
        h1 = levy_distance(pm(0.0), pm(0.3))
        h2 = levy_distance(pm(0.0), DiscreteValueDistribution.uniform([0.0, 1.0]))
        ok = worst <= 2 * step and abs(h1 - 0.3) <= 1e-6 and abs(h2 - 0.5) <= 1e-6
        return ok, f"max |levy - oracle| = {worst:.4f} (tol {2 * step}); hand values {h1:.9f}, {h2:.9f}"

    return _timed(6, "Lévy exactness vs brute-force oracle", None, body)


def stopping_bruteforce(ds, thresholds) -> float:
    """Expected reward by enumerating every outcome tuple."""
    total = 0.0
    for outcome in itertools.product(*(zip(d.atoms, d.weights) for d in ds)):
        prob = math.prod(float(w) for _, w in outcome)
        reward = 0.0
        for (a, _), tau in zip(outcome, thresholds):
            if a >= tau:
                reward = float(a)
                break
        total += prob * reward
    return total


def criterion_7(quick: bool = False) -> CriterionResult:
    def body():
        rng = np.random.default_rng(107)
        n_inst = _n(200, quick, 40)
        n_rand = _n(1000, quick, 200)
        price_grid = np.arange(0, 1001) * 1e-3
        worst_price = -math.inf
        worst_pandora = -math.inf
        worst_stop = -math.inf
        worst_enum = 0.0
        for _ in range(n_inst):
            d = random_value_dist(rng)
            best = optimal_price(d)[1]
            grid_rev = price_grid * d.survival(price_grid)
            worst_price = max(worst_price, float(grid_rev.max()) - best)
        for _ in range(n_inst):
            n = int(rng.integers(1, 5))
            boxes = tuple(random_value_dist(rng) for _ in range(n))
            inst = PandoraInstance(boxes, tuple(rng.uniform(0, 0.5, n)))
            pol = weitzman_policy(inst)
            v = evaluate_pandora(inst, pol).value
            worst_enum = max(worst_enum, abs(v - evaluate_pandora_bruteforce(inst, pol)))
            for t in range(n_rand):
                other = PandoraPolicy(tuple(rng.uniform(-0.2, 1.2, n)))
                ov = evaluate_pandora(inst, other).value
                worst_pandora = max(worst_pandora, ov - v)
                if t < 10:
                    worst_enum = max(worst_enum, abs(ov - evaluate_pandora_bruteforce(inst, other)))
        for _ in range(n_inst):
            n = int(rng.integers(1, 5))
            ds = [random_value_dist(rng) for _ in range(n)]
            pol = stopping_thresholds(ds)
            v = evaluate_stopping(ds, pol)
            worst_enum = max(worst_enum, abs(v - stopping_bruteforce(ds, pol.thresholds)))
            for t in range(n_rand):
                taus = tuple(rng.uniform(0, 1, n))
                ov = evaluate_stopping(ds, StoppingPolicy(taus))
                worst_stop = max(worst_stop, ov - v)
                if t < 10:
                    worst_enum = max(worst_enum, abs(ov - stopping_bruteforce(ds, taus)))
        ok = max(worst_price, worst_pandora, worst_stop) <= 1e-12 and worst_enum <= 1e-9
        return ok, (f"price grid excess {worst_price:.2e}, random caps excess {worst_pandora:.2e}, "
                    f"random thresholds excess {worst_stop:.2e}, enumerator mismatch {worst_enum:.2e}")

    return _timed(7, "policy optimality oracles", 300.0, body)


def criterion_8(quick: bool = False) -> CriterionResult:
    def body():
        rng = np.random.default_rng(108)
        trials = _n(1000, quick, 100)
        violations = {}
        worst = {}
        for problem in ("revenue", "pandora", "stopping"):
            for eps in (0.01, 0.05, 0.1):
                bad = 0
                for _ in range(trials):
                    n = 1 if problem == "revenue" else int(rng.integers(1, 4))
                    ds = [random_value_dist(rng, 4) for _ in range(n)]
                    dps = [d.shift_plus_eps(eps) for d in ds]
                    costs = tuple(rng.uniform(0, 0.5, n)) if problem == "pandora" else None
                    mono = check_strong_monotonicity(problem, ds, dps, costs, slack=1e-6)
                    fwd = check_stability(problem, ds, dps, costs=costs, slack=1e-6)
                    bwd = check_stability(problem, dps, ds, costs=costs, slack=1e-6)
                    margin = min(mono.lhs - mono.rhs, fwd.opt_d - fwd.bound, bwd.opt_d - bwd.bound)
                    worst[problem] = min(worst.get(problem, math.inf), margin)
                    bad += not (mono.holds and fwd.holds and bwd.holds)
                violations[(problem, eps)] = bad
        total = sum(violations.values())
        detail = ", ".join(f"{p} min margin {m:.3g}" for p, m in worst.items())
        return total == 0, f"{total} violations over {9 * trials} trials; {detail}"

    return _timed(8, "strong monotonicity and stability", None, body)


def _perturbed(d: DiscreteValueDistribution, rng, scale: float) -> DiscreteValueDistribution:
    atoms = np.clip(d.atoms + rng.normal(0, scale, len(d)), 0, 1)
    w = d.weights * np.exp(rng.normal(0, 4 * scale, len(d)))
    return DiscreteValueDistribution(atoms, w / w.sum())


def criterion_9(quick: bool = False) -> CriterionResult:
    def body():
        rng = np.random.default_rng(109)
        trials = _n(500, quick, 100)
        worst_claim1 = worst_claim2 = worst_cap = worst_cost = -math.inf
        for _ in range(trials):
            n = int(rng.integers(1, 5))
            ds = [random_value_dist(rng) for _ in range(n)]
            scale = float(rng.choice([0.01, 0.03, 0.1]))
            dps = [_perturbed(d, rng, scale) for d in ds]
            eps = max(capped_gap_sup(d, dp, 1e-3) for d, dp in zip(ds, dps))
            tp, td = stopping_thresholds(dps), stopping_thresholds(ds)
            r_d_tp = evaluate_stopping(ds, tp)
            r_dp_tp = evaluate_stopping(dps, tp)
            r_d_td = evaluate_stopping(ds, td)
            worst_claim2 = max(worst_claim2, (r_dp_tp - n * eps) - r_d_tp)
            worst_claim1 = max(worst_claim1, (r_d_td - n * eps) - r_dp_tp)
        for _ in range(trials):
            d = random_value_dist(rng)
            dp = _perturbed(d, rng, float(rng.choice([0.01, 0.03, 0.1])))
            eps = capped_gap_sup(d, dp, 1e-3)
            o = float(rng.uniform(0, 0.6))
            sigma = fair_cap(dp, o)
            paid = float(d.weights @ np.maximum(0.0, d.atoms - sigma))
            worst_cap = max(worst_cap, abs(paid - o) - eps)
        for _ in range(trials):
            n = int(rng.integers(1, 5))
            boxes = tuple(random_value_dist(rng) for _ in range(n))
            o = np.array(rng.uniform(0, 0.5, n))
            o2 = np.clip(o + rng.normal(0, 0.05, n), 0, None)
            a = PandoraInstance(boxes, tuple(o))
            b = PandoraInstance(boxes, tuple(o2))
            va = evaluate_pandora(a, weitzman_policy(a)).value
            vb = evaluate_pandora(b, weitzman_policy(b)).value
            worst_cost = max(worst_cost, (va - np.abs(o - o2).sum()) - vb)
        ok = max(worst_claim1, worst_claim2, worst_cap) <= 1e-6 and worst_cost <= 1e-9
        return ok, (f"stopping claim margins {worst_claim1:.3g}/{worst_claim2:.3g}, "
                    f"fair-cap cost excess {worst_cap:.3g}, perturbed-cost excess {worst_cost:.3g}")

    return _timed(9, "stopping and Pandora transfer bounds", None, body)


def trend_instance() -> InstanceSpec:
    """d=2, linear reward, 3-atom weight distribution, 16 finite contexts."""
    vstar = WeightDistribution(np.array([[0.2, 0.7], [0.8, 0.3], [0.5, 0.9]]), np.array([0.3, 0.3, 0.4]))
    levels = np.linspace(0, 1, 4)
    ctx = ContextDistribution.finite(np.array([[a, b] for a in levels for b in levels]))
    return InstanceSpec((vstar,), ctx, RewardFunction.linear(2), seed=0)


def trend_config(m: int, seed: int, iterations: int = 500, problem: str = "none") -> ExperimentConfig:
    return ExperimentConfig(
        instance=trend_instance(),
        m=m,
        learner=LearnerConfig(k=8, epsilon=0.25, iterations=iterations),
        problem=problem,
        eval_all_contexts=True,
        seed=seed,
    )


def criterion_10(quick: bool = False) -> CriterionResult:
    def body():
        seeds = range(_n(10, quick, 4))
        iterations = _n(500, quick, 200)
        med = {}
        for m in (100, 5000):
            runs = [run_pipeline(trend_config(m, s, iterations), timestamp=False) for s in seeds]
            med[m] = {key: float(np.median([r["aggregates"][key]["mean"] for r in runs]))
                      for key in ("loss_gap", "levy")}
        planted = run_pipeline(trend_config(100, 0).replace(plant_truth=True, problem="revenue"), timestamp=False)
        planted_max = max(max(abs(r[k]) for k in ("loss_gap", "capped_gap_sup", "levy", "regret"))
                          for r in planted["records"])
        ok = (med[5000]["loss_gap"] < med[100]["loss_gap"] and med[5000]["levy"] < med[100]["levy"]
              and planted_max == 0.0)
        return ok, (f"median mean loss gap {med[100]['loss_gap']:.4f} -> {med[5000]['loss_gap']:.4f}, "
                    f"median mean levy {med[100]['levy']:.4f} -> {med[5000]['levy']:.4f}; "
                    f"planted max gap {planted_max:.1e}")

    return _timed(10, "scaled learning trend", 600.0, body)


def criterion_11(quick: bool = False) -> CriterionResult:
    def body():
        exact = required_samples_loss(1, 1, 1, 0.5, 0.5)
        grid = [0.05, 0.1, 0.2, 0.25, 0.5, 0.75, 1.0]
        monotone = True
        for fn in (required_samples_loss, required_samples_capped, required_samples_levy):
            for a, b in zip(grid, grid[1:]):
                for other in grid:
                    monotone &= fn(1, 1, 1, a, other) >= fn(1, 1, 1, b, other)
                    monotone &= fn(1, 1, 1, other, a) >= fn(1, 1, 1, other, b)
        return exact == 2048 and monotone, f"(1,1,1,0.5,0.5) -> {exact}; monotone in eps and delta: {monotone}"

    return _timed(11, "sample-size calculators", None, body)


def _strip_timestamp(path: Path) -> bytes:
    lines = path.read_bytes().splitlines(keepends=True)
    return b"".join(line for line in lines if not line.lstrip().startswith(b'"timestamp"'))


def criterion_12(quick: bool = False) -> CriterionResult:
    from .cli import main

    def body():
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            cfg = trend_config(300, 7, iterations=100, problem="revenue").to_dict()
            (tmp / "config.json").write_text(json.dumps(cfg))
            with contextlib.redirect_stdout(io.StringIO()):
                codes = [main(["evaluate", "--config", str(tmp / "config.json"), "--out", str(tmp / run)])
                         for run in ("a", "b")]
            a, b = (_strip_timestamp(tmp / run / "report.json") for run in ("a", "b"))
            same_csv = (tmp / "a" / "records.csv").read_bytes() == (tmp / "b" / "records.csv").read_bytes()
        ok = codes == [0, 0] and a == b and same_csv
        return ok, f"exit codes {codes}; reports identical: {a == b}; records identical: {same_csv}"

    return _timed(12, "pipeline determinism", None, body)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12)


def run_all(quick: bool = False) -> list[CriterionResult]:
    return [c(quick) for c in CRITERIA]
