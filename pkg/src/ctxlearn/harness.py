"""Experiment pipeline: sample, learn, evaluate per context, aggregate, persist."""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .learner import LearnerConfig, LearnResult, learn
from .loss import CapGrid, cap_grid, true_loss_at_context
from .metrics import capped_gap_sup, levy_distance, wasserstein_distance
from .model import (
    ContextDistribution,
    InstanceSpec,
    LabeledSample,
    RewardFunction,
    WeightDistribution,
    draw_samples,
    induced_value_distribution,
)
from .policies import (
    DEFAULT_EXACT_BUDGET,
    PROBLEMS,
    deploy_learned,
    optimal_policy,
    policy_value,
)

OUT_DIR_ENV = "CTXLEARN_OUT"
METRICS = ("loss_gap", "capped_gap_sup", "levy", "wasserstein")


class SchemaError(ValueError):
    """Malformed input file; the message names the offending field or row."""


# ----------------------------------------------------------------------
# canonical JSON and digests
# ----------------------------------------------------------------------
def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def _read_json(path: str | os.PathLike) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _write_json(obj: Any, path: str | os.PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False))
        fh.write("\n")


# ----------------------------------------------------------------------
# instance and sample files
# ----------------------------------------------------------------------
def instance_from_dict(data: Any, source: str = "instance") -> InstanceSpec:
    if not isinstance(data, Mapping):
        raise SchemaError(f"{source}: top level must be a JSON object")
    try:
        return InstanceSpec.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{source}: {exc}") from None


def parse_instance(path: str | os.PathLike) -> InstanceSpec:
    return instance_from_dict(_read_json(path), str(path))


def dump_instance(inst: InstanceSpec, path: str | os.PathLike) -> None:
    _write_json(inst.to_dict(), path)


def dump_samples(samples: Sequence[LabeledSample], path: str | os.PathLike) -> None:
    """CSV with header ``x_1, ..., x_d, y``; floats written with ``repr``."""
    if not samples:
        raise ValueError("no samples to write")
    d = len(samples[0].context)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i + 1}" for i in range(d)] + ["y"])
        for s in samples:
            w.writerow([repr(float(c)) for c in s.context] + [repr(float(s.label))])


def load_samples(path: str | os.PathLike) -> list[LabeledSample]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = rows[0]
    d = len(header) - 1
    expected = [f"x_{i + 1}" for i in range(d)] + ["y"]
    if d < 1 or header != expected:
        raise SchemaError(f"{path}: header must be {','.join(expected) if d >= 1 else 'x_1,...,x_d,y'}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise SchemaError(f"{path}: row {lineno} has {len(row)} columns, expected {d + 1}")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise SchemaError(f"{path}: row {lineno} has a non-numeric entry") from None
        out.append(LabeledSample(tuple(vals[:-1]), vals[-1]))
    return out


def write_learned(results: Sequence[LearnResult], path: str | os.PathLike) -> None:
    _write_json({"learned": [r.to_dict() for r in results]}, path)


def load_learned(path: str | os.PathLike) -> list[WeightDistribution]:
    data = _read_json(path)
    try:
        return [WeightDistribution.from_dict(r["learned"]) for r in data["learned"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed learned-distribution file ({exc})") from None


def generate_instance(n: int, dim: int, atoms: int, seed: int, reward: str = "linear",
                      contexts: int | None = 16, context_step: float = 0.25) -> InstanceSpec:
    """Random instance: each weight distribution has ``atoms`` random atoms in
    ``[0, 1]^dim`` with Dirichlet weights. ``contexts`` random context atoms
    with uniform weights, or a product-uniform grid when ``contexts`` is None."""
    rng = np.random.default_rng(seed)
    weights = [WeightDistribution(rng.random((atoms, dim)), rng.dirichlet(np.ones(atoms))) for _ in range(n)]
    if contexts is None:
        ctx = ContextDistribution.product_uniform(dim, context_step)
    else:
        ctx = ContextDistribution.finite(rng.random((contexts, dim)))
    if reward == "linear":
        f = RewardFunction.linear(dim)
    elif reward == "gate":
        f = RewardFunction.gate(dim)
    else:
        raise ValueError(f"generate supports reward 'linear' or 'gate', got {reward!r}")
    return InstanceSpec(tuple(weights), ctx, f, seed)


# ----------------------------------------------------------------------
# experiment configuration
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    instance: InstanceSpec
    m: int = 1000
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    problem: str = "none"
    costs: tuple[float, ...] | None = None
    eval_contexts: int = 16
    eval_all_contexts: bool = False
    deploy_eps: float = 0.0
    levy_target: float = 0.1
    exact_budget: int = DEFAULT_EXACT_BUDGET
    plant_truth: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise SchemaError("field 'm' must be at least 1")
        if self.eval_contexts < 1:
            raise SchemaError("field 'eval_contexts' must be at least 1")
        if self.problem != "none" and self.problem not in PROBLEMS:
            raise SchemaError(f"field 'problem' must be one of {('none',) + PROBLEMS}")
        if self.problem == "revenue" and self.instance.n != 1:
            raise SchemaError("field 'problem': revenue needs an instance with n = 1")
        if self.problem == "pandora":
            if self.costs is None or len(self.costs) != self.instance.n:
                raise SchemaError("field 'costs' must list one opening cost per distribution")
            if any(o < 0 for o in self.costs):
                raise SchemaError("field 'costs' must be nonnegative")
        if self.deploy_eps < 0:
            raise SchemaError("field 'deploy_eps' must be nonnegative")
        if self.exact_budget < 1:
            raise SchemaError("field 'exact_budget' must be positive")
        if self.eval_all_contexts and self.instance.context.kind != "finite":
            raise SchemaError("field 'eval_all_contexts' needs a finite context distribution")

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance": self.instance.to_dict(),
            "m": self.m,
            "learner": self.learner.to_dict(),
            "problem": self.problem,
            "costs": None if self.costs is None else list(self.costs),
            "eval_contexts": self.eval_contexts,
            "eval_all_contexts": self.eval_all_contexts,
            "deploy_eps": self.deploy_eps,
            "levy_target": self.levy_target,
            "exact_budget": self.exact_budget,
            "plant_truth": self.plant_truth,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Any, base_dir: str | os.PathLike | None = None) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise SchemaError("config: top level must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"config: unknown field(s) {sorted(unknown)}")
        if "instance" not in data:
            raise SchemaError("config: missing field 'instance'")
        raw_inst = data["instance"]
        if isinstance(raw_inst, str):
            p = Path(raw_inst)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            instance = parse_instance(p)
        else:
            instance = instance_from_dict(raw_inst, "config field 'instance'")
        kwargs: dict[str, Any] = {"instance": instance}
        try:
            if "learner" in data:
                kwargs["learner"] = LearnerConfig.from_dict(dict(data["learner"]))
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"config field 'learner': {exc}") from None
        casts = {"m": int, "problem": str, "eval_contexts": int, "eval_all_contexts": bool,
                 "deploy_eps": float, "levy_target": float, "exact_budget": int,
                 "plant_truth": bool, "seed": int}
        for key, cast in casts.items():
            if key in data:
                try:
                    kwargs[key] = cast(data[key])
                except (TypeError, ValueError):
                    raise SchemaError(f"config field {key!r} has invalid value {data[key]!r}") from None
        if data.get("costs") is not None:
            try:
                kwargs["costs"] = tuple(float(o) for o in data["costs"])
            except (TypeError, ValueError):
                raise SchemaError("config field 'costs' must be a list of numbers") from None
        return cls(**kwargs)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    return ExperimentConfig.from_dict(_read_json(path), Path(path).parent)


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------
def per_context_eval(vstar: WeightDistribution | Sequence[WeightDistribution],
                     vlearned: WeightDistribution | Sequence[WeightDistribution],
                     f: RewardFunction, x, grid: CapGrid, problem: str = "none",
                     deploy_eps: float = 0.0, costs: Sequence[float] | None = None,
                     exact_budget: int = DEFAULT_EXACT_BUDGET,
                     rng: np.random.Generator | None = None) -> dict[str, Any]:
    """Gap metrics and policy regret at one context.

    With several distributions the scalar metrics are the maximum over them;
    the per-distribution values are kept alongside.
    """
    vstar = [vstar] if isinstance(vstar, WeightDistribution) else list(vstar)
    vlearned = [vlearned] if isinstance(vlearned, WeightDistribution) else list(vlearned)
    if len(vstar) != len(vlearned):
        raise ValueError("need one learned distribution per true distribution")
    x = np.asarray(x, dtype=float).ravel()
    if x.size != f.dim:
        raise ValueError(f"dimension mismatch: context has {x.size} coordinates, reward expects {f.dim}")
    true_d = [induced_value_distribution(v, f, x) for v in vstar]
    learned_d = [induced_value_distribution(v, f, x) for v in vlearned]
    per = {
        "loss_gap": [true_loss_at_context(vl, vs, f, x, grid) - true_loss_at_context(vs, vs, f, x, grid)
                     for vs, vl in zip(vstar, vlearned)],
        "capped_gap_sup": [capped_gap_sup(a, b) for a, b in zip(true_d, learned_d)],
        "levy": [levy_distance(a, b) for a, b in zip(true_d, learned_d)],
        "wasserstein": [wasserstein_distance(a, b) for a, b in zip(true_d, learned_d)],
    }
    record: dict[str, Any] = {"context": [float(c) for c in x]}
    for key, vals in per.items():
        record[key] = float(max(vals))
        record[f"{key}_per_distribution"] = [float(v) for v in vals]
    if problem != "none":
        deployed = deploy_learned(problem, learned_d, deploy_eps, costs)
        learned_val = policy_value(problem, true_d, deployed, costs, exact_budget, rng)
        opt_val = policy_value(problem, true_d, optimal_policy(problem, true_d, costs), costs, exact_budget, rng)
        record.update(
            policy=deployed.to_dict(),
            policy_value_learned=learned_val.value,
            policy_value_optimal=opt_val.value,
            regret=opt_val.value - learned_val.value,
            exact=learned_val.exact and opt_val.exact,
            stderr=math.hypot(learned_val.stderr, opt_val.stderr),
        )
    return record


def _summary(values: Sequence[float], target: float) -> dict[str, float]:
    arr = np.asarray(values, dtype=float)
    return {
        "median": float(np.median(arr)),
        "mean": float(np.mean(arr)),
        "p90": float(np.percentile(arr, 90)),
        "fraction_le_target": float(np.mean(arr <= target)),
    }


def aggregate(records: Sequence[Mapping[str, Any]], target: float) -> dict[str, Any]:
    keys = list(METRICS)
    if records and all("regret" in r for r in records):
        keys.append("regret")
    return {key: _summary([r[key] for r in records], target) for key in keys}


def _child_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def run_pipeline(cfg: ExperimentConfig, timestamp: bool = True) -> dict[str, Any]:
    """Sample, learn each distribution, evaluate on fresh contexts, aggregate."""
    inst = cfg.instance
    f = inst.reward
    grid = cap_grid(f.c_max, cfg.learner.epsilon)
    learned: list[WeightDistribution] = []
    learn_info = []
    for i, vstar in enumerate(inst.weights):
        if cfg.plant_truth:
            learned.append(vstar)
            learn_info.append({"planted": True})
            continue
        rng = np.random.default_rng(_child_seed(cfg.seed, 1, i))
        samples = draw_samples(vstar, inst.context, f, cfg.m, rng)
        lcfg = dataclasses.replace(cfg.learner, seed=_child_seed(cfg.seed, 2, i, cfg.learner.seed))
        result = learn(samples, f, lcfg)
        learned.append(result.learned)
        learn_info.append({
            "planted": False,
            "lambda_used": result.lambda_used,
            "rho_used": result.rho_used,
            "best_iteration": result.best_iteration,
            "best_objective": result.best_objective,
            "learned": result.learned.to_dict(),
        })

    if cfg.eval_all_contexts:
        contexts = inst.context.atoms
    else:
        contexts = inst.context.sample(np.random.default_rng(_child_seed(cfg.seed, 3)), cfg.eval_contexts)
    mc_rng = np.random.default_rng(_child_seed(cfg.seed, 4))
    records = [
        per_context_eval(inst.weights, learned, f, x, grid, cfg.problem, cfg.deploy_eps, cfg.costs,
                         cfg.exact_budget, mc_rng)
        for x in contexts
    ]
    cfg_dict = cfg.to_dict()
    report: dict[str, Any] = {
        "records": records,
        "aggregates": aggregate(records, cfg.levy_target),
        "levy_target": cfg.levy_target,
        "learners": learn_info,
        "provenance": {
            "config_hash": digest(cfg_dict),
            "seed": cfg.seed,
            "input_digest": digest({"instance": inst.to_dict(), "config": cfg_dict}),
        },
    }
    report["provenance"]["report_digest"] = digest(report)
    if timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return report


def write_report(report: Mapping[str, Any], path: str | os.PathLike) -> None:
    _write_json(report, path)


def load_report(path: str | os.PathLike) -> dict[str, Any]:
    data = _read_json(path)
    if not isinstance(data, Mapping) or "records" not in data:
        raise SchemaError(f"{path}: not an evaluation report (missing field 'records')")
    return dict(data)


def write_records_csv(records: Sequence[Mapping[str, Any]], path: str | os.PathLike) -> None:
    if not records:
        raise ValueError("no records to write")
    d = len(records[0]["context"])
    scalars = [k for k in (*METRICS, "policy_value_learned", "policy_value_optimal", "regret", "exact")
               if k in records[0]]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i + 1}" for i in range(d)] + scalars)
        for r in records:
            w.writerow([repr(c) for c in r["context"]] + [repr(r[k]) for k in scalars])


def combine_reports(reports: Sequence[Mapping[str, Any]], target: float | None = None) -> dict[str, Any]:
    """Pool per-context records of several runs and re-aggregate."""
    if not reports:
        raise ValueError("no reports given")
    if target is None:
        target = float(reports[0].get("levy_target", 0.1))
    records = [r for rep in reports for r in rep["records"]]
    per_run = [rep.get("aggregates", {}) for rep in reports]
    medians = {
        key: float(np.median([agg[key]["median"] for agg in per_run if key in agg]))
        for key in per_run[0]
    }
    return {
        "runs": len(reports),
        "levy_target": target,
        "pooled": aggregate(records, target),
        "median_of_run_medians": medians,
        "inputs": [rep.get("provenance", {}) for rep in reports],
    }


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "ctxlearn-out"))
