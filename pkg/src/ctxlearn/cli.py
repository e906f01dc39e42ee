"""Command line entry point: generate, sample, learn, evaluate, report, selftest."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .learner import LearnerConfig, learn
from .model import draw_samples


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else harness.default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _learner_from(args) -> LearnerConfig:
    data = {}
    if args.config:
        raw = harness._read_json(args.config)
        data = dict(raw.get("learner", raw)) if isinstance(raw, dict) else {}
    try:
        cfg = LearnerConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise harness.SchemaError(f"{args.config}: learner: {exc}") from None
    if args.seed is not None:
        cfg = LearnerConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    return cfg


def cmd_generate(args) -> int:
    inst = harness.generate_instance(
        n=args.n, dim=args.dim, atoms=args.atoms, seed=args.seed or 0, reward=args.reward,
        contexts=None if args.contexts == 0 else args.contexts, context_step=args.context_step,
    )
    path = _out_dir(args) / "instance.json"
    harness.dump_instance(inst, path)
    print(path)
    return 0


def cmd_sample(args) -> int:
    inst = harness.parse_instance(args.instance)
    seed = args.seed if args.seed is not None else inst.seed
    out = _out_dir(args)
    for i, vstar in enumerate(inst.weights):
        rng = np.random.default_rng(harness._child_seed(seed, 1, i))
        samples = draw_samples(vstar, inst.context, inst.reward, args.m, rng)
        path = out / f"samples_{i}.csv"
        harness.dump_samples(samples, path)
        print(path)
    return 0


def cmd_learn(args) -> int:
    inst = harness.parse_instance(args.instance)
    cfg = _learner_from(args)
    results = [learn(harness.load_samples(p), inst.reward, cfg) for p in args.samples]
    path = _out_dir(args) / "learned.json"
    harness.write_learned(results, path)
    print(path)
    return 0


def cmd_evaluate(args) -> int:
    if not args.config:
        raise harness.SchemaError("evaluate needs --config")
    cfg = harness.load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.m is not None:
        changes["m"] = args.m
    if args.problem is not None:
        changes["problem"] = args.problem
    if args.deploy_eps is not None:
        changes["deploy_eps"] = args.deploy_eps
    if args.exact_budget is not None:
        changes["exact_budget"] = args.exact_budget
    if changes:
        cfg = harness.ExperimentConfig.from_dict({**cfg.to_dict(), **changes})
    report = harness.run_pipeline(cfg, timestamp=not args.no_timestamp)
    out = _out_dir(args)
    harness.write_report(report, out / "report.json")
    harness.write_records_csv(report["records"], out / "records.csv")
    print(json.dumps(report["aggregates"], indent=2, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    reports = [harness.load_report(p) for p in args.reports]
    summary = harness.combine_reports(reports, args.target)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        path = _out_dir(args) / "summary.json"
        path.write_text(text + "\n", encoding="utf-8")
        print(path)
    else:
        print(text)
    return 0


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=args.quick)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctxlearn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None,
                        help=f"output directory (default: ${harness.OUT_DIR_ENV} or ./ctxlearn-out)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="emit a random InstanceSpec")
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--atoms", type=int, default=3)
    g.add_argument("--reward", default="linear", choices=["linear", "gate"])
    g.add_argument("--contexts", type=int, default=16, help="finite context count; 0 for a product grid")
    g.add_argument("--context-step", type=float, default=0.25)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", parents=[common], help="draw labeled samples as CSV")
    s.add_argument("--instance", required=True)
    s.add_argument("--m", type=int, required=True)
    s.set_defaults(func=cmd_sample)

    le = sub.add_parser("learn", parents=[common], help="learn weight distributions from sample CSVs")
    le.add_argument("--instance", required=True, help="instance supplying the reward function")
    le.add_argument("--samples", nargs="+", required=True)
    le.set_defaults(func=cmd_learn)

    e = sub.add_parser("evaluate", parents=[common], help="run the full pipeline from an experiment config")
    e.add_argument("--m", type=int, default=None)
    e.add_argument("--problem", choices=["none", "revenue", "pandora", "stopping"], default=None)
    e.add_argument("--deploy-eps", type=float, default=None)
    e.add_argument("--exact-budget", type=int, default=None)
    e.add_argument("--no-timestamp", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", parents=[common], help="aggregate several evaluation reports")
    r.add_argument("reports", nargs="+")
    r.add_argument("--target", type=float, default=None)
    r.set_defaults(func=cmd_report)

    t = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    t.add_argument("--quick", action="store_true", help="reduced trial counts")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (harness.SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
