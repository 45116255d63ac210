"""Command-line entry point.

Subcommands: generate, train, eval, matcomp, imitate, sweep, report.
Global flags: --config, --seed, --out, --format. Exit codes: 0 success,
1 configuration/validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reacher
from .anchors import DeltaBank, RhoPolicy, select_anchors
from .bilinear import BilinearPairModel
from .config import ConfigError, ExperimentConfig, split_seed
from .estimators import MLPBaseline
from .experiments import (aggregate, emit_results, read_results,
                          run_experiment, run_matcomp, sweep, expand_grid)
from .functions import read_dataset_csv, write_dataset_csv
from .nets import load_net, net_forward, save_net


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bitrans",
                                description="Bilinear transduction experiments")
    p.add_argument("--config", type=Path, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv",
                   help="results format")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="sample a dataset CSV from the config")
    sub.add_parser("train", help="train the configured methods, saving "
                                 "checkpoints and results")
    ev = sub.add_parser("eval", help="evaluate a checkpoint on a dataset CSV")
    ev.add_argument("--checkpoint", type=Path, required=True,
                    help="checkpoint path (or prefix for paired models)")
    ev.add_argument("--data", type=Path, required=True, help="dataset CSV")
    ev.add_argument("--method", choices=("mlp", "bilinear_transduction"),
                    default="mlp")
    sub.add_parser("matcomp", help="emit perturbation-bound and coverage "
                                   "reports as JSON lines")
    sub.add_parser("imitate", help="collect demos and evaluate rollouts")
    sub.add_parser("sweep", help="run the config grid and aggregate")
    rep = sub.add_parser("report", help="aggregate existing results files")
    rep.add_argument("results", nargs="+", type=Path)
    return p


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    return ExperimentConfig.load(args.config)


def _results_path(args, cfg) -> Path:
    ext = "csv" if args.format == "csv" else "jsonl"
    return args.out / f"{cfg.experiment_id.replace('/', '_')}_results.{ext}"


def cmd_generate(args) -> int:
    from .experiments import build_dataset
    cfg = _load_config(args)
    dataset = build_dataset(cfg, args.seed)
    out = args.out / f"{cfg.experiment_id.replace('/', '_')}_data.csv"
    write_dataset_csv(dataset, out)
    print(out)
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    records = run_experiment(cfg, master_seed=args.seed)
    emit_results(records, _results_path(args, cfg), args.format)
    print(_results_path(args, cfg))
    return 0


def cmd_eval(args) -> int:
    dataset = read_dataset_csv(args.data)
    rows = []
    if args.method == "mlp":
        net = load_net(args.checkpoint)
        predict = lambda X: net_forward(net, X)[0]
    else:
        model = BilinearPairModel.load(args.checkpoint)
        train_xs = dataset.xs("train")
        train_ys = dataset.ys("train")
        bank = DeltaBank.build(train_xs)
        policy = RhoPolicy.nearest()
        rng = np.random.default_rng(args.seed)

        def predict(X):
            out = np.empty((X.shape[0], train_ys.shape[1]))
            for i, x in enumerate(X):
                idx, _ = select_anchors(x, train_xs, bank, policy)
                j = int(rng.choice(idx))
                out[i] = model.forward(x - train_xs[j], train_xs[j])
            return out
    for split in ("train", "in_support", "oos"):
        xs, ys = dataset.xs(split), dataset.ys(split)
        if xs.shape[0] == 0:
            continue
        mse = float(np.mean((predict(xs) - ys) ** 2))
        rows.append({"split": split, "metric": "mse", "value": mse,
                     "n": int(xs.shape[0])})
    for row in rows:
        print(json.dumps(row))
    return 0


def cmd_matcomp(args) -> int:
    cfg = _load_config(args)
    if cfg.kind == "coverage":
        from .matcomp import PlantedBilinearProblem
        prob = PlantedBilinearProblem(p=int(cfg.matcomp.get("p", 4)),
                                      seed=args.seed)
        print(json.dumps(prob.coverage().to_dict()))
        return 0
    reports = run_matcomp(cfg, master_seed=args.seed)
    out = args.out / f"{cfg.experiment_id.replace('/', '_')}_bounds.jsonl"
    with open(out, "w") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_dict()) + "\n")
    print(out)
    n_hold = sum(r.holds for r in reports)
    print(f"{n_hold}/{len(reports)} trials within bound", file=sys.stderr)
    return 0


def cmd_imitate(args) -> int:
    cfg = _load_config(args)
    if cfg.kind != "imitation":
        raise ConfigError("kind: imitate subcommand requires kind=imitation")
    demos = reacher.collect_demos(
        int(cfg.env.get("n_demos", 100)),
        seed=split_seed(args.seed, f"{cfg.experiment_id}:{cfg.seeds[0]}") % (2**32))
    demo_path = args.out / f"{cfg.experiment_id.replace('/', '_')}_demos.jsonl"
    reacher.save_demos(demo_path, demos)
    records = run_experiment(cfg, master_seed=args.seed)
    emit_results(records, _results_path(args, cfg), args.format)
    print(_results_path(args, cfg))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if cfg.kind != "sweep":
        raise ConfigError("kind: sweep subcommand requires kind=sweep")
    records, summary = sweep(expand_grid(cfg), master_seed=args.seed)
    if records:
        emit_results(records, _results_path(args, cfg), args.format)
    agg_path = args.out / f"{cfg.experiment_id.replace('/', '_')}_aggregate.json"
    with open(agg_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(agg_path)
    return 0 if not summary["failures"] else 2


def cmd_report(args) -> int:
    records = []
    for path in args.results:
        records.extend(read_results(path))
    if not records:
        raise ConfigError("results: no records found in the given files")
    out = args.out / "aggregate.json"
    with open(out, "w") as fh:
        json.dump(aggregate(records), fh, indent=2, sort_keys=True)
    print(out)
    return 0


_COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval,
             "matcomp": cmd_matcomp, "imitate": cmd_imitate,
             "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
