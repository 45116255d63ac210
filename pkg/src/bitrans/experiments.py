"""Experiment orchestration: build data, train the requested methods,
evaluate on all splits, and emit deterministic result tables.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass

import numpy as np

from . import reacher
from .bilinear import WeightingFunction, train_weighting
from .config import ConfigError, ExperimentConfig, split_seed
from .estimators import (BilinearTransduction, ConcatTransduction,
                         DeepSetsBaseline, LinearBaseline, MLPBaseline,
                         WeightedTransduction)
from .functions import FunctionId, RangeSpec, sample_dataset
from .matcomp import verify_perturbation_bound

RESULT_FIELDS = ("experiment_id", "method", "seed", "split", "metric",
                 "value", "n", "config_hash")
SPLITS = ("train", "in_support", "oos")


@dataclass(frozen=True)
class ResultRecord:
    experiment_id: str
    method: str
    seed: int
    split: str
    metric: str
    value: float
    n: int
    config_hash: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.metric not in ("mse", "final_dist"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError("value must be finite and nonnegative")

    def key(self):
        return (self.experiment_id, self.method, str(self.seed), self.split,
                self.metric)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in RESULT_FIELDS}


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def emit_results(records, path, fmt: str = "csv") -> None:
    if not records:
        raise ValueError("no records to emit")
    rows = sorted(records, key=lambda r: r.key())
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RESULT_FIELDS)
            for r in rows:
                w.writerow([_fmt(getattr(r, f)) for f in RESULT_FIELDS])
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for r in rows:
                d = r.to_dict()
                d["value"] = float(_fmt(d["value"]))
                fh.write(json.dumps(d) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_results(path) -> list:
    records = []
    with open(path) as fh:
        head = fh.read(1)
        fh.seek(0)
        if head == "{":
            rows = [json.loads(line) for line in fh if line.strip()]
        else:
            rows = list(csv.DictReader(fh))
    for row in rows:
        records.append(ResultRecord(experiment_id=row["experiment_id"],
                                    method=row["method"], seed=int(row["seed"]),
                                    split=row["split"], metric=row["metric"],
                                    value=float(row["value"]), n=int(row["n"]),
                                    config_hash=row["config_hash"]))
    return records


def _make_regressor(method: str, cfg: ExperimentConfig, seed: int,
                    omega=None):
    arch, opt, rho = cfg.arch, cfg.optimizer, cfg.rho
    common = dict(n_layers=arch["layers"], n_units=arch["units"],
                  fourier=arch["fourier"], learning_rate=opt["lr"],
                  batch_size=opt["batch"], n_steps=opt["steps"], seed=seed,
                  lr_end=opt.get("lr_end"))
    anchor = dict(rho_policy=rho["policy"], rho=rho["value"],
                  delta_cap=rho["delta_cap"])
    if method == "linear":
        return LinearBaseline()
    if method == "mlp":
        return MLPBaseline(**common)
    if method == "concat_transduction":
        return ConcatTransduction(**common, **anchor)
    if method == "bilinear_transduction":
        return BilinearTransduction(segment_size=arch["segment"], **common,
                                    **anchor, predict_mode=rho["predict_mode"])
    if method == "weighted_transduction":
        return WeightedTransduction(omega=omega, segment_size=arch["segment"],
                                    **common, **anchor,
                                    predict_mode=rho["predict_mode"],
                                    anchor_mode=rho["anchor_mode"],
                                    mask_threshold=cfg.weighting.get("threshold"))
    if method == "deepsets":
        return DeepSetsBaseline(goal_slice=(2, 4), **common)
    raise ConfigError(f"methods: unknown method {method!r}")


def build_dataset(cfg: ExperimentConfig, master_seed: int):
    fn_cfg = cfg.function
    fid = FunctionId(tag=fn_cfg["tag"],
                     amplitude=float(fn_cfg.get("amplitude", 1.0)),
                     period=float(fn_cfg.get("period", 1.0)),
                     seed=int(fn_cfg.get("seed", 0)))
    ranges = RangeSpec(train=tuple(tuple(tuple(iv) for iv in dim)
                                   for dim in cfg.ranges["train"]),
                       test=tuple(tuple(tuple(iv) for iv in dim)
                                  for dim in cfg.ranges["test"]),
                       mode=cfg.ranges.get("mode", "product"))
    return sample_dataset(fid, ranges, n_train=cfg.data["n_train"],
                          n_test=cfg.data["n_test"], noise=cfg.data["noise"],
                          seed=split_seed(master_seed, f"{cfg.experiment_id}:data"))


def _pretrain_weighting(cfg: ExperimentConfig, dataset, seed: int):
    """Default two-phase weighting: label training pairs as related when both
    endpoints share the declared function family cell; here, approximated by
    a distance gate at one period unless the config supplies a labeler in
    code. The harness trains on pair labels supplied by cfg.weighting."""
    raise ConfigError("weighting: weighted_transduction requires a "
                      "pretrained omega supplied programmatically")


def run_experiment(cfg: ExperimentConfig, master_seed: int = 0,
                   omega_builder=None) -> list:
    """Deterministic end-to-end run: returns one ResultRecord per
    (method, seed, split, metric).

    omega_builder(cfg, dataset, seed) -> WeightingFunction supplies the
    pretrained weighting for weighted_transduction.
    """
    if cfg.kind in ("regress_1d", "regress_2d"):
        return _run_regression(cfg, master_seed, omega_builder)
    if cfg.kind == "imitation":
        return _run_imitation(cfg, master_seed)
    if cfg.kind == "sweep":
        records, _ = sweep(expand_grid(cfg), master_seed)
        return records
    raise ConfigError(f"kind: {cfg.kind!r} is not runnable via run_experiment")


def _run_regression(cfg, master_seed, omega_builder):
    chash = cfg.hash()
    records = []
    for cfg_seed in cfg.seeds:
        seed = split_seed(master_seed, f"{cfg.experiment_id}:{cfg_seed}") % (2**32)
        dataset = build_dataset(cfg, master_seed + cfg_seed)
        X, y = dataset.xs("train"), dataset.ys("train")
        for method in cfg.methods:
            omega = None
            if method == "weighted_transduction":
                if omega_builder is None:
                    _pretrain_weighting(cfg, dataset, seed)
                omega = omega_builder(cfg, dataset, seed)
            est = _make_regressor(method, cfg, seed, omega=omega)
            est.fit(X, y)
            for split in SPLITS:
                xs, ys = dataset.xs(split), dataset.ys(split)
                pred = est.predict(xs)
                mse = float(np.mean((pred - ys) ** 2))
                records.append(ResultRecord(cfg.experiment_id, method,
                                            cfg_seed, split, "mse", mse,
                                            xs.shape[0], chash))
    return records


def _bc_rollout(net_predict, goal, horizon):
    pos = reacher.START.copy()
    states = np.empty((horizon, 4))
    actions = np.empty((horizon, 2))
    for t in range(horizon):
        states[t] = np.concatenate([pos, goal])
        actions[t] = np.clip(net_predict(states[t][None, :])[0],
                             -reacher.ACTION_MAX, reacher.ACTION_MAX)
        pos = reacher.env_step(pos, actions[t])
    return reacher.Trajectory(goal=goal, states=states, actions=actions)


def _run_imitation(cfg, master_seed):
    chash = cfg.hash()
    env = cfg.env
    n_demos = int(env.get("n_demos", 100))
    n_eval = int(env.get("n_eval_goals", 50))
    horizon = int(env.get("horizon", reacher.HORIZON))
    train_box = env.get("train_goal_box", [[0.0, 0.0], [1.0, 1.0]])
    oos_box = env.get("oos_goal_box", [[-1.0, 0.0], [0.0, 1.0]])
    n_pairs = int(env.get("n_pairs", 20000))
    arch, opt = cfg.arch, cfg.optimizer
    records = []
    for cfg_seed in cfg.seeds:
        seed = split_seed(master_seed, f"{cfg.experiment_id}:{cfg_seed}") % (2**32)
        demos = reacher.collect_demos(n_demos, seed=seed,
                                      lo=np.asarray(train_box[0]),
                                      hi=np.asarray(train_box[1]),
                                      horizon=horizon)
        grng = np.random.default_rng(split_seed(master_seed, f"{cfg.experiment_id}:goals:{cfg_seed}") % (2**32))
        eval_goals = {
            "train": reacher.sample_goals(n_eval, np.asarray(train_box[0]),
                                          np.asarray(train_box[1]), grng),
            "oos": reacher.sample_goals(n_eval, np.asarray(oos_box[0]),
                                        np.asarray(oos_box[1]), grng),
        }
        for method in cfg.methods:
            if method == "bilinear_transduction":
                model = reacher.train_trajectory_transduction(
                    demos, n_layers=arch["layers"], n_units=arch["units"],
                    segment_size=arch["segment"], fourier=arch["fourier"],
                    lr=opt["lr"], batch_size=opt["batch"],
                    n_steps=opt["steps"], n_pairs=n_pairs, seed=seed)

                def rollout(goal, s, _m=model):
                    return reacher.rollout_transductive(_m, demos, goal,
                                                        seed=s, horizon=horizon)
            elif method in ("mlp", "deepsets", "linear"):
                S = np.concatenate([tr.states for tr in demos.trajectories])
                A = np.concatenate([tr.actions for tr in demos.trajectories])
                est = _make_regressor(method, cfg, seed)
                est.fit(S, A)

                def rollout(goal, s, _e=est):
                    return _bc_rollout(_e.predict, goal, horizon)
            else:
                raise ConfigError(f"methods: {method!r} unsupported for imitation")
            for split, goals in eval_goals.items():
                dists = reacher.evaluate_policy(rollout, goals, seed=seed)
                records.append(ResultRecord(cfg.experiment_id, method,
                                            cfg_seed, split, "final_dist",
                                            float(np.median(dists)),
                                            goals.shape[0], chash))
    return records


def run_matcomp(cfg: ExperimentConfig, master_seed: int = 0) -> list:
    """Perturbation-bound reports for a matcomp_bound config (JSON-ready)."""
    mc = cfg.matcomp
    rng = np.random.default_rng(split_seed(master_seed, cfg.experiment_id) % (2**32))
    scale = float(mc.get("scale", 1.0))
    a = rng.uniform(-scale, scale, size=(int(mc["n_rows"]), int(mc["p"])))
    b = rng.uniform(-scale, scale, size=(int(mc["n_cols"]), int(mc["p"])))
    from .matcomp import BlockMatrix, _sigma_p
    mstar = BlockMatrix.from_factors(a, b, int(mc["n1"]), int(mc["m1"]))
    eps = float(mc.get("eps_frac", 0.25)) * _sigma_p(mstar.m11, int(mc["p"]))
    return verify_perturbation_bound(a, b, int(mc["n1"]), int(mc["m1"]),
                                     eps=eps, trials=int(mc["trials"]),
                                     seed=master_seed)


def expand_grid(cfg: ExperimentConfig) -> list:
    """All combinations of the sweep grid applied over the base config.

    Grid keys are dotted paths ("arch.units") mapped to lists of values.
    """
    base = cfg.to_dict()
    base.pop("grid")
    keys = sorted(cfg.grid)
    combos = [{}]
    for k in keys:
        combos = [{**c, k: v} for c in combos for v in cfg.grid[k]]
    out = []
    for idx, combo in enumerate(combos):
        doc = json.loads(json.dumps(base))
        doc["kind"] = _sweep_base_kind(cfg)
        for path, value in combo.items():
            if path == "kind":
                doc["kind"] = value
                continue
            node = doc
            parts = path.split(".")
            for part in parts[:-1]:
                node = node[part]
            node[parts[-1]] = value
        doc["experiment_id"] = f"{cfg.experiment_id}/g{idx:03d}"
        out.append(ExperimentConfig.from_dict(doc))
    return out


def _sweep_base_kind(cfg: ExperimentConfig) -> str:
    return "imitation" if cfg.env else "regress_1d"


def sweep(configs, master_seed: int = 0, omega_builder=None):
    """Run every config, tolerating per-config failures, and aggregate
    mean/std per (method, split, metric) two ways: over the whole grid, and
    best grid point per method (selected by in-support error)."""
    if not configs:
        raise ConfigError("sweep requires at least one config")
    records = []
    failures = []
    for c in configs:
        try:
            records.extend(run_experiment(c, master_seed, omega_builder))
        except Exception as exc:  # record and continue per contract
            failures.append({"experiment_id": c.experiment_id, "error": str(exc)})
    aggregates = aggregate(records)
    return records, {"aggregates": aggregates, "failures": failures}


def aggregate(records) -> list:
    """Table-style summary rows; both labeled aggregations are emitted."""
    def summarize(rows, label, method, split, metric):
        vals = [r.value for r in rows]
        return {"aggregation": label, "method": method, "split": split,
                "metric": metric, "mean": statistics.fmean(vals),
                "std": statistics.pstdev(vals) if len(vals) > 1 else 0.0,
                "n": len(vals)}

    groups = {}
    for r in records:
        groups.setdefault((r.method, r.split, r.metric), []).append(r)
    out = []
    for (method, split, metric), rows in sorted(groups.items()):
        out.append(summarize(rows, "mean_over_grid", method, split, metric))

    # best grid point per method: lowest mean in-support value wins
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, {}).setdefault(r.experiment_id, []).append(r)
    for method, by_id in sorted(by_method.items()):
        def select_score(rows):
            vals = [r.value for r in rows if r.split == "in_support"] or \
                   [r.value for r in rows]
            return statistics.fmean(vals)
        best_id = min(sorted(by_id), key=lambda i: select_score(by_id[i]))
        best_rows = by_id[best_id]
        for (m2, split, metric) in sorted({(r.method, r.split, r.metric)
                                           for r in best_rows}):
            rows = [r for r in best_rows if r.split == split and r.metric == metric]
            row = summarize(rows, "best_per_method", method, split, metric)
            row["experiment_id"] = best_id
            out.append(row)
    return out
