"""Experiment configuration: JSON schema with strict unknown-field
rejection, canonical hashing, and deterministic seed derivation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid configuration; message names the offending field."""


KINDS = ("regress_1d", "regress_2d", "matcomp_bound", "coverage",
         "imitation", "sweep")
METHODS = ("linear", "mlp", "deepsets", "concat_transduction",
           "bilinear_transduction", "weighted_transduction")

_TOP_KEYS = {"experiment_id", "kind", "methods", "seeds", "function",
             "ranges", "data", "arch", "optimizer", "rho", "weighting",
             "env", "matcomp", "grid"}
_FUNCTION_KEYS = {"tag", "amplitude", "period", "seed"}
_RANGES_KEYS = {"train", "test", "mode"}
_DATA_KEYS = {"n_train", "n_test", "noise"}
_ARCH_KEYS = {"layers", "units", "segment", "fourier"}
_OPT_KEYS = {"lr", "batch", "steps", "lr_end"}
_RHO_KEYS = {"policy", "value", "delta_cap", "predict_mode", "anchor_mode"}
_WEIGHTING_KEYS = {"units", "segment", "lr", "steps", "n_pairs",
                   "lr_end", "batch", "fourier", "threshold"}
_ENV_KEYS = {"n_demos", "n_eval_goals", "horizon", "train_goal_box",
             "oos_goal_box", "n_pairs"}
_MATCOMP_KEYS = {"p", "n_rows", "n_cols", "n1", "m1", "eps_frac", "trials",
                 "scale"}

DEFAULT_ARCH = {"layers": 2, "units": 128, "segment": 32, "fourier": True}
DEFAULT_OPT = {"lr": 1e-4, "batch": 32, "steps": 2000}
DEFAULT_RHO = {"policy": "nearest", "value": 0.0, "delta_cap": 20000,
               "predict_mode": "sample", "anchor_mode": "argmax"}


def _check_keys(doc: dict, allowed: set, where: str) -> None:
    for k in doc:
        if k not in allowed:
            raise ConfigError(f"unknown field {where}{k!r}")


def _require(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise ConfigError(f"missing field {where}{key!r}")
    return doc[key]


@dataclass
class ExperimentConfig:
    experiment_id: str
    kind: str
    methods: list
    seeds: list
    function: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    arch: dict = field(default_factory=lambda: dict(DEFAULT_ARCH))
    optimizer: dict = field(default_factory=lambda: dict(DEFAULT_OPT))
    rho: dict = field(default_factory=lambda: dict(DEFAULT_RHO))
    weighting: dict = field(default_factory=dict)
    env: dict = field(default_factory=dict)
    matcomp: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        _check_keys(doc, _TOP_KEYS, "")
        kind = _require(doc, "kind")
        if kind not in KINDS:
            raise ConfigError(f"kind: unknown value {kind!r}")
        experiment_id = _require(doc, "experiment_id")
        if not isinstance(experiment_id, str) or not experiment_id:
            raise ConfigError("experiment_id: must be a nonempty string")
        methods = doc.get("methods", [])
        for m in methods:
            if m not in METHODS:
                raise ConfigError(f"methods: unknown method {m!r}")
        seeds = doc.get("seeds", [0])
        if not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds: must be a nonempty list of integers")

        function = dict(doc.get("function", {}))
        _check_keys(function, _FUNCTION_KEYS, "function.")
        ranges = dict(doc.get("ranges", {}))
        _check_keys(ranges, _RANGES_KEYS, "ranges.")
        data = {**{"n_train": 100, "n_test": 100, "noise": 0.0},
                **doc.get("data", {})}
        _check_keys(data, _DATA_KEYS, "data.")
        arch = {**DEFAULT_ARCH, **doc.get("arch", {})}
        _check_keys(arch, _ARCH_KEYS, "arch.")
        optimizer = {**DEFAULT_OPT, **doc.get("optimizer", {})}
        _check_keys(optimizer, _OPT_KEYS, "optimizer.")
        rho = {**DEFAULT_RHO, **doc.get("rho", {})}
        _check_keys(rho, _RHO_KEYS, "rho.")
        weighting = dict(doc.get("weighting", {}))
        _check_keys(weighting, _WEIGHTING_KEYS, "weighting.")
        env = dict(doc.get("env", {}))
        _check_keys(env, _ENV_KEYS, "env.")
        matcomp = dict(doc.get("matcomp", {}))
        _check_keys(matcomp, _MATCOMP_KEYS, "matcomp.")
        grid = dict(doc.get("grid", {}))

        if kind in ("regress_1d", "regress_2d"):
            if "tag" not in function:
                raise ConfigError("function.tag: required for regression kinds")
            if "train" not in ranges or "test" not in ranges:
                raise ConfigError("ranges: train and test are required for regression kinds")
            if not methods:
                raise ConfigError("methods: at least one method required")
        if kind == "imitation" and not methods:
            raise ConfigError("methods: at least one method required")
        if kind == "matcomp_bound":
            for k in ("p", "n_rows", "n_cols", "n1", "m1", "trials"):
                _require(matcomp, k, "matcomp.")
        if kind == "sweep" and not grid:
            raise ConfigError("grid: required for sweep kind")
        if optimizer["lr"] <= 0 or optimizer["steps"] < 0 or optimizer["batch"] < 1:
            raise ConfigError("optimizer: lr must be > 0, steps >= 0, batch >= 1")
        if data["noise"] < 0:
            raise ConfigError("data.noise: must be >= 0")
        return cls(experiment_id=experiment_id, kind=kind, methods=list(methods),
                   seeds=list(seeds), function=function, ranges=ranges,
                   data=data, arch=arch, optimizer=optimizer, rho=rho,
                   weighting=weighting, env=env, matcomp=matcomp, grid=grid)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {"experiment_id": self.experiment_id, "kind": self.kind,
                "methods": self.methods, "seeds": self.seeds,
                "function": self.function, "ranges": self.ranges,
                "data": self.data, "arch": self.arch,
                "optimizer": self.optimizer, "rho": self.rho,
                "weighting": self.weighting, "env": self.env,
                "matcomp": self.matcomp, "grid": self.grid}

    def hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(doc: dict) -> str:
    """Stable digest of the canonicalized (sorted-key, compact) JSON text."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def split_seed(master_seed: int, label: str) -> int:
    """Derived 63-bit seed: SHA-256 of "<master_seed>:<label>", first eight
    bytes read big-endian. Fixed so any implementation can reproduce it."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
