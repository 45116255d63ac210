"""Delta bank of pairwise training differences and anchor selection.

The bank answers "how far is a candidate difference from anything seen in
training", which is the admission test for anchors at prediction time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class EmptyAnchorSetError(RuntimeError):
    """No anchor within the fixed radius; the caller decides the fallback."""


@dataclass(frozen=True)
class RhoPolicy:
    kind: str  # "fixed" | "nearest" | "percentile"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "nearest", "percentile"):
            raise ValueError(f"unknown rho policy {self.kind!r}")
        if self.kind == "fixed" and self.value < 0:
            raise ValueError("fixed rho must be >= 0")
        if self.kind == "percentile" and not 0 < self.value <= 100:
            raise ValueError("percentile must be in (0, 100]")

    @staticmethod
    def fixed(rho: float) -> "RhoPolicy":
        return RhoPolicy("fixed", rho)

    @staticmethod
    def nearest() -> "RhoPolicy":
        return RhoPolicy("nearest")

    @staticmethod
    def percentile(q: float) -> "RhoPolicy":
        return RhoPolicy("percentile", q)


class DeltaBank:
    """Set of pairwise training differences (always including zero) with
    nearest-distance queries."""

    def __init__(self, deltas: np.ndarray):
        deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
        self.deltas = deltas

    @classmethod
    def build(cls, train_xs, cap: int | None = None, seed: int = 0) -> "DeltaBank":
        xs = np.atleast_2d(np.asarray(train_xs, dtype=float))
        if xs.shape[0] < 2:
            raise ValueError("delta bank needs at least 2 training points")
        n, d = xs.shape
        n_pairs = n * (n - 1)
        if cap is not None and n_pairs > cap:
            rng = np.random.default_rng(seed)
            ii = rng.integers(0, n, size=cap - 1)
            jj = rng.integers(0, n - 1, size=cap - 1)
            jj = np.where(jj >= ii, jj + 1, jj)  # j != i
            deltas = xs[ii] - xs[jj]
            deltas = np.vstack([np.zeros((1, d)), deltas])
        else:
            diff = xs[:, None, :] - xs[None, :, :]
            deltas = diff.reshape(-1, d)
        # ensure zero is present (x - x)
        if not np.any(np.all(deltas == 0.0, axis=1)):
            deltas = np.vstack([np.zeros((1, d)), deltas])
        return cls(deltas)

    def __len__(self) -> int:
        return self.deltas.shape[0]

    @property
    def dim(self) -> int:
        return self.deltas.shape[1]

    def distance(self, v) -> float:
        return float(self.distances(np.atleast_2d(np.asarray(v, dtype=float)))[0])

    def distances(self, vs: np.ndarray, chunk: int = 256) -> np.ndarray:
        """Min Euclidean distance from each row of vs to the bank."""
        vs = np.atleast_2d(np.asarray(vs, dtype=float))
        if vs.shape[1] != self.dim:
            raise ValueError(f"query dim {vs.shape[1]} != bank dim {self.dim}")
        out = np.empty(vs.shape[0])
        for i in range(0, vs.shape[0], chunk):
            block = vs[i:i + chunk]
            d2 = ((block[:, None, :] - self.deltas[None, :, :]) ** 2).sum(axis=2)
            out[i:i + chunk] = np.sqrt(d2.min(axis=1))
        return out

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.deltas:
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def load_csv(cls, path) -> "DeltaBank":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                rows.append([float(v) for v in row])
        return cls(np.array(rows))


def bank_distance(bank: DeltaBank, v) -> float:
    return bank.distance(v)


def anchor_distances(x_test, train_xs, bank: DeltaBank) -> np.ndarray:
    """bank distance of (x_test - x_i) for every training point x_i."""
    x_test = np.asarray(x_test, dtype=float)
    xs = np.atleast_2d(np.asarray(train_xs, dtype=float))
    return bank.distances(x_test[None, :] - xs)


def select_anchors(x_test, train_xs, bank: DeltaBank, policy: RhoPolicy):
    """Admissible anchor indices for x_test and the radius actually used.

    fixed: indices within the given rho (may raise EmptyAnchorSetError);
    nearest: rho = smallest anchor distance, so the set is never empty;
    percentile(q): rho = q-th percentile of the anchor distances.
    """
    dists = anchor_distances(x_test, train_xs, bank)
    if policy.kind == "fixed":
        rho = policy.value
    elif policy.kind == "nearest":
        rho = float(dists.min())
    else:
        rho = float(np.percentile(dists, policy.value))
    idx = np.flatnonzero(dists <= rho)
    if idx.size == 0:
        raise EmptyAnchorSetError(
            f"no anchor within rho={rho} of any training difference")
    return idx, rho
