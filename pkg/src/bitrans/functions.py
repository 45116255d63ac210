"""Analytic target functions and seeded dataset sampling.

The 1-D functions are implemented verbatim from their piecewise definitions;
no smoothing at branch boundaries. The 2-D tiled function is a seeded lookup
table with sign flips across tiles.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


def eval_sawtooth(x: float, amplitude: float = 1.0, period: float = 1.0) -> float:
    if period <= 0:
        raise ValueError("sawtooth period must be positive")
    frac = math.fmod(x, period)
    if frac < 0:
        frac += period
    rising = math.floor(x / period) % 2 == 0
    if rising:
        return frac * amplitude / period
    return amplitude - frac * amplitude / period


def eval_mixed_periodic(x: float) -> float:
    """Piecewise mix of two periods on a length-9 cell, scaled by the cell
    index x_m = floor(x / 9)."""
    x_v = math.fmod(x, 9.0)
    if x_v < 0:
        x_v += 9.0
    x_m = math.floor(x / 9.0)
    if x_v < 1:
        return x_m * math.sin(10.0 * x_v)
    if x_v < 2:
        return x_m * (math.sin(10.0) + (x_v - 1.0))
    if x_v < 3:
        return x_m * (math.sin(10.0) + 1.0 + (x_v - 2.0) ** 2)
    if x_v < 5:
        return x_m * math.sin(10.0 * (x_v - 3.0) / 2.0)
    if x_v < 7:
        return x_m * (math.sin(10.0) + ((x_v - 3.0) / 2.0 - 1.0))
    return x_m * (math.sin(10.0) + 1.0 + ((x_v - 3.0) / 2.0 - 2.0) ** 2)


_POLY8_ROOTS = (0.1, -0.4, -0.7, 0.5, 1.5, -1.75, -1.0, 1.2)


def eval_poly8(x: float) -> float:
    out = 1.0
    for r in _POLY8_ROOTS:
        out *= x - r
    return out


def eval_growing_mixture(x: float) -> float:
    x_v = math.fmod(x, 3.0)
    if x_v < 0:
        x_v += 3.0
    x_m = math.floor(x / 3.0)
    if x_v < 1:
        return x_m * math.sin(10.0 * x_v)
    if x_v < 2:
        return x_m * (math.sin(10.0) + (x_v - 1.0))
    return x_m * (math.sin(10.0) + 1.0 + (x_v - 2.0) ** 2)


def eval_equivariant_mixture(x: float) -> float:
    x_v = math.fmod(x, 3.0)
    if x_v < 0:
        x_v += 3.0
    x_m = math.floor(x / 3.0)
    if x_v < 1:
        return x_m * 3.0 + math.sin(10.0 * x_v)
    if x_v < 2:
        return x_m * 3.0 + (math.sin(10.0) + (x_v - 1.0))
    return x_m * 3.0 + (math.sin(10.0) + 1.0 + (x_v - 2.0) ** 2)


TILE_SHIFT = 6.0
TILE_LO = 1.0
TILE_HI = 5.0
TILE_STEP = 0.5


class Tiled2D:
    """2-D vector-valued function built from a seeded random tiling.

    The central tile holds an 8x8 grid of uniform(-1, 1) value pairs on
    [1, 5]^2 at 0.5 spacing. Other tiles are copies shifted by multiples of
    6 units: a shift along x1 negates y2, a shift along x2 negates y1.
    Queries snap to the nearest grid cell; points whose in-tile coordinates
    fall outside [1, 5] are undefined.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        rng = np.random.default_rng(seed)
        n = int(round((TILE_HI - TILE_LO) / TILE_STEP))
        self.table = rng.uniform(-1.0, 1.0, size=(n, n, 2))
        self.n_cells = n

    def _cell(self, u: float) -> int:
        if u < TILE_LO or u >= TILE_HI:
            raise ValueError(f"coordinate {u} outside defined tile span")
        return min(int((u - TILE_LO) / TILE_STEP), self.n_cells - 1)

    def __call__(self, x1: float, x2: float) -> tuple[float, float]:
        k1 = math.floor((x1 - TILE_LO) / TILE_SHIFT)
        k2 = math.floor((x2 - TILE_LO) / TILE_SHIFT)
        u1 = x1 - k1 * TILE_SHIFT
        u2 = x2 - k2 * TILE_SHIFT
        i = self._cell(u1)
        j = self._cell(u2)
        y1, y2 = self.table[i, j]
        # x1-shift negates the second output, x2-shift the first
        y2 *= (-1.0) ** abs(k1)
        y1 *= (-1.0) ** abs(k2)
        return float(y1), float(y2)

    def tile_origin(self, k1: int, k2: int) -> tuple[float, float]:
        return k1 * TILE_SHIFT, k2 * TILE_SHIFT


def eval_tiled2d(gen: Tiled2D, x1: float, x2: float) -> tuple[float, float]:
    return gen(x1, x2)


FUNCTION_TAGS = ("mixed_periodic", "sawtooth", "poly8", "growing_mixture",
                 "equivariant_mixture", "tiled2d", "linear")


@dataclass(frozen=True)
class FunctionId:
    tag: str
    amplitude: float = 1.0   # sawtooth amplitude / linear slope
    period: float = 1.0      # sawtooth only
    seed: int = 0            # tiled2d only

    def __post_init__(self):
        if self.tag not in FUNCTION_TAGS:
            raise ValueError(f"unknown function tag {self.tag!r}")
        if self.tag == "sawtooth" and self.period <= 0:
            raise ValueError("sawtooth period must be positive")

    @property
    def d_in(self) -> int:
        return 2 if self.tag == "tiled2d" else 1

    @property
    def d_out(self) -> int:
        return 2 if self.tag == "tiled2d" else 1

    def make(self):
        """Returns f: vector -> vector for this id."""
        if self.tag == "sawtooth":
            a, p = self.amplitude, self.period
            return lambda x: np.array([eval_sawtooth(float(x[0]), a, p)])
        if self.tag == "mixed_periodic":
            return lambda x: np.array([eval_mixed_periodic(float(x[0]))])
        if self.tag == "poly8":
            return lambda x: np.array([eval_poly8(float(x[0]))])
        if self.tag == "growing_mixture":
            return lambda x: np.array([eval_growing_mixture(float(x[0]))])
        if self.tag == "equivariant_mixture":
            return lambda x: np.array([eval_equivariant_mixture(float(x[0]))])
        if self.tag == "linear":
            a = self.amplitude
            return lambda x: np.array([a * float(x[0])])
        gen = Tiled2D(self.seed)
        return lambda x: np.array(gen(float(x[0]), float(x[1])))


@dataclass(frozen=True)
class RangeSpec:
    """Sampling regions for the train and test draws.

    mode="product": train/test are lists over input dims of lists of
    (lo, hi) half-open intervals; the region is the cross product of the
    per-dim unions.
    mode="boxes": train/test are lists of axis-aligned boxes, each box a
    list over input dims of one (lo, hi) interval; the region is the union
    of the boxes (this expresses non-product regions such as an L-shaped
    set of tiles).
    """
    train: tuple
    test: tuple
    mode: str = "product"

    def __post_init__(self):
        if self.mode not in ("product", "boxes"):
            raise ValueError(f"unknown range mode {self.mode!r}")
        for side in (self.train, self.test):
            for dim in side:
                for lo, hi in dim:
                    if not lo < hi:
                        raise ValueError(f"empty interval [{lo}, {hi})")

    def n_dims(self) -> int:
        if self.mode == "product":
            return len(self.train)
        return len(self.train[0])

    @staticmethod
    def one_dim(train_intervals, test_intervals) -> "RangeSpec":
        return RangeSpec((tuple(map(tuple, train_intervals)),),
                         (tuple(map(tuple, test_intervals)),))

    @staticmethod
    def boxes(train_boxes, test_boxes) -> "RangeSpec":
        return RangeSpec(tuple(tuple(map(tuple, b)) for b in train_boxes),
                         tuple(tuple(map(tuple, b)) for b in test_boxes),
                         mode="boxes")


def _draw(intervals, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over a union of intervals, weighted by length."""
    lengths = np.array([hi - lo for lo, hi in intervals])
    total = lengths.sum()
    if total <= 0:
        raise ValueError("empty ranges")
    probs = lengths / total
    which = rng.choice(len(intervals), size=n, p=probs)
    u = rng.uniform(0.0, 1.0, size=n)
    lows = np.array([lo for lo, _ in intervals])
    out = lows[which] + u * lengths[which]
    return out


def _draw_boxes(boxes, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over a union of axis-aligned boxes, weighted by volume."""
    for box in boxes:
        if len(box) != d:
            raise ValueError(f"box has {len(box)} dims, function needs {d}")
    vols = np.array([np.prod([hi - lo for lo, hi in box]) for box in boxes])
    total = vols.sum()
    if total <= 0:
        raise ValueError("empty ranges")
    which = rng.choice(len(boxes), size=n, p=vols / total)
    u = rng.uniform(0.0, 1.0, size=(n, d))
    lows = np.array([[lo for lo, _ in box] for box in boxes])
    spans = np.array([[hi - lo for lo, hi in box] for box in boxes])
    return lows[which] + u * spans[which]


@dataclass
class Sample:
    x: np.ndarray
    y: np.ndarray
    split: str  # "train" | "in_support" | "oos"


@dataclass
class Dataset:
    samples: list = field(default_factory=list)
    function: FunctionId | None = None
    ranges: RangeSpec | None = None
    noise: float = 0.0
    seed: int = 0

    def xs(self, split: str) -> np.ndarray:
        return np.array([s.x for s in self.samples if s.split == split])

    def ys(self, split: str) -> np.ndarray:
        return np.array([s.y for s in self.samples if s.split == split])


def sample_dataset(fn: FunctionId, ranges: RangeSpec, n_train: int,
                   n_test: int, noise: float = 0.0, seed: int = 0) -> Dataset:
    """Draw a dataset: n_train train points, n_test in-support points from the
    train ranges, and n_test OOS points from the test ranges. Label noise
    (Gaussian, std = noise) is applied to the train split only."""
    if n_train <= 0 or n_test < 0:
        raise ValueError("n_train must be positive, n_test nonnegative")
    rng = np.random.default_rng(seed)
    f = fn.make()
    d = fn.d_in
    samples = []
    for split, n, region in (("train", n_train, ranges.train),
                             ("in_support", n_test, ranges.train),
                             ("oos", n_test, ranges.test)):
        if ranges.mode == "product":
            if len(region) != d:
                raise ValueError(f"range spec has {len(region)} dims, function needs {d}")
            cols = [_draw(dim, n, rng) for dim in region]
            xs = np.stack(cols, axis=1)
        else:
            xs = _draw_boxes(region, d, n, rng)
        for i in range(n):
            x = xs[i]
            y = f(x).astype(float)
            if split == "train" and noise > 0:
                y = y + rng.normal(0.0, noise, size=y.shape)
            samples.append(Sample(x, y, split))
    return Dataset(samples, fn, ranges, noise, seed)


def write_dataset_csv(ds: Dataset, path) -> None:
    d_in = len(ds.samples[0].x)
    d_out = len(ds.samples[0].y)
    header = ["split"] + [f"x{i}" for i in range(d_in)] + [f"y{i}" for i in range(d_out)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in ds.samples:
            w.writerow([s.split] + [f"{v:.17g}" for v in s.x] + [f"{v:.17g}" for v in s.y])


def read_dataset_csv(path) -> Dataset:
    ds = Dataset()
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        d_in = sum(1 for h in header if h.startswith("x"))
        for row in r:
            x = np.array([float(v) for v in row[1:1 + d_in]])
            y = np.array([float(v) for v in row[1 + d_in:]])
            ds.samples.append(Sample(x, y, row[0]))
    return ds
