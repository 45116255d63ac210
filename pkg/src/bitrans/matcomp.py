"""Numerical checks for the block-completion theory behind transductive
extrapolation: Nystrom recovery of the missing block, its perturbation
bound, density-ratio coverage, and the empirical risk-ratio bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import pinv, svd_small


@dataclass
class BlockMatrix:
    """2x2-partitioned matrix; block (i, j) has shape (n_i, m_j)."""
    m11: np.ndarray
    m12: np.ndarray
    m21: np.ndarray
    m22: np.ndarray

    def __post_init__(self):
        self.m11 = np.atleast_2d(np.asarray(self.m11, dtype=float))
        self.m12 = np.atleast_2d(np.asarray(self.m12, dtype=float))
        self.m21 = np.atleast_2d(np.asarray(self.m21, dtype=float))
        self.m22 = np.atleast_2d(np.asarray(self.m22, dtype=float))
        if self.m11.shape[0] != self.m12.shape[0] or self.m21.shape[0] != self.m22.shape[0]:
            raise ValueError("row-block heights inconsistent")
        if self.m11.shape[1] != self.m21.shape[1] or self.m12.shape[1] != self.m22.shape[1]:
            raise ValueError("column-block widths inconsistent")
        for b in (self.m11, self.m12, self.m21, self.m22):
            if not np.all(np.isfinite(b)):
                raise ValueError("block entries must be finite")

    def full(self) -> np.ndarray:
        return np.block([[self.m11, self.m12], [self.m21, self.m22]])

    @classmethod
    def from_factors(cls, a: np.ndarray, b: np.ndarray, n1: int, m1: int) -> "BlockMatrix":
        """Rank-p ground truth M = A @ B.T split at row n1, column m1."""
        m = np.asarray(a, dtype=float) @ np.asarray(b, dtype=float).T
        return cls(m[:n1, :m1], m[:n1, m1:], m[n1:, :m1], m[n1:, m1:])


def complete_block(m11, m12, m21, tol: float = 1e-10) -> np.ndarray:
    """Nystrom completion of the bottom-right block: M21 @ pinv(M11) @ M12."""
    return np.atleast_2d(m21) @ pinv(m11, tol) @ np.atleast_2d(m12)


@dataclass
class BoundReport:
    trial: int
    eps: float
    sigma_p: float
    m_bound: float
    lhs: float
    rhs: float
    precondition_met: bool
    holds: bool

    def to_dict(self) -> dict:
        return {"trial": self.trial, "eps": self.eps, "sigma_p": self.sigma_p,
                "M": self.m_bound, "lhs": self.lhs, "rhs": self.rhs,
                "precondition_met": self.precondition_met, "holds": self.holds}


def _block_errors(mhat: BlockMatrix, mstar: BlockMatrix) -> float:
    return max(np.linalg.norm(mhat.m11 - mstar.m11),
               np.linalg.norm(mhat.m12 - mstar.m12),
               np.linalg.norm(mhat.m21 - mstar.m21))

def _sigma_p(mat: np.ndarray, p: int) -> float:
    s = svd_small(mat)[1]
    if p > s.size:
        return 0.0
    return float(s[p - 1])


def verify_perturbation_bound(a: np.ndarray, b: np.ndarray, n1: int, m1: int,
                              eps: float, trials: int, seed: int = 0,
                              tol: float = 1e-10) -> list[BoundReport]:
    """Monte-Carlo check of the completion error bound.

    The ground truth is rank-p M* = A @ B.T. Each trial perturbs the factors
    (keeping rank <= p), rescales the noise so the largest off-(2,2) block
    error equals eps, completes the bottom block from the perturbed known
    blocks, and records lhs = ||Mhat22 - M*22||_F against
    rhs = 8 * eps * M^2 / sigma_p(M*11)^2. The comparison is meaningful only
    when eps <= sigma_p(M*11) / 2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = a.shape[1]
    mstar = BlockMatrix.from_factors(a, b, n1, m1)
    sigma_p = _sigma_p(mstar.m11, p)
    m_bound = max(np.linalg.norm(mstar.m11), np.linalg.norm(mstar.m12),
                  np.linalg.norm(mstar.m21))
    precondition = eps <= sigma_p / 2.0
    master = np.random.default_rng(seed)
    reports = []
    for trial in range(trials):
        rng = np.random.default_rng(master.integers(0, 2**63))
        da = rng.standard_normal(a.shape)
        db = rng.standard_normal(b.shape)
        if eps == 0.0:
            mhat = mstar
        else:
            t = _scale_for_eps(a, b, da, db, n1, m1, mstar, eps)
            mhat = BlockMatrix.from_factors(a + t * da, b + t * db, n1, m1)
        m22_hat = complete_block(mhat.m11, mhat.m12, mhat.m21, tol)
        lhs = float(np.linalg.norm(m22_hat - mstar.m22))
        rhs = 8.0 * eps * m_bound**2 / sigma_p**2 if sigma_p > 0 else math.inf
        # exact-recovery residue from pinv round-off counts as holding
        holds = bool(lhs <= rhs or lhs <= 1e-10 * m_bound)
        reports.append(BoundReport(trial=trial, eps=eps, sigma_p=sigma_p,
                                   m_bound=m_bound, lhs=lhs, rhs=rhs,
                                   precondition_met=precondition,
                                   holds=holds))
    return reports


def _scale_for_eps(a, b, da, db, n1, m1, mstar, eps):
    """Bisection for the factor-noise scale putting the max off-(2,2) block
    error exactly at eps."""

    def err(t):
        mh = BlockMatrix.from_factors(a + t * da, b + t * db, n1, m1)
        return _block_errors(mh, mstar)

    hi = 1.0
    while err(hi) < eps:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("could not bracket the noise scale")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if err(mid) < eps:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class FiniteDist:
    """Finite measure: atom labels with nonnegative masses (not necessarily
    normalized)."""
    masses: dict

    def __post_init__(self):
        for k, v in self.masses.items():
            if v < 0:
                raise ValueError(f"negative mass at {k!r}")

    @classmethod
    def uniform(cls, labels) -> "FiniteDist":
        labels = list(labels)
        w = 1.0 / len(labels)
        return cls({k: w for k in labels})

    def total(self) -> float:
        return sum(self.masses.values())

    def normalized(self) -> "FiniteDist":
        z = self.total()
        if z == 0:
            raise ValueError("cannot normalize a zero measure")
        return FiniteDist({k: v / z for k, v in self.masses.items()})

    def __add__(self, other: "FiniteDist") -> "FiniteDist":
        out = dict(self.masses)
        for k, v in other.masses.items():
            out[k] = out.get(k, 0.0) + v
        return FiniteDist(out)

    def product(self, other: "FiniteDist") -> "FiniteDist":
        out = {}
        for ka, va in self.masses.items():
            for kb, vb in other.masses.items():
                if va * vb != 0.0:
                    out[(ka, kb)] = va * vb
        return FiniteDist(out)


def density_ratio(mu1: FiniteDist, mu2: FiniteDist) -> float:
    """Smallest kappa with mu1(A) <= kappa * mu2(A) for every event A.

    On finite spaces this is the max atom-wise ratio; math.inf when mu1 puts
    mass where mu2 has none.
    """
    kappa = 0.0
    for atom, m1 in mu1.masses.items():
        if m1 == 0.0:
            continue
        m2 = mu2.masses.get(atom, 0.0)
        if m2 == 0.0:
            return math.inf
        kappa = max(kappa, m1 / m2)
    return kappa


@dataclass
class CoverageReport:
    kappa_train: float
    kappa_test: float

    @property
    def kappa(self) -> float:
        return max(self.kappa_train, self.kappa_test)

    @property
    def covered(self) -> bool:
        return math.isfinite(self.kappa)

    def to_dict(self) -> dict:
        def enc(v):
            return None if math.isinf(v) else v
        return {"kappa_train": enc(self.kappa_train),
                "kappa_test": enc(self.kappa_test),
                "kappa": enc(self.kappa), "covered": self.covered}


def combinatorial_coverage(train_hist: FiniteDist, test_hist: FiniteDist,
                           delta_factors: tuple, anchor_factors: tuple) -> CoverageReport:
    """Both density-ratio bounds of the combinatorial coverage condition.

    delta_factors = (D_d1, D_d2) over difference atoms, anchor_factors =
    (D_a1, D_a2) over anchor atoms. Histograms live on (delta atom, anchor
    atom) pairs. kappa_train covers the three known product blocks by the
    train histogram; kappa_test covers the test histogram by all four.
    """
    d1, d2 = delta_factors
    a1, a2 = anchor_factors
    known = (d1.product(a1) + d1.product(a2)) + d2.product(a1)
    all_blocks = known + d2.product(a2)
    kappa_train = density_ratio(known, train_hist.normalized())
    kappa_test = density_ratio(test_hist.normalized(), all_blocks)
    return CoverageReport(kappa_train=kappa_train, kappa_test=kappa_test)


def histogram_on_grid(dxs: np.ndarray, anchors: np.ndarray, delta_edges,
                      anchor_edges) -> FiniteDist:
    """Joint histogram of (difference, anchor) samples on a declared grid.

    Each *_edges is a list per dimension of bin edge arrays; atoms are tuples
    of bin index tuples. Normalized to a probability distribution.
    """
    dxs = np.atleast_2d(dxs)
    anchors = np.atleast_2d(anchors)
    masses: dict = {}
    n = dxs.shape[0]
    for i in range(n):
        da = _bin_tuple(dxs[i], delta_edges)
        aa = _bin_tuple(anchors[i], anchor_edges)
        key = (da, aa)
        masses[key] = masses.get(key, 0.0) + 1.0 / n
    return FiniteDist(masses)


def _bin_tuple(v, edges_per_dim):
    out = []
    for val, edges in zip(v, edges_per_dim):
        edges = np.asarray(edges)
        if val < edges[0] or val > edges[-1]:
            raise ValueError(f"value {val} outside declared grid")
        k = int(np.searchsorted(edges, val, side="right")) - 1
        out.append(min(k, len(edges) - 2))
    return tuple(out)


def uniform_edges(lo: float, hi: float, n_bins: int = 10) -> np.ndarray:
    return np.linspace(lo, hi, n_bins + 1)


def empirical_sigma_p(f_samples: np.ndarray, g_samples: np.ndarray, p: int,
                      form: str = "min") -> float:
    """Empirical lower bound on the embedding non-degeneracy constant.

    form "min": min of the p-th eigenvalues of the two second-moment
    matrices. form "product": their product (the effective singular value
    variant). Requires at least p samples on each side.
    """
    f_samples = np.atleast_2d(np.asarray(f_samples, dtype=float))
    g_samples = np.atleast_2d(np.asarray(g_samples, dtype=float))
    if f_samples.shape[0] < p or g_samples.shape[0] < p:
        raise ValueError(f"need at least p={p} samples per embedding")
    mf = f_samples.T @ f_samples / f_samples.shape[0]
    mg = g_samples.T @ g_samples / g_samples.shape[0]
    sf = _sigma_p(mf, p)
    sg = _sigma_p(mg, p)
    if form == "min":
        return min(sf, sg)
    if form == "product":
        return sf * sg
    raise ValueError(f"unknown form {form!r}")


@dataclass
class RiskRatioReport:
    """Diagnostic comparison of the empirical test risk with the theoretical
    multiple of the train risk. Only meaningful as an assertion when the
    coverage and low-rank hypotheses were constructed to hold."""
    r_train: float
    r_test: float
    kappa: float
    m_bound: float
    sigma_sq: float
    bound: float = field(init=False)
    precondition_met: bool = field(init=False)
    within_bound: bool = field(init=False)

    def __post_init__(self):
        self.bound = self.r_train * self.kappa**2 * (1.0 + 64.0 * self.m_bound**4 / self.sigma_sq**2)
        self.precondition_met = bool(self.r_train <= self.sigma_sq / (4.0 * self.kappa))
        self.within_bound = bool(self.r_test <= self.bound)

    def to_dict(self) -> dict:
        return {"r_train": self.r_train, "r_test": self.r_test,
                "kappa": self.kappa, "M": self.m_bound,
                "sigma_sq": self.sigma_sq, "bound": self.bound,
                "precondition_met": self.precondition_met,
                "within_bound": self.within_bound}


def risk_ratio_check(r_train: float, r_test: float, kappa: float,
                     m_bound: float, sigma_sq: float) -> RiskRatioReport:
    return RiskRatioReport(r_train=r_train, r_test=r_test, kappa=kappa,
                           m_bound=m_bound, sigma_sq=sigma_sq)


class PlantedBilinearProblem:
    """Finite-support ground truth with explicit block coverage.

    Difference atoms and anchor atoms each split into block 1 and block 2;
    per-atom embeddings of dimension p are drawn once. Training samples come
    uniformly from the three known product blocks, test samples from the
    held-out (2, 2) block. Labels are exact inner products, so every
    hypothesis of the risk-ratio theorem is constructed to hold and all
    population risks are computable by enumeration.
    """

    def __init__(self, p: int = 4, atoms_per_block: int = 6, d_in: int = 1,
                 scale: float = 0.5, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.p = p
        self.n1 = atoms_per_block
        n_atoms = 2 * atoms_per_block
        # atom coordinates: distinct points, block 1 then block 2
        self.delta_atoms = np.sort(rng.uniform(-1, 1, size=(n_atoms, d_in)), axis=0)
        self.anchor_atoms = np.sort(rng.uniform(-1, 1, size=(n_atoms, d_in)), axis=0)

        def block_embed(n):
            # orthonormal columns scaled so the block's second-moment matrix
            # is exactly scale^2 * I: the non-degeneracy constant is then
            # scale^2 by construction instead of the (possibly tiny) smallest
            # eigenvalue of a random draw
            q, _ = np.linalg.qr(rng.standard_normal((n, p)))
            return math.sqrt(n) * scale * q

        self.f_star = np.vstack([block_embed(atoms_per_block),
                                 block_embed(atoms_per_block)])
        self.g_star = np.vstack([block_embed(atoms_per_block),
                                 block_embed(atoms_per_block)])
        self.labels = self.f_star @ self.g_star.T  # (delta atom, anchor atom)

    def truth(self, di: int, ai: int) -> float:
        return float(self.labels[di, ai])

    @property
    def m_bound(self) -> float:
        return float(np.abs(self.labels).max())

    def sigma_sq(self, form: str = "min") -> float:
        return empirical_sigma_p(self.f_star[:self.n1], self.g_star[:self.n1],
                                 self.p, form=form)

    def _block_atoms(self, two: bool) -> np.ndarray:
        return np.arange(self.n1, 2 * self.n1) if two else np.arange(self.n1)

    def sample(self, n: int, split: str, rng: np.random.Generator):
        """Index pairs (delta atom, anchor atom): train draws uniformly from
        the three known blocks, test from the held-out block."""
        if split == "train":
            blocks = [(False, False), (False, True), (True, False)]
            which = rng.integers(0, 3, size=n)
        elif split == "test":
            blocks = [(True, True)]
            which = np.zeros(n, dtype=int)
        else:
            raise ValueError(f"unknown split {split!r}")
        di = np.empty(n, dtype=int)
        ai = np.empty(n, dtype=int)
        for i in range(n):
            b_d, b_a = blocks[which[i]]
            di[i] = rng.choice(self._block_atoms(b_d))
            ai[i] = rng.choice(self._block_atoms(b_a))
        return di, ai

    def coverage(self) -> CoverageReport:
        n1 = self.n1
        d1 = FiniteDist.uniform(range(n1))
        d2 = FiniteDist.uniform(range(n1, 2 * n1))
        a1 = FiniteDist.uniform(range(n1))
        a2 = FiniteDist.uniform(range(n1, 2 * n1))
        known = (d1.product(a1) + d1.product(a2)) + d2.product(a1)
        train = FiniteDist({k: v / 3.0 for k, v in known.masses.items()})
        test = d2.product(a2)
        return combinatorial_coverage(train, test, (d1, d2), (a1, a2))

    def risk(self, predict, split: str) -> float:
        """Exact population risk of predict(delta_coords, anchor_coords) under
        the uniform block mixture for the split."""
        if split == "train":
            blocks = [(False, False), (False, True), (True, False)]
            w = 1.0 / 3.0
        else:
            blocks = [(True, True)]
            w = 1.0
        total = 0.0
        for b_d, b_a in blocks:
            dis = self._block_atoms(b_d)
            ais = self._block_atoms(b_a)
            dd, aa = np.meshgrid(dis, ais, indexing="ij")
            dd = dd.ravel()
            aa = aa.ravel()
            preds = predict(self.delta_atoms[dd], self.anchor_atoms[aa]).reshape(-1)
            truth = self.labels[dd, aa]
            total += w * float(np.mean((preds - truth) ** 2))
        return total
