"""Small dense matrix decompositions: one-sided Jacobi SVD and Moore-Penrose pseudoinverse.

Everything here is float64 and sized for matrices up to a few hundred rows;
accuracy matters more than speed because the perturbation-bound checks divide
by squared singular values.
"""

from __future__ import annotations

import numpy as np


class SvdConvergenceError(RuntimeError):
    """Raised when Jacobi sweeps fail to reach the off-diagonal tolerance."""


_MAX_DIM = 512


def svd_small(a, max_sweeps: int = 100, tol: float = 1e-12):
    """One-sided Jacobi SVD of a real matrix.

    Returns (u, s, v) with a ~= u @ diag(s) @ v.T, singular values sorted
    descending. u is (n, k), v is (m, k) with k = min(n, m); both have
    orthonormal columns (completed deterministically for rank-deficient input).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("svd_small expects a 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("svd_small requires finite entries")
    if max(a.shape) > _MAX_DIM:
        raise ValueError(f"svd_small supports dims <= {_MAX_DIM}")

    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T
    n, m = a.shape

    u = a.copy()
    v = np.eye(m)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        s = np.zeros(m)
        uo = _complete_orthonormal(np.zeros((n, m)), s)
        return (v, s, uo) if transposed else (uo, s, v)

    converged = False
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(m - 1):
            for q in range(p + 1, m):
                alpha = u[:, p] @ u[:, p]
                beta = u[:, q] @ u[:, q]
                gamma = u[:, p] @ u[:, q]
                denom = np.sqrt(alpha * beta)
                if denom > 0.0:
                    off = max(off, abs(gamma) / denom)
                if gamma == 0.0 or denom == 0.0 or abs(gamma) <= tol * denom:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s_ = c * t
                up = u[:, p].copy()
                u[:, p] = c * up - s_ * u[:, q]
                u[:, q] = s_ * up + c * u[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s_ * v[:, q]
                v[:, q] = s_ * vp + c * v[:, q]
        if off < tol:
            converged = True
            break
    if not converged:
        raise SvdConvergenceError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")

    s = np.linalg.norm(u, axis=0)
    order = np.argsort(-s)
    s = s[order]
    u = u[:, order]
    v = v[:, order]
    u = _complete_orthonormal(u, s)
    if transposed:
        return v, s, u
    return u, s, v


def _complete_orthonormal(u, s):
    """Normalize nonzero columns of u; replace null columns with an
    orthonormal completion so u.T @ u = I."""
    n, k = u.shape
    smax = s.max() if k else 0.0
    cutoff = smax * 1e-300 if smax > 0 else 0.0
    out = np.zeros_like(u)
    basis = []
    null_cols = []
    for j in range(k):
        if s[j] > cutoff and s[j] > 0.0:
            out[:, j] = u[:, j] / s[j]
            basis.append(out[:, j])
        else:
            null_cols.append(j)
    if null_cols:
        for j in null_cols:
            # deterministic completion: orthogonalize standard basis vectors
            for i in range(n):
                cand = np.zeros(n)
                cand[i] = 1.0
                for b in basis:
                    cand -= (b @ cand) * b
                nrm = np.linalg.norm(cand)
                if nrm > 1e-8:
                    out[:, j] = cand / nrm
                    basis.append(out[:, j])
                    break
    return out


def pinv(a, tol: float = 1e-10):
    """Moore-Penrose pseudoinverse via svd_small.

    Singular values below tol * s_max are treated as zero.
    """
    a = np.asarray(a, dtype=float)
    u, s, v = svd_small(a)
    smax = s.max() if s.size else 0.0
    if smax == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    inv = np.where(s > tol * smax, np.divide(1.0, s, out=np.zeros_like(s), where=s > 0), 0.0)
    return (v * inv) @ u.T
