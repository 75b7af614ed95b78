"""Small symmetric-matrix helpers shared across modules.

Log-determinants go through Cholesky factorizations: a failed
factorization means the matrix is not positive-definite and the
log-determinant is reported as ``-inf`` instead of being silently
regularized.  Matrix square roots use symmetric eigendecompositions.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "chol_logdet",
    "is_pd",
    "logdet_grid",
    "sym_sqrt",
    "sym_inv_sqrt",
]


def chol_logdet(a: np.ndarray) -> float:
    """Log-determinant of a symmetric matrix via Cholesky.

    Returns ``-inf`` when the factorization fails or when a pivot sits at
    rounding-noise scale — the matrix is then singular to working
    precision even though rounding let it factor.  No eigenvalue clipping
    is applied; values are exact or ``-inf``.
    """
    a = np.asarray(a, dtype=float)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return -np.inf
    diag = np.diagonal(chol)
    if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
        return -np.inf
    # An exactly singular matrix can slip through when rounding nudges a
    # zero pivot positive.  Such pivots land within a small factor of
    # K * eps * max(diag) (squared), about ten orders of magnitude below
    # any healthy pivot, so the factor of 64 cannot misclassify.
    k = a.shape[0]
    tol = 64.0 * k * np.finfo(float).eps * float(np.max(np.diagonal(a)))
    if float(np.min(diag)) ** 2 <= tol:
        return -np.inf
    return float(2.0 * np.sum(np.log(diag)))


def is_pd(a: np.ndarray) -> bool:
    """True when the symmetric matrix admits a Cholesky factorization."""
    return np.isfinite(chol_logdet(a))


def logdet_grid(mats: np.ndarray) -> np.ndarray:
    """Log-determinants of a stack of symmetric matrices, shape (M, K, K).

    Entries for non-positive-definite matrices come back as ``-inf``.
    A scalar fast path handles K = 1 without per-node factorizations.
    """
    mats = np.asarray(mats, dtype=float)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {mats.shape}")
    if mats.shape[1] == 1:
        vals = mats[:, 0, 0]
        out = np.full(vals.shape, -np.inf)
        pos = vals > 0.0
        out[pos] = np.log(vals[pos])
        return out
    return np.array([chol_logdet(m) for m in mats])


def _eigh_pd(a: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(np.asarray(a, dtype=float))
    if np.any(vals <= 0.0):
        raise ValueError(f"{what} is not positive-definite (min eigenvalue {vals.min():.3e})")
    return vals, vecs


def sym_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric positive-definite square root A^(1/2)."""
    vals, vecs = _eigh_pd(a, "matrix")
    return (vecs * np.sqrt(vals)) @ vecs.T


def sym_inv_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric positive-definite inverse square root A^(-1/2)."""
    vals, vecs = _eigh_pd(a, "matrix")
    return (vecs / np.sqrt(vals)) @ vecs.T
