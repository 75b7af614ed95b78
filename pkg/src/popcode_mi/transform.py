"""Linear input transforms, whitening, spectrum-vs-Fisher gap analysis, and
block dimensionality reduction.

Mutual information is invariant under invertible transforms of the input,
and the log-det approximations inherit that invariance when the Fisher
matrix is pushed forward by the congruence ``J~ = L^{-T} J L^{-1}`` and
the entropy shifted by the log-Jacobian.  Whitening (PCA rotation plus
per-axis rescaling to unit variance) is the workhorse transform: it makes
the input covariance the identity, after which the information matrices
can be partitioned into a dominant low-dimensional block and a negligible
remainder.

The module also carries the mixing-matrix experiment: for a Gaussian
prior with a given covariance spectrum and a random wide mixing matrix A,
the exact MI (= I_G) and the Fisher-only value I_F have closed forms
whose gap quantifies how badly I_F fails when K is large relative to N.

File ingestion for real image-patch data accepts a small binary format
(header: two little-endian uint32 giving M patches and K pixels, then
M*K little-endian float32, row-major) or a plain CSV matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._linalg import chol_logdet, sym_inv_sqrt
from .mi import LOG_2PI_E

__all__ = [
    "WhiteningTransform",
    "whiten",
    "pushforward_info",
    "Fig2Gap",
    "fig2_gap",
    "fig2_gap_from_gram",
    "random_mixing_matrix",
    "random_mixing_gram",
    "power_law_spectrum",
    "load_patches",
    "patch_covariance",
    "BlockedInfo",
    "partition_info",
    "ReductionCheck",
    "reduce_check_A",
    "reduce_check_B",
    "select_k1",
]


@dataclass(frozen=True)
class WhiteningTransform:
    """Forward map x~ = D^{-1/2} U^T (x - mean) with cov(x) = U D U^T.

    ``u`` holds the covariance eigenvectors as columns, ``eigenvalues``
    the variances in descending order (all positive); applying
    :meth:`forward` to the source variable yields unit covariance.
    """

    u: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray

    @property
    def k(self) -> int:
        return self.eigenvalues.size

    @property
    def matrix(self) -> np.ndarray:
        """The forward linear map L = D^{-1/2} U^T."""
        return (self.u / np.sqrt(self.eigenvalues)).T

    @property
    def inverse_matrix(self) -> np.ndarray:
        """L^{-1} = U D^{1/2}."""
        return self.u * np.sqrt(self.eigenvalues)

    @property
    def entropy_shift(self) -> float:
        """H(X~) - H(X) = ln |det L| = -(1/2) sum ln eigenvalues."""
        return -0.5 * float(np.sum(np.log(self.eigenvalues)))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Whiten one K-vector or an (M, K) batch of rows."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.matrix @ (x - self.mean)
        return (x - self.mean) @ self.matrix.T

    def inverse(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            return self.inverse_matrix @ z + self.mean
        return z @ self.inverse_matrix.T + self.mean


def whiten(data) -> WhiteningTransform:
    """Build a whitening transform from a covariance or a sample matrix.

    A square symmetric array is taken as the covariance itself; anything
    else is treated as samples in rows, centered by the column mean, with
    covariance ``X^T X / M``.  (Image patches get their dedicated
    per-patch centering in :func:`patch_covariance`; pass the resulting
    matrix here.)

    Raises ``ValueError`` when the covariance is rank-deficient, naming
    the first null eigen-direction.
    """
    a = np.asarray(data, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D covariance or sample matrix, got shape {a.shape}")
    if a.shape[0] == a.shape[1] and np.allclose(a, a.T, rtol=1e-10, atol=1e-10):
        cov = 0.5 * (a + a.T)
        mean = np.zeros(a.shape[0])
    else:
        mean = a.mean(axis=0)
        centered = a - mean
        cov = centered.T @ centered / a.shape[0]
    eigvals, u = np.linalg.eigh(cov)
    # Stable sort keeps eigh's natural basis within ties, so an isotropic
    # covariance maps to the identity rather than an axis permutation.
    order = np.argsort(-eigvals, kind="stable")
    eigvals, u = eigvals[order], u[:, order]
    tol = cov.shape[0] * np.finfo(float).eps * max(eigvals[0], 0.0)
    bad = np.flatnonzero(eigvals <= tol)
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"covariance is rank-deficient: eigenvalue {float(eigvals[i])!r} along direction {i}"
        )
    return WhiteningTransform(u=u, eigenvalues=eigvals, mean=mean)


def pushforward_info(j, transform, h_x: float = 0.0):
    """Push J(x) and the input entropy through an invertible linear map.

    For ``x~ = L x`` the Fisher matrix transforms by congruence,
    ``J(x~) = L^{-T} J(x) L^{-1}``, and ``H(X~) = H(X) + ln |det L|`` —
    the combination entering I_F/I_G is invariant.

    Parameters
    ----------
    j : ndarray
        A (K, K) matrix or an (M, K, K) stack, transformed per node.
    transform : WhiteningTransform or (K, K) array_like
        The forward map L.
    h_x : float
        Entropy of the source variable.

    Returns
    -------
    (j_transformed, h_transformed)
    """
    if isinstance(transform, WhiteningTransform):
        l_mat = transform.matrix
    else:
        l_mat = np.atleast_2d(np.asarray(transform, dtype=float))
    sign, logabsdet = np.linalg.slogdet(l_mat)
    if sign == 0:
        raise ValueError("transform matrix is singular; the map must be invertible")
    l_inv = np.linalg.inv(l_mat)
    j = np.asarray(j, dtype=float)
    j_new = l_inv.T @ j @ l_inv
    return j_new, h_x + float(logabsdet)


@dataclass(frozen=True)
class Fig2Gap:
    """Exact-vs-Fisher comparison for one (spectrum, mixing) pair.

    ``di_f = i_f - i_g`` (nonpositive) and ``rel_di_f = di_f / i_g``; a
    singular Gram matrix or spectrum is reported as ``-inf`` values, not
    raised.
    """

    i_g: float
    i_f: float
    di_f: float
    rel_di_f: float


def fig2_gap_from_gram(gram: np.ndarray, spectrum: np.ndarray) -> Fig2Gap:
    """Gap analysis from the K x K Gram matrix B = A A^T.

    With prior covariance ``diag(spectrum)`` and unit response noise:
    ``I_G = (1/2) ln det(D^{1/2} B D^{1/2} + I)`` (the exact MI),
    ``I_F = (1/2) ln det(B/2 pi e) + H(Y)``, and independently
    ``dI_F = -(1/2) [ln det(B + D^{-1}) - ln det B]``.

    Zero spectrum entries are legal: a zero-variance direction multiplies
    ``det(D^{1/2} B D^{1/2} + I)`` by exactly 1, so ``I_G`` stays finite,
    while ``H(Y)`` and ``D^{-1}`` diverge and the ``I_F`` family is
    reported as ``-inf``.  Negative entries are rejected.
    """
    b = np.asarray(gram, dtype=float)
    d = np.asarray(spectrum, dtype=float)
    k = d.size
    if b.shape != (k, k):
        raise ValueError(f"Gram matrix shape {b.shape} does not match spectrum length {k}")
    if np.any(d < 0.0):
        i = int(np.argmin(d))
        raise ValueError(f"spectrum has a negative entry: {float(d[i])!r} at index {i}")

    pos = d > 0.0
    root = np.sqrt(d[pos])
    core = root[:, None] * b[np.ix_(pos, pos)] * root[None, :]
    if core.size:
        eigs = np.linalg.eigvalsh(0.5 * (core + core.T))
        i_g = 0.5 * float(np.sum(np.log1p(eigs)))
    else:
        i_g = 0.0

    if not np.all(pos):
        rel = -math.inf if i_g > 0.0 else math.nan
        return Fig2Gap(i_g=i_g, i_f=-math.inf, di_f=-math.inf, rel_di_f=rel)

    logdet_b = chol_logdet(b)
    if logdet_b == -math.inf:
        return Fig2Gap(i_g=i_g, i_f=-math.inf, di_f=-math.inf, rel_di_f=-math.inf)
    h_y = 0.5 * (k * LOG_2PI_E + float(np.sum(np.log(d))))
    i_f = 0.5 * (logdet_b - k * LOG_2PI_E) + h_y
    di_f = -0.5 * (chol_logdet(b + np.diag(1.0 / d)) - logdet_b)
    return Fig2Gap(i_g=i_g, i_f=i_f, di_f=di_f, rel_di_f=di_f / i_g)


def fig2_gap(mixing: np.ndarray, spectrum: np.ndarray) -> Fig2Gap:
    """Gap analysis from an explicit K x N mixing matrix."""
    a = np.atleast_2d(np.asarray(mixing, dtype=float))
    return fig2_gap_from_gram(a @ a.T, spectrum)


def random_mixing_matrix(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """K x N matrix of standard-normal entries with unit-norm columns."""
    a = rng.standard_normal((n, k)).T
    return a / np.linalg.norm(a, axis=0)


def random_mixing_gram(k: int, n: int, rng: np.random.Generator, block: int = 4096) -> np.ndarray:
    """Gram matrix A A^T of a random normalized mixing matrix.

    Columns are generated in blocks so A itself (K x N, possibly hundreds
    of MB) is never held; the draw order is per-column, making the result
    identical to ``random_mixing_matrix`` for any block size.
    """
    gram = np.zeros((k, k))
    for lo in range(0, n, block):
        cols = min(block, n - lo)
        a = rng.standard_normal((cols, k)).T
        a /= np.linalg.norm(a, axis=0)
        gram += a @ a.T
    return gram


def power_law_spectrum(k: int, exponent: float = 2.0) -> np.ndarray:
    """Synthetic prior spectrum s_i ~ i^{-exponent}, mean-normalized to 1.

    Stands in for the eigenvalue decay of natural-image patch covariances
    when no patch file is available.
    """
    if k < 1:
        raise ValueError(f"spectrum length must be at least 1, got {k}")
    s = np.arange(1, k + 1, dtype=float) ** (-exponent)
    return s * (k / np.sum(s))


def load_patches(path) -> np.ndarray:
    """Read an (M, K) patch matrix from the binary format or a CSV file.

    Binary layout: uint32 M, uint32 K (little-endian), then M*K float32
    values row-major.  Paths ending in ``.csv`` are parsed as
    comma-separated text instead.
    """
    path = str(path)
    if path.lower().endswith(".csv"):
        patches = np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
        return patches
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError(f"patch file {path!r} too short for its 8-byte header")
        m, k = (int(v) for v in np.frombuffer(header, dtype="<u4"))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != m * k:
        raise ValueError(
            f"patch file {path!r} declares {m}x{k} values but contains {data.size}"
        )
    return data.reshape(m, k).astype(float)


def patch_covariance(patches: np.ndarray) -> np.ndarray:
    """Covariance of image patches after the two-stage centering.

    Each patch first loses its own mean (per-row DC removal), then the
    global mean patch is subtracted; the covariance is ``X^T X / M``.
    """
    x = np.atleast_2d(np.asarray(patches, dtype=float))
    x = x - x.mean(axis=1, keepdims=True)
    x = x - x.mean(axis=0)
    return x.T @ x / x.shape[0]


@dataclass(frozen=True)
class BlockedInfo:
    """G = J + P stacks partitioned at index k1 for reduction checks.

    ``j``, ``p``, and ``g`` are (M, K, K) with ``g = j + p`` exact;
    ``weights`` average over the M stimulus nodes and ``h_x`` is the
    input entropy entering the factored information values.
    """

    j: np.ndarray
    p: np.ndarray
    g: np.ndarray
    k1: int
    weights: np.ndarray
    h_x: float

    @property
    def k(self) -> int:
        return self.g.shape[1]

    @property
    def k2(self) -> int:
        return self.k - self.k1

    # Block views: 1 = leading k1 coordinates, 2 = trailing k - k1.
    @property
    def g11(self) -> np.ndarray:
        return self.g[:, : self.k1, : self.k1]

    @property
    def g12(self) -> np.ndarray:
        return self.g[:, : self.k1, self.k1 :]

    @property
    def g21(self) -> np.ndarray:
        return self.g[:, self.k1 :, : self.k1]

    @property
    def g22(self) -> np.ndarray:
        return self.g[:, self.k1 :, self.k1 :]

    @property
    def j22(self) -> np.ndarray:
        return self.j[:, self.k1 :, self.k1 :]

    @property
    def p22(self) -> np.ndarray:
        return self.p[:, self.k1 :, self.k1 :]


def _as_node_stack(a, k: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[1] != k or a.shape[2] != k:
        raise ValueError(f"expected (M, {k}, {k}) matrix stack, got shape {a.shape}")
    return a


def partition_info(j, p, k1: int, weights=None, h_x: float = 0.0) -> BlockedInfo:
    """Bundle J and P stacks, partitioned after coordinate k1.

    Single matrices are promoted to one-node stacks; ``p`` broadcasts
    across nodes when given as one matrix.  Both blocks must be nonempty
    (1 <= k1 < K) and every matrix symmetric.
    """
    j = np.asarray(j, dtype=float)
    if j.ndim == 2:
        j = j[None]
    k = j.shape[1]
    j = _as_node_stack(j, k)
    m = j.shape[0]
    p = np.asarray(p, dtype=float)
    p = np.broadcast_to(np.atleast_2d(p), j.shape) if p.ndim == 2 else _as_node_stack(p, k)
    if p.shape[0] != m:
        raise ValueError(f"J has {m} nodes but P has {p.shape[0]}")
    if not 1 <= k1 < k:
        raise ValueError(f"k1 must satisfy 1 <= k1 < K = {k}, got {k1}")
    g = j + p
    asym = float(np.max(np.abs(g - np.transpose(g, (0, 2, 1)))))
    if asym > 1e-10 * (1.0 + float(np.max(np.abs(g)))):
        raise ValueError(f"G blocks must be symmetric; max asymmetry {asym!r}")
    if weights is None:
        weights = np.full(m, 1.0 / m)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (m,):
            raise ValueError(f"need {m} node weights, got shape {weights.shape}")
    return BlockedInfo(j=j, p=p, g=g, k1=k1, weights=weights, h_x=h_x)


@dataclass(frozen=True)
class ReductionCheck:
    """Outcome of one block-reduction validity check.

    ``trace_mean`` is the averaged coupling trace (small means the
    factored value is trustworthy), ``value`` the factored information in
    nats, and ``relative`` the trace scaled by the magnitude of the
    factored log-determinant average.
    """

    trace_mean: float
    value: float
    relative: float


def _chol_or_raise(mat: np.ndarray, what: str, node: int):
    try:
        return cho_factor(mat, lower=True)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} is not positive-definite at node {node}") from None


def reduce_check_A(blocked: BlockedInfo) -> ReductionCheck:
    """Drop the G12 coupling: is I_G ~ I_G1 justified?

    Per node, ``A_x = G22^{-1/2} G21 G11^{-1} G12 G22^{-1/2}``; the
    averaged trace is the first-order error of the factored approximation
    ``I_G1 = (1/2)<ln det(G11/2 pi e)> + (1/2)<ln det(G22/2 pi e)> + H(X)``,
    which equals I_G exactly iff the coupling term vanishes.
    """
    m, k = blocked.g.shape[0], blocked.k
    traces = np.empty(m)
    logdets = np.empty(m)
    for i in range(m):
        g11 = blocked.g11[i]
        g12 = blocked.g12[i]
        g22 = blocked.g22[i]
        c11 = _chol_or_raise(g11, "G11", i)
        coupling = g12.T @ cho_solve(c11, g12)
        c22 = _chol_or_raise(g22, "G22", i)
        traces[i] = np.trace(cho_solve(c22, coupling))
        ld11 = 2.0 * np.sum(np.log(np.diag(c11[0])))
        ld22 = 2.0 * np.sum(np.log(np.diag(c22[0])))
        logdets[i] = ld11 + ld22
    trace_mean = float(np.dot(blocked.weights, traces))
    mean_logdet = float(np.dot(blocked.weights, logdets))
    value = 0.5 * (mean_logdet - k * LOG_2PI_E) + blocked.h_x
    relative = abs(trace_mean) / abs(mean_logdet) if mean_logdet != 0.0 else math.inf
    return ReductionCheck(trace_mean=trace_mean, value=value, relative=relative)


def reduce_check_B(blocked: BlockedInfo) -> ReductionCheck:
    """Drop the second block's Fisher content: is I_G ~ I_G2 justified?

    Per node, ``C_x = J22 - G21 G11^{-1} G12`` and
    ``B_x = P22^{-1/2} C_x P22^{-1/2}``; the factored value replaces G22
    by the prior block, ``I_G2 = (1/2)<ln det(G11/2 pi e)> +
    (1/2)<ln det(P22/2 pi e)> + H(X)``, exact iff C_x = 0.
    """
    m, k = blocked.g.shape[0], blocked.k
    traces = np.empty(m)
    logdets = np.empty(m)
    for i in range(m):
        g11 = blocked.g11[i]
        g12 = blocked.g12[i]
        p22 = blocked.p22[i]
        c11 = _chol_or_raise(g11, "G11", i)
        coupling = g12.T @ cho_solve(c11, g12)
        c_x = blocked.j22[i] - coupling
        cp = _chol_or_raise(p22, "P22", i)
        traces[i] = np.trace(cho_solve(cp, c_x))
        ld11 = 2.0 * np.sum(np.log(np.diag(c11[0])))
        ldp = 2.0 * np.sum(np.log(np.diag(cp[0])))
        logdets[i] = ld11 + ldp
    trace_mean = float(np.dot(blocked.weights, traces))
    mean_logdet = float(np.dot(blocked.weights, logdets))
    value = 0.5 * (mean_logdet - k * LOG_2PI_E) + blocked.h_x
    relative = abs(trace_mean) / abs(mean_logdet) if mean_logdet != 0.0 else math.inf
    return ReductionCheck(trace_mean=trace_mean, value=value, relative=relative)


def select_k1(j, eps_dr: float = 0.01, weights=None) -> int:
    """Smallest leading block size whose complement carries negligible J.

    Works in whitened-rotated coordinates (energy sorted descending):
    returns the smallest K1 with ``<Tr J22> <= eps_dr * <ln det(J11 + I)>``,
    or K when no strict reduction qualifies.
    """
    if not 0.0 < eps_dr < 1.0:
        raise ValueError(f"eps_dr must lie in (0, 1), got {eps_dr}")
    j = np.asarray(j, dtype=float)
    if j.ndim == 2:
        j = j[None]
    m, k = j.shape[0], j.shape[1]
    if weights is None:
        weights = np.full(m, 1.0 / m)
    else:
        weights = np.asarray(weights, dtype=float)
    diag_means = np.tensordot(weights, np.diagonal(j, axis1=1, axis2=2), axes=(0, 0))
    total_trace = float(np.sum(diag_means))
    eye = np.eye(k)
    for k1 in range(1, k):
        tail_trace = total_trace - float(np.sum(diag_means[:k1]))
        gammas = np.empty(m)
        for i in range(m):
            gammas[i] = chol_logdet(j[i, :k1, :k1] + eye[:k1, :k1])
        gamma = float(np.dot(weights, gammas))
        if tail_trace <= eps_dr * gamma:
            return k1
    return k
