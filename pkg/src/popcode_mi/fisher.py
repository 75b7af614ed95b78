"""Priors, population densities, and information-matrix assembly.

Two prior families are supported: an analytic multivariate Gaussian and a
grid-tabulated 1-D density on a periodic interval ``[-T/2, T/2)``.  Both
expose the quantities the approximation formulas consume: the entropy
H(X), the log-density curvature ``P(x) = -d^2 ln p / dx dx^T``, and the
prior-averaged score outer product ``P_plus = <(d ln p/dx)(d ln p/dx)^T>``.

:func:`fisher_matrix` builds the population Fisher matrix
``J(x) = N sum_k alpha_k S(x; theta_k)`` from a weighted grid of tuning
parameters, and :func:`assemble` bundles J with the prior terms into the
regularized matrices ``G = J + P`` and ``G_plus = J + P_plus``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import i0

from ._linalg import is_pd

__all__ = [
    "GaussianPrior",
    "GridPrior",
    "PopulationDensity",
    "InfoMatrices",
    "fisher_matrix",
    "prior_curvature",
    "p_plus",
    "assemble",
    "DEFAULT_GRID_SIZE",
]

#: Default number of quadrature nodes for grid priors.
DEFAULT_GRID_SIZE = 1000


@dataclass(frozen=True)
class GaussianPrior:
    """Multivariate normal stimulus prior N(mean, cov).

    The curvature of the log-density is constant, P(x) = cov^{-1}, and
    coincides with the averaged score outer product P_plus.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"shape mismatch: mean {mean.shape}, cov {cov.shape}")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("prior covariance must be symmetric positive-definite") from None

    @property
    def k(self) -> int:
        return self.mean.size

    def precision(self) -> np.ndarray:
        """Inverse covariance."""
        return np.linalg.inv(self.cov)

    def entropy(self) -> float:
        """Differential entropy, (1/2) ln det(2 pi e cov)."""
        sign, logdet = np.linalg.slogdet(self.cov)
        return 0.5 * (self.k * (math.log(2.0 * math.pi) + 1.0) + logdet)

    def curvature(self, x=None) -> np.ndarray:
        """P(x) = cov^{-1}, independent of x."""
        return self.precision()

    def p_plus(self) -> np.ndarray:
        """P_plus = cov^{-1} (score covariance of a Gaussian)."""
        return self.precision()

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.multivariate_normal(self.mean, self.cov, size=size)


def _central_diff4(values: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order central first derivative on a periodic grid."""
    vp1, vm1 = np.roll(values, -1), np.roll(values, 1)
    vp2, vm2 = np.roll(values, -2), np.roll(values, 2)
    return (-vp2 + 8.0 * vp1 - 8.0 * vm1 + vm2) / (12.0 * dx)


def _central_diff4_second(values: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order central second derivative on a periodic grid."""
    vp1, vm1 = np.roll(values, -1), np.roll(values, 1)
    vp2, vm2 = np.roll(values, -2), np.roll(values, 2)
    return (-vp2 + 16.0 * vp1 - 30.0 * values + 16.0 * vm1 - vm2) / (12.0 * dx**2)


@dataclass(frozen=True)
class GridPrior:
    """1-D stimulus prior tabulated on a uniform periodic grid.

    Nodes are ``x_m = -T/2 + m T/M`` for ``m = 0..M-1``; averages over the
    prior use the rectangle rule, which is spectrally accurate for smooth
    periodic integrands.  The log-density and its first two derivatives
    are stored per node; analytic constructors also carry closed-form
    callables so off-node curvature needs no interpolation.

    Parameters
    ----------
    nodes : ndarray, shape (M,)
        Uniform grid on [-T/2, T/2).
    log_pdf, log_pdf_d1, log_pdf_d2 : ndarray, shape (M,)
        ln p and its first and second derivatives at the nodes.
    period : float
        Support length T.
    """

    nodes: np.ndarray
    log_pdf: np.ndarray
    log_pdf_d1: np.ndarray
    log_pdf_d2: np.ndarray
    period: float
    curvature_fn: Optional[Callable] = field(default=None, repr=False, compare=False)
    score_fn: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("nodes", "log_pdf", "log_pdf_d1", "log_pdf_d2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m = self.nodes.size
        if m < 2:
            raise ValueError(f"grid prior needs at least 2 nodes, got {m}")
        shapes = {arr.shape for arr in (self.nodes, self.log_pdf, self.log_pdf_d1, self.log_pdf_d2)}
        if shapes != {(m,)}:
            raise ValueError(f"node and log-density arrays must share shape ({m},), got {shapes}")
        total = float(np.sum(np.exp(self.log_pdf)) * self.spacing)
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"prior density quadrature is {total!r}, expected 1 within 1e-8")
        # Stored derivatives must track the tabulated log-density.
        fd1 = _central_diff4(self.log_pdf, self.spacing)
        fd2 = _central_diff4_second(self.log_pdf, self.spacing)
        if not np.allclose(fd1, self.log_pdf_d1, rtol=1e-4, atol=1e-4):
            raise ValueError("first log-density derivative inconsistent with tabulated values")
        if not np.allclose(fd2, self.log_pdf_d2, rtol=1e-4, atol=1e-4):
            raise ValueError("second log-density derivative inconsistent with tabulated values")

    @classmethod
    def von_mises(cls, period: float = math.pi, width: float = math.pi / 4,
                  m: int = DEFAULT_GRID_SIZE) -> "GridPrior":
        """Circular-normal prior exp(-kappa (1 - cos(2 pi x / T))) / Z.

        ``kappa = (T / (2 pi width))^2``; the normalizer has the closed
        form ``Z = T e^{-kappa} I_0(kappa)`` with I_0 the modified Bessel
        function, so no numeric normalization step is involved.
        """
        if period <= 0 or width <= 0:
            raise ValueError(f"period and width must be positive, got {period}, {width}")
        kappa = (period / (2.0 * math.pi * width)) ** 2
        omega = 2.0 * math.pi / period
        log_z = math.log(period) - kappa + math.log(i0(kappa))
        dx = period / m
        nodes = -period / 2.0 + dx * np.arange(m)
        phase = omega * nodes
        return cls(
            nodes=nodes,
            log_pdf=-kappa * (1.0 - np.cos(phase)) - log_z,
            log_pdf_d1=-kappa * omega * np.sin(phase),
            log_pdf_d2=-kappa * omega**2 * np.cos(phase),
            period=period,
            curvature_fn=lambda x: kappa * omega**2 * np.cos(omega * np.asarray(x, dtype=float)),
            score_fn=lambda x: -kappa * omega * np.sin(omega * np.asarray(x, dtype=float)),
        )

    @classmethod
    def uniform(cls, period: float, m: int = DEFAULT_GRID_SIZE) -> "GridPrior":
        """Flat prior on [-T/2, T/2); zero curvature and score."""
        if period <= 0:
            raise ValueError(f"period must be positive, got {period}")
        dx = period / m
        nodes = -period / 2.0 + dx * np.arange(m)
        zeros = np.zeros(m)
        return cls(
            nodes=nodes,
            log_pdf=np.full(m, -math.log(period)),
            log_pdf_d1=zeros,
            log_pdf_d2=zeros,
            period=period,
            curvature_fn=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            score_fn=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        )

    @classmethod
    def from_table(cls, nodes, pdf, period: float) -> "GridPrior":
        """Tabulated positive density; derivatives by 4th-order differences.

        The density is renormalized by the rectangle rule before taking
        logs, so mildly unnormalized tables are accepted.
        """
        nodes = np.asarray(nodes, dtype=float)
        pdf = np.asarray(pdf, dtype=float)
        if nodes.shape != pdf.shape or nodes.ndim != 1:
            raise ValueError(f"nodes and pdf must be equal-length 1-D arrays, got {nodes.shape}, {pdf.shape}")
        if np.any(pdf <= 0):
            raise ValueError("tabulated density must be strictly positive")
        dx = period / nodes.size
        steps = np.diff(nodes)
        if not np.allclose(steps, dx, rtol=1e-10, atol=1e-12):
            raise ValueError("nodes must be a uniform grid with spacing period / len(nodes)")
        pdf = pdf / (np.sum(pdf) * dx)
        log_pdf = np.log(pdf)
        return cls(
            nodes=nodes,
            log_pdf=log_pdf,
            log_pdf_d1=_central_diff4(log_pdf, dx),
            log_pdf_d2=_central_diff4_second(log_pdf, dx),
            period=period,
        )

    @property
    def m(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return self.period / self.nodes.size

    @property
    def pdf(self) -> np.ndarray:
        return np.exp(self.log_pdf)

    @property
    def masses(self) -> np.ndarray:
        """Per-node probability masses, normalized to sum exactly to 1."""
        raw = np.exp(self.log_pdf) * self.spacing
        return raw / np.sum(raw)

    def average(self, values: np.ndarray) -> float:
        """Prior average <h(x)> of per-node values by the rectangle rule."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.nodes.shape:
            raise ValueError(f"expected {self.nodes.shape} per-node values, got {values.shape}")
        return float(np.dot(self.masses, values))

    def entropy(self) -> float:
        """H(X) = -<ln p(x)> by quadrature."""
        return -self.average(self.log_pdf)

    def curvature_values(self) -> np.ndarray:
        """P(x_m) = -d^2 ln p / dx^2 at every node, shape (M,)."""
        return -self.log_pdf_d2

    def score_values(self) -> np.ndarray:
        """d ln p / dx at every node, shape (M,)."""
        return self.log_pdf_d1

    def _check_domain(self, x):
        x = np.asarray(x, dtype=float)
        half = self.period / 2.0
        if np.any(x < -half) or np.any(x >= half):
            raise ValueError(f"x = {x!r} outside the prior support [{-half}, {half})")
        return x

    def curvature(self, x) -> np.ndarray:
        """Scalar P(x); closed form when available, else periodic interpolation."""
        x = self._check_domain(x)
        if self.curvature_fn is not None:
            return np.asarray(self.curvature_fn(x), dtype=float)
        return self._interp(x, -self.log_pdf_d2)

    def score(self, x) -> np.ndarray:
        """Scalar d ln p/dx at x."""
        x = self._check_domain(x)
        if self.score_fn is not None:
            return np.asarray(self.score_fn(x), dtype=float)
        return self._interp(x, self.log_pdf_d1)

    def _interp(self, x, values: np.ndarray) -> np.ndarray:
        ext_nodes = np.append(self.nodes, self.nodes[0] + self.period)
        ext_values = np.append(values, values[0])
        return np.interp(x, ext_nodes, ext_values)

    def p_plus(self) -> float:
        """P_plus = <(d ln p/dx)^2> by quadrature over the grid."""
        integrand = self.log_pdf_d1**2
        if not np.all(np.isfinite(integrand)):
            raise ValueError("score quadrature diverged: non-finite d ln p/dx on the grid")
        return self.average(integrand)

    def sample_nodes(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Indices of i.i.d. draws from the node masses."""
        return rng.choice(self.m, size=size, p=self.masses)


@dataclass(frozen=True)
class PopulationDensity:
    """Simplex weights alpha over a grid of tuning-parameter vectors.

    ``thetas[k]`` is the parameter of subclass k (a scalar center for 1-D
    problems, a vector in general) and ``weights[k]`` its population
    fraction; weights must be nonnegative and sum to 1.
    """

    thetas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "weights", weights)
        if weights.ndim != 1 or thetas.shape[0] != weights.size:
            raise ValueError(f"need one weight per theta, got {thetas.shape} thetas, {weights.shape} weights")
        if np.any(weights < 0):
            raise ValueError(f"weights must be nonnegative, got min {weights.min()}")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {float(weights.sum())!r}")

    @classmethod
    def uniform(cls, thetas) -> "PopulationDensity":
        thetas = np.asarray(thetas, dtype=float)
        k1 = thetas.shape[0]
        return cls(thetas=thetas, weights=np.full(k1, 1.0 / k1))

    @property
    def size(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class InfoMatrices:
    """The information-matrix bundle at one stimulus value.

    ``g = j + p`` and ``g_plus = j + p_plus`` hold exactly by
    construction; ``g_is_pd`` records whether a Cholesky factorization of
    G succeeded (near-singular G is reported, never regularized).
    """

    j: np.ndarray
    p: np.ndarray
    p_plus: np.ndarray
    g: np.ndarray
    g_plus: np.ndarray
    g_is_pd: bool


def fisher_matrix(pop: PopulationDensity, kernel: Callable, x, n: int) -> np.ndarray:
    """Population Fisher matrix J(x) = N sum_k alpha_k S(x; theta_k).

    Parameters
    ----------
    pop : PopulationDensity
        Subclass parameters and simplex weights.
    kernel : callable
        Per-neuron Fisher kernel ``kernel(x, theta) -> (K, K) ndarray``.
    x : array_like
        Stimulus value.
    n : int
        Population size N (J scales linearly with it).
    """
    total = None
    for theta, alpha in zip(pop.thetas, pop.weights):
        s = np.atleast_2d(np.asarray(kernel(x, theta), dtype=float))
        total = alpha * s if total is None else total + alpha * s
    return n * total


def prior_curvature(prior, x) -> np.ndarray:
    """P(x) = -d^2 ln p / dx dx^T as a K x K matrix."""
    if isinstance(prior, GaussianPrior):
        return prior.curvature(x)
    return np.atleast_2d(np.asarray(prior.curvature(x), dtype=float))


def p_plus(prior) -> np.ndarray:
    """P_plus = <(d ln p/dx)(d ln p/dx)^T> as a K x K matrix."""
    value = prior.p_plus()
    return np.atleast_2d(np.asarray(value, dtype=float))


def assemble(j, prior, x) -> InfoMatrices:
    """Bundle J(x) with the prior terms into G and G_plus.

    The sums are exact; whether G is positive-definite is reported as a
    flag (via a Cholesky attempt), not raised as an error.
    """
    j = np.atleast_2d(np.asarray(j, dtype=float))
    p = prior_curvature(prior, x)
    pp = p_plus(prior)
    if p.shape != j.shape or pp.shape != j.shape:
        raise ValueError(f"shape mismatch: J {j.shape}, P {p.shape}, P_plus {pp.shape}")
    g = j + p
    return InfoMatrices(j=j, p=p, p_plus=pp, g=g, g_plus=j + pp, g_is_pd=is_pd(g))
