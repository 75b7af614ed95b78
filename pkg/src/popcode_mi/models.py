"""Encoding models: tuning curves, Fisher kernels, and response sampling.

The stimulus ``x`` lives on a periodic interval ``[-T/2, T/2)``.  Each
neuron's mean response is a circular-normal (von Mises) tuning curve, and
the response noise is either Poisson or additive Gaussian.  The per-neuron
Fisher kernel ``S(x; theta)`` is the rank-one contribution of a single
neuron to the population Fisher information.

A linear-Gaussian channel and a uniformly-correlated Gaussian population
are included as analytically tractable references; the latter carries the
closed-form decorrelation transform ``Sigma^(-1/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

__all__ = [
    "VonMisesTuning",
    "PoissonPopulation",
    "GaussianNoisePopulation",
    "LinearGaussianModel",
    "CorrelatedGaussianPopulation",
    "eval_tuning",
    "poisson_fisher_kernel",
    "gaussian_fisher_kernel",
    "decorrelation_transform",
    "sample_responses",
    "log_likelihood",
    "DEFAULT_RATE_FLOOR",
]

#: Rates are floored at this value before divisions and logs in the Fisher
#: kernels and likelihoods; exact zeros are still rejected as underflow.
DEFAULT_RATE_FLOOR = 1e-12


@dataclass(frozen=True)
class VonMisesTuning:
    """Circular-normal tuning curve.

    The mean rate is ``f(x) = A exp(-(T/(2 pi sigma_f))^2 (1 - cos(2 pi (x - theta)/T)))``,
    which is T-periodic, strictly positive, and peaks with value exactly A
    at ``x = theta``.

    Parameters
    ----------
    amplitude : float
        Peak rate A (spikes per coding window), attained at the center.
    width : float
        Tuning width sigma_f, in stimulus units.
    period : float
        Stimulus period T.
    center : float
        Preferred stimulus theta.
    """

    amplitude: float
    width: float
    period: float
    center: float

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def concentration(self) -> float:
        """Exponent scale (T / (2 pi sigma_f))^2 of the tuning curve."""
        return (self.period / (2.0 * np.pi * self.width)) ** 2

    @property
    def angular_frequency(self) -> float:
        """2 pi / T."""
        return 2.0 * np.pi / self.period

    def rate(self, x):
        """Mean rate f(x; theta).  Accepts scalars or arrays."""
        phase = self.angular_frequency * (np.asarray(x, dtype=float) - self.center)
        return self.amplitude * np.exp(-self.concentration * (1.0 - np.cos(phase)))

    def rate_deriv(self, x):
        """Analytic derivative df/dx, same shape as ``x``."""
        phase = self.angular_frequency * (np.asarray(x, dtype=float) - self.center)
        return -self.rate(x) * self.concentration * self.angular_frequency * np.sin(phase)


def eval_tuning(curve: VonMisesTuning, x) -> float:
    """Evaluate a tuning curve at a scalar stimulus."""
    return float(curve.rate(x))


def _tuning_arrays(tuning):
    """Stack per-neuron tuning parameters into flat arrays."""
    amp = np.array([c.amplitude for c in tuning])
    conc = np.array([c.concentration for c in tuning])
    centers = np.array([c.center for c in tuning])
    return amp, conc, centers


def _check_shared_period(tuning):
    periods = {c.period for c in tuning}
    if len(periods) != 1:
        raise ValueError(f"all tuning curves must share one period, got {sorted(periods)}")
    return periods.pop()


@dataclass(frozen=True)
class PoissonPopulation:
    """Population of conditionally independent Poisson neurons.

    Each neuron fires a Poisson count with mean ``f(x; theta_n)`` per
    coding window; all tuning curves must share the stimulus period.
    """

    tuning: tuple

    response_kind = "poisson"

    def __post_init__(self):
        object.__setattr__(self, "tuning", tuple(self.tuning))
        if len(self.tuning) < 1:
            raise ValueError("population needs at least one neuron")
        _check_shared_period(self.tuning)

    @property
    def size(self) -> int:
        return len(self.tuning)

    @property
    def period(self) -> float:
        return self.tuning[0].period

    def rates(self, x) -> np.ndarray:
        """Mean rates of all neurons at a scalar stimulus, shape (N,)."""
        return self.rate_matrix(np.atleast_1d(np.asarray(x, dtype=float)))[0]

    def rate_matrix(self, xs) -> np.ndarray:
        """Mean rates on a stimulus grid, shape (len(xs), N)."""
        xs = np.asarray(xs, dtype=float)
        amp, conc, centers = _tuning_arrays(self.tuning)
        phase = (2.0 * np.pi / self.period) * (xs[:, None] - centers[None, :])
        return amp * np.exp(-conc * (1.0 - np.cos(phase)))

    def fisher_values(self, xs) -> np.ndarray:
        """Scalar population Fisher information J(x) on a grid, shape (len(xs),).

        Sums the per-neuron kernels f'(x)^2 / f(x) in vectorized form.
        """
        xs = np.asarray(xs, dtype=float)
        amp, conc, centers = _tuning_arrays(self.tuning)
        omega = 2.0 * np.pi / self.period
        phase = omega * (xs[:, None] - centers[None, :])
        rates = amp * np.exp(-conc * (1.0 - np.cos(phase)))
        slope_factor = conc * omega * np.sin(phase)
        return np.sum(rates * slope_factor**2, axis=1)

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        """Draw one response vector r ~ Poisson(f(x; theta)) per neuron."""
        return rng.poisson(self.rates(x))

    def log_likelihood(self, r, x, rate_floor: float = DEFAULT_RATE_FLOOR) -> float:
        """Sum of Poisson log-pmf over neurons, in nats."""
        r = np.asarray(r)
        if np.any(r < 0):
            raise ValueError(f"Poisson counts must be nonnegative, got min {r.min()}")
        f = np.maximum(self.rates(x), rate_floor)
        return float(np.sum(r * np.log(f) - f - gammaln(np.asarray(r, dtype=float) + 1.0)))


@dataclass(frozen=True)
class GaussianNoisePopulation:
    """Tuning-curve population with additive Gaussian response noise.

    The response of neuron n is ``r_n = f(x; theta_n) + sigma * z_n`` with
    standard-normal z_n, independent across neurons.
    """

    tuning: tuple
    sigma: float

    response_kind = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "tuning", tuple(self.tuning))
        if len(self.tuning) < 1:
            raise ValueError("population needs at least one neuron")
        if self.sigma <= 0:
            raise ValueError(f"noise sigma must be positive, got {self.sigma}")
        _check_shared_period(self.tuning)

    @property
    def size(self) -> int:
        return len(self.tuning)

    @property
    def period(self) -> float:
        return self.tuning[0].period

    def rates(self, x) -> np.ndarray:
        return self.rate_matrix(np.atleast_1d(np.asarray(x, dtype=float)))[0]

    def rate_matrix(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        amp, conc, centers = _tuning_arrays(self.tuning)
        phase = (2.0 * np.pi / self.period) * (xs[:, None] - centers[None, :])
        return amp * np.exp(-conc * (1.0 - np.cos(phase)))

    def fisher_values(self, xs) -> np.ndarray:
        """Scalar J(x) = sum_n f'(x; theta_n)^2 / sigma^2 on a grid."""
        xs = np.asarray(xs, dtype=float)
        amp, conc, centers = _tuning_arrays(self.tuning)
        omega = 2.0 * np.pi / self.period
        phase = omega * (xs[:, None] - centers[None, :])
        rates = amp * np.exp(-conc * (1.0 - np.cos(phase)))
        deriv = -rates * conc * omega * np.sin(phase)
        return np.sum(deriv**2, axis=1) / self.sigma**2

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        return self.rates(x) + self.sigma * rng.standard_normal(self.size)

    def log_likelihood(self, r, x) -> float:
        r = np.asarray(r, dtype=float)
        resid = r - self.rates(x)
        n = self.size
        return float(-0.5 * np.dot(resid, resid) / self.sigma**2 - 0.5 * n * np.log(2.0 * np.pi * self.sigma**2))


@dataclass(frozen=True)
class LinearGaussianModel:
    """Linear channel r = A^T x + z with unit Gaussian noise and Gaussian prior.

    ``mixing`` is the K x N matrix A, and the prior on x is
    N(mean, cov).  The Fisher matrix is the constant J = A A^T, and the
    mutual information has the closed form implemented in
    :func:`popcode_mi.mi.exact_gaussian_mi`.
    """

    mixing: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    response_kind = "gaussian"
    sigma = 1.0

    def __post_init__(self):
        mixing = np.atleast_2d(np.asarray(self.mixing, dtype=float))
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        k = mixing.shape[0]
        if mean.shape != (k,) or cov.shape != (k, k):
            raise ValueError(
                f"shape mismatch: mixing {mixing.shape}, mean {mean.shape}, cov {cov.shape}"
            )
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("prior covariance must be symmetric positive-definite") from None

    @property
    def k(self) -> int:
        return self.mixing.shape[0]

    @property
    def size(self) -> int:
        return self.mixing.shape[1]

    def fisher(self) -> np.ndarray:
        """The constant Fisher matrix J = A A^T."""
        return self.mixing @ self.mixing.T

    def rate_matrix(self, xs) -> np.ndarray:
        """Mean responses on a 1-D stimulus grid (requires K = 1)."""
        if self.k != 1:
            raise ValueError(f"grid evaluation needs a 1-D stimulus, got K={self.k}")
        xs = np.asarray(xs, dtype=float)
        return xs[:, None] * self.mixing[0][None, :]

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.mixing.T @ x + rng.standard_normal(self.size)

    def log_likelihood(self, r, x) -> float:
        r = np.asarray(r, dtype=float)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        resid = r - self.mixing.T @ x
        return float(-0.5 * np.dot(resid, resid) - 0.5 * self.size * np.log(2.0 * np.pi))


@dataclass(frozen=True)
class CorrelatedGaussianPopulation:
    """Gaussian population with uniform pairwise noise correlation.

    The noise covariance is ``Sigma = a ((1 - c) I_N + c u u^T)`` with
    ``u = (1, ..., 1)^T``: every pair of neurons shares the same
    correlation coefficient c.  Positive-definiteness requires
    ``c > -1/(N-1)``.

    Parameters
    ----------
    mean_fn : callable
        Maps a stimulus to the N-vector of mean responses g(x).
    scale : float
        Common response variance a > 0.
    correlation : float
        Pairwise correlation coefficient, -1 < c < 1.
    """

    mean_fn: Callable[[np.ndarray], np.ndarray]
    scale: float
    correlation: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not -1.0 < self.correlation < 1.0:
            raise ValueError(f"correlation must lie in (-1, 1), got {self.correlation}")

    def covariance(self, n: int) -> np.ndarray:
        """The N x N noise covariance for a population of size n."""
        a, c = self.scale, self.correlation
        return a * ((1.0 - c) * np.eye(n) + c * np.ones((n, n)))

    def sample(self, x, rng: np.random.Generator, n: int) -> np.ndarray:
        chol = np.linalg.cholesky(self.covariance(n))
        return np.asarray(self.mean_fn(x), dtype=float) + chol @ rng.standard_normal(n)


def poisson_fisher_kernel(curve: VonMisesTuning, x, rate_floor: float = DEFAULT_RATE_FLOOR) -> np.ndarray:
    """Fisher kernel of a single Poisson neuron, S = f' f'^T / f.

    Equivalently S = g' g'^T with g = 2 sqrt(f).  The result is symmetric
    positive-semidefinite with rank at most one; for the 1-D tuning curves
    here it is a 1 x 1 matrix.
    """
    f = float(curve.rate(x))
    if f == 0.0:
        raise ValueError(f"rate underflow: f(x; theta) = 0 at x = {x!r}")
    df = np.atleast_1d(np.asarray(curve.rate_deriv(x), dtype=float))
    return np.outer(df, df) / max(f, rate_floor)


def gaussian_fisher_kernel(curve: VonMisesTuning, sigma: float, x) -> np.ndarray:
    """Fisher kernel of a single Gaussian-noise neuron, S = f' f'^T / sigma^2."""
    if sigma <= 0:
        raise ValueError(f"noise sigma must be positive, got {sigma}")
    df = np.atleast_1d(np.asarray(curve.rate_deriv(x), dtype=float))
    return np.outer(df, df) / sigma**2


def decorrelation_transform(pop: CorrelatedGaussianPopulation, n: int) -> np.ndarray:
    """Closed-form inverse square root of the uniform-correlation covariance.

    Returns ``M = b0 (I_N - b1 u u^T)`` with ``b0 = 1/sqrt(a (1 - c))`` and
    ``b1 = (1/N)(1 - sqrt((1 - c) / ((N - 1) c + 1)))`` so that
    ``M Sigma M^T = I_N``.  The minus branch of the square root is chosen so
    b1 -> 0 as c -> 0, continuous with the uncorrelated case.
    """
    if n < 1:
        raise ValueError(f"population size must be at least 1, got {n}")
    a, c = pop.scale, pop.correlation
    if n >= 2 and c <= -1.0 / (n - 1):
        raise ValueError(
            f"covariance is singular or indefinite: c = {c} <= -1/(N-1) = {-1.0 / (n - 1)}"
        )
    b0 = 1.0 / np.sqrt(a * (1.0 - c))
    b1 = (1.0 - np.sqrt((1.0 - c) / ((n - 1) * c + 1.0))) / n
    return b0 * (np.eye(n) - b1 * np.ones((n, n)))


def sample_responses(model, x, rng: np.random.Generator) -> np.ndarray:
    """Draw one response vector from a population model at stimulus x.

    Deterministic given the generator state; the generator is the only
    thing mutated.
    """
    return model.sample(x, rng)


def log_likelihood(model, r, x) -> float:
    """Log-likelihood ln p(r | x) of a response under a population model."""
    return model.log_likelihood(r, x)
