"""Priors, their curvature/score summaries, and Fisher-matrix assembly."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import i0

from popcode_mi.fisher import (
    GaussianPrior,
    GridPrior,
    PopulationDensity,
    assemble,
    fisher_matrix,
    p_plus,
    prior_curvature,
)
from popcode_mi.models import VonMisesTuning, poisson_fisher_kernel

PERIOD = math.pi
PRIOR_WIDTH = math.pi / 4
KAPPA_P = (PERIOD / (2 * math.pi * PRIOR_WIDTH)) ** 2  # = 4 / pi^2


def analytic_pdf(x):
    z = PERIOD * math.exp(-KAPPA_P) * i0(KAPPA_P)
    return np.exp(-KAPPA_P * (1.0 - np.cos(2 * np.pi * x / PERIOD))) / z


class TestGaussianPrior:
    def test_unit_variance_entropy(self):
        """H = (1/2) ln(2 pi e) for the standard normal."""
        prior = GaussianPrior(np.zeros(1), np.eye(1))
        assert prior.entropy() == pytest.approx(0.5 * math.log(2 * math.pi * math.e), rel=1e-14)

    def test_entropy_matches_scipy(self):
        from scipy.stats import multivariate_normal

        rng = np.random.default_rng(7)
        a = rng.standard_normal((3, 3))
        cov = a @ a.T + 0.5 * np.eye(3)
        prior = GaussianPrior(np.zeros(3), cov)
        assert prior.entropy() == pytest.approx(
            multivariate_normal(np.zeros(3), cov).entropy(), rel=1e-12)

    def test_curvature_is_precision_everywhere(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        prior = GaussianPrior(np.zeros(2), cov)
        np.testing.assert_allclose(prior.curvature(), np.linalg.inv(cov), rtol=1e-12)
        np.testing.assert_allclose(prior.curvature(np.array([5.0, -2.0])),
                                   prior.curvature(), rtol=1e-15)

    def test_score_outer_product_equals_curvature(self):
        """For a Gaussian, <score score^T> = Sigma^{-1} = P exactly."""
        cov = np.array([[1.5, -0.2], [-0.2, 0.8]])
        prior = GaussianPrior(np.zeros(2), cov)
        np.testing.assert_allclose(prior.p_plus(), prior.curvature(), rtol=1e-14)

    def test_rejects_indefinite_covariance(self):
        with pytest.raises(ValueError, match="positive-definite"):
            GaussianPrior(np.zeros(2), np.array([[1.0, 3.0], [3.0, 1.0]]))


class TestGridPriorConstruction:
    def test_masses_sum_exactly_one(self, prior):
        assert prior.masses.sum() == 1.0

    def test_node_layout(self, prior):
        assert prior.m == 1000
        assert prior.nodes[0] == pytest.approx(-PERIOD / 2, rel=1e-15)
        assert prior.spacing == pytest.approx(PERIOD / 1000, rel=1e-15)
        np.testing.assert_allclose(np.diff(prior.nodes), prior.spacing, rtol=1e-10)

    def test_uniform_prior_entropy_is_log_period(self):
        uni = GridPrior.uniform(period=PERIOD, m=500)
        assert uni.entropy() == pytest.approx(math.log(PERIOD), rel=1e-12)
        assert uni.p_plus() == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(uni.curvature_values(), 0.0, atol=1e-10)

    def test_density_must_integrate_to_one(self, prior):
        with pytest.raises(ValueError, match="quadrature"):
            GridPrior(prior.nodes, prior.log_pdf + 0.5,
                      prior.log_pdf_d1, prior.log_pdf_d2, prior.period)

    def test_derivative_tables_are_validated(self, prior):
        with pytest.raises(ValueError, match="first log-density derivative"):
            GridPrior(prior.nodes, prior.log_pdf,
                      prior.log_pdf_d1 + 1.0, prior.log_pdf_d2, prior.period)
        with pytest.raises(ValueError, match="second log-density derivative"):
            GridPrior(prior.nodes, prior.log_pdf,
                      prior.log_pdf_d1, -prior.log_pdf_d2, prior.period)

    def test_needs_two_nodes(self):
        with pytest.raises(ValueError, match="at least 2 nodes"):
            GridPrior(np.array([0.0]), np.array([0.0]),
                      np.array([0.0]), np.array([0.0]), 1.0)

    def test_from_table_matches_analytic_constructor(self, prior):
        tabulated = GridPrior.from_table(prior.nodes, analytic_pdf(prior.nodes), PERIOD)
        assert tabulated.entropy() == pytest.approx(prior.entropy(), rel=1e-10)
        np.testing.assert_allclose(tabulated.curvature_values(),
                                   prior.curvature_values(), rtol=1e-6, atol=1e-8)
        assert tabulated.p_plus() == pytest.approx(prior.p_plus(), rel=1e-8)


class TestGridPriorQuadrature:
    def test_entropy_against_scipy_quad(self, prior):
        """Grid entropy agrees with adaptive quadrature on the closed form."""
        h_ref, _ = quad(lambda x: -analytic_pdf(x) * math.log(analytic_pdf(x)),
                        -PERIOD / 2, PERIOD / 2, limit=200)
        assert prior.entropy() == pytest.approx(h_ref, abs=1e-10)

    def test_entropy_stable_under_grid_doubling(self):
        h1 = GridPrior.von_mises(m=1000).entropy()
        h2 = GridPrior.von_mises(m=2000).entropy()
        assert abs(h1 - h2) < 1e-8

    def test_curvature_at_origin_closed_form(self, prior):
        """P(0) = (1/sigma_p^2) cos(0) = 16 / pi^2."""
        assert prior.curvature(0.0) == pytest.approx(16.0 / math.pi**2, rel=1e-12)

    def test_curvature_cosine_shape(self, prior):
        xs = np.array([-1.2, -0.3, 0.0, 0.4, 1.5])
        expected = (1.0 / PRIOR_WIDTH**2) * np.cos(2 * np.pi * xs / PERIOD)
        np.testing.assert_allclose(prior.curvature(xs), expected, rtol=1e-12)

    def test_mean_curvature_equals_p_plus(self, prior):
        """Integration by parts on a periodic density: <P> = <score^2>."""
        mean_p = prior.average(prior.curvature_values())
        assert mean_p == pytest.approx(prior.p_plus(), abs=1e-8)

    def test_p_plus_against_scipy_quad(self, prior):
        score = lambda x: KAPPA_P * (2 * np.pi / PERIOD) * -np.sin(2 * np.pi * x / PERIOD)
        ref, _ = quad(lambda x: analytic_pdf(x) * score(x) ** 2,
                      -PERIOD / 2, PERIOD / 2, limit=200)
        assert prior.p_plus() == pytest.approx(ref, abs=1e-10)

    def test_domain_check(self, prior):
        with pytest.raises(ValueError, match="outside the prior support"):
            prior.curvature(PERIOD)
        with pytest.raises(ValueError, match="outside the prior support"):
            prior.score(-PERIOD)

    def test_sample_nodes_follow_masses(self, prior):
        rng = np.random.default_rng(5)
        idx = prior.sample_nodes(rng, 20000)
        sampled_mean = prior.nodes[idx].mean()
        assert abs(sampled_mean) < 0.02  # symmetric density, sd/sqrt(n) ~ 0.005
        top = int(np.argmax(prior.masses))
        freq = np.mean(idx == top)
        assert freq == pytest.approx(prior.masses[top], abs=5e-4)


class TestPopulationDensity:
    def test_uniform(self):
        pop = PopulationDensity.uniform(np.array([-0.5, 0.0, 0.5]))
        np.testing.assert_allclose(pop.weights, 1.0 / 3.0, rtol=1e-15)
        assert pop.size == 3

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError, match="nonnegative"):
            PopulationDensity(np.array([0.0, 1.0]), np.array([-0.1, 1.1]))

    def test_rejects_unnormalized_weights(self):
        with pytest.raises(ValueError, match="sum to 1"):
            PopulationDensity(np.array([0.0, 1.0]), np.array([0.3, 0.3]))


def ring_kernel(x, theta):
    curve = VonMisesTuning(amplitude=20.0, width=0.5, period=PERIOD, center=theta)
    return poisson_fisher_kernel(curve, x)


class TestFisherMatrix:
    def test_single_subclass(self):
        """K1 = 1, alpha = 1: J = N S(x; theta)."""
        pop = PopulationDensity(np.array([0.2]), np.array([1.0]))
        j = fisher_matrix(pop, ring_kernel, 0.7, n=50)
        np.testing.assert_allclose(j, 50 * ring_kernel(0.7, 0.2), rtol=1e-14)

    @given(st.floats(0.0, 1.0))
    def test_linear_in_weights(self, lam):
        """J(lam a + (1-lam) b) = lam J(a) + (1-lam) J(b)."""
        thetas = np.array([-0.4, 0.0, 0.4])
        a = np.array([0.5, 0.25, 0.25])
        b = np.array([0.1, 0.2, 0.7])
        mix = lam * a + (1 - lam) * b
        mix = mix / mix.sum()
        ja = fisher_matrix(PopulationDensity(thetas, a), ring_kernel, 0.3, n=10)
        jb = fisher_matrix(PopulationDensity(thetas, b), ring_kernel, 0.3, n=10)
        jm = fisher_matrix(PopulationDensity(thetas, mix), ring_kernel, 0.3, n=10)
        np.testing.assert_allclose(jm, lam * ja + (1 - lam) * jb,
                                   rtol=1e-12, atol=1e-12)

    def test_scales_with_population_size(self):
        pop = PopulationDensity.uniform(np.array([-0.3, 0.3]))
        j1 = fisher_matrix(pop, ring_kernel, 0.1, n=7)
        j2 = fisher_matrix(pop, ring_kernel, 0.1, n=14)
        np.testing.assert_allclose(j2, 2.0 * j1, rtol=1e-14)


class TestAssemble:
    def test_sums_are_exact(self, prior):
        j = np.array([[3.0]])
        info = assemble(j, prior, 0.25)
        assert info.g[0, 0] == j[0, 0] + prior.curvature(0.25)
        assert info.g_plus[0, 0] == j[0, 0] + prior.p_plus()
        assert info.g_is_pd

    def test_pd_flag_reports_indefinite_g(self, prior):
        info = assemble(np.array([[-5.0]]), prior, 0.0)
        assert not info.g_is_pd

    def test_gaussian_prior_matrices(self):
        gp = GaussianPrior(np.zeros(2), np.diag([4.0, 1.0]))
        j = np.array([[1.0, 0.0], [0.0, 2.0]])
        info = assemble(j, gp, np.zeros(2))
        np.testing.assert_allclose(info.p, np.diag([0.25, 1.0]), rtol=1e-14)
        np.testing.assert_allclose(info.p, info.p_plus, rtol=1e-14)
        np.testing.assert_allclose(info.g, j + np.diag([0.25, 1.0]), rtol=1e-14)

    def test_wrappers_promote_to_matrix(self, prior):
        assert prior_curvature(prior, 0.1).shape == (1, 1)
        assert p_plus(prior).shape == (1, 1)
