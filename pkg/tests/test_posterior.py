import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from conftest import naive_exact, naive_variational
from spectral_vgp.errors import UnsupportedOperation
from spectral_vgp.inducing import Strategy, build_blocks, point_blocks, population_spectral_blocks, sample_spectral_blocks
from spectral_vgp.posterior import (
    elbo,
    exact_log_marginal_likelihood,
    fit_exact,
    fit_variational,
    posterior_l2_spread,
    quadrature_grid,
    sample_function,
    spectral_coefficient_law,
)
from spectral_vgp.spectral_kernel import PolynomialSpectrum, SpectralKernel
from spectral_vgp.synthetic_data import Dataset, f0_paper, sample_dataset, zero_truth

GRID = np.linspace(-3.1, 3.1, 41)


def dataset(x, y, sigma):
    x = np.asarray(x, dtype=float)
    return Dataset(x, np.asarray(y, dtype=float), sigma, zero_truth(5), 0)


class TestScalarOracle:
    def test_one_point_one_feature(self):
        # prior f ~ N(0, 1) at x = 0 with m = 1: mean = y / (1 + sigma^2)
        k = SpectralKernel(PolynomialSpectrum(0.5), 1)
        d = dataset([0.0], [2.0], 1.0)
        post = fit_variational(k, d, population_spectral_blocks(k, d, 1))
        assert post.mean(0.0)[0] == pytest.approx(1.0, abs=1e-12)
        assert post.variance(0.0)[0] == pytest.approx(0.5, abs=1e-12)
        ex = fit_exact(k, d)
        assert ex.mean(0.0)[0] == pytest.approx(1.0, abs=1e-12)
        assert ex.variance(0.0)[0] == pytest.approx(0.5, abs=1e-12)

    def test_zero_observations(self, small_kernel):
        d = dataset([], [], 0.1)
        post = fit_variational(small_kernel, d, population_spectral_blocks(small_kernel, d, 8))
        np.testing.assert_allclose(post.spectral.A, np.diag(small_kernel.lambdas[:8]), rtol=1e-12)
        np.testing.assert_array_equal(post.mean(GRID), 0.0)


class TestAgainstNaiveFormulas:
    @pytest.mark.parametrize("strategy", list(Strategy))
    def test_mean_and_variance(self, small_kernel, data200, strategy):
        blocks = build_blocks(strategy, small_kernel, data200, 15, seed=4)
        post = fit_variational(small_kernel, data200, blocks)
        mean, var = naive_variational(small_kernel, data200, blocks, GRID)
        np.testing.assert_allclose(post.mean(GRID, "general"), mean, rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(post.variance(GRID, "general"), var, rtol=1e-6, atol=1e-9)

    def test_exact(self, small_kernel, data200):
        ex = fit_exact(small_kernel, data200)
        mean, var = naive_exact(small_kernel, data200, GRID)
        np.testing.assert_allclose(ex.mean(GRID), mean, rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(ex.variance(GRID), var, rtol=1e-6, atol=1e-10)

    def test_spectral_equals_general(self, poly_kernel, data200):
        post = fit_variational(poly_kernel, data200, population_spectral_blocks(poly_kernel, data200, 30))
        np.testing.assert_allclose(post.mean(GRID, "spectral"), post.mean(GRID, "general"), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(post.variance(GRID, "spectral"), post.variance(GRID, "general"), rtol=1e-9)
        np.testing.assert_allclose(post.covariance(GRID, path="spectral"), post.covariance(GRID, path="general"), atol=1e-10)

    def test_spectral_path_unavailable(self, poly_kernel, data200):
        post = fit_variational(poly_kernel, data200, build_blocks("equidistant", poly_kernel, data200, 10))
        with pytest.raises(UnsupportedOperation):
            post.mean(GRID, "spectral")
        with pytest.raises(UnsupportedOperation):
            spectral_coefficient_law(post)


class TestLimits:
    def test_points_at_data_recover_exact(self, poly_kernel, data200):
        post = fit_variational(poly_kernel, data200, point_blocks(poly_kernel, data200, data200.x))
        ex = fit_exact(poly_kernel, data200)
        np.testing.assert_allclose(post.mean(GRID), ex.mean(GRID), atol=1e-8)
        np.testing.assert_allclose(post.variance(GRID), ex.variance(GRID), atol=1e-8)

    def test_full_sample_spectral_recovers_exact(self, poly_kernel):
        d = sample_dataset(f0_paper(0.5), 60, 0.1, 3)
        post = fit_variational(poly_kernel, d, sample_spectral_blocks(poly_kernel, d, 60))
        ex = fit_exact(poly_kernel, d)
        np.testing.assert_allclose(post.mean(GRID), ex.mean(GRID), atol=1e-8)
        np.testing.assert_allclose(post.variance(GRID), ex.variance(GRID), atol=1e-8)

    def test_zero_response(self, poly_kernel, data200):
        d = dataset(data200.x, np.zeros(200), 0.1)
        for s in Strategy:
            post = fit_variational(poly_kernel, d, build_blocks(s, poly_kernel, d, 10, seed=1))
            np.testing.assert_array_equal(post.mean(GRID), 0.0)

    def test_huge_noise_returns_prior(self, poly_kernel, data200):
        d = dataset(data200.x, data200.y, 1e6)
        post = fit_variational(poly_kernel, d, build_blocks("equidistant", poly_kernel, d, 10))
        np.testing.assert_allclose(post.mean(GRID), 0.0, atol=1e-9)
        np.testing.assert_allclose(post.variance(GRID), poly_kernel.diag(GRID), rtol=1e-8)

    def test_tiny_noise_stays_finite(self, poly_kernel, data200):
        d = dataset(data200.x, data200.y, 1e-6)
        for s in Strategy:
            post = fit_variational(poly_kernel, d, build_blocks(s, poly_kernel, d, 20, seed=2))
            mean, var = post.predict(GRID)
            assert np.all(np.isfinite(mean)) and np.all(var >= 0)


@pytest.mark.parametrize("strategy", list(Strategy))
def test_variance_below_prior(poly_kernel, data200, strategy):
    post = fit_variational(poly_kernel, data200, build_blocks(strategy, poly_kernel, data200, 20, seed=0))
    assert np.all(post.variance(GRID) <= poly_kernel.diag(GRID) + 1e-12)


@pytest.mark.parametrize("strategy", list(Strategy))
def test_mean_in_span(poly_kernel, data200, strategy):
    blocks = build_blocks(strategy, poly_kernel, data200, 12, seed=0)
    post = fit_variational(poly_kernel, data200, blocks)
    np.testing.assert_allclose(post.mean(GRID), blocks.k_xu(GRID) @ post.a_star, atol=1e-12)
    coef = post.mean_coefficients()
    np.testing.assert_allclose(poly_kernel.features(GRID, poly_kernel.truncation) @ coef, post.mean(GRID), atol=1e-9)


class TestSpread:
    def test_general_matches_spectral(self, poly_kernel, data200):
        post = fit_variational(poly_kernel, data200, population_spectral_blocks(poly_kernel, data200, 20))
        a = posterior_l2_spread(post, "spectral")
        assert posterior_l2_spread(post, "general") == pytest.approx(a, rel=1e-10)
        assert posterior_l2_spread(post, "quadrature") == pytest.approx(a, rel=0.02)

    @pytest.mark.parametrize("strategy", ["sample_spectral", "equidistant", "mdpp"])
    def test_general_matches_quadrature(self, small_kernel, data200, strategy):
        # a 4096-point midpoint rule is exact for the 400-term kernel
        post = fit_variational(small_kernel, data200, build_blocks(strategy, small_kernel, data200, 15, seed=2))
        assert posterior_l2_spread(post, "general") == pytest.approx(posterior_l2_spread(post, "quadrature"), rel=1e-9)

    def test_exact_by_quadrature(self, small_kernel, data200):
        ex = fit_exact(small_kernel, data200)
        ref = np.mean(naive_exact(small_kernel, data200, quadrature_grid())[1])
        assert posterior_l2_spread(ex) == pytest.approx(ref, rel=1e-8)

    def test_decreasing_in_n(self, poly_kernel):
        truth = f0_paper(0.5)
        spreads = []
        for n in (100, 400, 1600):
            d = sample_dataset(truth, n, 0.1, 0)
            post = fit_variational(poly_kernel, d, population_spectral_blocks(poly_kernel, d, math.ceil(math.sqrt(n))))
            spreads.append(posterior_l2_spread(post))
        assert spreads[0] > spreads[1] > spreads[2]


class TestSampling:
    def test_moments(self, small_kernel, data200):
        post = fit_variational(small_kernel, data200, population_spectral_blocks(small_kernel, data200, 15))
        grid = np.linspace(-3, 3, 7)
        draws = sample_function(post, grid, 20000, 8)
        se = np.sqrt(post.variance(grid) / 20000)
        assert np.all(np.abs(draws.mean(axis=0) - post.mean(grid)) < 4 * se)
        np.testing.assert_allclose(np.cov(draws.T), post.covariance(grid), atol=0.05 * post.variance(grid).max())

    def test_deterministic(self, small_kernel, data200):
        post = fit_variational(small_kernel, data200, population_spectral_blocks(small_kernel, data200, 5))
        np.testing.assert_array_equal(sample_function(post, GRID, 3, 1), sample_function(post, GRID, 3, 1))


class TestElbo:
    def test_equals_evidence_at_data(self, poly_kernel, data200):
        blocks = point_blocks(poly_kernel, data200, data200.x)
        assert elbo(poly_kernel, data200, blocks) == pytest.approx(exact_log_marginal_likelihood(poly_kernel, data200), abs=1e-5)

    def test_evidence_oracle(self, small_kernel, data200):
        # dense log N(y | 0, K + sigma^2 I)
        G = small_kernel.matrix(data200.x) + data200.sigma**2 * np.eye(200)
        _, logdet = np.linalg.slogdet(G)
        ref = -0.5 * (data200.y @ np.linalg.solve(G, data200.y) + logdet + 200 * math.log(2 * math.pi))
        assert exact_log_marginal_likelihood(small_kernel, data200) == pytest.approx(ref, rel=1e-9)

    def test_dense_formula(self, small_kernel, data200):
        blocks = build_blocks("equidistant", small_kernel, data200, 10)
        s2 = data200.sigma**2
        Q = blocks.K_fu @ np.linalg.solve(blocks.K_uu, blocks.K_fu.T)
        G = Q + s2 * np.eye(200)
        _, logdet = np.linalg.slogdet(G)
        ref = -0.5 * (data200.y @ np.linalg.solve(G, data200.y) + logdet + 200 * math.log(2 * math.pi))
        ref -= 0.5 * np.trace(small_kernel.matrix(data200.x) - Q) / s2
        assert elbo(small_kernel, data200, blocks) == pytest.approx(ref, rel=1e-8)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 40))
    def test_bounded_and_nested(self, m):
        kernel = SpectralKernel(PolynomialSpectrum(0.5), 400)
        d = sample_dataset(f0_paper(0.5), 80, 0.2, 6)
        evidence = exact_log_marginal_likelihood(kernel, d)
        small = elbo(kernel, d, population_spectral_blocks(kernel, d, m))
        large = elbo(kernel, d, population_spectral_blocks(kernel, d, m + 5))
        assert small <= evidence + 1e-8
        assert small <= large + 1e-8
