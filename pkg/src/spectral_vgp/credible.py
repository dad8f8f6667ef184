"""L2(mu) credible balls, coverage indicators and pointwise bands.

Under the posterior, ``||f - mean||^2`` is a weighted sum of independent
chi-square(1) variables. The weights are the eigenvalues of ``A`` plus the
tail eigenvalues for population spectral features, or the eigenvalues of the
grid covariance divided by the grid size for any other strategy. The radius
is the Monte Carlo ``1 - gamma`` quantile of that sum.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import ConfigError
from .linalg import sym_eigh
from .posterior import quadrature_grid, spectral_coefficient_law

MIN_MC_SAMPLES = 1000
DEFAULT_MC_SAMPLES = 100_000
# weights sampled explicitly; the remainder is moment matched by a Gamma draw
EXPLICIT_WEIGHTS = 256
GRID_POINTS = 512


def weighted_chi2_sample(weights, size, rng, explicit=EXPLICIT_WEIGHTS):
    """Draws of ``sum_j w_j Z_j^2`` with ``Z_j`` iid standard normal."""
    w = np.sort(np.asarray(weights, dtype=float))[::-1]
    w = w[w > 0]
    out = np.zeros(size)
    head, rest = w[:explicit], w[explicit:]
    for lo in range(0, head.size, 64):
        blk = head[lo:lo + 64]
        out += (rng.standard_normal((size, blk.size)) ** 2) @ blk
    if rest.size:
        mean, var = rest.sum(), 2.0 * np.sum(rest**2)
        out += rng.gamma(mean**2 / var, var / mean, size)
    return out


def weighted_chi2_quantile(weights, level, mc_samples, seed, explicit=EXPLICIT_WEIGHTS):
    """Monte Carlo ``level`` quantile of ``sum_j w_j Z_j^2``."""
    if mc_samples < MIN_MC_SAMPLES:
        raise ConfigError(f"mc_samples={mc_samples} is below the minimum {MIN_MC_SAMPLES}")
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = weighted_chi2_sample(weights, mc_samples, rng, explicit)
    return float(np.quantile(draws, level))


def _check_gamma(gamma):
    if not 0 < gamma < 1:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")


def ball_weights(post, method="auto", grid_points=GRID_POINTS):
    """Chi-square weights of ``||f - mean||^2`` and the method that produced them."""
    if method == "auto":
        method = "spectral" if getattr(post, "spectral", None) is not None else "grid"
    if method == "spectral":
        law = spectral_coefficient_law(post)
        head, _ = sym_eigh(law.head_cov, "A")
        return np.concatenate([np.maximum(head, 0.0), law.tail_eigs]), method
    if method != "grid":
        raise ConfigError(f"unknown radius method {method!r}")
    grid = quadrature_grid(grid_points)
    w, _ = sym_eigh(post.covariance(grid), "posterior covariance on grid")
    return np.maximum(w, 0.0) / grid_points, method


@dataclass(frozen=True)
class CredibleBall:
    gamma: float
    radius: float
    method: str
    mc_samples: int
    seed: int


def credible_ball(post, gamma=0.05, mc_samples=DEFAULT_MC_SAMPLES, seed=0, method="auto"):
    _check_gamma(gamma)
    w, method = ball_weights(post, method)
    rho2 = weighted_chi2_quantile(w, 1 - gamma, mc_samples, seed)
    return CredibleBall(gamma, math.sqrt(max(rho2, 0.0)), method, mc_samples, seed)


def radius(post, gamma=0.05, mc_samples=DEFAULT_MC_SAMPLES, seed=0, method="auto"):
    return credible_ball(post, gamma, mc_samples, seed, method).radius


def l2_distance_to_truth(post, truth, path="coefficients", quadrature_points=4096):
    """``||mean - f0||`` in L2(mu).

    ``coefficients`` compares basis coefficients exactly (the truth beyond the
    kernel truncation counts in full); ``quadrature`` averages the squared
    difference over an equispaced grid.
    """
    if path == "quadrature":
        grid = quadrature_grid(quadrature_points)
        diff = post.mean(grid) - truth(grid)
        return float(np.sqrt(np.mean(diff**2)))
    if path != "coefficients":
        raise ConfigError(f"unknown distance path {path!r}")
    c_hat = post.mean_coefficients()
    J = c_hat.size
    head = np.sum((c_hat - truth.head(J)) ** 2)
    return float(np.sqrt(head + truth.tail_mass(J)))


def coverage_indicator(post, truth, gamma=0.05, blowup=1.0, mc_samples=DEFAULT_MC_SAMPLES, seed=0):
    """1 when the ball inflated by ``blowup`` contains the truth, else 0."""
    rho = radius(post, gamma, mc_samples, seed)
    return int(l2_distance_to_truth(post, truth) <= blowup * rho)


def normal_quantile(p):
    return float(stats.norm.ppf(p))


class Band(NamedTuple):
    x: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def pointwise_band(post, grid, gamma=0.05):
    """``mean +- z_{1 - gamma/2} sd`` at each grid point."""
    _check_gamma(gamma)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    mean, var = post.predict(grid)
    sd = np.sqrt(var)
    z = normal_quantile(1 - gamma / 2)
    return Band(grid, mean, sd, mean - z * sd, mean + z * sd)
