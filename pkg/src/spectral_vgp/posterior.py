"""Exact and variational Gaussian-process posteriors.

The variational posterior for inducing variables ``u`` has

    mean(x)   = K_xu B^{-1} K_uf y,            B = sigma^2 K_uu + K_uf K_fu
    cov(x, y) = k(x, y) - K_xu K_uu^{-1} K_uy + sigma^2 K_xu B^{-1} K_uy.

``B`` is factorised as ``sigma^2 L (I + A A') L'`` with ``L = chol(K_uu)`` and
``A = L^{-1} K_uf / sigma``, which keeps the m x m solve well conditioned.
For population spectral features the same posterior is also available in
coefficient form through ``(Lambda^{-1} + sigma^{-2} Phi' Phi)^{-1}``.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .errors import NumericError, UnsupportedOperation
from .inducing import Strategy
from .linalg import cholesky, tri_solve

QUADRATURE_POINTS = 4096


def quadrature_grid(size=QUADRATURE_POINTS):
    """Equispaced cell midpoints on [-pi, pi]; the average over them integrates against mu."""
    return -math.pi + (np.arange(size) + 0.5) * (2 * math.pi / size)


class _InducingFactor:
    """Factorisation of the m x m system shared by the fit and the ELBO."""

    def __init__(self, blocks, y, sigma):
        if sigma <= 0:
            raise NumericError("sigma must be positive for the variational fit")
        self.L, self.jitter_uu = cholesky(blocks.K_uu, "K_uu")
        self.A = tri_solve(self.L, blocks.K_fu.T) / sigma
        m = blocks.m
        self.LB, self.jitter_b = cholesky(np.eye(m) + self.A @ self.A.T, "I + A A'")
        self.c = tri_solve(self.LB, self.A @ y) / sigma


@dataclass(frozen=True, eq=False)
class SpectralFit:
    """Coefficient-space view of a population-spectral fit."""

    lambdas: np.ndarray
    A: np.ndarray
    coef: np.ndarray


class VariationalPosterior:
    """Fitted variational posterior. Immutable after construction."""

    def __init__(self, kernel, data, blocks):
        if blocks.K_fu.shape != (data.n, blocks.m):
            raise NumericError(f"K_fu has shape {blocks.K_fu.shape}, expected {(data.n, blocks.m)}")
        self.kernel = kernel
        self.data = data
        self.blocks = blocks
        self.sigma = data.sigma
        self.strategy = blocks.strategy
        self.m = blocks.m
        self._fac = _InducingFactor(blocks, data.y, self.sigma)
        # a* = B^{-1} K_uf y
        self.a_star = tri_solve(self._fac.L, tri_solve(self._fac.LB, self._fac.c, trans=True), trans=True)
        self.spectral = self._spectral_fit() if self.strategy is Strategy.POPULATION_SPECTRAL else None

    def _spectral_fit(self):
        lam = self.kernel.lambdas[: self.m]
        Phi = self.kernel.features(self.data.x, self.m)
        s = np.sqrt(lam)
        # A = S (I + sigma^-2 S Phi'Phi S)^{-1} S with S = Lambda^{1/2}
        G = np.eye(self.m) + (s[:, None] * (Phi.T @ Phi) * s[None, :]) / self.sigma**2
        LG, _ = cholesky(G, "I + Lambda^1/2 Phi'Phi Lambda^1/2 / sigma^2")
        Sinv = tri_solve(LG, np.diag(s))
        A = Sinv.T @ Sinv
        A = 0.5 * (A + A.T)
        coef = A @ (Phi.T @ self.data.y) / self.sigma**2
        return SpectralFit(lam, A, coef)

    @property
    def jitter(self):
        return {"K_uu": self._fac.jitter_uu, "B": self._fac.jitter_b}

    def _path(self, path):
        if path == "auto":
            return "spectral" if self.spectral is not None else "general"
        if path == "spectral" and self.spectral is None:
            raise UnsupportedOperation("spectral path needs population spectral features")
        if path not in ("spectral", "general"):
            raise ValueError(f"unknown path {path!r}")
        return path

    def mean(self, x, path="auto"):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._path(path) == "spectral":
            return self.kernel.features(x, self.m) @ self.spectral.coef
        return self.blocks.k_xu(x) @ self.a_star

    def variance(self, x, path="auto"):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._path(path) == "spectral":
            P = self.kernel.features(x, self.m)
            head = np.einsum("ij,jk,ik->i", P, self.spectral.A, P)
            return head + self.kernel.diag(x, start=self.m)
        Kux = self.blocks.k_xu(x).T
        V1 = tri_solve(self._fac.L, Kux)
        V2 = tri_solve(self._fac.LB, V1)
        return self.kernel.diag(x) - np.sum(V1**2, axis=0) + np.sum(V2**2, axis=0)

    def predict(self, x, path="auto"):
        """Posterior mean and pointwise variance (clipped at zero)."""
        return self.mean(x, path), np.maximum(self.variance(x, path), 0.0)

    def covariance(self, x1, x2=None, path="auto"):
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        same = x2 is None
        x2 = x1 if same else np.atleast_1d(np.asarray(x2, dtype=float))
        if self._path(path) == "spectral":
            P1 = self.kernel.features(x1, self.m)
            P2 = P1 if same else self.kernel.features(x2, self.m)
            C = P1 @ self.spectral.A @ P2.T + self.kernel.matrix(x1, None if same else x2, start=self.m)
        else:
            V1a = tri_solve(self._fac.L, self.blocks.k_xu(x1).T)
            V1b = V1a if same else tri_solve(self._fac.L, self.blocks.k_xu(x2).T)
            V2a = tri_solve(self._fac.LB, V1a)
            V2b = V2a if same else tri_solve(self._fac.LB, V1b)
            C = self.kernel.matrix(x1, None if same else x2) - V1a.T @ V1b + V2a.T @ V2b
        if same:
            C = 0.5 * (C + C.T)
        return C

    def mean_coefficients(self):
        """Basis coefficients of the posterior mean over the kernel truncation."""
        if self.spectral is not None:
            out = np.zeros(self.kernel.truncation)
            out[: self.m] = self.spectral.coef
            return out
        return self.blocks.coefficient_map() @ self.a_star


class ExactPosterior:
    """Conjugate GP posterior via a Cholesky factor of ``K_ff + sigma^2 I``."""

    def __init__(self, kernel, data, K_ff=None):
        if data.n < 1:
            raise NumericError("exact posterior needs at least one observation")
        self.kernel = kernel
        self.data = data
        self.sigma = data.sigma
        K = kernel.matrix(data.x) if K_ff is None else K_ff
        self.K_ff = K
        self.L, self.jitter = cholesky(K + self.sigma**2 * np.eye(data.n), "K_ff + sigma^2 I")
        self.weights = tri_solve(self.L, tri_solve(self.L, data.y), trans=True)

    def mean(self, x):
        return self.kernel.matrix(np.atleast_1d(x), self.data.x) @ self.weights

    def variance(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        V = tri_solve(self.L, self.kernel.matrix(self.data.x, x))
        return self.kernel.diag(x) - np.sum(V**2, axis=0)

    def predict(self, x):
        return self.mean(x), np.maximum(self.variance(x), 0.0)

    def covariance(self, x1, x2=None):
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        same = x2 is None
        x2 = x1 if same else np.atleast_1d(np.asarray(x2, dtype=float))
        V1 = tri_solve(self.L, self.kernel.matrix(self.data.x, x1))
        V2 = V1 if same else tri_solve(self.L, self.kernel.matrix(self.data.x, x2))
        C = self.kernel.matrix(x1, None if same else x2) - V1.T @ V2
        return 0.5 * (C + C.T) if same else C

    def log_marginal_likelihood(self):
        n = self.data.n
        return float(
            -0.5 * self.data.y @ self.weights
            - np.sum(np.log(np.diag(self.L)))
            - 0.5 * n * math.log(2 * math.pi)
        )


def fit_variational(kernel, data, blocks):
    return VariationalPosterior(kernel, data, blocks)


def fit_exact(kernel, data, K_ff=None):
    return ExactPosterior(kernel, data, K_ff)


class CoefficientLaw(NamedTuple):
    """Law of ``<f - mean, phi_j>`` under the posterior: ``N(0, head_cov)`` for
    ``j <= m``, independent ``N(0, lambda_j)`` for ``m < j <= truncation``."""

    head_cov: np.ndarray
    tail_eigs: np.ndarray


def spectral_coefficient_law(post):
    if getattr(post, "spectral", None) is None:
        raise UnsupportedOperation("coefficient law is only available for population spectral features")
    return CoefficientLaw(post.spectral.A, post.kernel.lambdas[post.m:])


def posterior_l2_spread(post, path="auto", quadrature_points=QUADRATURE_POINTS):
    """Posterior mean of ``||f - mean||^2`` in L2(mu).

    ``spectral``: ``trace(A) + sum_{m < j <= truncation} lambda_j``.
    ``general``: the same integral through the coefficient map ``C`` of the
    blocks; orthonormality of the basis turns it into
    ``sum_j lambda_j - ||L^{-1} C'||^2 + ||LB^{-1} L^{-1} C'||^2``.
    ``quadrature``: average of the pointwise variance over an equispaced grid.
    """
    variational = isinstance(post, VariationalPosterior)
    if path == "auto":
        if getattr(post, "spectral", None) is not None:
            path = "spectral"
        else:
            path = "general" if variational else "quadrature"
    if path == "spectral":
        law = spectral_coefficient_law(post)
        return float(np.trace(law.head_cov) + law.tail_eigs.sum())
    if path == "general":
        if not variational:
            raise UnsupportedOperation("the general spread path needs a variational posterior")
        V1 = tri_solve(post._fac.L, post.blocks.coefficient_map().T)
        V2 = tri_solve(post._fac.LB, V1)
        return float(post.kernel.lambdas.sum() - np.sum(V1**2) + np.sum(V2**2))
    if path != "quadrature":
        raise ValueError(f"unknown path {path!r}")
    grid = quadrature_grid(quadrature_points)
    var = post.variance(grid, path="general") if variational else post.variance(grid)
    return float(np.mean(var))


def sample_function(post, grid, count, seed):
    """``count`` joint posterior draws on ``grid`` (rows are draws)."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    mean = post.mean(grid)
    C = post.covariance(grid)
    Lc, _ = cholesky(C, "posterior covariance on grid")
    rng = np.random.Generator(np.random.PCG64(seed))
    Z = rng.standard_normal((count, grid.size))
    return mean[None, :] + Z @ Lc.T


def elbo(kernel, data, blocks):
    """Collapsed evidence lower bound at the optimal variational distribution.

    ``log N(y | 0, Q + sigma^2 I) - trace(K_ff - Q) / (2 sigma^2)`` with
    ``Q = K_fu K_uu^{-1} K_uf``.
    """
    s2 = data.sigma**2
    fac = _InducingFactor(blocks, data.y, data.sigma)
    n = data.n
    logdet = n * math.log(s2) + 2.0 * np.sum(np.log(np.diag(fac.LB)))
    quad = data.y @ data.y / s2 - fac.c @ fac.c
    trace_q = s2 * np.sum(fac.A**2)
    trace_k = float(np.sum(kernel.diag(data.x)))
    return float(
        -0.5 * n * math.log(2 * math.pi) - 0.5 * logdet - 0.5 * quad - 0.5 * (trace_k - trace_q) / s2
    )


def exact_log_marginal_likelihood(kernel, data, K_ff=None):
    return ExactPosterior(kernel, data, K_ff).log_marginal_likelihood()
