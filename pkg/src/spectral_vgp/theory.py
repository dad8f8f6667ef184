"""Closed-form bias, variance and spread terms for population spectral features.

For a prior with eigenvalues ``lambda_j`` and truth coefficients ``c_j``:

    nu_j = n lambda_j / (sigma^2 + n lambda_j)
    B_n  = sum_{j<=m} (1 - nu_j)^2 c_j^2 + sum_{j>m} c_j^2
    W_n  = (1/n) sum_{j<=m} nu_j^2
    V_n  = (1/n) sum_{j<=m} nu_j + sum_{j>m} lambda_j
    R_n  = (B_n + W_n) / V_n
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .errors import ConfigError


def nu(n, lam, sigma2):
    """Shrinkage factor ``n lambda / (sigma^2 + n lambda)`` (vectorised over ``lam``)."""
    lam = np.asarray(lam, dtype=float)
    out = n * lam / (sigma2 + n * lam)
    return float(out) if out.ndim == 0 else out


def effective_dim(spectrum, n):
    """``J_n = max{j : n lambda_j >= 1}``, or 0 when ``n lambda_1 < 1``."""
    if n * spectrum.eigenvalue(1) < 1:
        return 0
    # exponential search then bisection on the nonincreasing sequence
    hi = 1
    while n * spectrum.eigenvalue(2 * hi) >= 1:
        hi *= 2
        if hi > 2**40:
            raise ConfigError("effective dimension does not terminate; eigenvalues do not decay")
    lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if n * spectrum.eigenvalue(mid) >= 1:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True, eq=False)
class RateTerms:
    n: int
    m: int
    nu: np.ndarray
    B_n: float
    W_n: float
    V_n: float
    R_n: float
    J_n: int

    def row(self):
        return {
            "n": self.n, "m": self.m, "J_n": self.J_n,
            "B_n": self.B_n, "W_n": self.W_n, "V_n": self.V_n, "R_n": self.R_n,
        }


def _truth_tail(truth, m):
    return truth.tail_mass(m, analytic=True)


def rate_terms(spectrum, truth, n, m, sigma2):
    """Rate terms by direct summation; tails use the analytic series remainders."""
    if m < 0:
        raise ConfigError(f"m must be nonnegative, got {m}")
    if truth.n_terms < m:
        raise ConfigError(f"truth.n_terms={truth.n_terms} is smaller than m={m}")
    lam = spectrum.values(m)
    v = nu(n, lam, sigma2) if m else np.zeros(0)
    c = truth.coefficients[:m]
    B = float(np.sum((1 - v) ** 2 * c**2)) + _truth_tail(truth, m)
    W = float(np.sum(v**2)) / n
    V = float(np.sum(v)) / n + spectrum.tail(m)
    return RateTerms(n, m, v, B, W, V, (B + W) / V, effective_dim(spectrum, n))


class AlternativeTerms(NamedTuple):
    B_n: float
    W_n: float
    V_n: float


def alternative_terms(spectrum, truth, n, m):
    """Elbow forms of the bias, variance and spread, equal to the direct ones up to constants."""
    J = effective_dim(spectrum, n)
    k = min(m, J)
    lam_k = spectrum.values(k)
    B = float(np.sum((n * lam_k) ** -2.0 * truth.head(k) ** 2)) + _truth_tail(truth, k)
    V = k / n + spectrum.tail(k)
    W = k / n
    if m >= J:
        lam = spectrum.values(m, max(J - 1, 0))
        W += n * float(np.sum(lam**2))
    return AlternativeTerms(B, W, V)


class PredictedRate(NamedTuple):
    exponent: float
    regime: str


def predicted_rate(kind, alpha, beta, d=1, r=None):
    """Exponent ``e`` of the contraction rate ``n**e`` and the regime it falls in.

    ``kind`` is the prior family; both the polynomial and the rescaled
    exponential prior share the exponent ``-(beta ^ alpha)/(d + 2 alpha)``.
    ``r`` is the exponent of ``m ~ n**r`` (``None`` means ``m >= J_n``).
    """
    if not (alpha > 0 and beta > 0):
        raise ConfigError("alpha and beta must be positive")
    if kind not in ("polynomial", "exponential_theory", "exponential_experiment"):
        raise ConfigError(f"unknown spectrum kind {kind!r}")
    exponent = -min(alpha, beta) / (d + 2 * alpha)
    if r is not None and r < d / (d + 2 * alpha):
        regime = "insufficient-m"
    elif math.isclose(alpha, beta):
        regime = "optimal"
    elif alpha < beta:
        regime = "undersmoothed"
    else:
        regime = "oversmoothed"
    return PredictedRate(exponent, regime)
