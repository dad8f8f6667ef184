"""True regression functions in basis-coefficient form and synthetic datasets."""

from dataclasses import dataclass, replace
import csv
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate, special

from .errors import ConfigError
from .spectral_kernel import FourierBasis

DEFAULT_TERMS = 10_000
PRNG_NAME = "numpy.random.PCG64 (SeedSequence(seed).spawn(2): design, noise); normals by numpy ziggurat"
_EVAL_CHUNK = 2048


@dataclass(frozen=True)
class CoefficientDecay:
    """Coefficient law ``j**(-power) / log(j)**log_power`` on multiples of ``stride``.

    Describes the untruncated family a :class:`TrueFunction` was cut from, so
    tails beyond the stored coefficients can be summed analytically.
    """

    power: float
    log_power: float = 0.0
    stride: int = 1

    def converges(self, exponent_shift=0.0):
        """Whether ``sum j**exponent_shift * c_j**2`` is finite."""
        e = 2 * self.power - exponent_shift
        if abs(e - 1.0) < 1e-12:
            return 2 * self.log_power > 1
        return e > 1

    def weighted_tail(self, J, exponent_shift=0.0):
        """``sum_{j > J} j**exponent_shift c_j**2`` (``inf`` if divergent)."""
        if not self.converges(exponent_shift):
            return math.inf
        e = 2 * self.power - exponent_shift
        s = self.stride
        first = J // s + 1
        if self.log_power == 0:
            return float(s ** (-e) * special.zeta(e, first))
        b = 2 * self.log_power

        def g(ell):
            u = s * ell
            return u ** (-e) * math.log(u) ** (-b)

        # midpoint rule for a smooth decreasing summand
        val, _ = integrate.quad(g, first - 0.5, np.inf, limit=200)
        return float(val)


@dataclass(frozen=True, eq=False)
class TrueFunction:
    """Function ``sum_j c_j phi_j`` stored by its first ``n_terms`` coefficients.

    The function itself is the truncated series. ``decay`` describes the
    untruncated family and is used only where an analytic tail is wanted.
    """

    coefficients: np.ndarray
    decay: Optional[CoefficientDecay] = None
    label: str = "custom"

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "_support", np.flatnonzero(c) + 1)

    @property
    def n_terms(self):
        return self.coefficients.size

    def coefficient(self, j):
        return float(self.coefficients[j - 1]) if j <= self.n_terms else 0.0

    def head(self, m):
        """First ``m`` coefficients, zero padded beyond ``n_terms``."""
        out = np.zeros(m)
        k = min(m, self.n_terms)
        out[:k] = self.coefficients[:k]
        return out

    def __call__(self, x, basis=FourierBasis()):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(x.size)
        js = self._support
        for lo in range(0, js.size, _EVAL_CHUNK):
            cols = js[lo:lo + _EVAL_CHUNK]
            out += basis.columns(x, cols) @ self.coefficients[cols - 1]
        return out

    def l2_norm(self):
        return float(np.sqrt(np.sum(self.coefficients**2)))

    def tail_mass(self, m, analytic=False):
        """``sum_{j > m} c_j**2``; with ``analytic`` the untruncated tail beyond ``n_terms`` is added."""
        val = float(np.sum(self.coefficients[m:] ** 2))
        if analytic and self.decay is not None:
            val += self.decay.weighted_tail(max(m, self.n_terms))
        return val

    def describe(self):
        out = {"label": self.label, "n_terms": self.n_terms}
        if self.decay is not None:
            out["decay"] = {
                "power": self.decay.power,
                "log_power": self.decay.log_power,
                "stride": self.decay.stride,
            }
        return out


def _from_decay(decay, n_terms, label):
    j = np.arange(1, n_terms + 1, dtype=float)
    c = np.zeros(n_terms)
    on = (np.arange(1, n_terms + 1) % decay.stride) == 0
    c[on] = j[on] ** (-decay.power)
    if decay.log_power:
        c[on] /= np.log(j[on]) ** decay.log_power
    return TrueFunction(c, decay, label)


def f0_paper(beta, n_terms=DEFAULT_TERMS):
    """Coefficients ``(3l)**(-1/2 - beta) / log(3l)`` at ``j = 3l``, zero elsewhere."""
    if not beta > 0:
        raise ConfigError(f"truth.beta must be positive, got {beta}")
    if n_terms < 3:
        raise ConfigError("truth.n_terms must be at least 3")
    return _from_decay(CoefficientDecay(0.5 + beta, 1.0, 3), n_terms, f"paper(beta={beta})")


def f0_lowerbound(p, r, beta, d=1, n_terms=DEFAULT_TERMS):
    """Coefficients ``j**(-(1 + p/r)/2)``; needs ``2 r beta/d < p < 2 beta/(d + 2 beta)``."""
    lo, hi = 2 * r * beta / d, 2 * beta / (d + 2 * beta)
    if not p > lo:
        raise ConfigError(f"truth.p={p} violates p > 2*r*beta/d = {lo}")
    if not p < hi:
        raise ConfigError(f"truth.p={p} violates p < 2*beta/(d+2*beta) = {hi}")
    decay = CoefficientDecay((1 + p / r) / 2)
    return _from_decay(decay, n_terms, f"lowerbound(p={p}, r={r})")


def f0_power(q, n_terms=DEFAULT_TERMS):
    """Coefficients ``j**(-1/2 - q)`` on every index."""
    if not q > 0:
        raise ConfigError(f"truth.q must be positive, got {q}")
    return _from_decay(CoefficientDecay(0.5 + q), n_terms, f"power(q={q})")


def f0_oversmooth(q, alpha, beta, d=1, n_terms=DEFAULT_TERMS):
    """:func:`f0_power` restricted to ``beta/d < q < alpha/d``."""
    if not beta / d < q:
        raise ConfigError(f"truth.q={q} violates q > beta/d = {beta / d}")
    if not q < alpha / d:
        raise ConfigError(f"truth.q={q} violates q < alpha/d = {alpha / d}")
    return replace(f0_power(q, n_terms), label=f"oversmooth(q={q})")


def zero_truth(n_terms=DEFAULT_TERMS):
    return TrueFunction(np.zeros(n_terms), None, "zero")


class SobolevNorm(NamedTuple):
    value: float
    divergent: bool


def sobolev_norm(truth, beta, d=1):
    """Partial Sobolev norm over the stored coefficients plus a divergence flag.

    The flag reports whether the untruncated coefficient family has infinite
    ``beta``-norm (decided analytically from ``truth.decay``).
    """
    j = np.arange(1, truth.n_terms + 1, dtype=float)
    value = float(np.sqrt(np.sum(j ** (2 * beta / d) * truth.coefficients**2)))
    divergent = False
    if truth.decay is not None:
        divergent = not truth.decay.converges(2 * beta / d)
    return SobolevNorm(value, divergent)


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    sigma: float
    truth: TrueFunction
    seed: int

    @property
    def n(self):
        return self.x.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y"])
            for xi, yi in zip(self.x, self.y):
                w.writerow([f"{xi:.17g}", f"{yi:.17g}"])


def sample_dataset(truth, n, sigma, seed):
    """Uniform design on [-pi, pi] with Gaussian noise, deterministic in ``seed``.

    Design points and noise come from separate child streams, so the first
    ``k`` observations of a size-``n`` draw equal the size-``k`` draw.
    """
    if n < 0:
        raise ConfigError(f"n must be nonnegative, got {n}")
    if sigma < 0:
        raise ConfigError(f"sigma must be nonnegative, got {sigma}")
    design_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    x = np.random.Generator(np.random.PCG64(design_ss)).uniform(-math.pi, math.pi, n)
    eps = np.random.Generator(np.random.PCG64(noise_ss)).standard_normal(n)
    y = truth(x) + sigma * eps
    return Dataset(x, y, float(sigma), truth, int(seed))
