"""Mercer-form covariance kernels on [-pi, pi].

A kernel is an eigenvalue sequence paired with the Fourier basis

    phi_1 = 1,  phi_{2l} = sqrt(2) cos(l x),  phi_{2l+1} = sqrt(2) sin(l x),

orthonormal under the uniform probability measure on [-pi, pi]. Kernels are
evaluated by truncating the series at ``truncation`` terms, with the
truncation picked from a closed-form bound on the eigenvalue tail.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
DOMAIN = (-math.pi, math.pi)
_DOMAIN_SLACK = 1e-12
# columns per block when forming Phi Lambda Phi' to bound memory at O(n * chunk)
_CHUNK = 2048


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if x.size and (not np.all(np.isfinite(x)) or np.max(np.abs(x)) > math.pi * (1 + _DOMAIN_SLACK)):
        raise DomainError(f"points must lie in [-pi, pi]; got range [{x.min()}, {x.max()}]")
    return x


def _check_index(j):
    if int(j) != j or j < 1:
        raise DomainError(f"basis/eigen index must be a positive integer, got {j!r}")
    return int(j)


# --------------------------------------------------------------------------
# eigenvalue sequences


class Spectrum:
    """Base class for nonincreasing, summable eigenvalue sequences."""

    kind = "abstract"

    def values(self, stop, start=0):
        """Eigenvalues ``lambda_{start+1}, ..., lambda_stop`` as an array."""
        j = np.arange(start + 1, stop + 1, dtype=float)
        return self._formula(j)

    def eigenvalue(self, j):
        return float(self._formula(np.array([float(_check_index(j))]))[0])

    def total(self):
        return self.tail(0)

    def tail(self, m):
        """Sum of ``lambda_j`` over ``j > m`` (to infinity)."""
        raise NotImplementedError

    def tail_squares(self, m):
        """Sum of ``lambda_j**2`` over ``j > m``."""
        raise NotImplementedError

    def describe(self):
        raise NotImplementedError

    def _formula(self, j):
        raise NotImplementedError


@dataclass(frozen=True)
class PolynomialSpectrum(Spectrum):
    """``lambda_j = scale * j**(-1 - 2 alpha / d)``."""

    alpha: float
    d: int = 1
    scale: float = 1.0
    kind = "polynomial"

    def __post_init__(self):
        if not self.alpha > 0 or self.d < 1 or not self.scale > 0:
            raise DomainError(f"invalid polynomial spectrum {self}")

    @property
    def exponent(self):
        return 1.0 + 2.0 * self.alpha / self.d

    def _formula(self, j):
        return self.scale * j ** (-self.exponent)

    def tail(self, m):
        return float(self.scale * special.zeta(self.exponent, m + 1))

    def tail_squares(self, m):
        return float(self.scale**2 * special.zeta(2 * self.exponent, m + 1))

    def describe(self):
        return {"kind": self.kind, "alpha": self.alpha, "d": self.d, "scale": self.scale}


@dataclass(frozen=True)
class ExponentialSpectrum(Spectrum):
    """``lambda_j = scale * exp(-tau * j**(1/d))``."""

    tau: float
    d: int = 1
    scale: float = 1.0
    kind = "exponential_theory"

    def __post_init__(self):
        if not self.tau > 0 or self.d < 1 or not self.scale > 0:
            raise DomainError(f"invalid exponential spectrum {self}")

    def _formula(self, j):
        return self.scale * np.exp(-self.tau * j ** (1.0 / self.d))

    def _integral(self, a, power=1):
        # int_a^inf exp(-power * tau * x^(1/d)) dx  =  d Gamma(d, c a^(1/d)) / c^d
        c = power * self.tau
        return self.d * special.gamma(self.d) * special.gammaincc(self.d, c * a ** (1.0 / self.d)) / c**self.d

    def _tail_generic(self, m, power):
        if self.d == 1:
            q = math.exp(-power * self.tau)
            return self.scale**power * q ** (m + 1) / (1.0 - q)
        # explicit sum over a block, then the integral bound for the remainder
        block = 4096
        total = 0.0
        start = m
        while True:
            v = self.values(start + block, start) ** power
            total += float(v.sum())
            start += block
            if v[-1] <= 1e-18 * max(total, 1e-300):
                break
        return total + self.scale**power * self._integral(start, power)

    def tail(self, m):
        return float(self._tail_generic(m, 1))

    def tail_squares(self, m):
        return float(self._tail_generic(m, 2))

    def describe(self):
        return {"kind": self.kind, "tau": self.tau, "d": self.d, "scale": self.scale}


@dataclass(frozen=True)
class ExponentialExperimentSpectrum(Spectrum):
    """``lambda_j = tau * exp(-tau * j / 4)``, the d = 1 simulation prior."""

    tau: float
    kind = "exponential_experiment"

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"invalid exponential spectrum tau={self.tau}")

    def _formula(self, j):
        return self.tau * np.exp(-self.tau * j / 4.0)

    def tail(self, m):
        q = math.exp(-self.tau / 4.0)
        return float(self.tau * q ** (m + 1) / (1.0 - q))

    def tail_squares(self, m):
        q = math.exp(-self.tau / 2.0)
        return float(self.tau**2 * q ** (m + 1) / (1.0 - q))

    def describe(self):
        return {"kind": self.kind, "tau": self.tau, "d": 1}


def eigenvalue(spectrum, j):
    """``lambda_j`` of ``spectrum``; ``j`` must be a positive integer."""
    return spectrum.eigenvalue(j)


def rescaling_tau(n, alpha, d=1):
    """Rescaling ``tau_n = n**(-1/(d + 2 alpha)) * log(n)`` for exponential priors."""
    if n < 2:
        raise DomainError(f"rescaling needs n >= 2, got n={n}")
    if not alpha > 0 or d < 1:
        raise DomainError(f"rescaling needs alpha > 0 and d >= 1, got alpha={alpha}, d={d}")
    return n ** (-1.0 / (d + 2.0 * alpha)) * math.log(n)


# --------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class FourierBasis:
    """Real Fourier basis on [-pi, pi], constant first then cos/sin pairs."""

    domain: tuple = DOMAIN
    sup_norm = SQRT2

    def eval(self, j, x):
        j = _check_index(j)
        x = _check_domain(x)
        return self.matrix(np.atleast_1d(x), j, start=j - 1)[:, 0].reshape(np.shape(x))

    def matrix(self, x, stop, start=0):
        """``n x (stop - start)`` matrix with entries ``phi_j(x_i)``, ``start < j <= stop``."""
        return self.columns(x, np.arange(start + 1, stop + 1))

    def columns(self, x, js):
        """Matrix of ``phi_j(x_i)`` for an arbitrary increasing index array ``js``."""
        x = np.asarray(x, dtype=float).ravel()
        js = np.asarray(js, dtype=int)
        out = np.empty((x.size, js.size))
        if js.size == 0:
            return out
        ell = js // 2
        const = js == 1
        even = js % 2 == 0
        odd = ~even & ~const
        out[:, const] = 1.0
        if even.any():
            out[:, even] = SQRT2 * np.cos(np.outer(x, ell[even]))
        if odd.any():
            out[:, odd] = SQRT2 * np.sin(np.outer(x, ell[odd]))
        return out


def basis_eval(basis, j, x):
    """Value of the ``j``-th basis function at ``x`` (domain-checked)."""
    return basis.eval(j, x)


# --------------------------------------------------------------------------
# kernel


def truncation_for(spectrum, tail_tol=1e-8, max_terms=16384):
    """Smallest J with ``tail(J) <= tail_tol * total``, capped at ``max_terms``."""
    target = tail_tol * spectrum.total()
    if spectrum.tail(max_terms) > target:
        return max_terms
    lo, hi = 0, max_terms
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if spectrum.tail(mid) <= target:
            hi = mid
        else:
            lo = mid
    return max(hi, 1)


@dataclass(frozen=True)
class SpectralKernel:
    """Truncated Mercer kernel ``sum_{j <= truncation} lambda_j phi_j(x) phi_j(y)``."""

    spectrum: Spectrum
    truncation: int
    basis: FourierBasis = field(default_factory=FourierBasis)

    def __post_init__(self):
        if self.truncation < 1:
            raise DomainError("truncation must be a positive integer")
        lam = self.spectrum.values(self.truncation)
        lam.setflags(write=False)
        object.__setattr__(self, "_lambdas", lam)

    @classmethod
    def from_spectrum(cls, spectrum, tail_tol=1e-8, max_terms=16384):
        return cls(spectrum, truncation_for(spectrum, tail_tol, max_terms))

    @property
    def lambdas(self):
        return self._lambdas

    @property
    def tail_mass(self):
        """Eigenvalue mass dropped by the truncation."""
        return self.spectrum.tail(self.truncation)

    def tail_after(self, m):
        """``sum_{m < j <= truncation} lambda_j``."""
        return float(self._lambdas[m:].sum())

    def features(self, x, m):
        """Design matrix ``Phi`` with ``Phi[i, j] = phi_{j+1}(x_i)``, ``j < m``."""
        return self.basis.matrix(x, m)

    def __call__(self, x, y):
        return kernel_eval(self, x, y)

    def _blocks(self, start):
        for lo in range(start, self.truncation, _CHUNK):
            hi = min(lo + _CHUNK, self.truncation)
            yield lo, hi, self._lambdas[lo:hi]

    def matrix(self, X, Y=None, start=0):
        """Kernel matrix, optionally keeping only terms ``j > start``."""
        X = _check_domain(np.atleast_1d(X))
        same = Y is None
        Y = X if same else _check_domain(np.atleast_1d(Y))
        K = np.zeros((X.size, Y.size))
        for lo, hi, lam in self._blocks(start):
            PX = self.basis.matrix(X, hi, lo)
            PY = PX if same else self.basis.matrix(Y, hi, lo)
            K += (PX * lam) @ PY.T
        if same:
            K = 0.5 * (K + K.T)
        return K

    def expand(self, X, C):
        """``Phi(X) @ C`` over the full truncation, built in column chunks."""
        X = _check_domain(np.atleast_1d(X))
        out = np.zeros((X.size, C.shape[1]))
        for lo, hi, _ in self._blocks(0):
            out += self.basis.matrix(X, hi, lo) @ C[lo:hi]
        return out

    def diag(self, X, start=0):
        """``k(x, x)`` for each point, optionally keeping only terms ``j > start``."""
        X = _check_domain(np.atleast_1d(X))
        out = np.zeros(X.size)
        for lo, hi, lam in self._blocks(start):
            out += (self.basis.matrix(X, hi, lo) ** 2) @ lam
        return out

    def describe(self):
        return {
            "spectrum": self.spectrum.describe(),
            "truncation": self.truncation,
            "tail_mass": self.tail_mass,
            "basis": "fourier",
        }


def kernel_eval(k, x, y):
    """Truncated Mercer series at a single pair of points."""
    x = float(_check_domain(x))
    y = float(_check_domain(y))
    px = k.basis.matrix(np.array([x]), k.truncation)[0]
    py = k.basis.matrix(np.array([y]), k.truncation)[0]
    # product is commutative elementwise, so k(x, y) == k(y, x) bit for bit
    return float(np.sum(k.lambdas * (px * py)))
