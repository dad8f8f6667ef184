"""Inducing-variable strategies and their prior covariance blocks.

Each strategy yields ``K_uu`` (m x m), ``K_fu`` (n x m) and a cross-covariance
map ``x -> K_xu``. Four strategies are supported: population spectral
features, sample spectral features, equispaced inducing points and inducing
points drawn from an m-DPP over the design.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
import math
from typing import Optional

import numpy as np

from .errors import ConfigError
from .linalg import sym_eigh


class Strategy(str, Enum):
    POPULATION_SPECTRAL = "population_spectral"
    SAMPLE_SPECTRAL = "sample_spectral"
    EQUIDISTANT = "equidistant"
    MDPP = "mdpp"

    @property
    def is_point_method(self):
        return self in (Strategy.EQUIDISTANT, Strategy.MDPP)


@dataclass(frozen=True, eq=False)
class InducingBlocks:
    strategy: Strategy
    K_uu: np.ndarray
    K_fu: np.ndarray
    kernel: object
    points: Optional[np.ndarray] = None
    indices: Optional[np.ndarray] = None
    eigvals: Optional[np.ndarray] = None
    eigvecs: Optional[np.ndarray] = None
    design: Optional[np.ndarray] = None

    @property
    def m(self):
        return self.K_uu.shape[0]

    def k_xu(self, x):
        """Cross covariance ``cov(f(x_i), u_j)`` as a ``len(x) x m`` matrix."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.strategy is Strategy.POPULATION_SPECTRAL:
            return self.kernel.features(x, self.m) * self.kernel.lambdas[: self.m]
        if self.strategy is Strategy.SAMPLE_SPECTRAL:
            # K(x, design) V through the basis, avoiding the len(x) x n kernel matrix
            return self.kernel.expand(x, self._coefficients)
        return self.kernel.matrix(x, self.points)

    def coefficient_map(self):
        """``C`` with ``K_xu = Phi(x) C`` over the kernel's truncated basis.

        Basis coefficients of any ``x -> K_xu a`` are then ``C a``.
        """
        return self._coefficients

    @cached_property
    def _coefficients(self):
        k = self.kernel
        lam = k.lambdas[:, None]
        if self.strategy is Strategy.POPULATION_SPECTRAL:
            C = np.zeros((k.truncation, self.m))
            C[np.arange(self.m), np.arange(self.m)] = k.lambdas[: self.m]
            return C
        if self.strategy is Strategy.SAMPLE_SPECTRAL:
            C = np.empty((k.truncation, self.m))
            for lo in range(0, k.truncation, 2048):
                hi = min(lo + 2048, k.truncation)
                C[lo:hi] = lam[lo:hi] * (k.basis.matrix(self.design, hi, lo).T @ self.eigvecs)
            return C
        return lam * k.basis.matrix(self.points, k.truncation).T

    def metadata(self):
        out = {"strategy": self.strategy.value, "m": self.m}
        if self.points is not None:
            out["points"] = [float(v) for v in self.points]
        if self.indices is not None:
            out["indices"] = [int(i) for i in self.indices]
        return out


def population_spectral_blocks(kernel, data, m):
    """Blocks for ``u_j = <f, phi_j>``: ``K_uu = Lambda``, ``K_fu = Phi Lambda``."""
    if m > kernel.truncation:
        raise ConfigError(f"m={m} exceeds kernel truncation {kernel.truncation}")
    if m < 1:
        raise ConfigError("m must be at least 1")
    lam = kernel.lambdas[:m]
    Phi = kernel.features(data.x, m)
    return InducingBlocks(Strategy.POPULATION_SPECTRAL, np.diag(lam), Phi * lam, kernel)


def sample_spectral_blocks(kernel, data, m, K_ff=None):
    """Blocks for ``u_j = v_j' f`` with ``(mu_j, v_j)`` the top eigenpairs of ``K_ff``."""
    if not 1 <= m <= data.n:
        raise ConfigError(f"sample spectral features need 1 <= m <= n, got m={m}, n={data.n}")
    if K_ff is None:
        K_ff = kernel.matrix(data.x)
    w, V = sym_eigh(K_ff, "K_ff", top=m)
    mu = w[:m]
    V = np.ascontiguousarray(V[:, :m])
    return InducingBlocks(
        Strategy.SAMPLE_SPECTRAL,
        np.diag(mu),
        V * mu,
        kernel,
        eigvals=mu,
        eigvecs=V,
        design=data.x,
    )


def equidistant_points(m):
    """Cell midpoints ``-pi + (j - 1/2) 2 pi / m``, ``j = 1..m``."""
    if m < 1:
        raise ConfigError("m must be at least 1")
    return -math.pi + (np.arange(1, m + 1) - 0.5) * (2 * math.pi / m)


def point_blocks(kernel, data, z, strategy=Strategy.EQUIDISTANT, indices=None):
    """Blocks for ``u_j = f(z_j)``."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 1:
        raise ConfigError("need at least one inducing point")
    gaps = np.diff(np.sort(z))
    if gaps.size and gaps.min() <= 1e-12:
        raise ConfigError("inducing points must be pairwise distinct (singular K_uu)")
    return InducingBlocks(
        Strategy(strategy),
        kernel.matrix(z),
        kernel.matrix(data.x, z),
        kernel,
        points=z,
        indices=None if indices is None else np.asarray(indices),
    )


# --------------------------------------------------------------------------
# m-DPP


def elementary_symmetric(lam, k):
    """Table ``E[l, j] = e_l(lam_1, ..., lam_j)`` for ``l <= k``, ``j <= len(lam)``."""
    N = lam.size
    E = np.zeros((k + 1, N + 1))
    E[0, :] = 1.0
    for j in range(1, N + 1):
        E[1:, j] = E[1:, j - 1] + lam[j - 1] * E[:-1, j - 1]
    return E


class MDppSampler:
    """Exact sampler for the fixed-size DPP with L-ensemble kernel ``L``.

    The eigendecomposition is computed once; each :meth:`sample` call then
    picks ``m`` eigenvectors through the elementary-symmetric-polynomial
    recurrence and draws ``m`` distinct indices from the resulting
    projection DPP.
    """

    def __init__(self, L):
        L = np.asarray(L, dtype=float)
        w, V = sym_eigh(L, "DPP kernel")
        tol = 1e-12 * max(np.trace(L), 1e-300)
        keep = w > tol
        self.n = L.shape[0]
        self.rank = int(keep.sum())
        self.eigvals = np.where(keep, w, 0.0)
        self.eigvecs = V
        self._tables = {}

    def _table(self, m):
        if m not in self._tables:
            lam = self.eigvals[: self.rank]
            # the m-DPP is invariant to rescaling L; normalise to keep E finite
            lam = lam / lam[m - 1]
            self._tables[m] = (lam, elementary_symmetric(lam, m))
        return self._tables[m]

    def sample(self, m, rng):
        if m > self.rank:
            raise ConfigError(
                f"m={m} exceeds effective rank {self.rank} of the DPP kernel (eigenvalues > 1e-12 tr)"
            )
        if m == self.n:
            return np.arange(self.n)
        lam, E = self._table(m)
        chosen = []
        rem = m
        for i in range(self.rank, 0, -1):
            if rem == 0:
                break
            if i == rem:
                marg = 1.0
            else:
                marg = lam[i - 1] * E[rem - 1, i - 1] / E[rem, i]
            if rng.random() < marg:
                chosen.append(i - 1)
                rem -= 1
        V = self.eigvecs[:, chosen]
        picks = []
        for _ in range(m):
            cdf = np.cumsum(np.sum(V**2, axis=1))
            i = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), self.n - 1)
            picks.append(i)
            j = int(np.argmax(np.abs(V[i])))
            Vj = V[:, j]
            V = np.delete(V, j, axis=1)
            if V.shape[1] == 0:
                break
            V = V - np.outer(Vj, V[i] / Vj[i])
            V, _ = np.linalg.qr(V)
        return np.sort(np.array(picks))


def mdpp_sample(L, m, seed):
    """Exact m-DPP sample of ``m`` distinct indices, deterministic in ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return MDppSampler(L).sample(m, rng)


# --------------------------------------------------------------------------


def build_blocks(strategy, kernel, data, m, seed=0, K_ff=None):
    """Dispatch to the block constructor for ``strategy``.

    ``seed`` drives the m-DPP draw; ``K_ff`` may be passed to avoid recomputing
    the design kernel matrix.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.POPULATION_SPECTRAL:
        return population_spectral_blocks(kernel, data, m)
    if strategy is Strategy.SAMPLE_SPECTRAL:
        return sample_spectral_blocks(kernel, data, m, K_ff)
    if strategy is Strategy.EQUIDISTANT:
        return point_blocks(kernel, data, equidistant_points(m))
    if K_ff is None:
        K_ff = kernel.matrix(data.x)
    idx = mdpp_sample(K_ff, m, seed)
    return point_blocks(kernel, data, data.x[idx], Strategy.MDPP, indices=idx)
