"""Kernel ridge regression view of the variational mean.

The variational mean ``x -> K_xu a`` minimises

    sum_i (y_i - f(x_i))^2 + sigma^2 ||f||_H^2

over the span of ``h_j = cov(f(.), u_j)``, where ``||sum a_j h_j||_H^2 = a' K_uu a``.
Everything here works from the raw blocks and shares no factorisation with
:mod:`posterior`, so it can serve as an independent check.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class KrrProblem:
    y: np.ndarray
    K_uu: np.ndarray
    K_fu: np.ndarray
    sigma: float

    @classmethod
    def from_blocks(cls, data, blocks):
        return cls(np.asarray(data.y, dtype=float), blocks.K_uu, blocks.K_fu, float(data.sigma))

    @property
    def m(self):
        return self.K_uu.shape[0]

    def hessian(self):
        """``2 (sigma^2 K_uu + K_uf K_fu)``."""
        H = 2.0 * (self.sigma**2 * self.K_uu + self.K_fu.T @ self.K_fu)
        return 0.5 * (H + H.T)


def rkhs_norm(problem, a):
    """``sqrt(a' K_uu a)``, the RKHS norm of ``sum_j a_j h_j``."""
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(max(a @ problem.K_uu @ a, 0.0)))


def krr_objective(problem, a):
    a = np.asarray(a, dtype=float)
    r = problem.y - problem.K_fu @ a
    return float(r @ r + problem.sigma**2 * (a @ problem.K_uu @ a))


def stationarity_residual(problem, a):
    """Relative norm of the score ``-K_uf y + (sigma^2 K_uu + K_uf K_fu) a``."""
    a = np.asarray(a, dtype=float)
    kuy = problem.K_fu.T @ problem.y
    score = -kuy + problem.sigma**2 * (problem.K_uu @ a) + problem.K_fu.T @ (problem.K_fu @ a)
    return float(np.linalg.norm(score) / (1.0 + np.linalg.norm(kuy)))


def hessian_min_eigenvalue(problem):
    return float(np.linalg.eigvalsh(problem.hessian())[0])


def perturbation_check(problem, a, scale=1e-3, count=100, seed=0):
    """Smallest ``objective(a + d) - objective(a)`` over random ``d`` with ``||d|| = scale``.

    A nonnegative result certifies ``a`` as a local minimum up to rounding.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    base = krr_objective(problem, a)
    D = rng.standard_normal((count, problem.m))
    D *= scale / np.linalg.norm(D, axis=1, keepdims=True)
    return min(krr_objective(problem, a + d) - base for d in D)


def coordinate_check(problem, a, step=1e-2):
    """Smallest objective increase over the ``2m`` moves ``a +- step e_j``."""
    base = krr_objective(problem, a)
    eye = np.eye(problem.m)
    return min(
        krr_objective(problem, a + s * step * eye[j]) - base
        for j in range(problem.m)
        for s in (1.0, -1.0)
    )
