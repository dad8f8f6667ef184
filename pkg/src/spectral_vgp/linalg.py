"""Symmetric factorizations with a documented jitter fallback."""

import numpy as np
import scipy.linalg as sla

from .errors import NumericError

# ridge = JITTER_LEVELS[k] * trace(M) / dim(M), tried in order after a plain attempt
JITTER_LEVELS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def cholesky(M, name="matrix"):
    """Lower Cholesky factor of a symmetric matrix, adding jitter on failure.

    Returns ``(L, jitter)`` where ``jitter`` is the ridge actually added
    (0.0 when the plain factorization succeeded).
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros_like(M), 0.0
    if not np.all(np.isfinite(M)):
        raise NumericError(f"{name} has non-finite entries")
    try:
        return sla.cholesky(M, lower=True), 0.0
    except sla.LinAlgError:
        pass
    dim = M.shape[0]
    base = np.trace(M) / dim
    if not base > 0:
        base = 1.0
    eye = np.eye(dim)
    for level in JITTER_LEVELS:
        jitter = level * base
        try:
            return sla.cholesky(M + jitter * eye, lower=True), jitter
        except sla.LinAlgError:
            continue
    w = np.linalg.eigvalsh(M)
    raise NumericError(
        f"{name} ({dim}x{dim}) not positive definite after jitter "
        f"{JITTER_LEVELS[-1] * base:.3e}: eigenvalue range "
        f"[{w[0]:.3e}, {w[-1]:.3e}], condition {abs(w[-1]) / max(abs(w[0]), 1e-300):.3e}"
    )


def tri_solve(L, B, trans=False):
    """Solve ``L x = B`` (or ``L' x = B``) for lower-triangular ``L``."""
    if L.size == 0:
        return np.zeros((0,) + np.shape(B)[1:])
    return sla.solve_triangular(L, B, lower=True, trans="T" if trans else "N")


def sym_eigh(M, name="matrix", top=None):
    """Eigendecomposition sorted by decreasing eigenvalue.

    ``top`` keeps only the leading eigenpairs (computed directly, not sliced).
    Eigenvalues within ``-1e-12 * trace`` of zero are clamped to zero.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NumericError(f"{name} has non-finite entries")
    try:
        if top is None or top >= M.shape[0]:
            w, V = np.linalg.eigh(M)
        else:
            dim = M.shape[0]
            w, V = sla.eigh(M, subset_by_index=[dim - top, dim - 1])
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise NumericError(f"eigendecomposition of {name} failed: {exc}") from exc
    w = w[::-1]
    V = V[:, ::-1]
    tol = 1e-12 * max(abs(np.trace(M)), 1e-300)
    w = np.where((w < 0) & (w > -tol), 0.0, w)
    return w, V
