"""Dense linear algebra for Gaussian systems: Cholesky, log-determinants, Schur complements.

Everything works on plain float64 numpy arrays (row-major). Factorizations go
through LAPACK so the failing pivot index is available on non-PD input.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf

SYMMETRY_TOL = 1e-10
JITTER = 1e-8


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix fails a positive-definiteness requirement.

    ``pivot`` is the zero-based index of the first failing Cholesky pivot,
    or None when the failure was detected by another route.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


def _as_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def check_symmetric(m: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    m = _as_square(m)
    err = np.max(np.abs(m - m.T)) if m.size else 0.0
    if err > tol:
        raise ValueError(f"matrix is not symmetric (max asymmetry {err:.3e} > {tol:.0e})")
    return m


def cholesky(m: np.ndarray, *, jitter: bool = False) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == m.

    With ``jitter=True`` a single retry with ``JITTER`` added to the diagonal
    is attempted before giving up, for covariances that are PD only up to
    roundoff (near-singular interaction limits).
    """
    m = check_symmetric(m)
    sym = 0.5 * (m + m.T)
    c, info = dpotrf(sym, lower=1)
    if info == 0:
        return np.tril(c)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of Cholesky factorization")
    if jitter:
        c, info = dpotrf(sym + JITTER * np.eye(m.shape[0]), lower=1)
        if info == 0:
            return np.tril(c)
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite: Cholesky pivot {info - 1} failed",
        pivot=info - 1,
    )


def logdet(m: np.ndarray) -> float:
    """log det of a symmetric PD matrix via the Cholesky diagonal."""
    L = cholesky(m)
    return float(2.0 * np.sum(np.log(np.diag(L))))


def solve_psd(m: np.ndarray, b: np.ndarray, *, jitter: bool = False) -> np.ndarray:
    """Solve m @ x = b for symmetric PD m via its Cholesky factor."""
    L = cholesky(m, jitter=jitter)
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y, lower=False)


def schur_conditional(
    cov: np.ndarray,
    target_idx: np.ndarray | list[int],
    given_idx: np.ndarray | list[int],
) -> np.ndarray:
    """Conditional covariance of the target coordinates given the others.

    Returns ``cov[t,t] - cov[t,g] @ inv(cov[g,g]) @ cov[g,t]``. An empty given
    set returns the plain target block.
    """
    _, schur = conditional_moments(cov, target_idx, given_idx)
    return schur


def conditional_moments(
    cov: np.ndarray,
    target_idx: np.ndarray | list[int],
    given_idx: np.ndarray | list[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Regression coefficient matrix A and Schur complement for conditioning.

    The conditional law of x[target] given x[given] = g has mean ``A @ g``
    (for a zero-mean joint) and covariance equal to the returned Schur
    complement. ``A`` has shape (len(target), len(given)).
    """
    cov = check_symmetric(cov)
    t = np.asarray(target_idx, dtype=np.intp)
    g = np.asarray(given_idx, dtype=np.intp)
    if t.size and (t.min() < 0 or t.max() >= cov.shape[0]):
        raise ValueError("target indices out of bounds")
    if g.size and (g.min() < 0 or g.max() >= cov.shape[0]):
        raise ValueError("given indices out of bounds")
    if np.intersect1d(t, g).size:
        raise ValueError("target and given index sets overlap")
    c_tt = cov[np.ix_(t, t)]
    if g.size == 0:
        return np.zeros((t.size, 0)), c_tt.copy()
    c_tg = cov[np.ix_(t, g)]
    c_gg = cov[np.ix_(g, g)]
    coef = solve_psd(c_gg, c_tg.T).T
    schur = c_tt - coef @ c_tg.T
    return coef, 0.5 * (schur + schur.T)
