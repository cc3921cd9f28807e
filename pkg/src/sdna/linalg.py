"""Dense symmetric linear algebra on principal submatrices.

Matrices are plain ``numpy`` arrays of shape ``(n, n)``; subsets are sorted
``int64`` index arrays. ``M_S`` denotes the n x n matrix that agrees with ``M``
on the rows and columns in ``S`` and is zero elsewhere, and ``(M_S)^+`` its
inverse on the coordinate subspace spanned by ``S``.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import FactorizationError, InvalidSubsetError

# relative pivot threshold for block Cholesky factorizations
PIVOT_RTOL = 1e-12


def as_symmetric(M, atol: float = 1e-12) -> np.ndarray:
    """Validate ``M`` as a finite square symmetric matrix and return it as float."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > atol * scale:
        raise ValueError("matrix is not symmetric")
    return M


def as_subset(S, n: int) -> np.ndarray:
    """Return ``S`` as a strictly increasing int64 array of indices into ``range(n)``."""
    idx = np.asarray(S, dtype=np.int64).ravel()
    if idx.size == 0:
        raise InvalidSubsetError("subset is empty")
    if idx.min() < 0 or idx.max() >= n:
        raise InvalidSubsetError(f"subset {idx.tolist()} has indices outside [0, {n})")
    srt = np.unique(idx)
    if srt.size != idx.size:
        raise InvalidSubsetError(f"subset {idx.tolist()} has duplicate indices")
    return srt


def principal_submatrix(M, S) -> np.ndarray:
    """``M_S = I_S M I_S`` as a full n x n matrix."""
    M = np.asarray(M, dtype=float)
    S = as_subset(S, M.shape[0])
    out = np.zeros_like(M)
    out[np.ix_(S, S)] = M[np.ix_(S, S)]
    return out


def block_cholesky(M, S) -> np.ndarray:
    """Lower Cholesky factor of the compacted |S| x |S| block of ``M``.

    Raises FactorizationError when the block is indefinite or a pivot falls
    below ``PIVOT_RTOL`` times the largest diagonal entry of the block.
    """
    block = np.asarray(M, dtype=float)[np.ix_(S, S)]
    try:
        L = np.linalg.cholesky(block)
    except np.linalg.LinAlgError:
        raise FactorizationError(S) from None
    dmax = float(np.max(np.diag(block)))
    if dmax <= 0 or np.min(np.diag(L)) ** 2 < PIVOT_RTOL * dmax:
        raise FactorizationError(S)
    return L


def solve_block(M, S, rhs) -> np.ndarray:
    """Solve ``M[S, S] h = rhs`` in compacted coordinates (length |S|)."""
    L = block_cholesky(M, S)
    y = solve_triangular(L, rhs, lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)


def restricted_solve(M, S, g) -> np.ndarray:
    """Return ``h = (M_S)^+ g``: supported on ``S`` with ``M[S, S] h[S] = g[S]``."""
    M = np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float)
    S = as_subset(S, M.shape[0])
    h = np.zeros(M.shape[0])
    h[S] = solve_block(M, S, g[S])
    return h


def block_inverse(M, S) -> np.ndarray:
    """``(M_S)^+`` as a full n x n matrix."""
    M = np.asarray(M, dtype=float)
    S = as_subset(S, M.shape[0])
    L = block_cholesky(M, S)
    Linv = solve_triangular(L, np.eye(S.size), lower=True, check_finite=False)
    out = np.zeros_like(M)
    out[np.ix_(S, S)] = Linv.T @ Linv
    return out


def eigenvalues(M) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return np.linalg.eigvalsh(M)


def smallest_eigenvalue(M) -> float:
    return float(eigenvalues(M)[0])


def largest_eigenvalue(M) -> float:
    return float(eigenvalues(M)[-1])


def is_psd(M, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue of ``M`` is at least ``-tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return smallest_eigenvalue(M) >= -tol


def sym_sqrt(M) -> np.ndarray:
    """Symmetric square root of a PSD matrix (negative rounding noise clipped)."""
    w, V = np.linalg.eigh(np.asarray(M, dtype=float))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def symmetrize(M) -> np.ndarray:
    return 0.5 * (M + M.T)


def min_congruence_eigenvalue(Y_half, X) -> float:
    """``lambda_min(Y^{1/2} X Y^{1/2})`` given the symmetric root ``Y^{1/2}``."""
    return smallest_eigenvalue(symmetrize(Y_half @ X @ Y_half))


def min_generalized_eigenvalue(X, Y) -> float:
    """``lambda_min(X^{-1} Y)`` for ``X`` positive definite and ``Y`` PSD.

    Evaluated in the symmetric form ``lambda_min(Y^{1/2} X^{-1} Y^{1/2})``.
    """
    X = np.asarray(X, dtype=float)
    Yh = sym_sqrt(Y)
    return smallest_eigenvalue(symmetrize(Yh @ np.linalg.solve(X, Yh)))
