"""Small SVD-based helpers implementing the rank policy."""
from __future__ import annotations

import numpy as np
import scipy.linalg


def singular_values(M: np.ndarray) -> np.ndarray:
    if M.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(M)


def numerical_rank(M: np.ndarray, rel_tol: float, scale: float | None = None) -> int:
    """Count singular values above ``rel_tol * max(sigma_max, scale)``.

    ``scale`` sets a floor for the reference magnitude; without it a matrix
    whose entries are all roundoff would still be judged full rank.
    """
    s = singular_values(M)
    if s.size == 0:
        return 0
    ref = s[0] if scale is None else max(s[0], scale)
    if ref == 0.0:
        return 0
    return int(np.sum(s > rel_tol * ref))


def null_space(M: np.ndarray, rel_tol: float, min_dim: int = 0, scale: float = 1.0) -> np.ndarray:
    """Orthonormal basis of the numerical right null space of ``M``.

    At least ``min_dim`` columns are returned (the weakest directions), which
    lets callers that already know ``M`` is singular absorb small threshold
    mismatches.
    """
    rows, cols = M.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=M.dtype)
    if rows == 0:
        return np.eye(cols, dtype=M.dtype)
    _, s, vh = scipy.linalg.svd(M, full_matrices=True)
    ref = max(s[0] if s.size else 0.0, scale)
    rank = int(np.sum(s > rel_tol * ref))
    k = max(cols - rank, min_dim)
    return vh[cols - k:].conj().T


def is_singular(M: np.ndarray, rel_tol: float) -> bool:
    s = singular_values(M)
    if s.size == 0:
        return False
    return bool(s[-1] <= rel_tol * s[0]) or s[0] == 0.0


def sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def inv_sqrt_psd(M: np.ndarray, floor: float) -> np.ndarray:
    """Symmetric inverse square root via eigendecomposition.

    Raises ``np.linalg.LinAlgError`` when an eigenvalue is below ``floor``;
    regularising here would corrupt the downstream equivalence tests.
    """
    if M.shape[0] == 0:
        return np.zeros_like(M)
    w, V = np.linalg.eigh(sym(M))
    if w.min() <= floor:
        raise np.linalg.LinAlgError(f"matrix not positive definite (min eigenvalue {w.min():.3e})")
    return (V / np.sqrt(w)) @ V.T


def min_eig_sym(M: np.ndarray) -> float:
    if M.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(sym(M)).min())
