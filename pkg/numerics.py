"""Dense linear-algebra primitives shared by every other module.

All subspace work goes through explicitly orthonormalized bases: the
regression relies on its residual being exactly orthogonal to the selected
points, which normal equations would not guarantee.
"""
import numpy as np
import scipy.linalg

from errors import NumericalError
from settings import RANK_TOL


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains non-finite entries")
    return arr


def orthonormal_basis(a, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the numerical column space of ``a``.

    Uses column-pivoted QR; a column is kept while ``|R_kk|`` stays above
    ``rank_tol * |R_00|``. Columns are signed so that ``diag(R) >= 0``,
    which makes an already orthonormal input come back unchanged.
    """
    a = as_matrix(a)
    if a.shape[1] == 0:
        raise ValueError("orthonormal_basis needs at least one column")
    if rank_tol <= 0:
        raise ValueError("rank_tol must be > 0")
    rows = a.shape[0]
    if not np.any(a):
        return np.zeros((rows, 0))
    q, r, _ = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diag > rank_tol * diag[0]))
    q = q[:, :rank]
    signs = np.where(np.diag(r)[:rank] < 0, -1.0, 1.0)
    return q * signs


def extend_basis(q: np.ndarray, a, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Append to ``q`` an orthonormal basis of span(a) minus span(q).

    Two passes of block Gram-Schmidt keep the new columns orthogonal to
    ``q`` to working precision.
    """
    a = as_matrix(a)
    if q.shape[1] == 0:
        return orthonormal_basis(a, rank_tol)
    if q.shape[0] != a.shape[0]:
        raise ValueError(f"row mismatch: basis has {q.shape[0]}, block has {a.shape[0]}")
    # relative to the block itself, so scaling the data never changes the rank decision
    scale = np.linalg.norm(a, axis=0).max()
    if scale == 0:
        return q
    rest = a - q @ (q.T @ a)
    rest -= q @ (q.T @ rest)
    if np.linalg.norm(rest, axis=0).max() <= rank_tol * scale:
        return q
    new = orthonormal_basis(rest, rank_tol)
    keep = np.linalg.norm(new.T @ rest, axis=1) > rank_tol * scale
    return np.hstack([q, new[:, keep]])


def project(v, q: np.ndarray) -> np.ndarray:
    """Orthogonal projection ``Q (Q^T v)`` onto the span of orthonormal ``q``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"v must be a vector, got shape {v.shape}")
    if q.ndim != 2 or q.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: v has {v.shape[0]} entries, Q has shape {q.shape}")
    return q @ (q.T @ v)


def least_squares(a, b, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Minimum-norm minimizer of ``||a c - b||`` (SVD-based LAPACK gelsd)."""
    a = as_matrix(a)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A is {a.shape}, b has shape {b.shape}")
    c, _, _, _ = scipy.linalg.lstsq(a, b, cond=rank_tol, lapack_driver="gelsd")
    return c
