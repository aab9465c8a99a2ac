"""Symmetric similarity graph from the self-representation coefficients."""
import numpy as np


def check_coefficient_matrix(coef: np.ndarray, tol: float = 1e-9) -> None:
    """Square, zero diagonal, every nonzero column unit-norm."""
    if coef.ndim != 2 or coef.shape[0] != coef.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got shape {coef.shape}")
    if np.any(np.diag(coef) != 0):
        raise ValueError("coefficient matrix must have a zero diagonal")
    norms = np.linalg.norm(coef, axis=0)
    bad = (norms > 0) & (np.abs(norms - 1.0) > tol)
    if bad.any():
        raise ValueError(f"columns {np.flatnonzero(bad).tolist()} are not unit-norm")


def build_similarity(coef: np.ndarray) -> np.ndarray:
    """``g_ij = |c_ij| + |c_ji|`` with a zero diagonal; every weight is nonnegative."""
    if coef.ndim != 2 or coef.shape[0] != coef.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got shape {coef.shape}")
    mag = np.abs(coef)
    sim = mag + mag.T
    np.fill_diagonal(sim, 0.0)
    return sim
