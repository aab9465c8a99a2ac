"""Semi-random union-of-subspaces data: fixed subspaces, points drawn
uniformly on each subspace's unit sphere, isotropic Gaussian noise."""
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError

log = logging.getLogger("datagen")


@dataclass(frozen=True)
class SubspaceModel:
    ambient_dim: int
    bases: List[np.ndarray]

    def __post_init__(self):
        if not self.bases:
            raise ConfigError("a subspace model needs at least one subspace")
        for k, u in enumerate(self.bases):
            if u.ndim != 2 or u.shape[0] != self.ambient_dim:
                raise ConfigError(f"basis {k} has shape {u.shape}, expected ({self.ambient_dim}, d)")
            if not np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-10):
                raise ConfigError(f"basis {k} is not orthonormal")

    @property
    def dims(self) -> List[int]:
        return [u.shape[1] for u in self.bases]

    @property
    def num_subspaces(self) -> int:
        return len(self.bases)


@dataclass(frozen=True)
class DataSet:
    points: np.ndarray  # N x n, one point per row
    labels: Optional[np.ndarray] = None  # 1-based cluster ids
    noiseless: Optional[np.ndarray] = None
    sigma: float = 0.0

    def __post_init__(self):
        if self.points.ndim != 2:
            raise ConfigError(f"points must be N x n, got shape {self.points.shape}")
        if self.labels is not None and len(self.labels) != self.points.shape[0]:
            raise ConfigError(f"{len(self.labels)} labels for {self.points.shape[0]} points")
        if self.noiseless is not None and self.noiseless.shape != self.points.shape:
            raise ConfigError("noiseless points must match the shape of points")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]


def affinity(u_k: np.ndarray, u_l: np.ndarray) -> float:
    """``||U_k^T U_l||_F / sqrt(min(d_k, d_l))`` for orthonormal bases."""
    if u_k.shape[0] != u_l.shape[0]:
        raise ValueError(f"ambient dimension mismatch: {u_k.shape[0]} vs {u_l.shape[0]}")
    d = min(u_k.shape[1], u_l.shape[1])
    if d == 0:
        raise ValueError("affinity is undefined for a zero-dimensional subspace")
    # summing both orientations makes the value symmetric to the bit
    sq = 0.5 * (np.sum((u_k.T @ u_l) ** 2) + np.sum((u_l.T @ u_k) ** 2))
    return float(min(math.sqrt(sq / d), 1.0))


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal n x n matrix (QR of a Gaussian, sign-fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def make_equiaffinity_subspaces(n: int, d: int, num_subspaces: int, rho: float,
                                rng: np.random.Generator) -> SubspaceModel:
    """L subspaces of dimension d whose pairwise affinities all equal rho.

    Basis vector j of subspace k is ``cos(a) e_j + sin(a) f_k^(j)`` with
    ``cos(a)^2 = rho`` over d(L+1) orthonormal directions, followed by a
    seeded global rotation.
    """
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"rho must lie in [0, 1], got {rho}")
    if d < 1 or num_subspaces < 1:
        raise ConfigError("d and L must be >= 1")
    if n < d * (num_subspaces + 1):
        raise ConfigError(
            f"ambient dimension n={n} too small: the construction needs n >= d(L+1) = {d * (num_subspaces + 1)}"
        )
    cos_a = math.sqrt(rho)
    sin_a = math.sqrt(1.0 - rho)
    eye = np.eye(n)
    shared = eye[:, :d]
    rotation = random_rotation(n, rng)
    bases = []
    for k in range(num_subspaces):
        own = eye[:, d * (k + 1): d * (k + 2)]
        bases.append(rotation @ (cos_a * shared + sin_a * own))
    log.debug("built %d subspaces of dim %d in R^%d at rho=%.3f", num_subspaces, d, n, rho)
    return SubspaceModel(ambient_dim=n, bases=bases)


def sample_points(model: SubspaceModel, counts: Sequence[int], rng: np.random.Generator) -> DataSet:
    """Draw ``counts[k]`` unit-norm points uniformly from subspace k.

    Each cluster uses its own child stream of ``rng`` so clusters can be
    generated independently with the same result.
    """
    if len(counts) != model.num_subspaces:
        raise ConfigError(f"{len(counts)} counts for {model.num_subspaces} subspaces")
    if any(c <= 0 for c in counts):
        raise ConfigError("every cluster needs a positive point count")
    streams = rng.spawn(model.num_subspaces)
    blocks, labels = [], []
    for k, (u, count, stream) in enumerate(zip(model.bases, counts, streams), start=1):
        coef = stream.standard_normal((count, u.shape[1]))
        coef /= np.linalg.norm(coef, axis=1, keepdims=True)
        x = coef @ u.T
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        blocks.append(x)
        labels.append(np.full(count, k, dtype=np.int64))
    points = np.vstack(blocks)
    return DataSet(points=points, labels=np.concatenate(labels), noiseless=points.copy(), sigma=0.0)


def add_noise(ds: DataSet, sigma: float, rng: np.random.Generator) -> DataSet:
    """``y_i = x_i + e_i`` with ``e_i ~ N(0, (sigma^2 / n) I)``."""
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    clean = ds.noiseless if ds.noiseless is not None else ds.points
    if sigma == 0:
        return replace(ds, points=clean.copy(), noiseless=clean, sigma=0.0)
    n = clean.shape[1]
    noise = rng.standard_normal(clean.shape) * (sigma / math.sqrt(n))
    return replace(ds, points=clean + noise, noiseless=clean, sigma=float(sigma))


def generate(n: int, d: int, num_subspaces: int, rho: float, per_cluster: Sequence[int],
             sigma: float, rng: np.random.Generator) -> Tuple[SubspaceModel, DataSet]:
    """Model, sample and corrupt in one call (the sweep's unit of work)."""
    model = make_equiaffinity_subspaces(n, d, num_subspaces, rho, rng)
    ds = sample_points(model, per_cluster, rng)
    return model, add_noise(ds, sigma, rng)
