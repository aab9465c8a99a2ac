"""Normalized spectral clustering of a similarity graph."""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
from sklearn.cluster import KMeans

from errors import ConfigError, NumericalError

log = logging.getLogger("spectral")

KMEANS_RESTARTS = 20
KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class ClusterLabels:
    assignment: np.ndarray  # 1-based ids
    num_clusters: int
    inertia: float = 0.0


def _seed_of(rng: Union[int, np.random.Generator]) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**31 - 1))
    return int(rng)


def normalized_laplacian(sim: np.ndarray) -> np.ndarray:
    """``I - D^-1/2 G D^-1/2``; isolated vertices get a zero scaling."""
    deg = sim.sum(axis=1)
    scale = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=scale, where=deg > 0)
    lap = np.eye(sim.shape[0]) - scale[:, None] * sim * scale[None, :]
    return 0.5 * (lap + lap.T)


def _fix_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # first component above tol made positive
    for col in range(vectors.shape[1]):
        nz = np.flatnonzero(np.abs(vectors[:, col]) > tol)
        if nz.size and vectors[nz[0], col] < 0:
            vectors[:, col] = -vectors[:, col]
    return vectors


def spectral_embed(lap: np.ndarray, num_clusters: int) -> np.ndarray:
    """Row-normalized eigenvectors of the ``num_clusters`` smallest eigenvalues."""
    size = lap.shape[0]
    if not 1 <= num_clusters <= size:
        raise ConfigError(f"need 1 <= L <= N, got L={num_clusters}, N={size}")
    try:
        _, vectors = scipy.linalg.eigh(lap, subset_by_index=[0, num_clusters - 1])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    vectors = _fix_signs(vectors)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 1e-12)


def _compact(raw: np.ndarray) -> np.ndarray:
    """Renumber ids 1..K in order of first appearance."""
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inverse] + 1


def kmeans(points: np.ndarray, num_clusters: int, restarts: int = KMEANS_RESTARTS,
           rng: Union[int, np.random.Generator] = 0) -> ClusterLabels:
    """Lloyd's k-means from k-means++ starts, best of ``restarts`` runs."""
    size = points.shape[0]
    if not 1 <= num_clusters <= size:
        raise ConfigError(f"need 1 <= L <= N, got L={num_clusters}, N={size}")
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    if num_clusters == 1:
        centered = points - points.mean(axis=0)
        return ClusterLabels(np.ones(size, dtype=np.int64), 1, float(np.sum(centered ** 2)))
    model = KMeans(n_clusters=num_clusters, init="k-means++", n_init=restarts,
                   max_iter=KMEANS_MAX_ITER, algorithm="lloyd", random_state=_seed_of(rng))
    raw = model.fit_predict(points)
    labels = _compact(raw)
    found = int(labels.max())
    if found < num_clusters:
        log.warning("k-means found %d distinct clusters out of %d requested", found, num_clusters)
    return ClusterLabels(labels, found, float(model.inertia_))


def spectral_cluster(sim: np.ndarray, num_clusters: int, restarts: int = KMEANS_RESTARTS,
                     rng: Union[int, np.random.Generator] = 0) -> ClusterLabels:
    embedding = spectral_embed(normalized_laplacian(sim), num_clusters)
    return kmeans(embedding, num_clusters, restarts, rng)


def estimate_num_clusters(sim: np.ndarray, max_clusters: int) -> int:
    """k <= max_clusters with the largest eigengap ``lambda_{k+1} - lambda_k``."""
    size = sim.shape[0]
    if size == 1:
        return 1
    top = min(max_clusters, size - 1)
    if top < 1:
        raise ConfigError("max_clusters must be >= 1")
    values = scipy.linalg.eigvalsh(normalized_laplacian(sim), subset_by_index=[0, top])
    gaps = np.diff(values)
    return int(np.argmax(gaps)) + 1
