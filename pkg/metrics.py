"""Neighbor-recovery and clustering quality measures."""
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from gomp import GompTrace
from numerics import as_matrix, project
from spectral import ClusterLabels

log = logging.getLogger("metrics")

EXHAUSTIVE_CCR_LIMIT = 8


def _labels(values) -> np.ndarray:
    if isinstance(values, ClusterLabels):
        values = values.assignment
    return np.asarray(values)


def tnr(coef: np.ndarray, labels) -> float:
    """Share of nonzero coefficients linking two points of the same cluster.

    A matrix with no nonzeros has no wrong neighbors either; it scores 1.0
    and the case is logged.
    """
    labels = _labels(labels)
    if len(labels) != coef.shape[0]:
        raise ValueError(f"{len(labels)} labels for a {coef.shape[0]}-point coefficient matrix")
    nz_rows, nz_cols = np.nonzero(coef)
    if nz_rows.size == 0:
        log.warning("TNR of an empty coefficient matrix is vacuous; reporting 1.0")
        return 1.0
    return float(np.mean(labels[nz_rows] == labels[nz_cols]))


def anrn(coef: np.ndarray) -> float:
    """Average support size of the representation columns."""
    if coef.shape[1] == 0:
        return 0.0
    return float(np.count_nonzero(coef) / coef.shape[1])


def confusion_matrix(pred, truth) -> np.ndarray:
    pred, truth = _labels(pred), _labels(truth)
    _, p_idx = np.unique(pred, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    counts = np.zeros((p_idx.max() + 1, t_idx.max() + 1), dtype=np.int64)
    np.add.at(counts, (p_idx, t_idx), 1)
    return counts


def ccr(pred, truth) -> float:
    """Fraction of points correct under the best one-to-one cluster matching.

    Exhaustive over matchings when both sides have at most eight clusters,
    Hungarian assignment above that; unmatched clusters count as wrong.
    """
    pred, truth = _labels(pred), _labels(truth)
    if len(pred) != len(truth):
        raise ValueError(f"{len(pred)} predicted labels vs {len(truth)} true labels")
    if len(pred) == 0:
        return 1.0
    counts = confusion_matrix(pred, truth)
    rows, cols = counts.shape
    if max(rows, cols) <= EXHAUSTIVE_CCR_LIMIT:
        if rows <= cols:
            best = max(sum(counts[r, c] for r, c in enumerate(perm))
                       for perm in itertools.permutations(range(cols), rows))
        else:
            best = max(sum(counts[r, c] for c, r in enumerate(perm))
                       for perm in itertools.permutations(range(rows), cols))
    else:
        r_idx, c_idx = linear_sum_assignment(counts, maximize=True)
        best = counts[r_idx, c_idx].sum()
    return float(best / len(pred))


def aod(r, basis: np.ndarray) -> float:
    """Angle between ``r`` and the subspace spanned by orthonormal ``basis``."""
    r = np.asarray(r, dtype=np.float64)
    if not np.any(r):
        return 0.0
    par = project(r, basis)
    return math.atan2(float(np.linalg.norm(r - par)), float(np.linalg.norm(par)))


def per_neighbor_true_rate(traces: Sequence[GompTrace], labels) -> List[float]:
    """Rate at which the k-th selected neighbor shares the point's cluster.

    Entry k averages over the traces that selected at least k+1 neighbors,
    not over every regressed point: a regression that stopped early is
    absent from the later entries instead of counting as a miss.
    """
    labels = _labels(labels)
    hits: List[int] = []
    seen: List[int] = []
    for trace in traces:
        own = labels[trace.point]
        for k, j in enumerate(trace.selection_order()):
            if k == len(hits):
                hits.append(0)
                seen.append(0)
            hits[k] += int(labels[j] == own)
            seen[k] += 1
    return [h / s for h, s in zip(hits, seen)]


def mean_aod_per_index(traces: Sequence[GompTrace]) -> List[float]:
    """Average AoD of the residual that selected the k-th neighbor."""
    sums: List[float] = []
    seen: List[int] = []
    for trace in traces:
        for k, angle in enumerate(trace.selection_aods()):
            if k == len(sums):
                sums.append(0.0)
                seen.append(0)
            sums[k] += angle
            seen[k] += 1
    return [s / c for s, c in zip(sums, seen)]


def normalized_singular_values(points) -> np.ndarray:
    """Singular values of the point matrix over the largest one."""
    values = np.linalg.svd(as_matrix(points, "points"), compute_uv=False)
    if values.size == 0 or values[0] == 0:
        return np.zeros_like(values)
    return values / values[0]


def knee_dimension(values: Sequence[float], max_dim: Optional[int] = None) -> int:
    """Position of the largest relative drop ``values[k-1] / values[k]``."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return int(values.size)
    top = values.size - 1 if max_dim is None else min(max_dim, values.size - 1)
    head, tail = values[:top], values[1:top + 1]
    ratios = np.divide(head, tail, out=np.full_like(head, np.inf), where=tail > 0)
    return int(np.argmax(ratios)) + 1


@dataclass
class MetricsReport:
    anrn: float
    tnr: Optional[float] = None
    ccr: Optional[float] = None
    tnr_vacuous: bool = False
    per_neighbor_true_rate: List[float] = field(default_factory=list)
    mean_aod_per_index: List[float] = field(default_factory=list)

    def to_row(self) -> Dict[str, float]:
        """Scalar metrics only; unavailable ones are left out."""
        row = {k: v for k, v in asdict(self).items() if not isinstance(v, list) and v is not None}
        if self.tnr is None:
            row.pop("tnr_vacuous")
        return row


def metrics_report(coef: np.ndarray, pred: Optional[ClusterLabels] = None, truth=None,
                   traces: Optional[Sequence[GompTrace]] = None) -> MetricsReport:
    report = MetricsReport(anrn=anrn(coef))
    if truth is None:
        return report
    report.tnr = tnr(coef, truth)
    report.tnr_vacuous = not np.any(coef)
    if pred is not None:
        report.ccr = ccr(pred, truth)
    if traces:
        report.per_neighbor_true_rate = per_neighbor_true_rate(traces, truth)
        if all(t.initial_aod is not None for t in traces):
            report.mean_aod_per_index = mean_aod_per_index(traces)
    return report
