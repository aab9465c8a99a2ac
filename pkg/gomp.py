"""Generalized orthogonal matching pursuit for self-expressive regression.

Each data point is regressed on the others: every iteration picks the p
unselected points with the largest absolute inner product against the
current residual, then re-projects the point onto the orthogonal
complement of everything selected so far. The loop stops either after a
fixed number of iterations or when the residual-norm ratio shows the
residual has become noise-like (ratio >= 1 - sqrt(p/n)).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from datagen import DataSet
from errors import ConfigError
from numerics import as_matrix, extend_basis, least_squares, project
from settings import RANK_TOL
from workers import parallel_map

log = logging.getLogger("gomp")

FIXED = "fixed"
RATIO = "ratio"

HALT_RATIO = "ratio_rule"
HALT_FIXED = "fixed_M"
HALT_FLOOR = "residual_floor"
HALT_SAFEGUARD = "safeguard"
HALT_EXHAUSTED = "candidates_exhausted"


@dataclass(frozen=True)
class StopPolicy:
    mode: str = RATIO
    p: int = 1
    iterations: Optional[int] = None  # M, fixed mode only
    max_iters_safeguard: Optional[int] = None  # None: ceil(min(n, N-1) / p)
    residual_floor: float = 1e-10  # relative to ||y_i||

    def __post_init__(self):
        if self.mode not in (FIXED, RATIO):
            raise ConfigError(f"stop mode must be '{FIXED}' or '{RATIO}', got {self.mode!r}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.mode == FIXED and (self.iterations is None or self.iterations < 1):
            raise ConfigError("fixed-iteration stopping needs M >= 1")
        if self.max_iters_safeguard is not None and self.max_iters_safeguard < 1:
            raise ConfigError("max_iters_safeguard must be >= 1")
        if self.residual_floor < 0:
            raise ConfigError("residual_floor must be >= 0")

    @classmethod
    def fixed(cls, iterations: int, p: int = 1) -> "StopPolicy":
        return cls(mode=FIXED, p=p, iterations=iterations)

    @classmethod
    def ratio(cls, p: int = 1) -> "StopPolicy":
        return cls(mode=RATIO, p=p)

    @classmethod
    def parse(cls, text: str, p: int) -> "StopPolicy":
        """``ratio`` or ``fixed:<M>`` as accepted by ``--stop``."""
        text = text.strip().lower()
        if text == RATIO:
            return cls.ratio(p)
        if text.startswith(FIXED + ":"):
            try:
                return cls.fixed(int(text.split(":", 1)[1]), p)
            except ValueError:
                pass
        raise ConfigError(f"--stop must be 'ratio' or 'fixed:<M>', got {text!r}")

    def describe(self) -> str:
        return f"fixed:{self.iterations}" if self.mode == FIXED else RATIO


@dataclass
class IterationRecord:
    selected: Tuple[int, ...]  # batch T_m, descending |<y_j, r_{m-1}>|
    residual_norm: float  # ||r_m||
    step_norm: float  # ||r_{m-1} - r_m||
    parallel_norm: Optional[float] = None
    perpendicular_norm: Optional[float] = None
    aod: Optional[float] = None


@dataclass
class GompTrace:
    point: int
    initial_norm: float  # ||r_0|| = ||y_i||
    initial_aod: Optional[float] = None
    records: List[IterationRecord] = field(default_factory=list)
    halted_by: str = ""
    discarded_last_batch: bool = False
    first_batch_kept: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    def residual_norms(self) -> List[float]:
        """``||r_0||, ||r_1||, ...`` over every computed iteration."""
        return [self.initial_norm] + [rec.residual_norm for rec in self.records]

    def kept_records(self) -> List[IterationRecord]:
        return self.records[:-1] if self.discarded_last_batch else self.records

    def selection_order(self) -> List[int]:
        """Kept neighbors, iteration-major, by descending inner product."""
        return [j for rec in self.kept_records() for j in rec.selected]

    def selection_aods(self) -> List[float]:
        """AoD of the residual that selected each kept neighbor."""
        if self.initial_aod is None:
            raise ValueError("trace was recorded without a ground-truth basis")
        before = [self.initial_aod] + [rec.aod for rec in self.records]
        return [before[m] for m, rec in enumerate(self.kept_records()) for _ in rec.selected]


@dataclass
class SparseRep:
    support: Tuple[int, ...]
    coeffs: np.ndarray
    normalized_full: np.ndarray


def stopping_check(r_prev_norm: float, r_curr_norm: float, p: int, n: int) -> bool:
    """True when ``||r_m|| / ||r_{m-1}|| >= 1 - sqrt(p/n)`` (halt)."""
    if not 1 <= p <= n:
        raise ConfigError(f"need 1 <= p <= n, got p={p}, n={n}")
    if r_prev_norm <= 0:
        return True
    return r_curr_norm / r_prev_norm >= 1.0 - math.sqrt(p / n)


def stopping_threshold_equiv(p: int, n: int) -> float:
    s = math.sqrt(p / n)
    return math.sqrt(max(2.0 * s - s * s, 0.0))


def stopping_check_equiv(r_tilde_norm: float, p: int, n: int) -> bool:
    """Same rule on the normalized step ``||r_{m-1} - r_m|| / ||r_{m-1}||``."""
    if not 1 <= p <= n:
        raise ConfigError(f"need 1 <= p <= n, got p={p}, n={n}")
    return r_tilde_norm <= stopping_threshold_equiv(p, n)


def normalize_points(points: np.ndarray) -> np.ndarray:
    """Unit-normalize every row; zero rows stay zero."""
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    return np.divide(points, norms, out=np.zeros_like(points), where=norms > 0)


def _aod_split(r: np.ndarray, truth_basis: np.ndarray) -> Tuple[float, float, float]:
    par = project(r, truth_basis)
    par_norm = float(np.linalg.norm(par))
    perp_norm = float(np.linalg.norm(r - par))
    return par_norm, perp_norm, math.atan2(perp_norm, par_norm)


def _top_candidates(scores: np.ndarray, candidates: np.ndarray, p: int) -> np.ndarray:
    # descending score, lowest index first among ties
    order = np.lexsort((candidates, -scores))
    return candidates[order[:p]]


def _points_of(y) -> np.ndarray:
    return y.points if isinstance(y, DataSet) else as_matrix(y, "points")


def gomp_select(y, i: int, policy: StopPolicy, truth_basis: Optional[np.ndarray] = None,
                rank_tol: float = RANK_TOL) -> Tuple[SparseRep, GompTrace]:
    """Regress point ``i`` on the remaining points of ``y`` (DataSet or N x n array)."""
    points = _points_of(y)
    size, n = points.shape
    if size < 2:
        raise ConfigError("regression needs at least two points")
    if not 0 <= i < size:
        raise IndexError(f"point index {i} out of range for {size} points")
    p = policy.p
    target = points[i]
    target_norm = float(np.linalg.norm(target))
    floor = policy.residual_floor * target_norm
    safeguard = policy.max_iters_safeguard or math.ceil(min(n, size - 1) / p)

    trace = GompTrace(point=i, initial_norm=target_norm)
    if truth_basis is not None:
        trace.initial_aod = _aod_split(target, truth_basis)[2] if target_norm > 0 else 0.0

    available = np.ones(size, dtype=bool)
    available[i] = False
    basis = np.zeros((n, 0))
    residual = target.copy()
    residual_norm = target_norm

    if target_norm == 0:
        trace.halted_by = HALT_FLOOR
    while not trace.halted_by:
        candidates = np.flatnonzero(available)
        scores = np.abs(points[candidates] @ residual)
        batch = _top_candidates(scores, candidates, p)
        available[batch] = False

        basis = extend_basis(basis, points[batch].T, rank_tol)
        new_residual = target - project(target, basis)
        new_norm = float(np.linalg.norm(new_residual))
        record = IterationRecord(
            selected=tuple(int(j) for j in batch),
            residual_norm=new_norm,
            step_norm=float(np.linalg.norm(residual - new_residual)),
        )
        if truth_basis is not None:
            if new_norm > 0:
                record.parallel_norm, record.perpendicular_norm, record.aod = _aod_split(new_residual, truth_basis)
            else:
                record.parallel_norm, record.perpendicular_norm, record.aod = 0.0, 0.0, 0.0
        trace.records.append(record)

        m = trace.iterations
        ratio_halt = policy.mode == RATIO and stopping_check(residual_norm, new_norm, min(p, n), n)
        if ratio_halt and m > 1:
            trace.halted_by = HALT_RATIO
            trace.discarded_last_batch = True
        elif ratio_halt:
            # an empty support would leave the point isolated in the graph
            trace.halted_by = HALT_RATIO
            trace.first_batch_kept = True
            log.warning("point %d: stopping rule fired on the first batch; keeping it", i)
        elif new_norm <= floor:
            trace.halted_by = HALT_FLOOR
        elif len(batch) < p or not available.any():
            trace.halted_by = HALT_EXHAUSTED
        elif policy.mode == FIXED and m >= policy.iterations:
            trace.halted_by = HALT_FIXED
        elif m >= safeguard:
            trace.halted_by = HALT_SAFEGUARD
        residual, residual_norm = new_residual, new_norm

    support = tuple(trace.selection_order())
    full = np.zeros(size)
    coeffs = np.zeros(0)
    if support:
        coeffs = least_squares(points[list(support)].T, target, rank_tol)
        full[list(support)] = coeffs
        norm = np.linalg.norm(full)
        if norm > 0:
            full /= norm
    log.debug("point %d: %d iterations, %d neighbors, halted by %s",
              i, trace.iterations, len(support), trace.halted_by)
    return SparseRep(support=support, coeffs=coeffs, normalized_full=full), trace


def run_regressions(y, policy: StopPolicy, threads: int = 1,
                    truth_bases: Optional[Sequence[np.ndarray]] = None,
                    indices: Optional[Sequence[int]] = None) -> List[Tuple[SparseRep, GompTrace]]:
    """``gomp_select`` for every point (or ``indices``), in index order.

    ``truth_bases[i]`` is the ground-truth basis of point i when AoD
    instrumentation is wanted.
    """
    points = _points_of(y)
    if indices is None:
        indices = range(points.shape[0])

    def _one(i: int) -> Tuple[SparseRep, GompTrace]:
        basis = truth_bases[i] if truth_bases is not None else None
        return gomp_select(points, i, policy, basis)

    return parallel_map(_one, indices, threads)


def sparse_representation(y, policy: StopPolicy, threads: int = 1, normalize: bool = False) -> np.ndarray:
    """N x N coefficient matrix; column i is the unit-norm representation of point i."""
    points = _points_of(y)
    if normalize:
        points = normalize_points(points)
    size = points.shape[0]
    coef = np.zeros((size, size))
    for i, (rep, _) in enumerate(run_regressions(points, policy, threads)):
        coef[:, i] = rep.normalized_full
    return coef


def truth_bases_for(labels: Sequence[int], bases: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Per-point ground-truth basis from 1-based labels."""
    return [bases[int(k) - 1] for k in labels]
