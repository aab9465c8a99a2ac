"""Probability lower bounds for greedy neighbor recovery and halting.

Every bound has the shape ``1 - (sum of positive loss terms)``. Each loss
term is a product of powers and is evaluated in log space, so huge data
sizes neither overflow nor lose the tiny terms. Values are reported raw:
a result <= 0 is flagged vacuous instead of being clamped.

Conventions:
  * ``log`` is the natural logarithm throughout.
  * ``(x / 0) ** 0 == 1``: the combinatorial factor at k = 1 (and q = 0 or 1).
  * The neighbor-count term carries the separation slack tau, i.e.
    ``(sqrt(2/pi) * tau) ** (|Y_L| - d_L - k)``.
  * ``c_const`` is the unknown positive constant of the concentration step;
    it only enters through ``(4 + 2c) / N^2``.
"""
import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from errors import ConfigError

log = logging.getLogger("bounds")

ENUMERATION_LIMIT = 10**7


@dataclass(frozen=True)
class BoundParams:
    n: int
    N: int
    cluster_size: int
    d_L: int
    sigma: float
    tau: float
    p: int = 1
    M: int = 1
    c_const: float = 1.0
    affinities: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        for name in ("n", "N", "cluster_size", "d_L", "p", "M"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.N < 2:
            raise ConfigError("N must be >= 2 (the bounds divide by log N)")
        if self.cluster_size > self.N:
            raise ConfigError(f"cluster_size={self.cluster_size} exceeds N={self.N}")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in the open interval (0, 1), got {self.tau}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.c_const <= 0:
            raise ConfigError(f"c_const must be > 0, got {self.c_const}")
        if self.affinities is not None and any(not 0.0 <= a <= 1.0 for a in self.affinities):
            raise ConfigError("affinities must lie in [0, 1]")


@dataclass(frozen=True)
class BoundResult:
    value: float

    @property
    def vacuous(self) -> bool:
        return not self.value > 0


def _exp(log_value: float) -> float:
    if log_value == -math.inf:
        return 0.0
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _log_power(log_base: float, exponent: float) -> float:
    """log of ``base ** exponent`` given log(base); ``x ** 0 == 1`` for any x."""
    if exponent == 0:
        return 0.0
    if log_base == -math.inf:
        return -math.inf if exponent > 0 else math.inf
    return exponent * log_base


def _log_ratio_power(numerator: float, denominator: float, exponent: float) -> float:
    """log of ``(numerator / denominator) ** exponent`` with ``(x/0) ** 0 == 1``."""
    if exponent == 0:
        return 0.0
    return _log_power(_log(numerator) - _log(denominator), exponent)


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d: ``pi^(d/2) / Gamma(d/2 + 1)``."""
    return _exp(log_unit_ball_volume(d))


def log_unit_ball_volume(d: int) -> float:
    if d < 0:
        raise ConfigError(f"ball dimension must be >= 0, got {d}")
    return 0.5 * d * math.log(math.pi) - float(gammaln(0.5 * d + 1.0))


def _log_volume_term(dim: int, sigma: float) -> float:
    """log of ``v(dim) * (sigma / sqrt(pi)) ** dim``."""
    if dim <= 0:
        raise ConfigError(f"volume term needs a positive dimension, got {dim}")
    return log_unit_ball_volume(dim) + _log_power(_log(sigma) - 0.5 * math.log(math.pi), dim)


def _union(params: BoundParams) -> float:
    """``N e^{-n/8}``."""
    return _exp(math.log(params.N) - params.n / 8.0)


def _log_n_exponent(params: BoundParams) -> float:
    """log of ``N ** (8 log N / d_L)``."""
    log_n = math.log(params.N)
    return 8.0 * log_n * log_n / params.d_L


def _log_false_term(params: BoundParams, k: int) -> float:
    """log of ``(2e(N - |Y_L|) / ((p - k + 1) N^{8 log N / d_L})) ** (p - k + 1)``."""
    power = params.p - k + 1
    log_base = _log(2.0 * math.e * (params.N - params.cluster_size)) - math.log(power) - _log_n_exponent(params)
    return _log_power(log_base, power)


def _log_true_term(params: BoundParams, k: int) -> float:
    """log of ``(sqrt(2/pi) tau) ** (|Y_L| - d_L - k) * (e(|Y_L| - 1) / (k - 1)) ** (k - 1)``."""
    gauss = _log_power(0.5 * math.log(2.0 / math.pi) + math.log(params.tau),
                       params.cluster_size - params.d_L - k)
    combinatorial = _log_ratio_power(math.e * (params.cluster_size - 1), k - 1, k - 1)
    return gauss + combinatorial


def _tail(params: BoundParams) -> float:
    """``(4 + 2c) / N^2``."""
    return (4.0 + 2.0 * params.c_const) / params.N ** 2


def j_term(k: int, params: BoundParams) -> float:
    """Per-iteration loss for recovering at least k true neighbors of p.

    The neighbor-count summand only appears for k > 0.
    """
    if not 0 <= k <= params.p:
        raise ConfigError(f"k must lie in [0, p={params.p}], got {k}")
    value = _exp(_log_false_term(params, k))
    if k > 0:
        value += _exp(_log_true_term(params, k))
    return value


def _check_iterations(params: BoundParams, iterations: int) -> None:
    limit = math.ceil(params.d_L / params.p)
    if iterations < 1 or iterations > limit:
        raise ConfigError(f"M must lie in [1, ceil(d_L/p) = {limit}], got {iterations}")
    if params.d_L - params.p * (iterations - 1) <= 0:
        raise ConfigError("d_L - p(M-1) must be positive")


def iteration_bound(params: BoundParams, k_seq: Sequence[int]) -> BoundResult:
    """Probability that iteration m recovers at least ``k_seq[m]`` true neighbors, all m."""
    iterations = len(k_seq)
    _check_iterations(params, iterations)
    if any(not 0 <= k <= params.p for k in k_seq):
        raise ConfigError(f"every k_m must lie in [0, p={params.p}], got {list(k_seq)}")
    loss = _union(params)
    loss += _exp(_log_volume_term(params.d_L - params.p * (iterations - 1), params.sigma))
    tail = _tail(params)
    for k in k_seq:
        if k > 0:
            loss += j_term(k, params) + tail
    return _result(1.0 - loss, "iteration")


def omp_specialization_bound(params: BoundParams) -> BoundResult:
    """The iteration bound written out for p = 1 and one true neighbor per iteration."""
    if params.p != 1:
        raise ConfigError("the single-neighbor specialization needs p = 1")
    _check_iterations(params, params.M)
    big_m = params.M
    loss = _union(params)
    loss += _exp(_log_volume_term(params.d_L - (big_m - 1), params.sigma))
    bracket = _exp(_log(2.0 * math.e * (params.N - params.cluster_size)) - _log_n_exponent(params))
    bracket += _exp(_log_power(0.5 * math.log(2.0 / math.pi) + math.log(params.tau),
                               params.cluster_size - params.d_L - 1))
    bracket += _tail(params)
    return _result(1.0 - loss - big_m * bracket, "p=1 specialization")


def optimal_k_sequence(k_t: int, iterations: int, p: int) -> List[int]:
    """Balanced split of k_t over M iterations: r copies of q+1, then M-r copies of q."""
    if iterations < 1 or p < 1:
        raise ConfigError("M and p must be >= 1")
    if not 0 <= k_t <= p * iterations:
        raise ConfigError(f"k_t must lie in [0, pM = {p * iterations}], got {k_t}")
    q, r = divmod(k_t, iterations)
    return [q + 1] * r + [q] * (iterations - r)


def global_bound(params: BoundParams, k_t: int) -> BoundResult:
    """Probability of at least k_t true neighbors in total over M iterations."""
    big_m, p = params.M, params.p
    _check_iterations(params, big_m)
    if not 0 <= k_t <= p * big_m:
        raise ConfigError(f"k_t must lie in [0, pM = {p * big_m}], got {k_t}")
    q, r = divmod(k_t, big_m)
    log_tau = 0.5 * math.log(2.0 / math.pi) + math.log(params.tau)
    log_scale = _log_n_exponent(params)
    log_false_base = _log(2.0 * math.e * (params.N - params.cluster_size))
    tail = _tail(params)

    loss = _union(params)
    loss += _exp(_log_volume_term(params.d_L - p * (big_m - 1), params.sigma))
    if r > 0:
        upper = _exp(_log_power(log_false_base - math.log(p - q) - log_scale, p - q))
        upper += _exp(_log_power(log_tau, params.cluster_size - params.d_L - q - 1)
                      + _log_ratio_power(math.e * (params.cluster_size - 1), q, q))
        loss += r * (upper + tail)
    if q > 0:
        lower = _exp(_log_power(log_false_base - math.log(p - q + 1) - log_scale, p - q + 1))
        lower += _exp(_log_power(log_tau, params.cluster_size - params.d_L - q)
                      + _log_ratio_power(math.e * (params.cluster_size - 1), q - 1, q - 1))
        loss += (big_m - r) * (lower + tail)
    return _result(1.0 - loss, "global")


def _check_comparison(params: BoundParams, k: int) -> None:
    if not 1 < k <= params.p:
        raise ConfigError(f"comparison bounds need 1 < k <= p = {params.p}, got {k}")
    if params.p * params.M > params.d_L:
        raise ConfigError(f"comparison bounds need pM <= d_L, got pM = {params.p * params.M}")


def gomp_comparison_bound(params: BoundParams, k: int) -> BoundResult:
    """Multi-neighbor bound for k true out of p per iteration over M iterations."""
    _check_comparison(params, k)
    big_m, p = params.M, params.p
    loss = _union(params)
    loss += _exp(_log_volume_term(params.d_L - p * big_m + p, params.sigma))
    loss += big_m * _exp(_log_power(_log(2.0 * math.e * (params.N - params.cluster_size))
                                    - math.log(p - k + 1) - _log_n_exponent(params), p - k + 1))
    loss += big_m * _exp(_log_power(0.5 * math.log(2.0 / math.pi) + math.log(params.tau),
                                    params.cluster_size - params.d_L - k)
                         + _log_ratio_power(math.e * (params.cluster_size - 1), k - 1, k - 1))
    loss += big_m * _tail(params)
    return _result(1.0 - loss, "GOMP comparison")


def omp_comparison_bound(params: BoundParams, k: int) -> BoundResult:
    """Single-neighbor bound for the same kM true neighbors over pM iterations."""
    _check_comparison(params, k)
    big_m, p = params.M, params.p
    loss = _union(params)
    loss += _exp(_log_volume_term(params.d_L - p * big_m + 1, params.sigma))
    loss += 2.0 * k * big_m * math.e * (params.N - params.cluster_size) * _exp(-_log_n_exponent(params))
    loss += k * big_m * _exp(_log_power(0.5 * math.log(2.0 / math.pi) + math.log(params.tau),
                                        params.cluster_size - params.d_L - 1))
    loss += k * big_m * _tail(params)
    return _result(1.0 - loss, "OMP comparison")


def halting_remainder(d_L: int, p: int) -> int:
    """``u = min over integers r with p r < d_L of (d_L - p r)``."""
    if p < 1 or d_L < 1:
        raise ConfigError("d_L and p must be >= 1")
    return d_L - p * ((d_L - 1) // p)


def halting_bound(params: BoundParams) -> BoundResult:
    """Probability that the ratio rule stops right after floor(d_L/p) iterations."""
    p = params.p
    if p > params.d_L:
        raise ConfigError(f"p={p} exceeds d_L={params.d_L}")
    u = halting_remainder(params.d_L, p)
    rounds = params.d_L // p
    loss = _union(params)
    loss += _exp(_log_volume_term(u, params.sigma))
    loss += 2.0 * p * math.exp(-math.sqrt(params.n / p))
    bracket = 2.0 * math.e * (params.N - params.cluster_size) * _exp(-_log_n_exponent(params))
    bracket += _exp(_log_power(0.5 * math.log(2.0 / math.pi) + math.log(params.tau),
                               params.cluster_size - params.d_L - p)
                    + _log_ratio_power(math.e * (params.cluster_size - 1), p - 1, p - 1))
    bracket += _tail(params)
    return _result(1.0 - loss - rounds * bracket, "halting")


def _result(value: float, name: str) -> BoundResult:
    result = BoundResult(value)
    if result.vacuous:
        log.warning("%s bound is vacuous (%.6g)", name, value)
    return result


@dataclass(frozen=True)
class SeparationCheck:
    passed: bool
    lhs: float
    rhs: float


def separation_check(params: BoundParams, variant: str = "printed") -> SeparationCheck:
    """Subspace separation condition ``max aff + noise term <= tau / (4 log N)``.

    ``printed``: noise term ``9 sqrt(3) d_L (1 + sigma) / ((8 - 12 sigma) sqrt((n - d_L) log N))``.
    ``proof``: noise term ``3 sqrt(3 d_L) (3 + 3 sigma) / ((8 - 12 sigma) sqrt((n - d_L) log N))``.
    """
    if not params.affinities:
        raise ConfigError("the separation check needs the subspace affinities")
    if params.n <= params.d_L:
        raise ConfigError(f"the separation check needs n > d_L, got n={params.n}, d_L={params.d_L}")
    if params.sigma >= 2.0 / 3.0:
        raise ConfigError(f"separation condition undefined at this noise level (sigma={params.sigma} >= 2/3)")
    log_n = math.log(params.N)
    denom = (8.0 - 12.0 * params.sigma) * math.sqrt((params.n - params.d_L) * log_n)
    if variant == "printed":
        noise = 9.0 * math.sqrt(3.0) * params.d_L * (1.0 + params.sigma) / denom
    elif variant == "proof":
        noise = 3.0 * math.sqrt(3.0 * params.d_L) * (3.0 + 3.0 * params.sigma) / denom
    else:
        raise ConfigError(f"variant must be 'printed' or 'proof', got {variant!r}")
    lhs = max(params.affinities) + noise
    rhs = params.tau / (4.0 * log_n)
    return SeparationCheck(passed=lhs <= rhs, lhs=lhs, rhs=rhs)


def brute_force_k_min(k_t: int, iterations: int, p: int, params: BoundParams) -> Tuple[List[int], float]:
    """Exhaustive minimizer of ``sum_m J(k_m)`` subject to ``sum_m k_m = k_t``.

    ``params.p`` is replaced by ``p`` for the J evaluations.
    """
    if (p + 1) ** iterations > ENUMERATION_LIMIT:
        raise ConfigError(f"(p+1)^M = {(p + 1) ** iterations} sequences is too many; use smaller M or p")
    if not 0 <= k_t <= p * iterations:
        raise ConfigError(f"k_t must lie in [0, pM = {p * iterations}], got {k_t}")
    local = params if params.p == p else replace(params, p=p)
    cost = [j_term(k, local) for k in range(p + 1)]
    best_seq, best_value = None, math.inf
    for seq in itertools.product(range(p + 1), repeat=iterations):
        if sum(seq) != k_t:
            continue
        value = sum(cost[k] for k in seq)
        if value < best_value:
            best_seq, best_value = list(seq), value
    return best_seq, best_value


def sequence_objective(k_seq: Sequence[int], params: BoundParams) -> float:
    return sum(j_term(k, params) for k in k_seq)


def is_majorized(k: Sequence[float], q: Sequence[float]) -> bool:
    """True when k is majorized by q: equal totals, dominated sorted partial sums."""
    if len(k) != len(q):
        raise ValueError("majorization compares vectors of equal length")
    ks = np.cumsum(sorted(k, reverse=True))
    qs = np.cumsum(sorted(q, reverse=True))
    return bool(np.isclose(ks[-1], qs[-1]) and np.all(ks <= qs + 1e-12))


@dataclass(frozen=True)
class ConcentrationResult:
    emp_a: float
    bound_a: float
    emp_b: float
    bound_b: float
    trials: int

    def tolerance(self, bound: float) -> float:
        """Three binomial standard errors around ``bound``."""
        return 3.0 * math.sqrt(max(bound, 0.0) / self.trials)


def mc_concentration(m: int, eps: float, trials: int, rng: np.random.Generator,
                     chunk: int = 10_000) -> ConcentrationResult:
    """Monte Carlo rates of ``|a.b| > eps |b|`` and ``|a.b| < eps |b| / sqrt(m)``.

    ``a`` is uniform on the unit sphere of R^m and ``b`` standard Gaussian;
    the analytic bounds are ``2 exp(-m eps^2 / 2)`` and ``sqrt(2/pi) eps``.
    """
    if m < 1 or trials < 1 or eps < 0:
        raise ConfigError("need m >= 1, trials >= 1 and eps >= 0")
    sizes = [chunk] * (trials // chunk) + ([trials % chunk] if trials % chunk else [])
    above = below = 0
    for size, stream in zip(sizes, rng.spawn(len(sizes))):
        a = stream.standard_normal((size, m))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b = stream.standard_normal((size, m))
        dots = np.abs(np.einsum("ij,ij->i", a, b))
        b_norm = np.linalg.norm(b, axis=1)
        above += int(np.count_nonzero(dots > eps * b_norm))
        below += int(np.count_nonzero(dots < eps * b_norm / math.sqrt(m)))
    return ConcentrationResult(
        emp_a=above / trials,
        bound_a=2.0 * math.exp(-m * eps * eps / 2.0),
        emp_b=below / trials,
        bound_b=math.sqrt(2.0 / math.pi) * eps,
        trials=trials,
    )
