"""Runners behind the command-line and HTTP front ends.

Each runner takes a validated config, does its work with seeded random
streams only, and writes CSV / SVG / manifest files into the output
directory. Trials fan out over ``workers.parallel_map`` while every trial
owns a ``SeedSequence`` built from the seed and its grid position, so the
written files do not depend on the thread count.
"""
import itertools
import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

import bounds
import charts
import datafiles
from datagen import DataSet, SubspaceModel, add_noise, affinity, make_equiaffinity_subspaces, sample_points
from errors import ConfigError
from gomp import FIXED, RATIO, StopPolicy, normalize_points, run_regressions, truth_bases_for
from graph import build_similarity
from metrics import (MetricsReport, anrn, ccr, knee_dimension, mean_aod_per_index, metrics_report,
                     normalized_singular_values, per_neighbor_true_rate, tnr)
from settings import OUT_DIR, SEED
from spectral import KMEANS_RESTARTS, ClusterLabels, estimate_num_clusters, spectral_cluster
from workers import parallel_map

log = logging.getLogger("sweep")

SWEEP_METRICS = ("tnr", "anrn", "ccr")
MAX_ESTIMATED_CLUSTERS = 10

SECTION_KEYS = {
    "model": {"n", "d", "L", "rho", "bases_file"},
    "sampling": {"phi"},
    "experiment": {"sigma", "p", "stop", "trials", "seed", "restarts", "out"},
    "aod": {"n", "d", "L", "per_cluster", "sigma", "neighbors", "p", "trials", "seed"},
    "clusters": {"L", "p", "stop", "d", "trials", "seed", "restarts"},
    "bounds": {"n", "N", "cluster_size", "d_L", "sigma", "tau", "p", "M", "c", "k_t", "k", "affinities"},
}


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _check_keys(sections: Mapping[str, Mapping[str, str]]) -> None:
    for name, values in sections.items():
        if name not in SECTION_KEYS:
            raise ConfigError(f"unknown config section [{name}]")
        unknown = sorted(set(values) - SECTION_KEYS[name])
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")


def _cast(key: str, text: str, kind):
    try:
        return kind(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text.strip()!r} as {kind.__name__}") from None


def _one(section: Mapping[str, str], key: str, kind, default):
    return _cast(key, section[key], kind) if key in section else default


def _many(section: Mapping[str, str], key: str, kind, default) -> Tuple:
    if key not in section:
        return tuple(default)
    items = [s for s in section[key].split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{key}: list must not be empty")
    return tuple(_cast(key, s, kind) for s in items)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid of (rho, phi, sigma, p) cells plus shared model/run settings."""
    n: int = 100
    d: int = 6
    L: int = 3
    rho: Tuple[float, ...] = (0.0, 0.3, 0.6)
    phi: Tuple[float, ...] = (8.0,)
    sigma: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    p: Tuple[int, ...] = (1, 2, 3)
    stop: str = RATIO  # ratio | fixed (M = ceil(d/p)) | fixed:<M>
    trials: int = 20
    seed: int = SEED
    restarts: int = KMEANS_RESTARTS
    out: str = OUT_DIR
    bases_file: Optional[str] = None

    def __post_init__(self):
        _require(self.trials >= 1, f"trials must be >= 1, got {self.trials}")
        _require(self.n >= 1 and self.d >= 1 and self.L >= 1, "n, d and L must be >= 1")
        for name in ("rho", "phi", "sigma", "p"):
            _require(len(getattr(self, name)) > 0, f"{name} list must not be empty")
        _require(all(0.0 <= r <= 1.0 for r in self.rho), "rho values must lie in [0, 1]")
        _require(all(s >= 0 for s in self.sigma), "sigma values must be >= 0")
        _require(all(1 <= p <= self.n for p in self.p), f"p values must lie in [1, n={self.n}]")
        _require(self.restarts >= 1, "restarts must be >= 1")
        _require(self.seed >= 0, "seed must be >= 0")
        if self.bases_file is None:
            _require(self.n >= self.d * (self.L + 1), f"n must be >= d(L+1) = {self.d * (self.L + 1)}")
            for phi in self.phi:
                _check_density(phi, self.d)
        self.policy_for(self.p[0], self.d)

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, str]]) -> "ExperimentConfig":
        _check_keys(sections)
        model, sampling = sections.get("model", {}), sections.get("sampling", {})
        exp = sections.get("experiment", {})
        base = cls()
        return cls(
            n=_one(model, "n", int, base.n),
            d=_one(model, "d", int, base.d),
            L=_one(model, "L", int, base.L),
            rho=_many(model, "rho", float, base.rho),
            bases_file=model.get("bases_file", "").strip() or None,
            phi=_many(sampling, "phi", float, base.phi),
            sigma=_many(exp, "sigma", float, base.sigma),
            p=_many(exp, "p", int, base.p),
            stop=exp.get("stop", base.stop).strip(),
            trials=_one(exp, "trials", int, base.trials),
            seed=_one(exp, "seed", int, base.seed),
            restarts=_one(exp, "restarts", int, base.restarts),
            out=exp.get("out", base.out).strip(),
        )

    def policy_for(self, p: int, d_max: int) -> StopPolicy:
        return _policy(self.stop, p, d_max)


def _policy(stop: str, p: int, d: int) -> StopPolicy:
    if stop == FIXED:
        return StopPolicy.fixed(math.ceil(d / p), p)
    return StopPolicy.parse(stop, p)


def _check_density(phi: float, d: int) -> int:
    count = phi * d
    if phi <= 0 or abs(count - round(count)) > 1e-9:
        raise ConfigError(f"phi * d must be a positive integer, got phi={phi}, d={d}")
    return int(round(count))


@dataclass(frozen=True)
class AodDemoConfig:
    n: int = 100
    d: int = 9
    L: int = 3
    per_cluster: int = 45
    sigma: float = 0.2  # per-coordinate variance sigma^2 / n
    neighbors: int = 9
    p: Tuple[int, ...] = (1, 3)
    trials: int = 200
    seed: int = SEED
    out: str = OUT_DIR

    def __post_init__(self):
        _require(self.trials >= 1, f"trials must be >= 1, got {self.trials}")
        _require(self.n >= self.d * (self.L + 1), f"n must be >= d(L+1) = {self.d * (self.L + 1)}")
        _require(self.per_cluster >= 1, "per_cluster must be >= 1")
        _require(1 <= self.neighbors < self.per_cluster * self.L, "neighbors must lie in [1, N-1]")
        _require(len(self.p) > 0 and all(p >= 1 for p in self.p), "p values must be >= 1")
        _require(self.sigma >= 0, "sigma must be >= 0")

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, str]]) -> "AodDemoConfig":
        _check_keys(sections)
        sec = sections.get("aod", {})
        base = cls()
        return cls(
            n=_one(sec, "n", int, base.n),
            d=_one(sec, "d", int, base.d),
            L=_one(sec, "L", int, base.L),
            per_cluster=_one(sec, "per_cluster", int, base.per_cluster),
            sigma=_one(sec, "sigma", float, base.sigma),
            neighbors=_one(sec, "neighbors", int, base.neighbors),
            p=_many(sec, "p", int, base.p),
            trials=_one(sec, "trials", int, base.trials),
            seed=_one(sec, "seed", int, base.seed),
            out=sections.get("experiment", {}).get("out", base.out).strip(),
        )


@dataclass(frozen=True)
class ClusterCountConfig:
    """Random L-class subsets of one labeled dataset, clustered for every p."""
    L: Tuple[int, ...] = (2, 3, 5, 8, 10)
    p: Tuple[int, ...] = (1, 2, 3)
    stop: str = RATIO
    d: int = 8  # subspace dimension behind stop = fixed
    trials: int = 20
    seed: int = SEED
    restarts: int = KMEANS_RESTARTS
    out: str = OUT_DIR

    def __post_init__(self):
        _require(len(self.L) > 0 and all(k >= 2 for k in self.L), "L values must be >= 2")
        _require(len(self.p) > 0 and all(p >= 1 for p in self.p), "p values must be >= 1")
        _require(self.d >= 1, "d must be >= 1")
        _require(self.trials >= 1, f"trials must be >= 1, got {self.trials}")
        _require(self.restarts >= 1, "restarts must be >= 1")
        _require(self.seed >= 0, "seed must be >= 0")
        self.policy_for(self.p[0])

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, str]]) -> "ClusterCountConfig":
        _check_keys(sections)
        sec = sections.get("clusters", {})
        base = cls()
        return cls(
            L=_many(sec, "L", int, base.L),
            p=_many(sec, "p", int, base.p),
            stop=sec.get("stop", base.stop).strip(),
            d=_one(sec, "d", int, base.d),
            trials=_one(sec, "trials", int, base.trials),
            seed=_one(sec, "seed", int, base.seed),
            restarts=_one(sec, "restarts", int, base.restarts),
            out=sections.get("experiment", {}).get("out", base.out).strip(),
        )

    def policy_for(self, p: int) -> StopPolicy:
        return _policy(self.stop, p, self.d)


_GRID_AXES = ("n", "N", "cluster_size", "d_L", "sigma", "tau", "p", "M", "c", "k_t", "k")


@dataclass(frozen=True)
class BoundsGridConfig:
    """Every combination of the listed values is one bound-table row."""
    n: Tuple[int, ...] = (10_000,)
    N: Tuple[int, ...] = (10_000,)
    cluster_size: Tuple[int, ...] = (3000,)
    d_L: Tuple[int, ...] = (20,)
    sigma: Tuple[float, ...] = (0.01,)
    tau: Tuple[float, ...] = (0.5,)
    p: Tuple[int, ...] = (1,)
    M: Tuple[int, ...] = (1,)
    c: Tuple[float, ...] = (1.0,)
    k_t: Tuple[Optional[int], ...] = (None,)
    k: Tuple[Optional[int], ...] = (None,)
    affinities: Optional[Tuple[float, ...]] = None
    out: str = OUT_DIR

    def __post_init__(self):
        for name in _GRID_AXES:
            _require(len(getattr(self, name)) > 0, f"{name} list must not be empty")
        self.param_grid()

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, str]]) -> "BoundsGridConfig":
        _check_keys(sections)
        sec = sections.get("bounds", {})
        base = cls()
        return cls(
            n=_many(sec, "n", int, base.n),
            N=_many(sec, "N", int, base.N),
            cluster_size=_many(sec, "cluster_size", int, base.cluster_size),
            d_L=_many(sec, "d_L", int, base.d_L),
            sigma=_many(sec, "sigma", float, base.sigma),
            tau=_many(sec, "tau", float, base.tau),
            p=_many(sec, "p", int, base.p),
            M=_many(sec, "M", int, base.M),
            c=_many(sec, "c", float, base.c),
            k_t=_many(sec, "k_t", int, base.k_t),
            k=_many(sec, "k", int, base.k),
            affinities=_many(sec, "affinities", float, ()) or None,
            out=sections.get("experiment", {}).get("out", base.out).strip(),
        )

    def param_grid(self) -> List[Tuple[bounds.BoundParams, Optional[int], Optional[int]]]:
        grid = []
        for n, N, size, d_l, sigma, tau, p, big_m, c, k_t, k in itertools.product(
                *(getattr(self, name) for name in _GRID_AXES)):
            params = bounds.BoundParams(n=n, N=N, cluster_size=size, d_L=d_l, sigma=sigma, tau=tau,
                                        p=p, M=big_m, c_const=c, affinities=self.affinities)
            grid.append((params, k_t, k))
        return grid


def load_sections(path: Optional[str]) -> Dict[str, Dict[str, str]]:
    return datafiles.read_config(path) if path else {}


# ---------------------------------------------------------------------------
# clustering pipeline
# ---------------------------------------------------------------------------

@dataclass
class ClusterResult:
    coef: np.ndarray
    similarity: np.ndarray
    labels: ClusterLabels
    report: MetricsReport
    halted_by: Dict[str, int] = field(default_factory=dict)


def cluster_points(points: np.ndarray, policy: StopPolicy, num_clusters: Optional[int] = None,
                   truth: Optional[np.ndarray] = None, seed: int = 0, threads: int = 1,
                   normalize: bool = False, restarts: int = KMEANS_RESTARTS) -> ClusterResult:
    """Sparse representation, similarity graph and spectral partition of ``points``.

    Without ``num_clusters`` the truth labels decide L, or failing those the
    largest eigengap up to ten clusters.
    """
    if normalize:
        points = normalize_points(points)
    size = points.shape[0]
    pairs = run_regressions(points, policy, threads)
    coef = np.zeros((size, size))
    halted: Dict[str, int] = {}
    for i, (rep, trace) in enumerate(pairs):
        coef[:, i] = rep.normalized_full
        halted[trace.halted_by] = halted.get(trace.halted_by, 0) + 1
    sim = build_similarity(coef)
    if num_clusters is None:
        if truth is not None:
            num_clusters = len(np.unique(truth))
        else:
            num_clusters = estimate_num_clusters(sim, MAX_ESTIMATED_CLUSTERS)
            log.info("eigengap estimate: L=%d", num_clusters)
    labels = spectral_cluster(sim, num_clusters, restarts, seed)
    report = metrics_report(coef, labels, truth, [trace for _, trace in pairs])
    return ClusterResult(coef, sim, labels, report, halted)


# ---------------------------------------------------------------------------
# generate / cluster commands
# ---------------------------------------------------------------------------

def _model_for(cfg: ExperimentConfig, rho: float, rng: np.random.Generator) -> SubspaceModel:
    if cfg.bases_file:
        return datafiles.read_bases(cfg.bases_file)
    return make_equiaffinity_subspaces(cfg.n, cfg.d, cfg.L, rho, rng)


def max_affinity(model: SubspaceModel) -> float:
    pairs = itertools.combinations(model.bases, 2)
    return max((affinity(a, b) for a, b in pairs), default=0.0)


def run_generate(cfg: ExperimentConfig) -> List[str]:
    """One dataset from the first grid values, reproducible from ``cfg.seed``."""
    rho, phi, sigma = cfg.rho[0], cfg.phi[0], cfg.sigma[0]
    model_stream, data_stream = np.random.default_rng(np.random.SeedSequence([cfg.seed])).spawn(2)
    model = _model_for(cfg, rho, model_stream)
    counts = [_check_density(phi, dim) for dim in model.dims]
    ds = add_noise(sample_points(model, counts, data_stream), sigma, data_stream)
    written = datafiles.write_dataset(cfg.out, ds, model)
    manifest = os.path.join(cfg.out, datafiles.MANIFEST)
    datafiles.write_manifest(manifest, {
        "command": "generate", "seed": cfg.seed, "n": model.ambient_dim, "d": model.dims,
        "L": model.num_subspaces, "rho": rho, "phi": phi, "sigma": sigma,
        "bases_file": cfg.bases_file or "", "max_affinity": repr(max_affinity(model)),
        "points": ds.size,
    })
    written.append(manifest)
    log.info("generated %d points in R^%d into %s", ds.size, ds.ambient_dim, cfg.out)
    return written


def run_cluster(points_path: str, labels_path: Optional[str], policy: StopPolicy, out: str,
                num_clusters: Optional[int] = None, seed: int = SEED, threads: int = 1,
                normalize: bool = False) -> ClusterResult:
    ds = datafiles.read_dataset(points_path, labels_path)
    if ds.labels is not None and len(ds.labels) != ds.size:
        raise ConfigError(f"{len(ds.labels)} labels for {ds.size} points")
    started = time.time()
    result = cluster_points(ds.points, policy, num_clusters, ds.labels, seed, threads, normalize)
    os.makedirs(out, exist_ok=True)
    datafiles.write_matrix(os.path.join(out, "coefficients.csv"), result.coef, "c")
    datafiles.write_matrix(os.path.join(out, "similarity.csv"), result.similarity, "g")
    datafiles.write_labels(os.path.join(out, "labels_pred.csv"), result.labels.assignment)
    datafiles.write_table(os.path.join(out, "metrics.csv"), [result.report.to_row()])
    log.info("clustered %d points into %d clusters in %.2fs (%s; halts %s)", ds.size,
             result.labels.num_clusters, time.time() - started, policy.describe(), result.halted_by)
    return result


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_trial(cfg: ExperimentConfig, cell: Tuple[int, int, int], trial: int,
                 fixed_model: Optional[SubspaceModel]) -> Dict[int, Tuple[float, float, float]]:
    ri, fi, si = cell
    ss = np.random.SeedSequence([cfg.seed, ri, fi, si, trial])
    model_stream, data_stream, cluster_stream = np.random.default_rng(ss).spawn(3)
    model = fixed_model or make_equiaffinity_subspaces(cfg.n, cfg.d, cfg.L, cfg.rho[ri], model_stream)
    counts = [_check_density(cfg.phi[fi], dim) for dim in model.dims]
    ds = add_noise(sample_points(model, counts, data_stream), cfg.sigma[si], data_stream)
    km_seed = int(cluster_stream.integers(2**31 - 1))
    out = {}
    for p in cfg.p:
        res = cluster_points(ds.points, cfg.policy_for(p, max(model.dims)), model.num_subspaces,
                             ds.labels, km_seed, threads=1, restarts=cfg.restarts)
        out[p] = (tnr(res.coef, ds.labels), anrn(res.coef), ccr(res.labels, ds.labels))
    return out


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> List[Dict[str, object]]:
    """Mean/std of TNR, ANRN and CCR per (rho, phi, sigma, p) cell.

    The data of one (rho, phi, sigma, trial) is shared by every p, so the
    p-comparison is paired.
    """
    fixed_model = datafiles.read_bases(cfg.bases_file) if cfg.bases_file else None
    rho_values = (max_affinity(fixed_model),) if fixed_model else cfg.rho
    cells = list(itertools.product(range(len(rho_values)), range(len(cfg.phi)), range(len(cfg.sigma))))
    jobs = [(cell, t) for cell in cells for t in range(cfg.trials)]
    started = time.time()
    results = parallel_map(lambda job: _sweep_trial(cfg, job[0], job[1], fixed_model), jobs, threads)
    log.info("sweep: %d cells x %d trials in %.1fs", len(cells), cfg.trials, time.time() - started)

    by_cell: Dict[Tuple[int, int, int], List[Dict[int, Tuple[float, float, float]]]] = {}
    for (cell, _), res in zip(jobs, results):
        by_cell.setdefault(cell, []).append(res)

    rows = []
    for cell in cells:
        ri, fi, si = cell
        for p in cfg.p:
            values = np.array([trial[p] for trial in by_cell[cell]])
            for col, metric in enumerate(SWEEP_METRICS):
                rows.append({
                    "rho": rho_values[ri], "phi": cfg.phi[fi], "sigma": cfg.sigma[si], "p": p,
                    "metric": metric, "mean": float(np.mean(values[:, col])),
                    "std": float(np.std(values[:, col])), "trials": cfg.trials,
                })

    os.makedirs(cfg.out, exist_ok=True)
    datafiles.write_table(os.path.join(cfg.out, "sweep.csv"), rows)
    _sweep_charts(cfg, rows, rho_values)
    datafiles.write_manifest(os.path.join(cfg.out, datafiles.MANIFEST), {
        "command": "sweep", "seed": cfg.seed, "n": cfg.n, "d": cfg.d, "L": cfg.L, "rho": rho_values,
        "phi": cfg.phi, "sigma": cfg.sigma, "p": cfg.p, "stop": cfg.stop, "trials": cfg.trials,
        "restarts": cfg.restarts, "bases_file": cfg.bases_file or "",
    })
    return rows


def _sweep_charts(cfg: ExperimentConfig, rows: List[Dict[str, object]], rho_values: Sequence[float]) -> None:
    for rho, phi, metric in itertools.product(rho_values, cfg.phi, SWEEP_METRICS):
        series = {}
        for p in cfg.p:
            means = {r["sigma"]: r["mean"] for r in rows
                     if r["rho"] == rho and r["phi"] == phi and r["p"] == p and r["metric"] == metric}
            series[f"p={p}"] = [means[s] for s in cfg.sigma]
        path = os.path.join(cfg.out, f"sweep_rho{rho:g}_phi{phi:g}_{metric}.svg")
        charts.line_chart(path, list(cfg.sigma), series, title=f"rho={rho:g}, phi={phi:g}",
                          xlabel="noise sigma", ylabel=metric.upper())


# ---------------------------------------------------------------------------
# AoD demo
# ---------------------------------------------------------------------------

def _aod_trial(cfg: AodDemoConfig, trial: int) -> Dict[int, Tuple[List[float], List[float]]]:
    model_stream, data_stream = np.random.default_rng(np.random.SeedSequence([cfg.seed, trial])).spawn(2)
    model = make_equiaffinity_subspaces(cfg.n, cfg.d, cfg.L, 0.0, model_stream)
    ds: DataSet = add_noise(sample_points(model, [cfg.per_cluster] * cfg.L, data_stream), cfg.sigma, data_stream)
    truth = truth_bases_for(ds.labels, model.bases)
    out = {}
    for p in cfg.p:
        policy = StopPolicy.fixed(math.ceil(cfg.neighbors / p), p)
        traces = [trace for _, trace in run_regressions(ds.points, policy, truth_bases=truth)]
        out[p] = (mean_aod_per_index(traces)[:cfg.neighbors],
                  per_neighbor_true_rate(traces, ds.labels)[:cfg.neighbors])
    return out


def run_aod_demo(cfg: AodDemoConfig, threads: int = 1) -> List[Dict[str, object]]:
    """Mean AoD and true-neighbor rate per neighbor index, averaged over trials.

    Every trial regresses the same number of points, so the trial means
    are averaged with equal weight. Regressions that fit exactly stop early;
    only the indices every trial and every p reached are written.
    """
    started = time.time()
    results = parallel_map(lambda t: _aod_trial(cfg, t), range(cfg.trials), threads)
    log.info("aod demo: %d trials in %.1fs", cfg.trials, time.time() - started)
    reach = min(len(res[p][0]) for res in results for p in cfg.p)
    if reach == 0:
        raise ConfigError("no regression selected a neighbor")
    if reach < cfg.neighbors:
        log.warning("aod demo: regressions stopped after %d of %d neighbors, truncating", reach, cfg.neighbors)
    rows = []
    curves: Dict[str, Dict[str, List[float]]] = {"aod": {}, "true_rate": {}}
    for p in cfg.p:
        aods = np.mean([res[p][0][:reach] for res in results], axis=0)
        rates = np.mean([res[p][1][:reach] for res in results], axis=0)
        curves["aod"][f"p={p}"] = aods.tolist()
        curves["true_rate"][f"p={p}"] = rates.tolist()
        for k in range(reach):
            rows.append({"p": p, "neighbor": k + 1, "mean_aod": float(aods[k]), "true_rate": float(rates[k])})

    os.makedirs(cfg.out, exist_ok=True)
    datafiles.write_table(os.path.join(cfg.out, "aod_demo.csv"), rows)
    index = list(range(1, reach + 1))
    charts.line_chart(os.path.join(cfg.out, "aod_demo_aod.svg"), index, curves["aod"],
                      title="mean AoD of the selecting residual", xlabel="neighbor index",
                      ylabel="AoD (rad)", steps=True)
    charts.line_chart(os.path.join(cfg.out, "aod_demo_true_rate.svg"), index, curves["true_rate"],
                      title="true neighbor rate", xlabel="neighbor index", ylabel="rate")
    datafiles.write_manifest(os.path.join(cfg.out, datafiles.MANIFEST), {
        "command": "aod-demo", "seed": cfg.seed, "n": cfg.n, "d": cfg.d, "L": cfg.L,
        "per_cluster": cfg.per_cluster, "sigma": cfg.sigma, "neighbors": cfg.neighbors, "neighbors_written": reach,
        "p": cfg.p, "trials": cfg.trials,
    })
    return rows


# ---------------------------------------------------------------------------
# cluster count
# ---------------------------------------------------------------------------

def _cluster_count_trial(cfg: ClusterCountConfig, ds: DataSet, classes: np.ndarray, li: int,
                         trial: int) -> Dict[int, Tuple[float, float, float]]:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, li, trial]))
    chosen = np.sort(rng.choice(classes, size=cfg.L[li], replace=False))
    mask = np.isin(ds.labels, chosen)
    points, labels = ds.points[mask], ds.labels[mask]
    km_seed = int(rng.integers(2**31 - 1))
    out = {}
    for p in cfg.p:
        res = cluster_points(points, cfg.policy_for(p), cfg.L[li], labels, km_seed, restarts=cfg.restarts)
        out[p] = (tnr(res.coef, labels), anrn(res.coef), ccr(res.labels, labels))
    return out


def run_cluster_count(cfg: ClusterCountConfig, points_path: str, labels_path: str, threads: int = 1,
                      normalize: bool = False) -> List[Dict[str, object]]:
    """Mean/std of TNR, ANRN and CCR per (L, p) over random subsets of the labeled classes.

    Trial t at the i-th L value draws its classes from
    ``SeedSequence([seed, i, t])``; all p values cluster the same subset.
    """
    ds = datafiles.read_dataset(points_path, labels_path)
    if ds.labels is None:
        raise ConfigError("cluster-count needs a labels file")
    if len(ds.labels) != ds.size:
        raise ConfigError(f"{len(ds.labels)} labels for {ds.size} points")
    if normalize:
        ds = DataSet(points=normalize_points(ds.points), labels=ds.labels)
    classes = np.unique(ds.labels)
    _require(max(cfg.L) <= len(classes), f"L={max(cfg.L)} exceeds the {len(classes)} labeled classes")

    jobs = [(li, t) for li in range(len(cfg.L)) for t in range(cfg.trials)]
    started = time.time()
    results = parallel_map(lambda job: _cluster_count_trial(cfg, ds, classes, job[0], job[1]), jobs, threads)
    log.info("cluster count: %d L values x %d trials in %.1fs", len(cfg.L), cfg.trials, time.time() - started)

    rows = []
    for li, count in enumerate(cfg.L):
        trials = results[li * cfg.trials:(li + 1) * cfg.trials]
        for p in cfg.p:
            values = np.array([trial[p] for trial in trials])
            for col, metric in enumerate(SWEEP_METRICS):
                rows.append({
                    "L": count, "p": p, "metric": metric, "mean": float(np.mean(values[:, col])),
                    "std": float(np.std(values[:, col])), "trials": cfg.trials,
                })

    os.makedirs(cfg.out, exist_ok=True)
    datafiles.write_table(os.path.join(cfg.out, "cluster_count.csv"), rows)
    for metric in SWEEP_METRICS:
        series = {}
        for p in cfg.p:
            means = {r["L"]: r["mean"] for r in rows if r["p"] == p and r["metric"] == metric}
            series[f"p={p}"] = [means[count] for count in cfg.L]
        charts.line_chart(os.path.join(cfg.out, f"cluster_count_{metric}.svg"), list(cfg.L), series,
                          title=f"{metric.upper()} versus number of clusters ({cfg.stop})",
                          xlabel="clusters L", ylabel=metric.upper())
    datafiles.write_manifest(os.path.join(cfg.out, datafiles.MANIFEST), {
        "command": "cluster-count", "seed": cfg.seed, "points": points_path, "labels": labels_path,
        "classes": len(classes), "L": cfg.L, "p": cfg.p, "stop": cfg.stop, "d": cfg.d,
        "trials": cfg.trials, "restarts": cfg.restarts, "normalize": normalize,
    })
    return rows


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

BOUND_COLUMNS = list(_GRID_AXES) + [
    "iteration", "iteration_vacuous", "global", "global_vacuous",
    "omp_specialization", "omp_specialization_vacuous", "halting", "halting_vacuous",
    "gomp_comparison", "gomp_comparison_vacuous", "omp_comparison", "omp_comparison_vacuous",
    "separation_printed", "separation_proof",
]


def _applicable(fn, *args):
    """Bound value, or None when the parameters fall outside its domain."""
    try:
        return fn(*args)
    except ConfigError as exc:
        log.debug("skipped %s: %s", fn.__name__, exc)
        return None


def _put(row: Dict[str, object], name: str, result: Optional[bounds.BoundResult]) -> None:
    if result is not None:
        row[name] = result.value
        row[f"{name}_vacuous"] = result.vacuous


def bound_row(params: bounds.BoundParams, k_t: Optional[int] = None, k: Optional[int] = None) -> Dict[str, object]:
    row: Dict[str, object] = {
        "n": params.n, "N": params.N, "cluster_size": params.cluster_size, "d_L": params.d_L,
        "sigma": params.sigma, "tau": params.tau, "p": params.p, "M": params.M, "c": params.c_const,
        "k_t": k_t, "k": k,
    }
    if k_t is not None:
        seq = _applicable(bounds.optimal_k_sequence, k_t, params.M, params.p)
        if seq is not None:
            _put(row, "iteration", _applicable(bounds.iteration_bound, params, seq))
        _put(row, "global", _applicable(bounds.global_bound, params, k_t))
    if params.p == 1:
        _put(row, "omp_specialization", _applicable(bounds.omp_specialization_bound, params))
    _put(row, "halting", _applicable(bounds.halting_bound, params))
    if k is not None:
        _put(row, "gomp_comparison", _applicable(bounds.gomp_comparison_bound, params, k))
        _put(row, "omp_comparison", _applicable(bounds.omp_comparison_bound, params, k))
    if params.affinities:
        for variant in ("printed", "proof"):
            check = _applicable(bounds.separation_check, params, variant)
            if check is not None:
                row[f"separation_{variant}"] = check.passed
    return row


def run_bounds(cfg: BoundsGridConfig) -> List[Dict[str, object]]:
    rows = [bound_row(params, k_t, k) for params, k_t, k in cfg.param_grid()]
    os.makedirs(cfg.out, exist_ok=True)
    datafiles.write_table(os.path.join(cfg.out, "bounds.csv"), rows, BOUND_COLUMNS)
    log.info("evaluated %d bound rows", len(rows))
    return rows


# ---------------------------------------------------------------------------
# dimension study
# ---------------------------------------------------------------------------

def run_dimension(points_path: str, labels_path: Optional[str], out: str, max_dim: int = 20,
                  normalize: bool = False) -> Dict[int, int]:
    """Normalized singular values and knee estimate per cluster (cluster 0 when unlabeled)."""
    if max_dim < 1:
        raise ConfigError("max_dim must be >= 1")
    ds = datafiles.read_dataset(points_path, labels_path)
    points = normalize_points(ds.points) if normalize else ds.points
    groups = {0: points}
    if ds.labels is not None:
        groups = {int(k): points[ds.labels == k] for k in np.unique(ds.labels)}
    rows, knees = [], {}
    for cluster, block in groups.items():
        values = normalized_singular_values(block)
        knees[cluster] = knee_dimension(values, max_dim)
        for idx, value in enumerate(values[:max_dim + 1], start=1):
            rows.append({"cluster": cluster, "index": idx, "singular_value": float(value)})
    os.makedirs(out, exist_ok=True)
    datafiles.write_table(os.path.join(out, "singular_values.csv"), rows)
    datafiles.write_table(os.path.join(out, "dimension.csv"),
                          [{"cluster": c, "knee": k} for c, k in knees.items()])
    for cluster, knee in knees.items():
        log.info("cluster %d: knee at dimension %d", cluster, knee)
    return knees


def override(cfg, **changes):
    """``dataclasses.replace`` with the ``None`` entries dropped."""
    names = {f.name for f in fields(cfg)}
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None and k in names})
