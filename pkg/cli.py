#!/usr/bin/env python3
"""Command-line front end: generate, cluster, sweep, cluster-count, bounds, aod-demo, dimension.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import logging
import sys
from typing import List, Optional

import numpy as np

import experiments
from errors import ConfigError, NumericalError
from gomp import RATIO, StopPolicy
from settings import LOG_LEVEL, OUT_DIR, SEED, THREADS, setup_logging

log = logging.getLogger("cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned key = value file")
    common.add_argument("--seed", type=_non_negative, help=f"base seed (default {SEED})")
    common.add_argument("--out", help=f"output directory (default {OUT_DIR})")
    common.add_argument("--threads", type=_non_negative, default=THREADS, help="worker threads, 0 = one per CPU")
    common.add_argument("--normalize", action="store_true", help="unit-normalize loaded points")
    common.add_argument("--stop", help="ratio | fixed:<M>")
    common.add_argument("-p", type=_positive, help="neighbors selected per iteration")
    common.add_argument("--log-level", default=LOG_LEVEL, help="DEBUG, INFO, WARNING ...")

    parser = argparse.ArgumentParser(prog="ssc-gomp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="write a synthetic union-of-subspaces dataset")

    cluster = sub.add_parser("cluster", parents=[common], help="cluster a points CSV")
    cluster.add_argument("--points", required=True)
    cluster.add_argument("--labels", help="1-based ground-truth labels CSV")
    cluster.add_argument("-L", "--clusters", type=_positive, help="number of clusters")

    sub.add_parser("sweep", parents=[common], help="TNR/ANRN/CCR over a (rho, phi, sigma, p) grid")

    count = sub.add_parser("cluster-count", parents=[common], help="TNR/ANRN/CCR versus the number of clusters")
    count.add_argument("--points", required=True)
    count.add_argument("--labels", required=True, help="1-based ground-truth labels CSV")
    count.add_argument("-L", "--clusters", type=_positive, nargs="+", help="cluster counts to sample")
    count.add_argument("--trials", type=_positive)

    sub.add_parser("bounds", parents=[common], help="evaluate the recovery and halting bounds")
    sub.add_parser("aod-demo", parents=[common], help="AoD and true-neighbor rate per neighbor index")

    dimension = sub.add_parser("dimension", parents=[common], help="singular-value knee per cluster")
    dimension.add_argument("--points", required=True)
    dimension.add_argument("--labels")
    dimension.add_argument("--max-dim", type=_positive, default=20)
    return parser


def _sections(args) -> dict:
    return experiments.load_sections(args.config)


def cmd_generate(args) -> None:
    cfg = experiments.ExperimentConfig.from_sections(_sections(args))
    cfg = experiments.override(cfg, seed=args.seed, out=args.out)
    for path in experiments.run_generate(cfg):
        print(path)


def cmd_cluster(args) -> None:
    policy = StopPolicy.parse(args.stop or RATIO, args.p or 1)
    result = experiments.run_cluster(
        args.points, args.labels, policy, args.out or OUT_DIR, num_clusters=args.clusters,
        seed=SEED if args.seed is None else args.seed, threads=args.threads, normalize=args.normalize)
    for key, value in result.report.to_row().items():
        print(f"{key}={value}")


def cmd_sweep(args) -> None:
    cfg = experiments.ExperimentConfig.from_sections(_sections(args))
    cfg = experiments.override(cfg, seed=args.seed, out=args.out, stop=args.stop,
                               p=(args.p,) if args.p else None)
    rows = experiments.run_sweep(cfg, args.threads)
    print(f"{len(rows)} rows written to {cfg.out}")


def cmd_cluster_count(args) -> None:
    cfg = experiments.ClusterCountConfig.from_sections(_sections(args))
    cfg = experiments.override(cfg, seed=args.seed, out=args.out, stop=args.stop, trials=args.trials,
                               L=tuple(args.clusters) if args.clusters else None,
                               p=(args.p,) if args.p else None)
    rows = experiments.run_cluster_count(cfg, args.points, args.labels, args.threads, args.normalize)
    print(f"{len(rows)} rows written to {cfg.out}")


def cmd_bounds(args) -> None:
    cfg = experiments.BoundsGridConfig.from_sections(_sections(args))
    cfg = experiments.override(cfg, out=args.out, p=(args.p,) if args.p else None)
    rows = experiments.run_bounds(cfg)
    print(f"{len(rows)} rows written to {cfg.out}")


def cmd_aod_demo(args) -> None:
    cfg = experiments.AodDemoConfig.from_sections(_sections(args))
    cfg = experiments.override(cfg, seed=args.seed, out=args.out, p=(args.p,) if args.p else None)
    experiments.run_aod_demo(cfg, args.threads)
    print(f"aod demo written to {cfg.out}")


def cmd_dimension(args) -> None:
    knees = experiments.run_dimension(args.points, args.labels, args.out or OUT_DIR, args.max_dim,
                                      args.normalize)
    for cluster, knee in knees.items():
        print(f"cluster {cluster}: {knee}")


COMMANDS = {
    "generate": cmd_generate,
    "cluster": cmd_cluster,
    "sweep": cmd_sweep,
    "cluster-count": cmd_cluster_count,
    "bounds": cmd_bounds,
    "aod-demo": cmd_aod_demo,
    "dimension": cmd_dimension,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
