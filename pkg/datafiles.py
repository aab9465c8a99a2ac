"""CSV, manifest and config-file reading/writing.

Floats are written with 17 significant digits and read back with pandas'
round-trip parser, so every file reloads bit-exactly.
"""
import configparser
import logging
import os
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np
import pandas as pd

from datagen import DataSet, SubspaceModel
from errors import ConfigError, NumericalError

log = logging.getLogger("datafiles")

FLOAT_FORMAT = "%.17g"

POINTS_CSV = "points.csv"
LABELS_CSV = "labels.csv"
NOISELESS_CSV = "noiseless.csv"
BASES_CSV = "bases.csv"
MANIFEST = "manifest.txt"


def _read_csv(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _finite(values: np.ndarray, path: str) -> np.ndarray:
    values = values.astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{path} contains non-finite values")
    return values


def write_points(path: str, points: np.ndarray) -> None:
    cols = [f"x{j}" for j in range(points.shape[1])]
    pd.DataFrame(points, columns=cols).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_points(path: str) -> np.ndarray:
    frame = _read_csv(path)
    if frame.shape[1] == 0 or frame.shape[0] == 0:
        raise ConfigError(f"{path} holds no points")
    try:
        return _finite(frame.to_numpy(), path)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path} has non-numeric entries") from exc


def write_labels(path: str, labels: Iterable[int]) -> None:
    pd.DataFrame({"label": np.asarray(list(labels), dtype=np.int64)}).to_csv(path, index=False)


def read_labels(path: str) -> np.ndarray:
    frame = _read_csv(path)
    if frame.shape[1] != 1:
        raise ConfigError(f"{path} must hold a single label column")
    labels = frame.iloc[:, 0].to_numpy()
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 1:
        raise ConfigError(f"{path} must hold 1-based integer cluster ids")
    return labels.astype(np.int64)


def write_matrix(path: str, matrix: np.ndarray, prefix: str = "c") -> None:
    cols = [f"{prefix}{j}" for j in range(matrix.shape[1])]
    pd.DataFrame(matrix, columns=cols).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_matrix(path: str) -> np.ndarray:
    return _finite(_read_csv(path).to_numpy(), path)


def write_bases(path: str, model: SubspaceModel) -> None:
    """One basis vector per row, tagged with its 1-based subspace id."""
    rows = []
    for k, basis in enumerate(model.bases, start=1):
        for vec in basis.T:
            rows.append([k, *vec])
    cols = ["subspace"] + [f"x{j}" for j in range(model.ambient_dim)]
    frame = pd.DataFrame(rows, columns=cols)
    frame["subspace"] = frame["subspace"].astype(np.int64)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_bases(path: str) -> SubspaceModel:
    frame = _read_csv(path)
    if "subspace" not in frame.columns:
        raise ConfigError(f"{path} lacks the 'subspace' column")
    vectors = _finite(frame.drop(columns="subspace").to_numpy(), path)
    ids = frame["subspace"].to_numpy()
    bases = [vectors[ids == k].T.copy() for k in sorted(set(ids.tolist()))]
    return SubspaceModel(ambient_dim=vectors.shape[1], bases=bases)


def write_dataset(out_dir: str, ds: DataSet, model: Optional[SubspaceModel] = None) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = [os.path.join(out_dir, POINTS_CSV)]
    write_points(written[0], ds.points)
    if ds.labels is not None:
        written.append(os.path.join(out_dir, LABELS_CSV))
        write_labels(written[-1], ds.labels)
    if ds.noiseless is not None:
        written.append(os.path.join(out_dir, NOISELESS_CSV))
        write_points(written[-1], ds.noiseless)
    if model is not None:
        written.append(os.path.join(out_dir, BASES_CSV))
        write_bases(written[-1], model)
    return written


def read_dataset(points_path: str, labels_path: Optional[str] = None) -> DataSet:
    points = read_points(points_path)
    labels = read_labels(labels_path) if labels_path else None
    return DataSet(points=points, labels=labels)


def write_table(path: str, rows: List[Mapping[str, object]], columns: Optional[List[str]] = None) -> None:
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_table(path: str) -> pd.DataFrame:
    return _read_csv(path)


def write_manifest(path: str, entries: Mapping[str, object]) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            if isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            fh.write(f"{key}={value}\n")


def read_manifest(path: str) -> Dict[str, str]:
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}: malformed manifest line {line!r}")
            entries[key] = value
    return entries


def read_config(path: str) -> Dict[str, Dict[str, str]]:
    """Sections of ``key = value`` lines; values stay strings."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys such as L and N are case-sensitive
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return {name: dict(parser[name]) for name in parser.sections()}
