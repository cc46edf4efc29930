"""Dataset ingestion for the logistic-regression experiment."""
from __future__ import annotations

import logging
from importlib import resources
from pathlib import Path

import numpy as np

from ..kernel import RngStream
from ..models.logistic import LogisticData

logger = logging.getLogger(__name__)

MISSING = {"", "?", "na", "nan"}


class DatasetError(ValueError):
    pass


def _parse_rows(lines, source: str):
    rows = []
    width = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if width is None:
            width = len(fields)
            try:
                [float(f) for f in fields if f.lower() not in MISSING]
            except ValueError:
                continue  # header row
        if len(fields) != width:
            raise DatasetError(f"{source}:{lineno}: expected {width} fields, got {len(fields)}")
        if any(f.lower() in MISSING for f in fields):
            continue
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise DatasetError(f"{source}:{lineno}: {exc}") from None
    if not rows:
        raise DatasetError(f"{source}: no complete data rows")
    return np.array(rows)


def standardize(features: np.ndarray) -> np.ndarray:
    """Column z-scores (population std); constant columns are only centred."""
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    const = std == 0
    if np.any(const):
        logger.warning("constant feature columns left unscaled: %s", np.flatnonzero(const).tolist())
        std = np.where(const, 1.0, std)
    return (features - mean) / std


def load_csv_dataset(path, sigma2: float = 5.0) -> LogisticData:
    """Read numeric features with a trailing 0/1 label column.

    Rows with a missing field (empty, ``?`` or ``NA``) are dropped. Features
    are z-scored per column and an all-ones intercept column is appended.
    """
    path = Path(path)
    with open(path) as fh:
        table = _parse_rows(fh, str(path))
    return _to_logistic(table, sigma2, str(path))


def _to_logistic(table: np.ndarray, sigma2: float, source: str) -> LogisticData:
    if table.shape[1] < 2:
        raise DatasetError(f"{source}: need at least one feature and a label column")
    labels = table[:, -1]
    if not np.all((labels == 0) | (labels == 1)):
        bad = np.flatnonzero((labels != 0) & (labels != 1))[0]
        raise DatasetError(f"{source}: non-binary label {labels[bad]!r} in data row {bad + 1}")
    features = standardize(table[:, :-1])
    covariates = np.hstack([features, np.ones((features.shape[0], 1))])
    logger.info("%s: d_y=%d, d=%d", source, covariates.shape[0], covariates.shape[1])
    return LogisticData(covariates, labels, sigma2)


def wisconsin_path() -> Path:
    return Path(str(resources.files("soul") / "data" / "wisconsin.csv"))


def load_wisconsin(sigma2: float = 5.0) -> LogisticData:
    """Bundled breast-cancer data: 683 complete cases, 9 features + intercept."""
    return load_csv_dataset(wisconsin_path(), sigma2)


def train_test_split(data: LogisticData, train_frac: float = 0.8, seed: int = 0):
    """Random row split; covariates keep the normalisation of the full data."""
    rng = RngStream(seed).generator
    perm = rng.permutation(data.n_obs)
    n_train = int(round(train_frac * data.n_obs))
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))
