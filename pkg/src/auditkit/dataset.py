"""Tabular dataset ingestion, standardization, and train/test split management.

All downstream components (models, explainers, anomaly scoring) operate on
z-scored feature matrices; the statistics are always computed on the train
split only and kept alongside the data so raw values can be recovered.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, ParseError, SchemaError, StateError

TRAIN = 0
TEST = 1


class FeatureKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    CATEGORICAL = "categorical-encoded"


@dataclass(frozen=True)
class FeatureMeta:
    """Descriptor for one feature column."""

    name: str
    kind: FeatureKind = FeatureKind.CONTINUOUS
    is_sensitive: bool = False
    is_uncorrelated: bool = False


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with labels, per-feature metadata and splits.

    ``split`` (once assigned) tags every row ``TRAIN`` or ``TEST``.
    ``norm_stats`` is the ``(mean, std)`` pair per feature, computed on the
    train rows only; it is ``None`` until :func:`standardize` runs.
    """

    X: np.ndarray
    Y: np.ndarray
    meta: tuple[FeatureMeta, ...]
    split: np.ndarray | None = None
    norm_stats: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        names = [m.name for m in self.meta]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in dataset metadata")
        if self.X.shape[1] != len(self.meta):
            raise SchemaError(
                f"X has {self.X.shape[1]} columns but metadata lists {len(self.meta)}"
            )

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.Y.max()) + 1

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.meta)

    def index_of(self, name: str) -> int:
        for j, m in enumerate(self.meta):
            if m.name == name:
                return j
        raise SchemaError(f"feature {name!r} not present in dataset")

    def _mask(self, tag: int) -> np.ndarray:
        if self.split is None:
            raise StateError("dataset has no train/test split assigned")
        return self.split == tag

    @property
    def train_X(self) -> np.ndarray:
        return self.X[self._mask(TRAIN)]

    @property
    def train_Y(self) -> np.ndarray:
        return self.Y[self._mask(TRAIN)]

    @property
    def test_X(self) -> np.ndarray:
        return self.X[self._mask(TEST)]

    @property
    def test_Y(self) -> np.ndarray:
        return self.Y[self._mask(TEST)]

    @property
    def sensitive_indices(self) -> tuple[int, ...]:
        return tuple(j for j, m in enumerate(self.meta) if m.is_sensitive)

    @property
    def uncorrelated_indices(self) -> tuple[int, ...]:
        return tuple(j for j, m in enumerate(self.meta) if m.is_uncorrelated)


def load_csv(path, schema: list[FeatureMeta], label_column: str) -> Dataset:
    """Read a comma-separated file into a raw (unstandardized) :class:`Dataset`.

    The first row must be a header containing every schema name plus
    ``label_column``; extra columns are ignored. Cells must parse as numbers
    (categoricals are expected to be integer-encoded upstream).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        wanted = [m.name for m in schema] + [label_column]
        missing = [name for name in wanted if name not in header]
        if missing:
            raise SchemaError(f"{path} is missing columns: {', '.join(missing)}")
        cols = [header.index(name) for name in wanted]

        rows: list[list[float]] = []
        for i, rec in enumerate(reader, start=1):
            vals = []
            for name, c in zip(wanted, cols):
                cell = rec[c].strip() if c < len(rec) else ""
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: could not parse {cell!r} at row {i}, column {name!r}"
                    ) from None
            rows.append(vals)

    if not rows:
        raise EmptyInputError(f"{path} has a header but no data rows")

    data = np.asarray(rows, dtype=np.float64)
    X, y_raw = data[:, :-1], data[:, -1]
    if not np.all(y_raw == np.round(y_raw)) or y_raw.min() < 0:
        raise ParseError(f"{path}: label column {label_column!r} must hold non-negative integers")
    Y = y_raw.astype(np.int64)
    if np.unique(Y).size < 2:
        raise SchemaError(f"{path}: label column {label_column!r} has fewer than 2 classes")
    return Dataset(X=X, Y=Y, meta=tuple(schema))


def split_train_test(ds: Dataset, train_fraction: float, seed: int) -> Dataset:
    """Assign train/test tags by a seeded shuffle.

    ``|train| = round(train_fraction * N)``, clamped so both splits are
    non-empty.
    """
    if ds.n_rows < 2:
        raise ValueError("need at least 2 rows to split")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = min(max(round(train_fraction * ds.n_rows), 1), ds.n_rows - 1)
    perm = np.random.default_rng(seed).permutation(ds.n_rows)
    split = np.full(ds.n_rows, TEST, dtype=np.int8)
    split[perm[:n_train]] = TRAIN
    return replace(ds, split=split)


def standardize(ds: Dataset) -> Dataset:
    """z-score every column using mean/std of the train rows only.

    Population (1/N) standard deviation; columns constant on the train split
    keep std = 1 so they map to all zeros instead of dividing by zero.
    """
    if ds.split is None:
        raise StateError("assign a split before standardizing")
    train = ds.train_X
    if train.shape[0] == 0:
        raise StateError("train split is empty")
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return replace(ds, X=(ds.X - mean) / std, norm_stats=(mean, std))


def inverse_transform(ds: Dataset, X: np.ndarray) -> np.ndarray:
    """Map standardized rows back to raw units via the stored train stats."""
    if ds.norm_stats is None:
        raise StateError("dataset has no normalization stats")
    mean, std = ds.norm_stats
    return X * std + mean


def categorical_sampling_map(ds: Dataset) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Distinct train values and frequencies per non-continuous column, in
    the dataset's current units. Used by samplers that must keep discrete
    features on their support."""
    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for j, m in enumerate(ds.meta):
        if m.kind == FeatureKind.CONTINUOUS:
            continue
        vals, counts = np.unique(ds.train_X[:, j], return_counts=True)
        out[j] = (vals, counts / counts.sum())
    return out


def synthesize_uncorrelated(ds: Dataset, count: int, seed: int) -> Dataset:
    """Append ``count`` label-independent binary columns drawn i.i.d. U{0,1}.

    Must run before standardization (values are in raw units). Appended
    columns are named ``uncorrelated_feature_<i>`` and flagged accordingly.
    """
    if count not in (1, 2):
        raise ValueError("count must be 1 or 2")
    if ds.norm_stats is not None:
        raise StateError("append uncorrelated features before standardizing")
    rng = np.random.default_rng(seed)
    cols = rng.integers(0, 2, size=(ds.n_rows, count)).astype(np.float64)
    start = len(ds.uncorrelated_indices) + 1
    extra = tuple(
        FeatureMeta(
            name=f"uncorrelated_feature_{start + i}",
            kind=FeatureKind.BINARY,
            is_uncorrelated=True,
        )
        for i in range(count)
    )
    return replace(ds, X=np.hstack([ds.X, cols]), meta=ds.meta + extra)
