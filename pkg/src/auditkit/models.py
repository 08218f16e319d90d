"""Black-box prediction interface, rule-based classifiers, and the
scaffolding adversary that swaps models when it believes it is being audited.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import SchemaError, ShapeError
from .explainers.shap import sample_uniform_coalitions, shap_background
from .forest import ForestParams, RandomForest, forest_fit

TRAIN_MEAN = "train_mean"


class BlackBoxModel:
    """Query-only decision function returning hard class labels.

    The query counter increments by exactly the number of rows per call and
    uses a lock so concurrent audits count correctly. Probabilities are never
    exposed.
    """

    def __init__(self, predict_fn, n_features: int, name: str = "f"):
        self._predict = predict_fn
        self.n_features = n_features
        self.name = name
        self._count = 0
        self._lock = threading.Lock()

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected (n, {self.n_features}) matrix, got {X.shape}")
        with self._lock:
            self._count += X.shape[0]
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return np.asarray(self._predict(X), dtype=np.int64)

    @property
    def query_count(self) -> int:
        return self._count


@dataclass(frozen=True)
class Predicate:
    """Strict '>' test on a named feature.

    ``threshold`` may be a number or the marker ``TRAIN_MEAN``; ``space``
    says which units the number is in. Equality tests on binary features are
    expressed as a raw-space threshold of 0.5.
    """

    feature: str
    threshold: float | str = 0.5
    space: str = "raw"


@dataclass(frozen=True)
class RuleSpec:
    """Declarative rule: one predicate, or the XOR of two."""

    predicates: tuple[Predicate, ...]
    positive_label: int = 1
    negative_label: int = 0

    def __post_init__(self):
        if len(self.predicates) not in (1, 2):
            raise ValueError("a rule takes one predicate or an XOR of two")


class RuleModel:
    """A rule bound to a dataset's columns and normalization stats."""

    def __init__(self, spec: RuleSpec, columns, thresholds, feature_names):
        self.spec = spec
        self._columns = np.asarray(columns, dtype=np.int64)
        self._thresholds = np.asarray(thresholds, dtype=np.float64)
        self.feature_names = tuple(feature_names)
        self.n_features_bound = None  # informational only

    @classmethod
    def bind(cls, spec: RuleSpec, ds: Dataset) -> "RuleModel":
        columns, thresholds = [], []
        for p in spec.predicates:
            try:
                j = ds.index_of(p.feature)
            except SchemaError:
                raise SchemaError(f"rule references missing feature {p.feature!r}") from None
            columns.append(j)
            thresholds.append(_resolve_threshold(p, j, ds))
        return cls(spec, columns, thresholds, [p.feature for p in spec.predicates])

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] <= self._columns.max():
            raise ShapeError(f"matrix with {X.shape} lacks rule columns {self._columns}")
        tests = X[:, self._columns] > self._thresholds
        hit = tests[:, 0] if tests.shape[1] == 1 else np.logical_xor(tests[:, 0], tests[:, 1])
        out = np.where(hit, self.spec.positive_label, self.spec.negative_label)
        return out.astype(np.int64)


def _resolve_threshold(p: Predicate, column: int, ds: Dataset) -> float:
    """Express the predicate threshold in the dataset's current units."""
    if p.space not in ("raw", "standardized"):
        raise ValueError(f"unknown predicate space {p.space!r}")
    standardized = ds.norm_stats is not None
    if p.threshold == TRAIN_MEAN:
        if ds.split is None:
            raise SchemaError("train-mean threshold needs a split assigned")
        if standardized:
            return 0.0  # the train mean is the origin of standardized units
        return float(ds.train_X[:, column].mean())
    t = float(p.threshold)
    if p.space == "standardized":
        if not standardized:
            raise SchemaError("standardized-space threshold on raw data")
        return t
    if standardized:
        mean, std = ds.norm_stats
        return (t - mean[column]) / std[column]
    return t


@dataclass
class ScaffoldModel:
    """Routes each query to the biased model when the out-of-distribution
    detector says the row is real data, and to the unbiased model otherwise.
    """

    f_biased: RuleModel
    f_unbiased: RuleModel
    d_ood: RandomForest

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        is_real = self.d_ood.predict(X) == 1
        return np.where(is_real, self.f_biased.predict(X), self.f_unbiased.predict(X))


@dataclass
class AttackerPerturber:
    """How the adversary fabricates explainer-style queries for training its
    detector: noise-neighborhood style (Gaussian jitter on continuous
    columns, marginal resampling on discrete ones) or background masking
    (coalition explainers)."""

    scheme: str = "gaussian"
    copies: int = 1
    scale: float = 1.0
    background_k: int = 20
    categorical: dict | None = None

    def perturb(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        base = np.repeat(X, self.copies, axis=0)
        if self.scheme == "gaussian":
            fake = base + self.scale * rng.standard_normal(base.shape)
            if self.categorical:
                for j, (values, probs) in self.categorical.items():
                    fake[:, j] = rng.choice(values, p=probs, size=fake.shape[0])
            return fake
        if self.scheme == "mask":
            # uniform proper coalitions: the mix a full coalition enumeration
            # would query, which is what the adversary expects to face
            bg = shap_background(X, k=self.background_k, seed=int(rng.integers(2**31)))
            coalitions = sample_uniform_coalitions(X.shape[1], base.shape[0], rng)
            centroid_idx = rng.integers(0, bg.n_centroids, size=base.shape[0])
            centers = bg.centroids[centroid_idx]
            return coalitions * base + (1.0 - coalitions) * centers
        raise ValueError(f"unknown perturbation scheme {self.scheme!r}")


def build_attacker(
    ds: Dataset,
    f_biased: RuleModel,
    f_unbiased: RuleModel,
    perturber: AttackerPerturber | None = None,
    seed: int = 0,
    forest_params: ForestParams | None = None,
) -> ScaffoldModel:
    """Assemble the scaffolding adversary.

    Real train rows (label 1) and fabricated perturbations of them (label 0)
    train the detector that toggles between the two rule models. The
    detector's forest searches every feature at each split by default: the
    adversary has no reason to handicap its own detector.
    """
    perturber = perturber or AttackerPerturber()
    rng = np.random.default_rng(seed)
    fake = perturber.perturb(ds.train_X, rng)
    real = np.repeat(ds.train_X, perturber.copies, axis=0)  # keep classes balanced
    X = np.vstack([real, fake])
    y = np.concatenate([np.ones(real.shape[0], dtype=np.int64), np.zeros(fake.shape[0], dtype=np.int64)])
    params = forest_params or ForestParams(max_features=None)
    d_ood = forest_fit(X, y, params, seed=seed)
    return ScaffoldModel(f_biased=f_biased, f_unbiased=f_unbiased, d_ood=d_ood)
