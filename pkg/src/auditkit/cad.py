"""k-nearest-neighbor conditional anomaly detection.

A prediction is scored by comparing aggregated distances to reference
neighbors of the predicted class against those of the other classes: the
ratio of the two on a log scale, squashed through the logistic function,
collapses to ``d_other / (d_other + d_same)``. Low scores mean the model's
answer is unlikely given where the query sits.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.neighbors import BallTree

from .errors import StateError

PHI_CHOICES = ("min", "max", "mean", "median")


@dataclass
class CadParams:
    """Detector hyperparameters bundled for fitting."""

    k: int = 15
    phi: str = "max"
    epsilon: float = 0.1
    minkowski_p: float = 1.0
    include_self: bool = True
    tau_defend: float | None = 0.75


def dynamic_range(a: float, b: float) -> float:
    """log(a / b), the ratio of two positive magnitudes on the log scale."""
    if math.isinf(a) and math.isinf(b):
        raise ValueError("dynamic range of two infinite values is undefined")
    if a <= 0 or b <= 0:
        raise ValueError("dynamic range needs positive arguments")
    if math.isinf(a):
        return math.inf
    if math.isinf(b):
        return -math.inf
    return math.log(a / b)


def zeta(d_other: float, d_same: float) -> float:
    """Probability that the prediction is normal: ``d_other / (d_other + d_same)``.

    This is the algebraic closed form of the logistic-of-log-ratio mapping,
    extended to the limit cases: an infinite ``d_other`` (no opposing
    neighbors) gives 1, an infinite ``d_same`` gives 0, and the two
    degenerate ties (both infinite, both zero) give 0.5.
    """
    other_inf, same_inf = math.isinf(d_other), math.isinf(d_same)
    if other_inf and same_inf:
        return 0.5
    if other_inf:
        return 1.0
    if same_inf:
        return 0.0
    if d_other == 0.0 and d_same == 0.0:
        return 0.5
    return d_other / (d_other + d_same)


def _zeta_vec(d_other: np.ndarray, d_same: np.ndarray) -> np.ndarray:
    other_inf, same_inf = np.isinf(d_other), np.isinf(d_same)
    both_zero = (d_other == 0.0) & (d_same == 0.0)
    denom = d_other + d_same
    safe = ~(other_inf | same_inf | both_zero)
    out = np.empty(d_other.shape, dtype=np.float64)
    out[safe] = d_other[safe] / denom[safe]
    out[other_inf & ~same_inf] = 1.0
    out[same_inf & ~other_inf] = 0.0
    out[other_inf & same_inf] = 0.5
    out[both_zero] = 0.5
    return out


def _aggregate(distances: np.ndarray, mask: np.ndarray, phi: str) -> np.ndarray:
    """Apply the aggregator over masked neighbor distances; empty -> inf."""
    counts = mask.sum(axis=1)
    empty = counts == 0
    if phi == "min":
        out = np.where(mask, distances, np.inf).min(axis=1)
    elif phi == "max":
        out = np.where(mask, distances, -np.inf).max(axis=1)
    elif phi == "mean":
        with np.errstate(invalid="ignore"):
            out = np.where(mask, distances, 0.0).sum(axis=1) / counts
    elif phi == "median":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # empty rows handled below
            out = np.nanmedian(np.where(mask, distances, np.nan), axis=1)
    else:
        raise ValueError(f"phi must be one of {PHI_CHOICES}, got {phi!r}")
    out = np.asarray(out, dtype=np.float64)
    out[empty] = np.inf
    return out


@dataclass
class KnnCadDetector:
    """Fitted distribution of normality over (x, f(x)) pairs."""

    reference_X: np.ndarray
    reference_Y: np.ndarray
    k: int
    phi: str
    epsilon: float
    minkowski_p: float
    tau: float = math.nan
    tau_defend: float | None = None
    include_self: bool = True
    classes_: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    _tree: BallTree | None = None

    def __post_init__(self):
        if self._tree is None:
            self._tree = BallTree(self.reference_X, metric="minkowski", p=self.minkowski_p)
        if self.classes_.size == 0:
            self.classes_ = np.unique(self.reference_Y)

    @property
    def fitted(self) -> bool:
        return not math.isnan(self.tau)

    @property
    def defend_threshold(self) -> float:
        return self.tau if self.tau_defend is None else self.tau_defend

    def to_dict(self) -> dict:
        return {
            "format": "auditkit-knncad",
            "version": 1,
            "k": self.k,
            "phi": self.phi,
            "epsilon": self.epsilon,
            "minkowski_p": self.minkowski_p,
            "tau": self.tau,
            "tau_defend": self.tau_defend,
            "include_self": self.include_self,
            "reference_X": self.reference_X.tolist(),
            "reference_Y": self.reference_Y.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnnCadDetector":
        if d.get("format") != "auditkit-knncad" or d.get("version") != 1:
            raise ValueError("not a recognized detector file")
        return cls(
            reference_X=np.asarray(d["reference_X"], dtype=np.float64),
            reference_Y=np.asarray(d["reference_Y"], dtype=np.int64),
            k=int(d["k"]),
            phi=d["phi"],
            epsilon=float(d["epsilon"]),
            minkowski_p=float(d["minkowski_p"]),
            tau=float(d["tau"]),
            tau_defend=d["tau_defend"],
            include_self=bool(d["include_self"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "KnnCadDetector":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _score_from_neighbors(
    det: KnnCadDetector, distances: np.ndarray, neighbor_labels: np.ndarray, y: np.ndarray
) -> np.ndarray:
    n = distances.shape[0]
    agg = np.empty((n, det.classes_.size))
    for ci, c in enumerate(det.classes_):
        agg[:, ci] = _aggregate(distances, neighbor_labels == c, det.phi)

    class_pos = {int(c): i for i, c in enumerate(det.classes_)}
    d_same = np.full(n, np.inf)  # a class absent from the reference has no support
    known = np.array([int(v) in class_pos for v in y])
    if known.any():
        cols = np.array([class_pos[int(v)] for v in y[known]])
        d_same[known] = agg[np.nonzero(known)[0], cols]

    scores = np.zeros(n)
    n_terms = np.zeros(n)
    for ci, c in enumerate(det.classes_):
        others = y != c
        if not others.any():
            continue
        scores[others] += _zeta_vec(agg[others, ci], d_same[others])
        n_terms[others] += 1
    no_comparison = n_terms == 0  # only the predicted class exists in the reference
    scores[~no_comparison] /= n_terms[~no_comparison]
    scores[no_comparison] = 1.0
    return scores


def knncad_score(
    det: KnnCadDetector,
    f,
    X: np.ndarray,
    labels: np.ndarray | None = None,
) -> np.ndarray:
    """Score rows of X in [0, 1]; lower means more anomalous.

    Queries ``f`` exactly once per row unless ``labels`` supplies
    precomputed predictions. Multi-class inputs average the comparison of
    the predicted class against every other reference class.
    """
    if not det.fitted:
        raise StateError("detector is not fitted")
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    y = f.predict(X) if labels is None else np.asarray(labels, dtype=np.int64)
    distances, indices = det._tree.query(X, k=det.k)
    return _score_from_neighbors(det, distances, det.reference_Y[indices], y)


def knncad_fit(
    f,
    X: np.ndarray,
    k: int = 15,
    phi: str = "max",
    epsilon: float = 0.1,
    minkowski_p: float = 1.0,
    include_self: bool = True,
    tau_defend: float | None = None,
) -> KnnCadDetector:
    """Fit the distribution of normality on the auditor's reference rows.

    The threshold tau is the score at rank ``round(epsilon * n)`` (0-based,
    banker's rounding, clamped) of the ascending-sorted training scores.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] <= k:
        raise ValueError(f"need more than k={k} reference rows, got {X.shape[0]}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if phi not in PHI_CHOICES:
        raise ValueError(f"phi must be one of {PHI_CHOICES}, got {phi!r}")
    if minkowski_p < 1:
        raise ValueError("minkowski_p must be >= 1")

    reference_Y = f.predict(X)
    det = KnnCadDetector(
        reference_X=X,
        reference_Y=reference_Y,
        k=k,
        phi=phi,
        epsilon=epsilon,
        minkowski_p=minkowski_p,
        include_self=include_self,
        tau_defend=tau_defend,
    )
    det.tau = tau_from_scores(_fit_scores(det, reference_Y), epsilon)
    return det


def tau_from_scores(scores: np.ndarray, epsilon: float) -> float:
    """Threshold at rank round(epsilon * n) of the ascending-sorted scores
    (banker's rounding, 0-based, clamped to a valid index)."""
    ordered = np.sort(np.asarray(scores, dtype=np.float64))
    idx = min(max(round(epsilon * ordered.size), 0), ordered.size - 1)
    return float(ordered[idx])


def _fit_scores(det: KnnCadDetector, reference_Y: np.ndarray) -> np.ndarray:
    """Training scores of the reference set against itself.

    With ``include_self`` each row participates in its own neighborhood
    (distance 0, same label); otherwise the nearest hit is dropped and the
    neighborhood is the k next rows.
    """
    if det.include_self:
        distances, indices = det._tree.query(det.reference_X, k=det.k)
        return _score_from_neighbors(det, distances, det.reference_Y[indices], reference_Y)
    distances, indices = det._tree.query(det.reference_X, k=det.k + 1)
    return _score_from_neighbors(
        det, distances[:, 1:], det.reference_Y[indices[:, 1:]], reference_Y
    )


def is_anomalous(det: KnnCadDetector, scores: np.ndarray) -> np.ndarray:
    """Flag scores at or below the fitted threshold."""
    if not det.fitted:
        raise StateError("detector is not fitted")
    return np.asarray(scores) <= det.tau
