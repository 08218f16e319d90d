"""Random forest classifier built on axis-aligned gini-split trees.

Trees are stored as flat node arrays so prediction is a vectorized
traversal; the forest votes with ties broken toward the lower label index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateTrainingError, ShapeError

_LEAF = -1


@dataclass
class ForestParams:
    n_estimators: int = 100
    max_features: str | int | None = "sqrt"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    bootstrap: bool = True

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features is None:
            return n_features
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        m = int(self.max_features)
        if not 1 <= m <= n_features:
            raise ValueError(f"max_features {m} out of range for F={n_features}")
        return m


@dataclass
class _Tree:
    feature: np.ndarray    # split feature per node, _LEAF for leaves
    threshold: np.ndarray  # go left when x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # majority label, valid at leaves

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != _LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active[rows] = self.feature[node[rows]] != _LEAF
        return self.value[node]


def _majority(counts: np.ndarray) -> int:
    return int(np.argmax(counts))  # argmax picks the lower label on ties


def _best_split(Xf: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Return (weighted gini, threshold) for the best split of one feature."""
    order = np.argsort(Xf, kind="stable")
    xs, ys = Xf[order], y[order]
    n = xs.shape[0]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    left_counts = np.cumsum(onehot, axis=0)[:-1]        # counts for splits after row i
    total = left_counts[-1] + onehot[-1]
    right_counts = total - left_counts
    n_left = np.arange(1, n)
    n_right = n - n_left

    mids = 0.5 * (xs[:-1] + xs[1:])
    # the midpoint must fall strictly between its neighbors, otherwise the
    # value-space mask cannot reproduce the positional split (ULP-adjacent
    # values round onto an endpoint)
    valid = (mids > xs[:-1]) & (mids < xs[1:])
    valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return np.inf, 0.0

    gini_l = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
    gini_r = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
    score = (n_left * gini_l + n_right * gini_r) / n
    score = np.where(valid, score, np.inf)
    i = int(np.argmin(score))
    return float(score[i]), float(mids[i])


def _grow_tree(X, y, n_classes, params: ForestParams, rng: np.random.Generator) -> _Tree:
    feature, threshold, left, right, value = [], [], [], [], []
    m_try = params.resolve_max_features(X.shape[1])

    def new_node():
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(0)
        right.append(0)
        value.append(0)
        return len(feature) - 1

    stack = [(np.arange(X.shape[0]), new_node(), 0)]
    while stack:
        rows, node, depth = stack.pop()
        counts = np.bincount(y[rows], minlength=n_classes)
        value[node] = _majority(counts)
        if (
            np.count_nonzero(counts) <= 1
            or rows.size < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            continue
        best = (np.inf, 0.0, -1)
        for f in rng.choice(X.shape[1], size=m_try, replace=False):
            score, thr = _best_split(X[rows, f], y[rows], n_classes, params.min_samples_leaf)
            if score < best[0]:
                best = (score, thr, int(f))
        if best[2] < 0:
            continue
        _, thr, f = best
        mask = X[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((rows[mask], left[node], depth + 1))
        stack.append((rows[~mask], right[node], depth + 1))

    return _Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.int64),
    )


@dataclass
class RandomForest:
    trees: list[_Tree]
    n_classes: int
    n_features: int
    params: ForestParams = field(default_factory=ForestParams)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(
                f"expected (n, {self.n_features}) matrix, got {X.shape}"
            )
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            votes[rows, tree.predict(X)] += 1
        return np.argmax(votes, axis=1)  # ties -> lower label index

    def to_dict(self) -> dict:
        return {
            "format": "auditkit-forest",
            "version": 1,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        if d.get("format") != "auditkit-forest" or d.get("version") != 1:
            raise ValueError("not a recognized forest file")
        trees = [
            _Tree(
                np.asarray(t["feature"], dtype=np.int64),
                np.asarray(t["threshold"], dtype=np.float64),
                np.asarray(t["left"], dtype=np.int64),
                np.asarray(t["right"], dtype=np.int64),
                np.asarray(t["value"], dtype=np.int64),
            )
            for t in d["trees"]
        ]
        return cls(trees=trees, n_classes=d["n_classes"], n_features=d["n_features"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "RandomForest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def forest_fit(
    train_X: np.ndarray,
    train_y: np.ndarray,
    params: ForestParams | None = None,
    seed: int = 0,
) -> RandomForest:
    """Grow a forest of gini trees on bootstrap resamples (when enabled)."""
    params = params or ForestParams()
    X = np.asarray(train_X, dtype=np.float64)
    y = np.asarray(train_y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    n_classes = int(y.max()) + 1
    n = X.shape[0]

    trees = []
    for tree_rng in _spawn_rngs(seed, params.n_estimators):
        if params.bootstrap:
            idx = tree_rng.integers(0, n, size=n)
            Xb, yb = X[idx], y[idx]
        else:
            Xb, yb = X, y
        trees.append(_grow_tree(Xb, yb, n_classes, params, tree_rng))
    return RandomForest(trees=trees, n_classes=n_classes, n_features=X.shape[1], params=params)


def _spawn_rngs(seed: int, count: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]
