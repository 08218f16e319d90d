"""Coalition-masking local surrogate with Shapley kernel weights.

Absent features of a coalition are filled from k-means background centroids;
the model's output for a coalition is the cluster-size-weighted mean over
those masked hybrids. A kernel-weighted least squares fit under the
efficiency constraint yields the contributions, and equals the exact Shapley
values when every proper coalition is enumerated.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from sklearn.cluster import KMeans

from ..errors import NumericalError
from .base import Explanation, PerturbationBatch


@dataclass
class ShapBackground:
    """k-means summary of the train rows: centroids plus cluster sizes."""

    centroids: np.ndarray
    cluster_weights: np.ndarray

    @property
    def n_centroids(self) -> int:
        return self.centroids.shape[0]


def shap_background(ds, k: int = 20, seed: int = 0) -> ShapBackground:
    """Cluster the train split (k-means++ seeding, 10 restarts)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    X = ds.train_X if hasattr(ds, "train_X") else np.asarray(ds, dtype=np.float64)
    distinct = np.unique(X, axis=0)
    if k >= distinct.shape[0]:
        counts = np.array(
            [np.sum(np.all(X == row, axis=1)) for row in distinct], dtype=np.float64
        )
        return ShapBackground(centroids=distinct, cluster_weights=counts)
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, random_state=seed)
    assign = km.fit_predict(X)
    return ShapBackground(
        centroids=km.cluster_centers_.astype(np.float64),
        cluster_weights=np.bincount(assign, minlength=k).astype(np.float64),
    )


def kernel_weight(n_features: int, size: int) -> float:
    """Shapley kernel weight of one coalition of the given size."""
    return (n_features - 1) / (comb(n_features, size) * size * (n_features - size))


def _size_probabilities(n_features: int) -> np.ndarray:
    sizes = np.arange(1, n_features)
    mass = (n_features - 1) / (sizes * (n_features - sizes))
    return mass / mass.sum()


def enumerate_coalitions(n_features: int) -> np.ndarray:
    """All 2^F - 2 proper coalitions as a 0/1 matrix, in bit-pattern order."""
    ints = np.arange(1, 2**n_features - 1, dtype=np.uint64)
    bits = (ints[:, None] >> np.arange(n_features, dtype=np.uint64)) & 1
    return bits.astype(np.float64)


def sample_coalitions(n_features: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Paired coalition draws with size probability proportional to kernel mass."""
    probs = _size_probabilities(n_features)
    sizes = np.arange(1, n_features)
    rows = []
    while len(rows) < count:
        s = int(rng.choice(sizes, p=probs))
        members = rng.choice(n_features, size=s, replace=False)
        z = np.zeros(n_features)
        z[members] = 1.0
        rows.append(z)
        if len(rows) < count:
            rows.append(1.0 - z)
    return np.asarray(rows)


def sample_uniform_coalitions(
    n_features: int, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform draws over proper coalitions (matches subsampling a full
    enumeration)."""
    rows = np.empty((count, n_features))
    filled = 0
    while filled < count:
        cand = rng.integers(0, 2, size=(count - filled, n_features)).astype(np.float64)
        sums = cand.sum(axis=1)
        ok = cand[(sums > 0) & (sums < n_features)]
        rows[filled : filled + ok.shape[0]] = ok
        filled += ok.shape[0]
    return rows


def mask_samples(x: np.ndarray, coalitions: np.ndarray, centroids: np.ndarray):
    """Expand coalitions into masked hybrids, coalition-major then centroid.

    Returns (samples, coalition_index, centroid_index); a feature keeps the
    instance value where the coalition bit is on and takes the centroid value
    elsewhere.
    """
    n_z, n_c = coalitions.shape[0], centroids.shape[0]
    z = coalitions[:, None, :]
    hybrids = z * x[None, None, :] + (1.0 - z) * centroids[None, :, :]
    samples = hybrids.reshape(n_z * n_c, -1)
    coalition_idx = np.repeat(np.arange(n_z), n_c)
    centroid_idx = np.tile(np.arange(n_c), n_z)
    return samples, coalition_idx, centroid_idx


@dataclass
class ShapNeighborhood:
    """Masked-hybrid samples plus the coalition design they came from."""

    coalitions: np.ndarray
    coalition_weights: np.ndarray
    samples: np.ndarray
    sample_coalition: np.ndarray
    sample_centroid: np.ndarray
    enumerated: bool
    anchor: np.ndarray
    parent_index: int = -1

    @property
    def design(self) -> np.ndarray:
        return self.coalitions

    @property
    def weights(self) -> np.ndarray:
        return self.coalition_weights


def shap_neighborhood(
    x: np.ndarray,
    bg: ShapBackground,
    budget: int,
    seed: int,
    parent_index: int = -1,
) -> ShapNeighborhood:
    """Build the coalition set: full enumeration when it fits the budget,
    otherwise paired kernel-mass sampling (duplicates merged into counts)."""
    x = np.asarray(x, dtype=np.float64)
    F = x.shape[0]
    if F < 2:
        raise ValueError("need at least 2 features")
    if budget < 2:
        raise ValueError("budget must be >= 2")

    full = 2**F - 2
    if full <= budget:
        coalitions = enumerate_coalitions(F)
        sizes = coalitions.sum(axis=1).astype(int)
        weights = np.array([kernel_weight(F, s) for s in sizes])
        enumerated = True
    else:
        rng = np.random.default_rng(seed)
        drawn = sample_coalitions(F, budget, rng)
        coalitions, counts = np.unique(drawn, axis=0, return_counts=True)
        weights = counts.astype(np.float64)
        enumerated = False

    samples, coal_idx, cent_idx = mask_samples(x, coalitions, bg.centroids)
    return ShapNeighborhood(
        coalitions=coalitions,
        coalition_weights=weights,
        samples=samples,
        sample_coalition=coal_idx,
        sample_centroid=cent_idx,
        enumerated=enumerated,
        anchor=x,
        parent_index=parent_index,
    )


def _coalition_values(
    indicators: np.ndarray,
    coalition_idx: np.ndarray,
    centroid_idx: np.ndarray,
    cluster_weights: np.ndarray,
    n_coalitions: int,
):
    """Cluster-weight-averaged model output per coalition.

    Returns (values, covered) where ``covered`` marks coalitions with at
    least one surviving hybrid.
    """
    w = cluster_weights[centroid_idx]
    num = np.bincount(coalition_idx, weights=w * indicators, minlength=n_coalitions)
    den = np.bincount(coalition_idx, weights=w, minlength=n_coalitions)
    covered = den > 0
    values = np.zeros(n_coalitions)
    values[covered] = num[covered] / den[covered]
    return values, covered


def _solve_constrained(coalitions, values, weights, v0, v1):
    """Kernel-weighted least squares with the efficiency constraint.

    The last feature is eliminated through sum(phi) = v1 - v0, which keeps
    the constraint exact regardless of conditioning.
    """
    F = coalitions.shape[1]
    t = v1 - v0
    A = coalitions[:, :-1] - coalitions[:, -1:]
    y = values - v0 - coalitions[:, -1] * t
    Aw = A * weights[:, None]
    M = A.T @ Aw
    b = Aw.T @ y
    try:
        beta = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"constrained coalition system is singular (cond={np.linalg.cond(M):.3e})"
        ) from None
    phi = np.empty(F)
    phi[:-1] = beta
    phi[-1] = t - beta.sum()
    return phi


def background_value(model, bg: ShapBackground, label: int) -> float:
    """Expected indicator of ``label`` under the background distribution."""
    preds = model.predict(bg.centroids)
    ind = (preds == label).astype(np.float64)
    return float(np.average(ind, weights=bg.cluster_weights))


def shap_explain(
    model,
    x: np.ndarray,
    neighborhood: ShapNeighborhood,
    bg: ShapBackground,
    label: int = 1,
    labels: np.ndarray | None = None,
    bg_value: float | None = None,
) -> Explanation:
    """Solve the kernel-weighted fit; exact Shapley when fully enumerated."""
    x = np.asarray(x, dtype=np.float64)
    preds = model.predict(neighborhood.samples) if labels is None else np.asarray(labels)
    indicators = (preds == label).astype(np.float64)

    v0 = background_value(model, bg, label) if bg_value is None else bg_value
    v1 = float(model.predict(x[None, :])[0] == label)
    values, covered = _coalition_values(
        indicators,
        neighborhood.sample_coalition,
        neighborhood.sample_centroid,
        bg.cluster_weights,
        neighborhood.coalitions.shape[0],
    )
    phi = _solve_constrained(
        neighborhood.coalitions[covered],
        values[covered],
        neighborhood.coalition_weights[covered],
        v0,
        v1,
    )
    return Explanation(
        contributions=phi,
        intercept=v0,
        instance_index=neighborhood.parent_index,
        explainer="shap",
        label=label,
    )


class ShapPerturber:
    """Masked-hybrid generator facade used by detection and defense.

    Defense counts are in hybrid samples (the unit the audited model is
    queried with); regenerated coalitions are drawn uniformly when the
    explainer would enumerate, otherwise by kernel-mass pairs.
    """

    kind = "shap"

    def __init__(self, n_features: int, bg: ShapBackground, budget: int, label: int = 1):
        self.n_features = n_features
        self.bg = bg
        self.budget = budget
        self.label = label
        self.enumerated = (2**n_features - 2) <= budget

    @property
    def n_p(self) -> int:
        n_coal = min(2**self.n_features - 2, self.budget)
        return n_coal * self.bg.n_centroids

    def _draw_coalitions(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.enumerated:
            return sample_uniform_coalitions(self.n_features, count, rng)
        return sample_coalitions(self.n_features, count, rng)

    def pool(self, x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.generate(x, n, rng).samples

    def generate(
        self, x: np.ndarray, n: int, rng: np.random.Generator, include_anchor: bool = False
    ) -> PerturbationBatch:
        n_c = self.bg.n_centroids
        n_coal = max(1, -(-n // n_c))  # ceil
        coalitions = self._draw_coalitions(n_coal, rng)
        samples, coal_idx, cent_idx = mask_samples(x, coalitions, self.bg.centroids)
        batch = PerturbationBatch(
            samples=samples,
            extras={
                "coalition": coalitions[coal_idx],
                "centroid": cent_idx,
            },
        )
        if samples.shape[0] > n:
            keep = rng.choice(samples.shape[0], size=n, replace=False)
            batch = batch.take(np.sort(keep))
        return batch

    def plain_explain(self, model, x: np.ndarray, seed: int, parent_index: int = -1):
        nb = shap_neighborhood(x, self.bg, self.budget, seed, parent_index=parent_index)
        return shap_explain(model, x, nb, self.bg, label=self.label)

    def explain_retained(
        self,
        model,
        x: np.ndarray,
        batch: PerturbationBatch,
        labels: np.ndarray,
        parent_index: int = -1,
    ) -> Explanation:
        """Rebuild the surrogate from filtered hybrids.

        Surviving hybrids are regrouped by coalition; each surviving coalition
        is weighted by its Shapley kernel weight.
        """
        coalitions, coal_idx = np.unique(batch.extras["coalition"], axis=0, return_inverse=True)
        sizes = coalitions.sum(axis=1).astype(int)
        weights = np.array([kernel_weight(self.n_features, s) for s in sizes])

        indicators = (np.asarray(labels) == self.label).astype(np.float64)
        values, covered = _coalition_values(
            indicators,
            coal_idx,
            batch.extras["centroid"],
            self.bg.cluster_weights,
            coalitions.shape[0],
        )
        v0 = background_value(model, self.bg, self.label)
        v1 = float(model.predict(np.asarray(x, dtype=np.float64)[None, :])[0] == self.label)
        phi = _solve_constrained(
            coalitions[covered], values[covered], weights[covered], v0, v1
        )
        return Explanation(
            contributions=phi,
            intercept=v0,
            instance_index=parent_index,
            explainer="shap",
            label=self.label,
        )
