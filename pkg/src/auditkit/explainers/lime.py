"""Gaussian-neighborhood local surrogate explainer.

Perturbations are drawn about the instance in standardized units, weighted by
an exponential kernel on Euclidean distance, and a weighted ridge regression
on the model's hard labels yields the contributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .base import Explanation, PerturbationBatch


def default_kernel_width(n_features: int) -> float:
    return 0.75 * np.sqrt(n_features)


@dataclass
class LimeNeighborhood:
    """Perturbed samples around an anchor with proximity weights.

    Row 0 is the unperturbed anchor itself (weight exp(0) = 1).
    """

    samples: np.ndarray
    weights: np.ndarray
    anchor: np.ndarray
    kernel_width: float
    parent_index: int = -1

    @property
    def design(self) -> np.ndarray:
        return self.samples


def lime_weights(anchor: np.ndarray, samples: np.ndarray, kernel_width: float) -> np.ndarray:
    d2 = np.sum((samples - anchor) ** 2, axis=1)
    return np.exp(-d2 / kernel_width**2)


def lime_sample(
    x: np.ndarray,
    n: int,
    rng: np.random.Generator,
    categorical: dict[int, tuple[np.ndarray, np.ndarray]] | None = None,
) -> np.ndarray:
    """Draw ``n`` perturbations: continuous features get ``x + N(0, 1)``,
    categorical-coded columns are resampled from their train marginals.

    ``categorical`` maps a column index to (values, probabilities) in the
    same units as ``x``. Resampling keeps discrete columns on their support,
    the way tabular surrogate explainers treat non-continuous features.
    """
    samples = x + rng.standard_normal((n, x.shape[0]))
    if categorical:
        for j, (values, probs) in categorical.items():
            samples[:, j] = rng.choice(values, p=probs, size=n)
    return samples


def lime_neighborhood(
    x: np.ndarray,
    n_p: int,
    seed: int,
    kernel_width: float | None = None,
    categorical: dict[int, tuple[np.ndarray, np.ndarray]] | None = None,
    parent_index: int = -1,
) -> LimeNeighborhood:
    """Neighborhood of ``n_p`` samples about ``x`` (row 0 is ``x`` itself)."""
    if n_p < 1:
        raise ValueError("n_p must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    width = default_kernel_width(x.shape[0]) if kernel_width is None else kernel_width
    rng = np.random.default_rng(seed)
    samples = lime_sample(x, n_p, rng, categorical)
    samples[0] = x
    return LimeNeighborhood(
        samples=samples,
        weights=lime_weights(x, samples, width),
        anchor=x,
        kernel_width=width,
        parent_index=parent_index,
    )


def _weighted_ridge(design, y, weights, alpha):
    """Weighted least squares with an unpenalized intercept column."""
    A = np.hstack([np.ones((design.shape[0], 1)), design])
    Aw = A * weights[:, None]
    M = A.T @ Aw
    M[1:, 1:] += alpha * np.eye(design.shape[1])
    b = Aw.T @ y
    try:
        coef = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(M, b, rcond=None)
    return float(coef[0]), coef[1:]


def lime_explain(
    model,
    neighborhood: LimeNeighborhood,
    num_features: int = 10,
    label: int = 1,
    ridge: float = 1.0,
    labels: np.ndarray | None = None,
) -> Explanation:
    """Fit the weighted surrogate and keep the top ``num_features`` features.

    A preliminary dense fit ranks features by |coefficient|; the surrogate is
    refit on the selected set and the rest are recorded as zeros. ``labels``
    may supply precomputed model predictions to avoid re-querying.
    """
    samples, weights = neighborhood.samples, neighborhood.weights
    if samples.shape[0] == 0:
        raise ValueError("neighborhood is empty")
    preds = model.predict(samples) if labels is None else np.asarray(labels)
    y = (preds == label).astype(np.float64)

    n_features_total = samples.shape[1]
    if np.all(y == y[0]):
        # Constant response carries no slope information.
        return Explanation(
            contributions=np.zeros(n_features_total),
            intercept=float(y[0]),
            instance_index=neighborhood.parent_index,
            explainer="lime",
            label=label,
        )

    intercept, coef = _weighted_ridge(samples, y, weights, ridge)
    if num_features < n_features_total:
        keep = np.sort(np.argsort(-np.abs(coef), kind="stable")[:num_features])
        intercept, sub = _weighted_ridge(samples[:, keep], y, weights, ridge)
        coef = np.zeros(n_features_total)
        coef[keep] = sub
    return Explanation(
        contributions=coef,
        intercept=intercept,
        instance_index=neighborhood.parent_index,
        explainer="lime",
        label=label,
    )


class LimePerturber:
    """Neighborhood generator facade used by detection and defense."""

    kind = "lime"

    def __init__(
        self,
        n_features: int,
        n_p: int = 5000,
        kernel_width: float | None = None,
        num_features: int = 10,
        ridge: float = 1.0,
        label: int = 1,
        categorical: dict[int, tuple[np.ndarray, np.ndarray]] | None = None,
    ):
        self.n_features = n_features
        self.n_p = n_p
        self.kernel_width = (
            default_kernel_width(n_features) if kernel_width is None else kernel_width
        )
        self.num_features = num_features
        self.ridge = ridge
        self.label = label
        self.categorical = categorical

    def pool(self, x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """Detection-pool draw: i.i.d. samples from the same neighborhood law."""
        return lime_sample(x, n, rng, self.categorical)

    def generate(
        self, x: np.ndarray, n: int, rng: np.random.Generator, include_anchor: bool = False
    ) -> PerturbationBatch:
        samples = lime_sample(x, n, rng, self.categorical)
        if include_anchor and n >= 1:
            samples[0] = x
        return PerturbationBatch(samples=samples)

    def plain_explain(self, model, x: np.ndarray, seed: int, parent_index: int = -1):
        nb = lime_neighborhood(
            x,
            self.n_p,
            seed,
            kernel_width=self.kernel_width,
            categorical=self.categorical,
            parent_index=parent_index,
        )
        return lime_explain(
            model, nb, num_features=self.num_features, label=self.label, ridge=self.ridge
        )

    def explain_retained(
        self,
        model,
        x: np.ndarray,
        batch: PerturbationBatch,
        labels: np.ndarray,
        parent_index: int = -1,
    ) -> Explanation:
        nb = LimeNeighborhood(
            samples=batch.samples,
            weights=lime_weights(x, batch.samples, self.kernel_width),
            anchor=np.asarray(x, dtype=np.float64),
            kernel_width=self.kernel_width,
            parent_index=parent_index,
        )
        return lime_explain(
            model,
            nb,
            num_features=self.num_features,
            label=self.label,
            ridge=self.ridge,
            labels=labels,
        )
