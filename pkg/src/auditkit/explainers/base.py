"""Shared explanation types and ranking helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Explanation:
    """Additive per-feature contributions for one explained instance.

    ``contributions[j]`` is the contribution of feature j toward the class
    ``label`` (the class whose indicator the surrogate regressed). Dense: one
    entry per feature; unselected features hold exact zeros.
    """

    contributions: np.ndarray
    intercept: float
    instance_index: int
    explainer: str
    label: int
    feature_names: tuple[str, ...] | None = None

    @property
    def n_features(self) -> int:
        return self.contributions.shape[0]


def rank_features(explanation: Explanation, adverse_label: int) -> np.ndarray:
    """Order features (0-based indices) by decreasing contribution toward
    ``adverse_label``, ties broken toward the lower index.
    """
    contrib = adverse_contributions(explanation, adverse_label)
    return np.argsort(-contrib, kind="stable")


def adverse_contributions(explanation: Explanation, adverse_label: int) -> np.ndarray:
    """Signed contributions toward the adverse outcome.

    The surrogate regressed the indicator of ``explanation.label``; flipping
    the sign reorients it toward the other class of a binary problem.
    """
    if adverse_label == explanation.label:
        return explanation.contributions.copy()
    return -explanation.contributions


def explanation_to_dict(e: Explanation) -> dict:
    names = e.feature_names or tuple(str(j) for j in range(e.n_features))
    return {
        "instance_id": e.instance_index,
        "explainer": e.explainer,
        "contributions": [
            {"feature": name, "value": float(v)} for name, v in zip(names, e.contributions)
        ],
        "intercept": float(e.intercept),
        "label": int(e.label),
    }


def explanation_from_dict(d: dict) -> Explanation:
    contribs = np.asarray([c["value"] for c in d["contributions"]], dtype=np.float64)
    names = tuple(c["feature"] for c in d["contributions"])
    return Explanation(
        contributions=contribs,
        intercept=float(d["intercept"]),
        instance_index=int(d["instance_id"]),
        explainer=d["explainer"],
        label=int(d.get("label", 1)),
        feature_names=names,
    )


@dataclass
class PerturbationBatch:
    """One round of generated perturbations plus per-sample provenance.

    ``extras`` carries whatever the owning explainer needs to rebuild a
    surrogate from a filtered subset (e.g. coalition bits for the
    game-theoretic explainer); every array is aligned with ``samples`` rows.
    """

    samples: np.ndarray
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    def take(self, mask_or_idx) -> "PerturbationBatch":
        return PerturbationBatch(
            samples=self.samples[mask_or_idx],
            extras={k: v[mask_or_idx] for k, v in self.extras.items()},
        )


def concat_batches(batches: list[PerturbationBatch]) -> PerturbationBatch:
    keys = batches[0].extras.keys() if batches else ()
    return PerturbationBatch(
        samples=np.concatenate([b.samples for b in batches], axis=0)
        if batches
        else np.empty((0, 0)),
        extras={k: np.concatenate([b.extras[k] for b in batches], axis=0) for k in keys},
    )
