"""Fidelity and infidelity scores for attacks, explainers, and the defense."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ShapeError
from .explainers.base import Explanation, adverse_contributions


def f_actual(f, f_biased, attack_active: bool):
    """The predictor whose behavior the audit should surface."""
    return f_biased if attack_active else f


def fidelity_f(f, f_act, X: np.ndarray) -> float:
    """Agreement rate between the deployed model and the actual one."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("fidelity_f needs a nonempty sample")
    return float(np.mean(f.predict(X) == f_act.predict(X)))


def fidelity_dood(dood, X_real: np.ndarray, X_perturbed: np.ndarray) -> float:
    """Balanced accuracy of the adversary's detector on real vs perturbed rows."""
    if X_real.shape[0] == 0 or X_perturbed.shape[0] == 0:
        raise ValueError("fidelity_dood needs nonempty real and perturbed sets")
    real_rate = float(np.mean(dood.predict(X_real) == 1))
    pert_rate = float(np.mean(dood.predict(X_perturbed) == 0))
    return 0.5 * (real_rate + pert_rate)


def spearman_rho(a, b) -> float:
    """Rank correlation with average (fractional) ranks for ties.

    Defined as 0 when either argument's ranks have zero variance.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("spearman_rho expects two equal-length vectors")
    if a.size < 2:
        raise ValueError("need at least 2 values")
    ra, rb = rankdata(a), rankdata(b)
    sa, sb = ra.std(), rb.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.mean((ra - ra.mean()) * (rb - rb.mean())) / (sa * sb))


def fidelity_g(
    explanations: list[Explanation],
    selected_features,
    adverse_label: int,
    n_features: int | None = None,
) -> float:
    """Rank agreement between explanations and the truly used feature set.

    Per sample, a target vector assigns F-1 to every selected feature and 0
    to the rest; it is rank-correlated with the signed contributions toward
    the adverse outcome, then averaged and scaled by 1/F.
    """
    if not explanations:
        raise ValueError("fidelity_g needs at least one explanation")
    F = n_features or explanations[0].n_features
    target = np.zeros(F)
    target[list(selected_features)] = F - 1
    rhos = [
        spearman_rho(target, adverse_contributions(e, adverse_label)) for e in explanations
    ]
    return float(np.mean(rhos) / F)


def fidelity_h(
    scores_real: np.ndarray,
    scores_perturbed: np.ndarray,
    targets_real: np.ndarray,
    targets_perturbed: np.ndarray,
) -> float:
    """1 minus the mean of the two pools' mean-square errors.

    Targets are the actual routing decisions (all ones when no attack is
    deployed); scores are the detector's probability estimates.
    """
    scores_real = np.asarray(scores_real, dtype=np.float64)
    scores_perturbed = np.asarray(scores_perturbed, dtype=np.float64)
    targets_real = np.asarray(targets_real, dtype=np.float64)
    targets_perturbed = np.asarray(targets_perturbed, dtype=np.float64)
    if scores_real.shape != targets_real.shape or scores_perturbed.shape != targets_perturbed.shape:
        raise ShapeError("score and target vectors must align")
    mse_real = float(np.mean((targets_real - scores_real) ** 2))
    mse_pert = float(np.mean((targets_perturbed - scores_perturbed) ** 2))
    return 1.0 - 0.5 * (mse_real + mse_pert)


def infidelity_defend_g(
    explanations_plain: list[Explanation], explanations_defended: list[Explanation]
) -> float:
    """Mean squared contribution disagreement, normalized by F * |X|."""
    if len(explanations_plain) != len(explanations_defended):
        raise ValueError("explanation sets must cover the same instances")
    if not explanations_plain:
        raise ValueError("need at least one explanation pair")
    F = explanations_plain[0].n_features
    total = 0.0
    for ep, ed in zip(explanations_plain, explanations_defended):
        if ep.n_features != F or ed.n_features != F:
            raise ValueError("explanations disagree on the feature count")
        total += float(np.sum((ep.contributions - ed.contributions) ** 2))
    return total / (F * len(explanations_plain))


def margin(delta_attack: float, delta_no_attack: float) -> float:
    """Detection headroom: attack-on minus attack-off score distance."""
    return delta_attack - delta_no_attack


@dataclass
class FidelityReport:
    """One experiment row: every reported score for a (dataset, attack,
    explainer) condition under a single seed."""

    fidelity_f: float
    fidelity_dood: float | None
    fidelity_g: float
    fidelity_h: float
    delta_cdf: float
    infidelity_defend_g: float
    fidelity_defend_f: float
    verdict: bool
    attack_active: bool
    n_harmless: int | None
    margin: float | None = None
    a_test: float | None = None
    a_test_g: float | None = None
    query_count: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "fidelity_f": self.fidelity_f,
            "fidelity_dood": self.fidelity_dood,
            "fidelity_g": self.fidelity_g,
            "fidelity_h": self.fidelity_h,
            "delta_cdf": self.delta_cdf,
            "infidelity_defend_g": self.infidelity_defend_g,
            "fidelity_defend_f": self.fidelity_defend_f,
            "verdict": bool(self.verdict),
            "attack_active": bool(self.attack_active),
            "n_harmless": self.n_harmless,
            "margin": self.margin,
            "a_test": self.a_test,
            "a_test_g": self.a_test_g,
            "query_count": self.query_count,
        }
        d.update(self.extra)
        return d
