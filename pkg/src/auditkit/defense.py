"""Attack detection and explanation defense.

Detection compares the anomaly-score distributions of real held-out rows and
pooled explainer perturbations through the difference of their ECDF areas.
Defense filters explainer perturbations down to those the detector considers
on-manifold, regenerating the shortfall recursively.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cad import CadParams, KnnCadDetector, knncad_fit, knncad_score
from .errors import DefenseInfeasibleError, StateError
from .explainers.base import PerturbationBatch, concat_batches


def ecdf_area(scores: np.ndarray) -> float:
    """Area under the empirical CDF of scores over [0, 1], trapezoidal rule.

    The integration polyline follows the ECDF step function exactly (each
    jump contributes a zero-width segment), so all-zero scores give area 1
    and all-one scores give area 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("ecdf_area needs at least one score")
    if scores.min() < -1e-12 or scores.max() > 1 + 1e-12:
        raise ValueError("scores must lie in [0, 1]")
    scores = np.clip(scores, 0.0, 1.0)

    grid, counts = np.unique(scores, return_counts=True)
    cum = np.cumsum(counts) / scores.size
    prev = np.concatenate([[0.0], cum[:-1]])

    xs = np.concatenate([[0.0], np.repeat(grid, 2), [1.0]])
    ys = np.concatenate([[0.0], np.column_stack([prev, cum]).ravel(), [1.0]])
    return float(np.trapezoid(ys, xs))


def ecdf_curve(scores: np.ndarray):
    """(score, cumulative fraction) pairs for plotting/export."""
    scores = np.asarray(scores, dtype=np.float64)
    grid, counts = np.unique(scores, return_counts=True)
    return grid, np.cumsum(counts) / scores.size


@dataclass
class DetectionResult:
    """Outcome of one detection run, with the score pools kept for metrics."""

    a_test: float
    a_test_g: float
    delta_cdf: float
    verdict: bool
    tau_global: float
    n_train: int
    n_p: int
    scores_test: np.ndarray = field(repr=False, default=None)
    scores_perturbed: np.ndarray = field(repr=False, default=None)
    perturbed_parents: np.ndarray = field(repr=False, default=None)
    perturbed_samples: np.ndarray = field(repr=False, default=None)
    detector: KnnCadDetector | None = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "a_test": self.a_test,
            "a_test_g": self.a_test_g,
            "delta_cdf": self.delta_cdf,
            "verdict": bool(self.verdict),
            "tau_global": self.tau_global,
            "n_train": self.n_train,
            "n_p": self.n_p,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def _stratified_quotas(total: int, n_parents: int, rng: np.random.Generator) -> np.ndarray:
    """Spread a sample budget across parents as evenly as possible."""
    quotas = np.full(n_parents, total // n_parents, dtype=np.int64)
    remainder = total - quotas.sum()
    if remainder:
        quotas[rng.permutation(n_parents)[:remainder]] += 1
    return quotas


def cad_detect(
    f,
    perturber,
    params: CadParams,
    X: np.ndarray,
    n_train: int,
    tau_global: float,
    n_p: int | None = None,
    seed: int = 0,
) -> DetectionResult:
    """Decide whether ``f`` behaves adversarially toward the explainer.

    The first ``n_train`` rows fit the detector; the rest are scored directly
    and through their pooled perturbations (capped at ``n_p`` samples with
    provenance-stratified subsampling). The verdict compares the ECDF-area
    difference against ``tau_global``.
    """
    X = np.asarray(X, dtype=np.float64)
    if n_train >= X.shape[0]:
        raise ValueError(f"n_train={n_train} must be below the number of rows {X.shape[0]}")
    X_ref, X_held = X[:n_train], X[n_train:]

    det = knncad_fit(f, X_ref, **asdict(params))
    scores_test = knncad_score(det, f, X_held)

    n_held = X_held.shape[0]
    full_pool = n_held * perturber.n_p
    if n_p is None:
        cap = min(full_pool, n_train * 10)  # default pooled budget
    else:
        cap = min(n_p, full_pool)

    seq = np.random.SeedSequence(seed)
    quota_rng = np.random.default_rng(seq.spawn(1)[0])
    quotas = _stratified_quotas(cap, n_held, quota_rng)
    row_rngs = [np.random.default_rng(s) for s in seq.spawn(n_held)]

    pools, parents = [], []
    for i, (x, q) in enumerate(zip(X_held, quotas)):
        if q == 0:
            continue
        pools.append(perturber.pool(x, int(q), row_rngs[i]))
        parents.append(np.full(int(q), i, dtype=np.int64))
    samples_g = np.vstack(pools)
    parent_idx = np.concatenate(parents)
    scores_g = knncad_score(det, f, samples_g)

    a_test = ecdf_area(scores_test)
    a_test_g = ecdf_area(scores_g)
    delta = a_test_g - a_test
    return DetectionResult(
        a_test=a_test,
        a_test_g=a_test_g,
        delta_cdf=delta,
        verdict=bool(delta >= tau_global),
        tau_global=tau_global,
        n_train=n_train,
        n_p=int(cap),
        scores_test=scores_test,
        scores_perturbed=scores_g,
        perturbed_parents=parent_idx,
        perturbed_samples=samples_g,
        detector=det,
    )


@dataclass
class DefendedNeighborhood:
    """Perturbations that survived anomaly filtering, plus bookkeeping."""

    batch: PerturbationBatch
    scores: np.ndarray
    labels: np.ndarray
    recursion_count: int
    discarded_count: int
    fallback_fill: int = 0
    threshold: float = float("nan")

    @property
    def samples(self) -> np.ndarray:
        return self.batch.samples

    @property
    def fallback_used(self) -> bool:
        return self.fallback_fill > 0


def cad_defend(
    f,
    perturber,
    det: KnnCadDetector,
    x: np.ndarray,
    n_p: int,
    max_recursion: int = 8,
    seed: int = 0,
    tau: float | None = None,
) -> DefendedNeighborhood:
    """Collect ``n_p`` perturbations scoring strictly above the threshold.

    Each round regenerates a full batch through the neighborhood law,
    abnormal samples are discarded, and surviving samples accumulate until
    ``n_p`` are retained, up to ``max_recursion`` extra rounds; if the cap is
    hit the remainder is filled with the highest-scoring discarded samples.
    Every generated sample costs exactly one query of ``f`` (reused later by
    the surrogate fit).
    """
    if n_p < 1:
        raise ValueError("n_p must be >= 1")
    if not det.fitted:
        raise StateError("detector is not fitted")
    threshold = det.defend_threshold if tau is None else tau
    x = np.asarray(x, dtype=np.float64)

    seq = np.random.SeedSequence(seed)
    kept: list[PerturbationBatch] = []
    kept_scores, kept_labels = [], []
    dropped: list[PerturbationBatch] = []
    dropped_scores, dropped_labels = [], []

    needed = n_p
    rounds = 0
    while needed > 0:
        rng = np.random.default_rng(seq.spawn(1)[0])
        batch = perturber.generate(x, n_p, rng, include_anchor=(rounds == 0))
        labels = f.predict(batch.samples)
        scores = knncad_score(det, None, batch.samples, labels=labels)
        keep = scores > threshold
        if keep.any():
            surplus = int(keep.sum()) - needed
            if surplus > 0:
                # keep only the first `needed` survivors of this round
                extra_positions = np.nonzero(keep)[0][needed:]
                keep[extra_positions] = False
            kept.append(batch.take(keep))
            kept_scores.append(scores[keep])
            kept_labels.append(labels[keep])
            needed -= int(keep.sum())
        if not keep.all():
            drop = ~keep
            dropped.append(batch.take(drop))
            dropped_scores.append(scores[drop])
            dropped_labels.append(labels[drop])
        if needed == 0 or rounds == max_recursion:
            break
        rounds += 1

    discarded_count = sum(s.size for s in dropped_scores)
    fallback_fill = 0
    if needed > 0:
        if not kept:
            raise DefenseInfeasibleError(
                f"no perturbation ever scored above {threshold}; the threshold is too strict"
            )
        # Recursion cap reached: fill with the least-abnormal discards.
        all_dropped = concat_batches(dropped)
        ds = np.concatenate(dropped_scores)
        dl = np.concatenate(dropped_labels)
        best = np.argsort(-ds, kind="stable")[:needed]
        kept.append(all_dropped.take(best))
        kept_scores.append(ds[best])
        kept_labels.append(dl[best])
        fallback_fill = int(best.size)

    return DefendedNeighborhood(
        batch=concat_batches(kept),
        scores=np.concatenate(kept_scores),
        labels=np.concatenate(kept_labels),
        recursion_count=rounds,
        discarded_count=discarded_count,
        fallback_fill=fallback_fill,
        threshold=threshold,
    )


def defended_explain(
    f,
    perturber,
    det: KnnCadDetector,
    x: np.ndarray,
    n_p: int,
    max_recursion: int = 8,
    seed: int = 0,
    tau: float | None = None,
    parent_index: int = -1,
):
    """Run the perturbation defense, then fit the surrogate on the retained
    neighborhood only (model predictions are reused, not re-queried)."""
    dn = cad_defend(f, perturber, det, x, n_p, max_recursion=max_recursion, seed=seed, tau=tau)
    return perturber.explain_retained(f, x, dn.batch, dn.labels, parent_index=parent_index)


@dataclass
class QueryPlan:
    """Interleaved query order over several neighborhoods, with its inverse."""

    order: np.ndarray  # (total, 2): neighborhood index, row index within it
    sizes: tuple[int, ...]
    single_warning: bool = False

    def apply(self, batches: list[np.ndarray]) -> np.ndarray:
        return np.vstack([batches[b][i : i + 1] for b, i in self.order])

    def restore(self, responses: np.ndarray) -> list[np.ndarray]:
        out = [None] * len(self.sizes)
        responses = np.asarray(responses)
        for b, n in enumerate(self.sizes):
            shape = (n,) + responses.shape[1:]
            out[b] = np.empty(shape, dtype=responses.dtype)
        for pos, (b, i) in enumerate(self.order):
            out[b][i] = responses[pos]
        return out


def stratified_query_shuffle(neighborhood_sizes) -> QueryPlan:
    """Round-robin interleave so consecutive queries alternate parents.

    Accepts sizes or objects exposing ``samples``. A run of equal parents can
    only appear once every other neighborhood is exhausted. A single
    neighborhood is returned unshuffled with a warning flag.
    """
    sizes = tuple(
        int(s) if isinstance(s, (int, np.integer)) else int(s.samples.shape[0])
        for s in neighborhood_sizes
    )
    if len(sizes) == 0:
        raise ValueError("need at least one neighborhood")
    if len(sizes) == 1:
        order = np.array([(0, i) for i in range(sizes[0])], dtype=np.int64)
        return QueryPlan(order=order, sizes=sizes, single_warning=True)

    pointers = [0] * len(sizes)
    order = []
    remaining = sum(sizes)
    while remaining:
        for b, n in enumerate(sizes):
            if pointers[b] < n:
                order.append((b, pointers[b]))
                pointers[b] += 1
                remaining -= 1
    return QueryPlan(order=np.array(order, dtype=np.int64), sizes=sizes)
