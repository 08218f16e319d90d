"""End-to-end audit experiments: dataset, attack, detection, explanation,
defense, and the full score report, per seed."""

from __future__ import annotations

import traceback
from dataclasses import dataclass, field

import numpy as np

from ..datagen import builtin_label_column, builtin_schema, generate_builtin
from ..dataset import (
    Dataset,
    FeatureKind,
    FeatureMeta,
    categorical_sampling_map,
    load_csv,
    split_train_test,
    standardize,
    synthesize_uncorrelated,
)
from ..defense import DetectionResult, cad_detect, defended_explain
from ..explainers import LimePerturber, ShapPerturber, shap_background
from ..explainers.base import Explanation, rank_features
from ..explainers.lime import default_kernel_width
from ..metrics import (
    FidelityReport,
    f_actual,
    fidelity_dood,
    fidelity_f,
    fidelity_g,
    fidelity_h,
    infidelity_defend_g,
)
from ..models import AttackerPerturber, BlackBoxModel, build_attacker
from .config import ExperimentConfig
from .tasks import TASKS, TaskSpec


def child_seed(seed: int, *salts: int) -> int:
    """Stable derived seed for one pipeline stage."""
    return int(np.random.SeedSequence([int(seed), *map(int, salts)]).generate_state(1)[0])


def build_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    """Generate or ingest the raw data, append uncorrelated columns, split,
    and standardize."""
    dc = cfg.dataset
    task = TASKS[dc.id]
    if dc.csv_path is not None:
        schema = (
            [_meta_from_dict(m) for m in dc.schema] if dc.schema else builtin_schema(dc.id)
        )
        label = dc.label_column or builtin_label_column(dc.id)
        ds = load_csv(dc.csv_path, schema, label)
    else:
        ds = generate_builtin(dc.id, dc.n_rows, child_seed(seed, dc.seed_offset, 0))
    n_unc = task.default_n_uncorrelated if dc.n_uncorrelated is None else dc.n_uncorrelated
    for i in range(n_unc):
        ds = synthesize_uncorrelated(ds, count=1, seed=child_seed(seed, dc.seed_offset, 1, i))
    ds = split_train_test(ds, dc.train_fraction, seed=child_seed(seed, dc.seed_offset, 2))
    return standardize(ds)


def _meta_from_dict(m: dict) -> FeatureMeta:
    return FeatureMeta(
        name=m["name"],
        kind=FeatureKind(m.get("kind", "continuous")),
        is_sensitive=bool(m.get("is_sensitive", False)),
        is_uncorrelated=bool(m.get("is_uncorrelated", False)),
    )


def make_perturber(cfg: ExperimentConfig, ds: Dataset, seed: int):
    F = ds.n_features
    if cfg.explainer == "lime":
        if cfg.lime.kernel_width is not None:
            width = cfg.lime.kernel_width
        elif cfg.lime.kernel_width_rule == "linear":
            width = 0.75 * F
        else:
            width = default_kernel_width(F)
        return LimePerturber(
            n_features=F,
            n_p=cfg.lime.num_samples,
            kernel_width=width,
            num_features=cfg.lime.num_features,
            ridge=cfg.lime.ridge,
            categorical=categorical_sampling_map(ds),
        )
    bg = shap_background(ds, k=cfg.shap.background_k, seed=seed)
    budget = cfg.shap.budget if cfg.shap.budget is not None else min(2**F - 2, 2 * F + 2048)
    return ShapPerturber(n_features=F, bg=bg, budget=budget)


@dataclass
class SeedContext:
    """Everything one seeded experiment run needs."""

    cfg: ExperimentConfig
    seed: int
    ds: Dataset
    task: TaskSpec
    f: BlackBoxModel
    f_plain: BlackBoxModel
    scaffold: object | None
    perturber: object

    @property
    def attack_active(self) -> bool:
        return self.scaffold is not None


def prepare_seed(cfg: ExperimentConfig, seed: int) -> SeedContext:
    ds = build_dataset(cfg, seed)
    task = TASKS[cfg.dataset.id]
    biased = task.bind_biased(ds)
    scaffold = None
    if cfg.attack.enabled:
        unbiased = task.bind_unbiased(ds, cfg.attack.n_harmless)
        scheme = cfg.attack.scheme or ("mask" if cfg.explainer == "shap" else "gaussian")
        attacker_perturber = AttackerPerturber(
            scheme=scheme,
            copies=cfg.attack.copies,
            scale=cfg.attack.scale,
            background_k=cfg.shap.background_k,
            categorical=categorical_sampling_map(ds),
        )
        scaffold = build_attacker(
            ds, biased, unbiased, attacker_perturber, seed=child_seed(seed, 3)
        )
        f = BlackBoxModel(scaffold.predict, ds.n_features, name="scaffold")
    else:
        f = BlackBoxModel(biased.predict, ds.n_features, name="f")
    f_plain = BlackBoxModel(biased.predict, ds.n_features, name="f_plain")
    perturber = make_perturber(cfg, ds, child_seed(seed, 4))
    return SeedContext(
        cfg=cfg,
        seed=seed,
        ds=ds,
        task=task,
        f=f,
        f_plain=f_plain,
        scaffold=scaffold,
        perturber=perturber,
    )


def detect_for_context(
    ctx: SeedContext, n_train: int | None = None, n_p: int | None = None, X=None
) -> DetectionResult:
    cfg = ctx.cfg
    X_audit = ctx.ds.test_X if X is None else X
    if n_train is None:
        n_train = round(cfg.cad.n_train_fraction * X_audit.shape[0])
    return cad_detect(
        ctx.f,
        ctx.perturber,
        cfg.cad.params(),
        X_audit,
        n_train=n_train,
        tau_global=cfg.cad.tau_global,
        n_p=n_p if n_p is not None else cfg.cad.n_p_cap,
        seed=child_seed(ctx.seed, 5),
    )


def routing_targets(ctx: SeedContext, X_real, X_perturbed):
    """What the detector's scores should match: the adversary's routing when
    an attack is deployed, otherwise all ones."""
    if ctx.attack_active:
        return (
            (ctx.scaffold.d_ood.predict(X_real) == 1).astype(float),
            (ctx.scaffold.d_ood.predict(X_perturbed) == 1).astype(float),
        )
    return np.ones(X_real.shape[0]), np.ones(X_perturbed.shape[0])


def fidelity_h_for(ctx: SeedContext, det_res: DetectionResult, X_held) -> float:
    t_real, t_pert = routing_targets(ctx, X_held, det_res.perturbed_samples)
    return fidelity_h(det_res.scores_test, det_res.scores_perturbed, t_real, t_pert)


@dataclass
class SeedOutcome:
    report: FidelityReport
    explanations_plain: list[Explanation]
    explanations_defended: list[Explanation]
    det_result: DetectionResult
    feature_names: tuple[str, ...] = ()
    uncorrelated_names: tuple[str, ...] = ()


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedOutcome:
    ctx = prepare_seed(cfg, seed)
    ds, task, f = ctx.ds, ctx.task, ctx.f
    X_audit = ds.test_X
    n_train = round(cfg.cad.n_train_fraction * X_audit.shape[0])
    X_held = X_audit[n_train:]

    det_res = detect_for_context(ctx)
    fid_h = fidelity_h_for(ctx, det_res, X_held)

    biased_bb = BlackBoxModel(task.bind_biased(ds).predict, ds.n_features)
    f_act = f_actual(f, biased_bb, ctx.attack_active)
    fid_f = 1.0 if f_act is f else fidelity_f(f, f_act, X_audit)
    fid_dood = (
        fidelity_dood(ctx.scaffold.d_ood, X_held, det_res.perturbed_samples)
        if ctx.attack_active
        else None
    )

    cap = X_held.shape[0] if cfg.explain_cap is None else min(cfg.explain_cap, X_held.shape[0])
    n_p_defended = cfg.defended_n_p or ctx.perturber.n_p
    plain, defended, no_attack = [], [], []
    for i in range(cap):
        x = X_held[i]
        instance = n_train + i
        e_seed = child_seed(seed, 6, i)
        e_plain = ctx.perturber.plain_explain(f, x, e_seed, parent_index=instance)
        e_def = defended_explain(
            f,
            ctx.perturber,
            det_res.detector,
            x,
            n_p=n_p_defended,
            max_recursion=cfg.cad.max_recursion,
            seed=child_seed(seed, 7, i),
            parent_index=instance,
        )
        plain.append(e_plain)
        defended.append(e_def)
        if ctx.attack_active:
            # counterfactual reference: the same audit run against the model
            # that is not wrapped in the attack scaffold
            no_attack.append(
                ctx.perturber.plain_explain(ctx.f_plain, x, e_seed, parent_index=instance)
            )
        else:
            no_attack.append(e_plain)

    selected = [ds.index_of(task.sensitive_feature)]
    fid_g = fidelity_g(plain, selected, task.adverse_label)
    fid_def_f = fidelity_g(defended, selected, task.adverse_label)
    inf_g = infidelity_defend_g(no_attack, defended)

    report = FidelityReport(
        fidelity_f=fid_f,
        fidelity_dood=fid_dood,
        fidelity_g=fid_g,
        fidelity_h=fid_h,
        delta_cdf=det_res.delta_cdf,
        infidelity_defend_g=inf_g,
        fidelity_defend_f=fid_def_f,
        verdict=det_res.verdict,
        attack_active=ctx.attack_active,
        n_harmless=cfg.attack.n_harmless if ctx.attack_active else None,
        a_test=det_res.a_test,
        a_test_g=det_res.a_test_g,
        query_count=f.query_count,
        extra={"seed": seed},
    )
    return SeedOutcome(
        report=report,
        explanations_plain=plain,
        explanations_defended=defended,
        det_result=det_res,
        feature_names=ds.feature_names,
        uncorrelated_names=tuple(ds.feature_names[j] for j in ds.uncorrelated_indices),
    )


def top3_frequency(
    explanations: list[Explanation],
    adverse_label: int,
    feature_names,
    sensitive_names=(),
    uncorrelated_names=(),
) -> dict[int, dict[str, float]]:
    """Frequency of each feature bucket at explanation ranks 1 to 3.

    Buckets: each sensitive feature by name, any uncorrelated feature as
    "Uncorrelated", everything else as "Other". Frequencies at a rank sum
    to 1.
    """
    if not explanations:
        raise ValueError("top3_frequency needs at least one explanation")
    sensitive = set(sensitive_names)
    uncorrelated = set(uncorrelated_names)

    def bucket(j: int) -> str:
        name = feature_names[j]
        if name in sensitive:
            return name
        if name in uncorrelated:
            return "Uncorrelated"
        return "Other"

    table: dict[int, dict[str, float]] = {1: {}, 2: {}, 3: {}}
    for e in explanations:
        order = rank_features(e, adverse_label)
        for rank in (1, 2, 3):
            if rank <= order.size:
                b = bucket(int(order[rank - 1]))
                table[rank][b] = table[rank].get(b, 0.0) + 1.0
    n = float(len(explanations))
    return {r: {b: v / n for b, v in sorted(row.items())} for r, row in table.items()}


@dataclass
class RunArtifacts:
    """Everything one experiment (all seeds of one condition) produced."""

    config: ExperimentConfig
    run_name: str
    reports: list[FidelityReport]
    failures: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    top3_undefended: dict = field(default_factory=dict)
    top3_defended: dict = field(default_factory=dict)
    ecdf_scores: dict = field(default_factory=dict)


_AGG_FIELDS = (
    "fidelity_f",
    "fidelity_dood",
    "fidelity_g",
    "fidelity_h",
    "delta_cdf",
    "infidelity_defend_g",
    "fidelity_defend_f",
)


def aggregate_reports(reports: list[FidelityReport]) -> dict:
    out = {}
    for name in _AGG_FIELDS:
        vals = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not vals:
            out[name] = {"mean": None, "std": None}
            continue
        out[name] = {
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals)) if len(vals) >= 2 else "n/a",
        }
    out["verdict_rate"] = float(np.mean([r.verdict for r in reports])) if reports else None
    return out


def run_name_for(cfg: ExperimentConfig) -> str:
    attack = f"on{cfg.attack.n_harmless}" if cfg.attack.enabled else "off"
    return f"{cfg.dataset.id}_{cfg.explainer}_{attack}"


def run_audit(cfg: ExperimentConfig, output_dir=None) -> RunArtifacts:
    """Run every seed of one condition; persist artifacts when a directory
    is given. A failing seed is recorded and the rest still run."""
    cfg.validate()
    outcomes: list[SeedOutcome] = []
    failures = []
    for seed in cfg.seeds:
        try:
            outcomes.append(run_seed(cfg, seed))
        except Exception as e:  # noqa: BLE001 - seed isolation is intentional
            failures.append(
                {"seed": seed, "error": f"{type(e).__name__}: {e}",
                 "traceback": traceback.format_exc()}
            )

    task = TASKS[cfg.dataset.id]
    artifacts = RunArtifacts(
        config=cfg,
        run_name=run_name_for(cfg),
        reports=[o.report for o in outcomes],
        failures=failures,
        aggregate=aggregate_reports([o.report for o in outcomes]),
    )
    if outcomes:
        all_plain = [e for o in outcomes for e in o.explanations_plain]
        all_defended = [e for o in outcomes for e in o.explanations_defended]
        names = outcomes[0].feature_names
        unc = outcomes[0].uncorrelated_names
        artifacts.top3_undefended = top3_frequency(
            all_plain, task.adverse_label, names, (task.sensitive_feature,), unc
        )
        artifacts.top3_defended = top3_frequency(
            all_defended, task.adverse_label, names, (task.sensitive_feature,), unc
        )
        artifacts.ecdf_scores = {
            "test": np.concatenate([o.det_result.scores_test for o in outcomes]),
            "test_g": np.concatenate([o.det_result.scores_perturbed for o in outcomes]),
        }
    if output_dir is not None:
        from .reports import persist_artifacts

        persist_artifacts(artifacts, output_dir)
    return artifacts
