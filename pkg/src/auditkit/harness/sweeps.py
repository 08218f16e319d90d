"""Sample-efficiency and hyperparameter sweeps over the detection pipeline."""

from __future__ import annotations

import dataclasses

from ..defense import cad_detect
from .config import ExperimentConfig
from .runner import child_seed, detect_for_context, fidelity_h_for, prepare_seed


def sweep_sample_efficiency(
    cfg: ExperimentConfig, fractions, n_p_grid
) -> list[dict]:
    """Detector quality vs reference-train fraction, and detection margin
    spread vs perturbation budget. Long-format rows, one per (cell, seed)."""
    fractions = list(fractions)
    n_p_grid = list(n_p_grid)
    if not fractions and not n_p_grid:
        raise ValueError("at least one sweep grid must be nonempty")
    if any(not 0.0 < fr <= 1.0 for fr in fractions):
        raise ValueError("fractions must lie in (0, 1]")

    rows = []
    for seed in cfg.seeds:
        ctx = prepare_seed(cfg, seed)
        X_audit = ctx.ds.test_X
        full_train = round(cfg.cad.n_train_fraction * X_audit.shape[0])
        X_held = X_audit[full_train:]
        for fr in fractions:
            n_train = max(cfg.cad.k + 1, round(fr * full_train))
            # the held-out rows stay fixed so fractions are comparable
            X = ctx.ds.test_X[full_train - n_train : full_train + X_held.shape[0]]
            det_res = detect_for_context(ctx, n_train=n_train, X=X)
            rows.append(
                {
                    "sweep": "train_fraction",
                    "value": fr,
                    "seed": seed,
                    "fidelity_h": fidelity_h_for(ctx, det_res, X_held),
                    "delta_cdf": det_res.delta_cdf,
                }
            )

    if n_p_grid:
        off_cfg = dataclasses.replace(
            cfg, attack=dataclasses.replace(cfg.attack, enabled=False)
        )
        on_cfg = dataclasses.replace(
            cfg, attack=dataclasses.replace(cfg.attack, enabled=True)
        )
        for seed in cfg.seeds:
            ctx_on = prepare_seed(on_cfg, seed)
            ctx_off = prepare_seed(off_cfg, seed)
            for n_p in n_p_grid:
                d_on = detect_for_context(ctx_on, n_p=int(n_p)).delta_cdf
                d_off = detect_for_context(ctx_off, n_p=int(n_p)).delta_cdf
                rows.append(
                    {
                        "sweep": "n_p",
                        "value": int(n_p),
                        "seed": seed,
                        "delta_on": d_on,
                        "delta_off": d_off,
                        "margin": d_on - d_off,
                    }
                )
    return rows


def sweep_hyperparameters(
    cfg: ExperimentConfig, k_grid, phi_set, p_set, splits=("test",)
) -> list[dict]:
    """Detection score and margin per (k, phi, p, split) cell."""
    k_grid, phi_set, p_set = list(k_grid), list(phi_set), list(p_set)
    if not k_grid or not phi_set or not p_set:
        raise ValueError("all hyperparameter grids must be nonempty")

    rows = []
    for seed in cfg.seeds:
        contexts = {}
        for enabled in (True, False):
            sub = dataclasses.replace(
                cfg, attack=dataclasses.replace(cfg.attack, enabled=enabled)
            )
            contexts[enabled] = prepare_seed(sub, seed)
        for split in splits:
            for k in k_grid:
                for phi in phi_set:
                    for p in p_set:
                        deltas = {}
                        for enabled, ctx in contexts.items():
                            X = ctx.ds.test_X if split == "test" else ctx.ds.train_X
                            params = dataclasses.replace(
                                cfg.cad.params(), k=int(k), phi=phi, minkowski_p=float(p)
                            )
                            n_train = round(cfg.cad.n_train_fraction * X.shape[0])
                            res = cad_detect(
                                ctx.f,
                                ctx.perturber,
                                params,
                                X,
                                n_train=n_train,
                                tau_global=cfg.cad.tau_global,
                                n_p=cfg.cad.n_p_cap,
                                seed=child_seed(seed, 5),
                            )
                            deltas[enabled] = res.delta_cdf
                        rows.append(
                            {
                                "k": int(k),
                                "phi": phi,
                                "p": float(p),
                                "split": split,
                                "seed": seed,
                                "delta_on": deltas[True],
                                "delta_off": deltas[False],
                                "margin": deltas[True] - deltas[False],
                            }
                        )
    return rows
