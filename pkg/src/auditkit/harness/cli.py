"""Command-line entry points for the audit toolkit.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime or
numerical error. The output directory can be overridden with the
``AUDITKIT_OUTPUT_DIR`` environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..errors import AuditError, ConfigError
from ..explainers.base import explanation_to_dict
from .config import ExperimentConfig, config_to_dict, load_config, save_config
from .reports import merge_reports, persist_artifacts, write_sweep_csv, write_table_csv
from .runner import build_dataset, prepare_seed, run_audit, run_seed
from .sweeps import sweep_hyperparameters, sweep_sample_efficiency


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="auditkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seeds", type=_int_list, default=None, help="override seed list")
        p.add_argument("--output-dir", default=None)

    p_ingest = sub.add_parser("ingest", help="build and standardize the dataset")
    add_common(p_ingest)

    p_audit = sub.add_parser("audit", help="run the full audit experiment")
    add_common(p_audit)

    p_explain = sub.add_parser("explain", help="explain held-out rows")
    add_common(p_explain)
    p_explain.add_argument("--rows", type=_int_list, default=[0])
    p_explain.add_argument("--defended", action="store_true")

    p_detect = sub.add_parser("detect", help="run attack detection only")
    add_common(p_detect)

    p_sweep = sub.add_parser("sweep", help="sample-efficiency or hyperparameter sweeps")
    add_common(p_sweep)
    p_sweep.add_argument("--kind", choices=("samples", "hyperparams"), default="samples")
    p_sweep.add_argument("--fractions", type=_float_list, default=[0.1, 0.5, 1.0])
    p_sweep.add_argument("--n-p-grid", type=_int_list, default=[])
    p_sweep.add_argument("--k-grid", type=_int_list, default=[1, 15, 50])
    p_sweep.add_argument("--phi-set", default="max")
    p_sweep.add_argument("--p-set", type=_float_list, default=[1.0])

    p_report = sub.add_parser("report", help="merge persisted runs into one table")
    p_report.add_argument("--runs", nargs="+", required=True)
    p_report.add_argument("--out", default="table3.csv")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seeds:
        cfg = dataclasses.replace(cfg, seeds=args.seeds)
    return cfg.validate()


def _outdir(args, cfg) -> Path:
    env = os.environ.get("AUDITKIT_OUTPUT_DIR")
    out = args.output_dir or env or cfg.output_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_ingest(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    ds = build_dataset(cfg, cfg.seeds[0])
    np.savez(
        out / f"{cfg.dataset.id}_dataset.npz",
        X=ds.X,
        Y=ds.Y,
        split=ds.split,
        mean=ds.norm_stats[0],
        std=ds.norm_stats[1],
    )
    summary = {
        "dataset": cfg.dataset.id,
        "rows": ds.n_rows,
        "features": list(ds.feature_names),
        "sensitive": [ds.feature_names[j] for j in ds.sensitive_indices],
        "uncorrelated": [ds.feature_names[j] for j in ds.uncorrelated_indices],
        "train_rows": int((ds.split == 0).sum()),
        "test_rows": int((ds.split == 1).sum()),
    }
    (out / f"{cfg.dataset.id}_summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return 0


def cmd_audit(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    artifacts = run_audit(cfg, output_dir=out)
    print(json.dumps({"run": artifacts.run_name, "aggregate": artifacts.aggregate}, indent=2))
    if artifacts.failures and not artifacts.reports:
        print("every seed failed", file=sys.stderr)
        return 3
    return 0


def cmd_explain(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    seed = cfg.seeds[0]
    ctx = prepare_seed(cfg, seed)
    X_audit = ctx.ds.test_X
    n_train = round(cfg.cad.n_train_fraction * X_audit.shape[0])
    X_held = X_audit[n_train:]

    det = None
    if args.defended:
        from .runner import detect_for_context

        det = detect_for_context(ctx).detector

    payload = []
    for r in args.rows:
        if not 0 <= r < X_held.shape[0]:
            raise ConfigError(f"row {r} outside the held-out range [0, {X_held.shape[0]})")
        x = X_held[r]
        from .runner import child_seed

        if args.defended:
            from ..defense import defended_explain

            e = defended_explain(
                ctx.f,
                ctx.perturber,
                det,
                x,
                n_p=cfg.defended_n_p or ctx.perturber.n_p,
                max_recursion=cfg.cad.max_recursion,
                seed=child_seed(seed, 7, r),
                parent_index=n_train + r,
            )
        else:
            e = ctx.perturber.plain_explain(
                ctx.f, x, child_seed(seed, 6, r), parent_index=n_train + r
            )
        d = explanation_to_dict(e)
        d["contributions"] = [
            {"feature": ctx.ds.feature_names[i], "value": c["value"]}
            for i, c in enumerate(d["contributions"])
        ]
        payload.append(d)
    text = json.dumps(payload, indent=2)
    (out / "explanations.json").write_text(text)
    print(text)
    return 0


def cmd_detect(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    from .reports import write_ecdf_csv
    from .runner import detect_for_context

    results = []
    for seed in cfg.seeds:
        ctx = prepare_seed(cfg, seed)
        res = detect_for_context(ctx)
        results.append({"seed": seed, **res.to_dict()})
        write_ecdf_csv(res.scores_test, out / f"ecdf_test_seed{seed}.csv")
        write_ecdf_csv(res.scores_perturbed, out / f"ecdf_test_g_seed{seed}.csv")
    (out / "detection.json").write_text(json.dumps(results, indent=2))
    print(json.dumps(results, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    if args.kind == "samples":
        rows = sweep_sample_efficiency(cfg, args.fractions, args.n_p_grid)
        path = out / "sweep_samples.csv"
    else:
        rows = sweep_hyperparameters(
            cfg, args.k_grid, args.phi_set.split(","), args.p_set
        )
        path = out / "sweep_hyperparams.csv"
    write_sweep_csv(rows, path)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def cmd_report(args) -> int:
    rows = merge_reports([Path(d) for d in args.runs])
    write_table_csv(rows, Path(args.out))
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "audit": cmd_audit,
    "explain": cmd_explain,
    "detect": cmd_detect,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except AuditError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
