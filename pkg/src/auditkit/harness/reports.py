"""Artifact writers: report JSON, score-table CSV, rank-frequency CSV, and
ECDF curve CSV. Writes are atomic (temp file then rename)."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from ..defense import ecdf_curve
from .config import config_to_dict

METRIC_COLUMNS = (
    "fidelity_f",
    "fidelity_dood",
    "fidelity_g",
    "fidelity_h",
    "delta_cdf",
    "infidelity_defend_g",
    "fidelity_defend_f",
)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_report_json(artifacts, path: Path) -> None:
    payload = {
        "run": artifacts.run_name,
        "config": config_to_dict(artifacts.config),
        "per_seed": [r.to_dict() for r in artifacts.reports],
        "aggregate": artifacts.aggregate,
        "failures": [
            {"seed": f["seed"], "error": f["error"]} for f in artifacts.failures
        ],
        "top3_undefended": artifacts.top3_undefended,
        "top3_defended": artifacts.top3_defended,
    }
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def table_row(artifacts) -> dict:
    cfg = artifacts.config
    agg = artifacts.aggregate
    row = {
        "dataset": cfg.dataset.id,
        "explainer": cfg.explainer,
        "attack": "on" if cfg.attack.enabled else "off",
        "n_harmless": cfg.attack.n_harmless if cfg.attack.enabled else "",
        "verdict_rate": agg.get("verdict_rate"),
    }
    for name in METRIC_COLUMNS:
        stats = agg.get(name, {})
        row[name] = stats.get("mean")
        row[f"{name}_std"] = stats.get("std")
    return row


def write_table_csv(rows: list[dict], path: Path) -> None:
    header = ["dataset", "explainer", "attack", "n_harmless"]
    for m in METRIC_COLUMNS:
        header += [m, f"{m}_std"]
    header.append("verdict_rate")
    if any("margin" in r for r in rows):
        header.append("margin")
    out = [["" if r.get(c) is None else r.get(c, "") for c in header] for r in rows]
    _atomic_write(path, _csv_text(header, out))


def write_top3_csv(table: dict, path: Path) -> None:
    rows = [
        (rank, bucket, freq)
        for rank in sorted(table)
        for bucket, freq in sorted(table[rank].items())
    ]
    _atomic_write(path, _csv_text(("rank", "feature", "frequency"), rows))


def write_ecdf_csv(scores, path: Path) -> None:
    grid, frac = ecdf_curve(scores)
    rows = list(zip(grid.tolist(), frac.tolist()))
    _atomic_write(path, _csv_text(("score", "cumulative_fraction"), rows))


def write_sweep_csv(rows: list[dict], path: Path) -> None:
    if not rows:
        raise ValueError("no sweep rows to write")
    header = list(rows[0].keys())
    out = [[r.get(c, "") for c in header] for r in rows]
    _atomic_write(path, _csv_text(header, out))


def persist_artifacts(artifacts, output_dir) -> Path:
    out = Path(output_dir) / artifacts.run_name
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(artifacts, out / "report.json")
    write_table_csv([table_row(artifacts)], out / "table3.csv")
    if artifacts.top3_undefended:
        write_top3_csv(artifacts.top3_undefended, out / "top3_undefended.csv")
        write_top3_csv(artifacts.top3_defended, out / "top3_defended.csv")
    for pool, scores in artifacts.ecdf_scores.items():
        write_ecdf_csv(scores, out / f"ecdf_{pool}.csv")
    return out


def merge_reports(run_dirs: list[Path]) -> list[dict]:
    """Collect table rows from persisted runs and attach detection margins
    for attack/no-attack pairs of the same dataset and explainer."""
    rows = []
    for d in run_dirs:
        report = json.loads((Path(d) / "report.json").read_text())
        agg = report["aggregate"]
        cfg = report["config"]
        row = {
            "dataset": cfg["dataset"]["id"],
            "explainer": cfg["explainer"],
            "attack": "on" if cfg["attack"]["enabled"] else "off",
            "n_harmless": cfg["attack"]["n_harmless"] if cfg["attack"]["enabled"] else "",
            "verdict_rate": agg.get("verdict_rate"),
        }
        for name in METRIC_COLUMNS:
            stats = agg.get(name) or {}
            row[name] = stats.get("mean")
            row[f"{name}_std"] = stats.get("std")
        rows.append(row)

    off_delta = {
        (r["dataset"], r["explainer"]): r["delta_cdf"]
        for r in rows
        if r["attack"] == "off" and r["delta_cdf"] is not None
    }
    for r in rows:
        base = off_delta.get((r["dataset"], r["explainer"]))
        if r["attack"] == "on" and base is not None and r["delta_cdf"] is not None:
            r["margin"] = r["delta_cdf"] - base
        else:
            r["margin"] = ""
    return rows
