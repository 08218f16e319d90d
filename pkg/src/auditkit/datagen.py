"""Seeded generators for the three tabular audit tasks.

The audit experiments run against recidivism-, credit-, and crime-style
tabular data. This module synthesizes stand-ins with the same feature roles
and realistic marginals/correlations, so the full pipeline (CSV ingestion,
rule models, attack, detection, defense) can run self-contained. Generated
files are plain CSV and interchangeable with externally supplied data that
follows the same schema.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import Dataset, FeatureKind, FeatureMeta

BUILTIN_DATASETS = ("compas", "german", "cc")


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def compas_schema() -> list[FeatureMeta]:
    return [
        FeatureMeta("age"),
        FeatureMeta("priors_count"),
        FeatureMeta("length_of_stay"),
        FeatureMeta("c_charge_degree_F", FeatureKind.BINARY),
        FeatureMeta("sex_Male", FeatureKind.BINARY),
        FeatureMeta("African_American", FeatureKind.BINARY, is_sensitive=True),
    ]


def generate_compas(
    n_rows: int, seed: int, race_shift: float = 3.0, coupling: float = 1.6
) -> Dataset:
    """Recidivism-style data: label is two-year recidivism.

    A latent criminal-history factor couples priors, stay length, and charge
    degree (scaled by ``coupling``); ``race_shift`` scales the group-level
    covariate shifts. The joint structure matters: audit perturbations that
    jitter features independently fall off this manifold.
    """
    rng = np.random.default_rng(seed)
    race = rng.binomial(1, 0.51, n_rows)
    history = rng.normal(0.0, 1.0, n_rows)
    age = np.clip(
        np.round(
            33.0
            - 4.5 * coupling * history
            - 2.0 * race_shift * race
            + rng.normal(0.0, 6.0, n_rows)
        ),
        18,
        80,
    )
    rate = np.exp(
        0.7
        + 0.75 * coupling * history
        + 0.25 * race_shift * race
        - 0.012 * (age - 32.0)
    )
    priors = rng.poisson(np.clip(rate, 0.0, 40.0))
    charge_felony = rng.binomial(
        1, _sigmoid(0.35 + 1.0 * coupling * history + 0.15 * race_shift * race)
    )
    sex = rng.binomial(1, 0.81, n_rows)
    stay = np.round(
        np.exp(
            1.5
            + 0.6 * coupling * history
            + 0.45 * charge_felony
            + rng.normal(0.0, 0.35, n_rows)
        )
    ).clip(0, 600)
    logit = -1.2 + 0.45 * history + 0.35 * race - 0.02 * (age - 33.0) + 0.15 * charge_felony
    recid = rng.binomial(1, _sigmoid(logit))

    X = np.column_stack([age, priors, stay, charge_felony, sex, race]).astype(np.float64)
    return Dataset(X=X, Y=recid.astype(np.int64), meta=tuple(compas_schema()))


def german_schema() -> list[FeatureMeta]:
    return [
        FeatureMeta("LoanDuration"),
        FeatureMeta("LoanAmount"),
        FeatureMeta("LoanRateAsPercentOfIncome"),
        FeatureMeta("Age"),
        FeatureMeta("NumExistingCredits"),
        FeatureMeta("HasGuarantor", FeatureKind.BINARY),
        FeatureMeta("Gender_Male", FeatureKind.BINARY, is_sensitive=True),
    ]


def generate_german(n_rows: int, seed: int) -> Dataset:
    """Credit-scoring-style data: label 1 means good customer."""
    rng = np.random.default_rng(seed)
    gender = rng.binomial(1, 0.69, n_rows)
    duration = np.clip(np.round(rng.gamma(3.0, 7.0, n_rows)), 4, 72)
    amount = np.round(np.exp(rng.normal(7.8 + 0.02 * duration / 6, 0.9))).clip(250, 20000)
    rate = rng.integers(1, 5, n_rows)
    age = np.clip(np.round(rng.normal(35.0 + 2.0 * gender, 11.0)), 19, 75)
    credits = rng.integers(1, 4, n_rows)
    logit = 1.3 - 0.25 * rate - 0.012 * duration + 0.01 * (age - 35) + 0.3 * gender
    good = rng.binomial(1, _sigmoid(logit))
    guarantor = rng.binomial(1, 0.1 + 0.05 * good)

    X = np.column_stack([duration, amount, rate, age, credits, guarantor, gender])
    return Dataset(X=X.astype(np.float64), Y=good.astype(np.int64), meta=tuple(german_schema()))


def cc_schema() -> list[FeatureMeta]:
    return [
        FeatureMeta("population"),
        FeatureMeta("medIncome"),
        FeatureMeta("pctPoverty"),
        FeatureMeta("pctUnemployment"),
        FeatureMeta("pctYoungMale"),
        FeatureMeta("pctVacantHousing"),
        FeatureMeta("racePctWhite", is_sensitive=True),
    ]


def generate_cc(n_rows: int, seed: int) -> Dataset:
    """Community-crime-style data: label 1 means violent crime above the mean."""
    rng = np.random.default_rng(seed)
    # Latent disadvantage factor couples the census covariates.
    z = rng.normal(size=n_rows)
    population = np.exp(rng.normal(9.5, 1.2, n_rows))
    med_income = np.exp(10.5 - 0.25 * z + rng.normal(0, 0.25, n_rows))
    poverty = np.clip(12 + 6 * z + rng.normal(0, 3, n_rows), 0, 60)
    unemploy = np.clip(6 + 2.2 * z + rng.normal(0, 1.5, n_rows), 0, 30)
    young_male = np.clip(rng.normal(7.5, 1.5, n_rows), 3, 15)
    vacant = np.clip(6 + 2.5 * z + rng.normal(0, 2.5, n_rows), 0, 40)
    pct_white = np.clip(78 - 14 * z + rng.normal(0, 9, n_rows), 2, 99)

    crime_rate = 0.4 * z + 0.05 * young_male + rng.normal(0, 0.35, n_rows)
    label = (crime_rate > crime_rate.mean()).astype(np.int64)
    X = np.column_stack(
        [population, med_income, poverty, unemploy, young_male, vacant, pct_white]
    )
    return Dataset(X=X.astype(np.float64), Y=label, meta=tuple(cc_schema()))


_GENERATORS = {
    "compas": (generate_compas, compas_schema, "two_year_recid"),
    "german": (generate_german, german_schema, "good_customer"),
    "cc": (generate_cc, cc_schema, "high_violent_crime"),
}


def builtin_schema(dataset_id: str) -> list[FeatureMeta]:
    _, schema_fn, _ = _GENERATORS[dataset_id]
    return schema_fn()


def builtin_label_column(dataset_id: str) -> str:
    return _GENERATORS[dataset_id][2]


def generate_builtin(dataset_id: str, n_rows: int, seed: int) -> Dataset:
    if dataset_id not in _GENERATORS:
        raise KeyError(f"unknown builtin dataset {dataset_id!r}")
    gen, _, _ = _GENERATORS[dataset_id]
    return gen(n_rows, seed)


def write_csv(ds: Dataset, label_column: str, path) -> Path:
    """Write a raw dataset to CSV (header row, '.' decimals, no quoting)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [label_column])
        for row, label in zip(ds.X, ds.Y):
            writer.writerow([_fmt(v) for v in row] + [int(label)])
    return path


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))
