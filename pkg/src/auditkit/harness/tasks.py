"""Audit task registry: which rules the biased/unbiased models follow and
which label counts as the adverse outcome, per dataset."""

from __future__ import annotations

from dataclasses import dataclass

from ..dataset import Dataset
from ..errors import ConfigError
from ..models import TRAIN_MEAN, Predicate, RuleModel, RuleSpec


@dataclass(frozen=True)
class TaskSpec:
    dataset_id: str
    sensitive_feature: str
    adverse_label: int
    biased: RuleSpec
    unbiased_by_harmless: dict[int, RuleSpec]
    default_n_uncorrelated: int

    def bind_biased(self, ds: Dataset) -> RuleModel:
        return RuleModel.bind(self.biased, ds)

    def bind_unbiased(self, ds: Dataset, n_harmless: int) -> RuleModel:
        if n_harmless not in self.unbiased_by_harmless:
            raise ConfigError(
                f"task {self.dataset_id!r} has no unbiased rule for "
                f"n_harmless={n_harmless}"
            )
        return RuleModel.bind(self.unbiased_by_harmless[n_harmless], ds)


TASKS: dict[str, TaskSpec] = {
    # High risk (1) is the adverse outcome; the biased model scores by race,
    # the unbiased alternatives by appended label-independent coin flips.
    "compas": TaskSpec(
        dataset_id="compas",
        sensitive_feature="African_American",
        adverse_label=1,
        biased=RuleSpec((Predicate("African_American", 0.5),)),
        unbiased_by_harmless={
            1: RuleSpec((Predicate("uncorrelated_feature_1", 0.5),)),
            2: RuleSpec(
                (
                    Predicate("uncorrelated_feature_1", 0.5),
                    Predicate("uncorrelated_feature_2", 0.5),
                )
            ),
        },
        default_n_uncorrelated=2,
    ),
    # Bad customer (0) is the adverse outcome; the biased model grants good
    # standing by gender, the unbiased one by the loan-rate burden.
    "german": TaskSpec(
        dataset_id="german",
        sensitive_feature="Gender_Male",
        adverse_label=0,
        biased=RuleSpec((Predicate("Gender_Male", 0.5),)),
        unbiased_by_harmless={
            1: RuleSpec((Predicate("LoanRateAsPercentOfIncome", TRAIN_MEAN),)),
        },
        default_n_uncorrelated=0,
    ),
    # High violent crime (1) is the adverse outcome; both rules predict LOW
    # crime when they fire, hence the flipped labels.
    "cc": TaskSpec(
        dataset_id="cc",
        sensitive_feature="racePctWhite",
        adverse_label=1,
        biased=RuleSpec(
            (Predicate("racePctWhite", TRAIN_MEAN),), positive_label=0, negative_label=1
        ),
        unbiased_by_harmless={
            1: RuleSpec(
                (Predicate("uncorrelated_feature_1", 0.5),),
                positive_label=0,
                negative_label=1,
            ),
            2: RuleSpec(
                (
                    Predicate("uncorrelated_feature_1", 0.5, space="standardized"),
                    Predicate("uncorrelated_feature_2", -0.5, space="standardized"),
                ),
                positive_label=0,
                negative_label=1,
            ),
        },
        default_n_uncorrelated=2,
    ),
}
