import threading

import numpy as np
import pytest

from auditkit.datagen import generate_compas, generate_german
from auditkit.dataset import split_train_test, standardize, synthesize_uncorrelated
from auditkit.errors import SchemaError, ShapeError
from auditkit.models import (
    TRAIN_MEAN,
    AttackerPerturber,
    BlackBoxModel,
    Predicate,
    RuleModel,
    RuleSpec,
    ScaffoldModel,
    build_attacker,
)


def compas_ds(n=600, seed=0, n_uncorrelated=2):
    ds = generate_compas(n, seed)
    ds = synthesize_uncorrelated(ds, count=n_uncorrelated, seed=seed + 1)
    ds = split_train_test(ds, 0.8, seed=seed + 2)
    return standardize(ds)


def race_rule(ds):
    return RuleModel.bind(RuleSpec((Predicate("African_American", 0.5),)), ds)


def uncorrelated_rule(ds):
    return RuleModel.bind(RuleSpec((Predicate("uncorrelated_feature_1", 0.5),)), ds)


class TestBlackBoxModel:
    def test_counter_increments_by_rows(self):
        m = BlackBoxModel(lambda X: np.zeros(X.shape[0], dtype=int), 3)
        m.predict(np.zeros((4, 3)))
        m.predict(np.zeros((6, 3)))
        assert m.query_count == 10

    def test_shape_validation(self):
        m = BlackBoxModel(lambda X: np.zeros(X.shape[0], dtype=int), 3)
        with pytest.raises(ShapeError):
            m.predict(np.zeros((4, 2)))

    def test_concurrent_counting(self):
        m = BlackBoxModel(lambda X: np.zeros(X.shape[0], dtype=int), 2)

        def worker():
            for _ in range(50):
                m.predict(np.zeros((7, 2)))

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert m.query_count == 8 * 50 * 7


class TestRuleModel:
    def test_biased_rule_fires_on_race(self):
        ds = compas_ds()
        rule = race_rule(ds)
        j = ds.index_of("African_American")
        preds = rule.predict(ds.X)
        raw = ds.X[:, j] * ds.norm_stats[1][j] + ds.norm_stats[0][j]
        np.testing.assert_array_equal(preds, (raw > 0.5).astype(int))
        assert preds.min() == 0 and preds.max() == 1

    def test_unbiased_rule_on_uncorrelated(self):
        ds = compas_ds()
        rule = uncorrelated_rule(ds)
        j = ds.index_of("uncorrelated_feature_1")
        raw = ds.X[:, j] * ds.norm_stats[1][j] + ds.norm_stats[0][j]
        np.testing.assert_array_equal(rule.predict(ds.X), (raw > 0.5).astype(int))

    def test_train_mean_threshold_is_strict(self):
        ds = generate_german(400, seed=1)
        ds = split_train_test(ds, 0.8, seed=2)
        ds = standardize(ds)
        rule = RuleModel.bind(
            RuleSpec((Predicate("LoanRateAsPercentOfIncome", TRAIN_MEAN),)), ds
        )
        j = ds.index_of("LoanRateAsPercentOfIncome")
        # the train mean is 0 in standardized units; a row exactly at the
        # mean fails the strict '>' and lands on the negative label
        row = np.zeros((1, ds.n_features))
        row[0, j] = 0.0
        assert rule.predict(row)[0] == 0

    def test_xor_rule(self):
        ds = compas_ds()
        spec = RuleSpec(
            (
                Predicate("uncorrelated_feature_1", 0.5),
                Predicate("uncorrelated_feature_2", 0.5),
            )
        )
        rule = RuleModel.bind(spec, ds)
        u1 = ds.index_of("uncorrelated_feature_1")
        u2 = ds.index_of("uncorrelated_feature_2")
        mean, std = ds.norm_stats
        raw1 = ds.X[:, u1] * std[u1] + mean[u1]
        raw2 = ds.X[:, u2] * std[u2] + mean[u2]
        expected = np.logical_xor(raw1 > 0.5, raw2 > 0.5).astype(int)
        np.testing.assert_array_equal(rule.predict(ds.X), expected)

    def test_standardized_space_predicate(self):
        ds = compas_ds()
        rule = RuleModel.bind(
            RuleSpec((Predicate("age", 0.5, space="standardized"),)), ds
        )
        np.testing.assert_array_equal(
            rule.predict(ds.X), (ds.X[:, ds.index_of("age")] > 0.5).astype(int)
        )

    def test_missing_feature(self):
        ds = compas_ds()
        with pytest.raises(SchemaError, match="no_such"):
            RuleModel.bind(RuleSpec((Predicate("no_such", 0.5),)), ds)

    def test_duplicated_rows_identical_labels(self):
        ds = compas_ds()
        rule = race_rule(ds)
        row = ds.X[:1]
        dup = np.repeat(row, 5, axis=0)
        assert np.unique(rule.predict(dup)).size == 1


class TestScaffold:
    def test_toggle_follows_detector(self):
        ds = compas_ds(n=500)
        sm = build_attacker(ds, race_rule(ds), uncorrelated_rule(ds), seed=0)
        X = ds.test_X
        routed = sm.d_ood.predict(X) == 1
        preds = sm.predict(X)
        np.testing.assert_array_equal(
            preds[routed], sm.f_biased.predict(X[routed])
        )
        np.testing.assert_array_equal(
            preds[~routed], sm.f_unbiased.predict(X[~routed])
        )

    def test_agreeing_submodels_ignore_detector(self):
        ds = compas_ds(n=400)
        rule = race_rule(ds)
        sm = build_attacker(ds, rule, rule, seed=0)
        X = ds.test_X
        np.testing.assert_array_equal(sm.predict(X), rule.predict(X))

    def test_empty_matrix(self):
        ds = compas_ds(n=400)
        sm = build_attacker(ds, race_rule(ds), uncorrelated_rule(ds), seed=0)
        assert sm.predict(np.zeros((0, ds.n_features))).size == 0

    def test_detector_separates_real_from_noise(self):
        ds = compas_ds(n=1000, seed=3)
        sm = build_attacker(ds, race_rule(ds), uncorrelated_rule(ds), seed=1)
        rng = np.random.default_rng(5)
        real = ds.test_X
        fake = real + rng.standard_normal(real.shape)
        real_rate = np.mean(sm.d_ood.predict(real) == 1)
        fake_rate = np.mean(sm.d_ood.predict(fake) == 0)
        assert 0.5 * (real_rate + fake_rate) >= 0.9

    def test_real_rows_get_biased_label(self):
        ds = compas_ds(n=1000, seed=4)
        biased = race_rule(ds)
        sm = build_attacker(ds, biased, uncorrelated_rule(ds), seed=2)
        agreement = np.mean(sm.predict(ds.test_X) == biased.predict(ds.test_X))
        assert agreement >= 0.95


class TestAttackerPerturber:
    def test_gaussian_shape_and_copies(self):
        rng = np.random.default_rng(0)
        X = np.zeros((10, 4))
        out = AttackerPerturber(scheme="gaussian", copies=3).perturb(X, rng)
        assert out.shape == (30, 4)
        assert np.std(out) == pytest.approx(1.0, abs=0.1)

    def test_mask_values_come_from_rows_or_centroids(self):
        rng = np.random.default_rng(1)
        X = np.arange(40, dtype=float).reshape(10, 4)
        out = AttackerPerturber(scheme="mask", background_k=3).perturb(X, rng)
        assert out.shape == (10, 4)
        assert np.isfinite(out).all()

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            AttackerPerturber(scheme="bogus").perturb(np.zeros((2, 2)), np.random.default_rng(0))
