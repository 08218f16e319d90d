import numpy as np
import pytest

from auditkit.errors import DegenerateTrainingError, ShapeError
from auditkit.forest import ForestParams, RandomForest, forest_fit


def blobs(n, seed=0, gap=6.0):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack(
        [rng.normal(0.0, 1.0, size=(half, 3)), rng.normal(gap, 1.0, size=(n - half, 3))]
    )
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    return X, y


class TestFit:
    def test_separable_blobs_high_accuracy(self):
        X, y = blobs(400, seed=1)
        rf = forest_fit(X, y, ForestParams(n_estimators=30), seed=0)
        assert np.mean(rf.predict(X) == y) >= 0.99
        # held-out data generated by the same oracle
        Xh, yh = blobs(200, seed=2)
        assert np.mean(rf.predict(Xh) == yh) >= 0.99

    def test_default_estimator_count(self):
        assert ForestParams().n_estimators == 100

    def test_deterministic_for_fixed_seed(self):
        X, y = blobs(200, seed=3, gap=1.5)
        probe = np.random.default_rng(4).normal(0.75, 1.5, size=(50, 3))
        a = forest_fit(X, y, ForestParams(n_estimators=15), seed=7)
        b = forest_fit(X, y, ForestParams(n_estimators=15), seed=7)
        np.testing.assert_array_equal(a.predict(probe), b.predict(probe))

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(20, 2))
        with pytest.raises(DegenerateTrainingError):
            forest_fit(X, np.zeros(20, dtype=int), seed=0)

    def test_single_unbounded_tree_memorizes_consistent_data(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(120, 4))
        y = rng.integers(0, 2, size=120)
        params = ForestParams(n_estimators=1, bootstrap=False, max_features=None)
        rf = forest_fit(X, y, params, seed=0)
        assert np.mean(rf.predict(X) == y) == 1.0


class TestPredict:
    def test_majority_and_tie_rule(self):
        X, y = blobs(120, seed=6, gap=1.0)
        rf = forest_fit(X, y, ForestParams(n_estimators=4, bootstrap=True), seed=1)
        probe = np.random.default_rng(7).normal(0.5, 1.0, size=(30, 3))
        votes = np.zeros((30, rf.n_classes), dtype=int)
        rows = np.arange(30)
        for t in rf.trees:
            votes[rows, t.predict(probe)] += 1
        expected = np.argmax(votes, axis=1)
        np.testing.assert_array_equal(rf.predict(probe), expected)
        # explicit tie scenario: equal vote counts resolve to the lower label
        tie_rows = votes[:, 0] == votes[:, 1]
        if tie_rows.any():
            assert np.all(rf.predict(probe)[tie_rows] == 0)

    def test_single_tree_forest_equals_tree(self):
        X, y = blobs(100, seed=8)
        rf = forest_fit(X, y, ForestParams(n_estimators=1), seed=2)
        probe = np.random.default_rng(9).normal(3.0, 2.0, size=(40, 3))
        np.testing.assert_array_equal(rf.predict(probe), rf.trees[0].predict(probe))

    def test_dimension_mismatch(self):
        X, y = blobs(50, seed=10)
        rf = forest_fit(X, y, ForestParams(n_estimators=2), seed=0)
        with pytest.raises(ShapeError):
            rf.predict(np.zeros((5, 2)))

    def test_empty_matrix(self):
        X, y = blobs(50, seed=11)
        rf = forest_fit(X, y, ForestParams(n_estimators=2), seed=0)
        assert rf.predict(np.zeros((0, 3))).size == 0


class TestSerialization:
    def test_round_trip(self, tmp_path):
        X, y = blobs(150, seed=12, gap=2.0)
        rf = forest_fit(X, y, ForestParams(n_estimators=10), seed=3)
        p = tmp_path / "forest.json"
        rf.save(p)
        back = RandomForest.load(p)
        probe = np.random.default_rng(13).normal(1.0, 2.0, size=(60, 3))
        np.testing.assert_array_equal(rf.predict(probe), back.predict(probe))

    def test_rejects_unknown_format(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            RandomForest.load(p)
