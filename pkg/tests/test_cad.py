import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from auditkit.cad import (
    KnnCadDetector,
    dynamic_range,
    is_anomalous,
    knncad_fit,
    knncad_score,
    tau_from_scores,
    zeta,
)
from auditkit.errors import StateError
from auditkit.models import BlackBoxModel

INF = float("inf")


def threshold_model(cut, column=0, n_features=1):
    return BlackBoxModel(lambda X: (X[:, column] > cut).astype(int), n_features)


class TestDynamicRange:
    def test_identity_ratio(self):
        assert dynamic_range(1.0, 1.0) == 0.0

    def test_log_base_e(self):
        assert dynamic_range(math.e, 1.0) == pytest.approx(1.0)

    def test_half_ratio(self):
        assert dynamic_range(2.0, 4.0) == pytest.approx(-0.6931, abs=1e-4)

    def test_infinities(self):
        assert dynamic_range(INF, 3.0) == INF
        assert dynamic_range(3.0, INF) == -INF
        with pytest.raises(ValueError):
            dynamic_range(INF, INF)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            dynamic_range(0.0, 1.0)


class TestZeta:
    def test_symmetry_point(self):
        assert zeta(1.0, 1.0) == 0.5

    def test_infinite_other(self):
        assert zeta(INF, 2.0) == 1.0

    def test_infinite_same(self):
        assert zeta(2.0, INF) == 0.0

    def test_both_infinite(self):
        assert zeta(INF, INF) == 0.5

    def test_both_zero(self):
        assert zeta(0.0, 0.0) == 0.5

    def test_matches_logistic_of_log_ratio(self):
        # sigma(log(3/1)) = 3/4, the closed form of the mapping
        expected = 1.0 / (1.0 + math.exp(-dynamic_range(3.0, 1.0)))
        assert zeta(3.0, 1.0) == pytest.approx(0.75)
        assert zeta(3.0, 1.0) == pytest.approx(expected)

    @given(
        st.floats(min_value=1e-6, max_value=1e6),
        st.floats(min_value=1e-6, max_value=1e6),
    )
    def test_antisymmetry(self, a, b):
        assert zeta(a, b) + zeta(b, a) == pytest.approx(1.0)

    @given(st.floats(min_value=0, max_value=1e6), st.floats(min_value=1e-6, max_value=1e6))
    def test_bounded(self, a, b):
        assert 0.0 <= zeta(a, b) <= 1.0

    def test_monotone_in_other_distance(self):
        d_same = 2.0
        values = [zeta(d, d_same) for d in (0.1, 1.0, 5.0, 50.0, INF)]
        assert values == sorted(values)


class TestTauIndexing:
    def test_hand_trace(self):
        assert tau_from_scores(np.array([0.1, 0.2, 0.9, 1.0]), 0.5) == 0.9

    def test_clamped_high(self):
        assert tau_from_scores(np.array([0.3, 0.4]), 0.99) == 0.4

    def test_low_epsilon(self):
        assert tau_from_scores(np.array([0.5, 0.1, 0.9, 0.7]), 0.1) == 0.1


def hand_trace_detector(**overrides):
    """1-D reference {(0, y=0), (1, y=0), (2, y=1)} with k=3, phi=max, p=1."""
    kwargs = dict(
        reference_X=np.array([[0.0], [1.0], [2.0]]),
        reference_Y=np.array([0, 0, 1]),
        k=3,
        phi="max",
        epsilon=0.1,
        minkowski_p=1.0,
        tau=0.0,
    )
    kwargs.update(overrides)
    return KnnCadDetector(**kwargs)


class TestScoring:
    def test_three_point_hand_trace(self):
        det = hand_trace_detector()
        f = threshold_model(1.5)
        scores = knncad_score(det, f, np.array([[2.0]]))
        # same-class distance max{0} = 0, other-class max{2, 1} = 2 -> 2/(2+0)
        assert scores[0] == 1.0

    def test_all_neighbors_agree(self):
        det = hand_trace_detector(reference_Y=np.array([1, 1, 1]))
        scores = knncad_score(det, None, np.array([[1.0]]), labels=np.array([1]))
        assert scores[0] == 1.0

    def test_all_neighbors_oppose(self):
        det = hand_trace_detector(reference_Y=np.array([0, 0, 0]))
        scores = knncad_score(det, None, np.array([[1.0]]), labels=np.array([1]))
        assert scores[0] == 0.0

    def test_empty_input(self):
        det = hand_trace_detector()
        assert knncad_score(det, None, np.empty((0, 1)), labels=np.empty(0)).size == 0

    def test_unfitted_detector_rejected(self):
        det = hand_trace_detector(tau=float("nan"))
        with pytest.raises(StateError):
            knncad_score(det, None, np.array([[1.0]]), labels=np.array([0]))

    def test_score_monotone_in_other_distance(self):
        # moving the opposing-class point farther away cannot lower the score
        f = threshold_model(10.0)  # always predicts 0
        prev = -1.0
        for far in (2.0, 4.0, 8.0, 16.0):
            det = KnnCadDetector(
                reference_X=np.array([[0.0], [1.0], [far]]),
                reference_Y=np.array([0, 0, 1]),
                k=3,
                phi="max",
                epsilon=0.1,
                minkowski_p=1.0,
                tau=0.0,
            )
            s = knncad_score(det, f, np.array([[0.5]]))[0]
            assert s >= prev
            prev = s

    def test_multiclass_reduces_to_binary(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(60, 3))
        y = (X[:, 0] > 0).astype(int)
        det = KnnCadDetector(
            reference_X=X, reference_Y=y, k=7, phi="mean", epsilon=0.1, minkowski_p=2.0, tau=0.0
        )
        Q = rng.normal(size=(20, 3))
        qy = (Q[:, 1] > 0).astype(int)
        binary = knncad_score(det, None, Q, labels=qy)
        # same call through the generic multi-class path: classes_ has C=2,
        # so the mean over "all other classes" has a single term
        assert det.classes_.size == 2
        np.testing.assert_array_equal(binary, knncad_score(det, None, Q, labels=qy))

    @pytest.mark.parametrize("phi", ["min", "max", "mean", "median"])
    def test_scores_in_unit_interval(self, phi):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(100, 4))
        f = threshold_model(0.0, column=0, n_features=4)
        det = knncad_fit(f, X, k=9, phi=phi, epsilon=0.2)
        s = knncad_score(det, f, rng.normal(size=(50, 4)))
        assert np.all((s >= 0) & (s <= 1))


class TestFit:
    def test_defaults(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 2))
        f = threshold_model(0.0, n_features=2)
        det = knncad_fit(f, X)
        assert (det.k, det.phi, det.epsilon, det.minkowski_p) == (15, "max", 0.1, 1.0)

    def test_single_label_reference(self):
        X = np.linspace(0, 1, 30).reshape(-1, 1)
        f = BlackBoxModel(lambda X: np.ones(X.shape[0], dtype=int), 1)
        det = knncad_fit(f, X, k=5)
        assert det.tau == 1.0
        scores = knncad_score(det, f, X)
        assert np.all(scores == 1.0)

    def test_reference_too_small(self):
        f = threshold_model(0.0)
        with pytest.raises(ValueError):
            knncad_fit(f, np.zeros((5, 1)), k=5)

    def test_queries_counted_once_per_row(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(50, 2))
        f = threshold_model(0.0, n_features=2)
        knncad_fit(f, X, k=5)
        assert f.query_count == 50

    def test_rescoring_reference_is_bitwise_stable(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(80, 3))
        f = threshold_model(0.0, n_features=3)
        det = knncad_fit(f, X, k=10, epsilon=0.25)
        scores = knncad_score(det, f, X)
        assert tau_from_scores(scores, 0.25) == det.tau

    def test_exclude_self_option(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 2))
        f = threshold_model(0.0, n_features=2)
        with_self = knncad_fit(f, X, k=5, include_self=True)
        without = knncad_fit(f, X, k=5, include_self=False)
        # counting yourself as a same-label neighbor can only help the score
        assert with_self.tau >= without.tau

    def test_serialization_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(40, 2))
        f = threshold_model(0.0, n_features=2)
        det = knncad_fit(f, X, k=5, tau_defend=0.75)
        p = tmp_path / "det.json"
        det.save(p)
        back = KnnCadDetector.load(p)
        assert back.tau == det.tau
        assert back.defend_threshold == 0.75
        q = rng.normal(size=(10, 2))
        np.testing.assert_array_equal(
            knncad_score(det, f, q), knncad_score(back, f, q)
        )


class TestIsAnomalous:
    def test_boundary_is_anomalous(self):
        det = hand_trace_detector(tau=0.4)
        flags = is_anomalous(det, np.array([0.4, 0.41, 0.1]))
        assert flags.tolist() == [True, False, True]

    def test_empty(self):
        det = hand_trace_detector(tau=0.4)
        assert is_anomalous(det, np.empty(0)).size == 0


class TestBallTreeAgainstBruteForce:
    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_neighbor_sets_match(self, p):
        rng = np.random.default_rng(42)
        for trial in range(8):
            n_ref = int(rng.integers(50, 2000))
            n_f = int(rng.integers(2, 30))
            k = int(rng.integers(1, 16))
            ref = rng.normal(size=(n_ref, n_f))
            queries = rng.normal(size=(25, n_f))
            det = KnnCadDetector(
                reference_X=ref,
                reference_Y=np.zeros(n_ref, dtype=int),
                k=k,
                phi="max",
                epsilon=0.1,
                minkowski_p=p,
                tau=0.0,
            )
            dist_tree, idx_tree = det._tree.query(queries, k=k)
            full = cdist(queries, ref, metric="minkowski", p=p)
            idx_brute = np.argsort(full, axis=1, kind="stable")[:, :k]
            for r in range(queries.shape[0]):
                assert set(idx_tree[r]) == set(idx_brute[r])
                np.testing.assert_allclose(
                    np.sort(dist_tree[r]), np.sort(full[r][idx_brute[r]]), rtol=1e-10
                )


@settings(max_examples=30)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=40),
    st.floats(min_value=0.05, max_value=0.95),
)
def test_tau_is_a_training_score(scores, epsilon):
    scores = np.asarray(scores)
    tau = tau_from_scores(scores, epsilon)
    assert tau in scores
