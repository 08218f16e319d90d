import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from auditkit.explainers.base import Explanation
from auditkit.metrics import (
    f_actual,
    fidelity_dood,
    fidelity_f,
    fidelity_g,
    fidelity_h,
    infidelity_defend_g,
    margin,
    spearman_rho,
)
from auditkit.models import BlackBoxModel


def constant_model(value, n_features=2):
    return BlackBoxModel(lambda X: np.full(X.shape[0], value, dtype=int), n_features)


def expl(contribs, label=1):
    return Explanation(
        contributions=np.asarray(contribs, dtype=float),
        intercept=0.0,
        instance_index=0,
        explainer="lime",
        label=label,
    )


class TestFActual:
    def test_attack_on_returns_biased(self):
        f, fb = constant_model(0), constant_model(1)
        assert f_actual(f, fb, attack_active=True) is fb

    def test_attack_off_returns_f(self):
        f, fb = constant_model(0), constant_model(1)
        assert f_actual(f, fb, attack_active=False) is f

    def test_identical_models_agree_either_way(self):
        f = constant_model(1)
        assert f_actual(f, f, True) is f_actual(f, f, False)


class TestFidelityF:
    def test_perfect_agreement(self):
        f = constant_model(1)
        assert fidelity_f(f, f, np.zeros((10, 2))) == 1.0

    def test_partial_agreement(self):
        a = BlackBoxModel(lambda X: np.array([1, 1, 1, 0]), 1)
        b = BlackBoxModel(lambda X: np.array([1, 1, 0, 1]), 1)
        assert fidelity_f(a, b, np.zeros((4, 1))) == 0.5

    def test_three_of_four(self):
        a = BlackBoxModel(lambda X: np.array([1, 1, 1, 1]), 1)
        b = BlackBoxModel(lambda X: np.array([1, 1, 1, 0]), 1)
        assert fidelity_f(a, b, np.zeros((4, 1))) == 0.75

    def test_empty_rejected(self):
        f = constant_model(1)
        with pytest.raises(ValueError):
            fidelity_f(f, f, np.zeros((0, 2)))


class TestFidelityDood:
    class _Fixed:
        def __init__(self, label):
            self.label = label

        def predict(self, X):
            return np.full(X.shape[0], self.label, dtype=int)

    def test_perfect_detector(self):
        class Perfect:
            def predict(self, X):
                return (X[:, 0] == 0).astype(int)

        real = np.zeros((5, 1))
        fake = np.ones((5, 1))
        assert fidelity_dood(Perfect(), real, fake) == 1.0

    def test_constant_detector_scores_half(self):
        assert fidelity_dood(self._Fixed(1), np.zeros((4, 1)), np.ones((4, 1))) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fidelity_dood(self._Fixed(1), np.zeros((0, 1)), np.ones((3, 1)))


class TestSpearman:
    def test_identical(self):
        assert spearman_rho([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman_rho([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_value(self):
        # 1 - 6 * sum(d^2) / (n (n^2 - 1)) with d = (0, 1, 1, 0), n = 4
        assert spearman_rho([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_zero_variance_defined_as_zero(self):
        assert spearman_rho([1, 1, 1], [1, 2, 3]) == 0.0

    @given(st.lists(st.integers(-100, 100), min_size=3, max_size=20, unique=True))
    def test_monotone_invariance(self, xs):
        a = np.asarray(xs, dtype=float)
        b = np.sort(np.asarray(xs))  # any companion vector works
        base = spearman_rho(a, b)
        transformed = spearman_rho(np.exp(a / 100.0), b)
        assert base == pytest.approx(transformed, abs=1e-9)


class TestFidelityG:
    def test_perfect_selection_two_features(self):
        # one selected, one unselected, explainer ranks the selected first
        e = expl([0.9, 0.1])
        assert fidelity_g([e], [0], adverse_label=1) == pytest.approx(0.5)

    def test_all_zero_contributions_scores_zero(self):
        e = expl([0.0, 0.0, 0.0])
        assert fidelity_g([e], [0], adverse_label=1) == 0.0

    def test_rescaling_invariance(self):
        e1 = expl([0.2, 0.05, -0.1, 0.0])
        e2 = expl([2.0, 0.5, -1.0, 0.0])
        a = fidelity_g([e1], [0, 1], adverse_label=1)
        b = fidelity_g([e2], [0, 1], adverse_label=1)
        assert a == pytest.approx(b)

    def test_wrong_ranking_scores_lower(self):
        good = expl([0.9, 0.0])
        bad = expl([0.0, 0.9])
        assert fidelity_g([good], [0], 1) > fidelity_g([bad], [0], 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fidelity_g([], [0], 1)


class TestFidelityH:
    def test_perfect_scores(self):
        ones = np.ones(5)
        assert fidelity_h(ones, ones, ones, ones) == 1.0

    def test_constant_half_scores(self):
        s = np.full(8, 0.5)
        t = np.ones(8)
        assert fidelity_h(s, s, t, t) == pytest.approx(0.75)

    def test_misaligned_rejected(self):
        from auditkit.errors import ShapeError

        with pytest.raises(ShapeError):
            fidelity_h(np.ones(3), np.ones(3), np.ones(4), np.ones(3))

    @given(
        st.lists(st.floats(0, 1), min_size=1, max_size=20),
        st.lists(st.integers(0, 1), min_size=1, max_size=20),
    )
    def test_bounded(self, scores, targets):
        s = np.asarray(scores)
        t = np.asarray(targets[: len(scores)] + [0] * max(0, len(scores) - len(targets)))
        v = fidelity_h(s, s, t.astype(float), t.astype(float))
        assert 0.0 <= v <= 1.0


class TestInfidelityDefendG:
    def test_identical_sets_zero(self):
        es = [expl([0.1, 0.2]), expl([0.3, -0.1])]
        assert infidelity_defend_g(es, es) == 0.0

    def test_single_delta(self):
        a = [expl([0.0, 0.0]), expl([0.0, 0.0])]
        b = [expl([0.0, 0.5]), expl([0.0, 0.0])]
        # one feature differing by 0.5 on one of 2 samples, F = 2
        assert infidelity_defend_g(a, b) == pytest.approx(0.25 / 4)

    def test_symmetry(self):
        a = [expl([0.1, -0.2])]
        b = [expl([0.4, 0.3])]
        assert infidelity_defend_g(a, b) == infidelity_defend_g(b, a)

    def test_mismatched_counts_rejected(self):
        with pytest.raises(ValueError):
            infidelity_defend_g([expl([0.0])], [])


class TestMargin:
    def test_paper_style_values(self):
        assert margin(0.30, 0.11) == pytest.approx(0.19)
        assert margin(0.20, -0.02) == pytest.approx(0.22)

    def test_equal_inputs(self):
        assert margin(0.5, 0.5) == 0.0
