import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causereg.errors import DomainError
from causereg.metrics import auc, causality_at_k, f1, mutual_information, spearman
from oracles import brute_auc, brute_f1, brute_mi


class TestAuc:
    def test_perfect_separation_is_one(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_tied_scores_give_half(self):
        assert auc([0.3, 0.3, 0.3, 0.3], [0, 1, 0, 1]) == 0.5

    def test_hand_counted_pair_example(self):
        # pairs: (.35 > .1) yes, (.35 > .4) no, (.8 > .1) yes, (.8 > .4) yes -> 3/4
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_single_class_is_signaled(self):
        with pytest.raises(DomainError):
            auc([0.1, 0.9], [1, 1])

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_pair_counting(self, data):
        n = data.draw(st.integers(2, 12))
        scores = data.draw(
            st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), min_size=n, max_size=n)
        )
        labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        if len(set(labels)) < 2:
            labels[0], labels[-1] = 0, 1
        assert auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)

    @given(st.data())
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_strictly_monotone_transforms(self, data):
        # scores on a coarse grid so exp() stays injective in float64
        n = data.draw(st.integers(2, 10))
        grid = [round(-5 + 0.5 * i, 2) for i in range(21)]
        scores = np.array(data.draw(st.lists(st.sampled_from(grid), min_size=n, max_size=n)))
        labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        if len(set(labels)) < 2:
            labels[0], labels[-1] = 0, 1
        base = auc(scores, labels)
        assert auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert auc(3.0 * scores + 7.0, labels) == pytest.approx(base, abs=1e-12)


class TestF1:
    def test_perfect_classifier(self):
        assert f1([0.1, 0.2, 0.9, 0.8], [0, 0, 1, 1]) == 1.0

    def test_predict_all_positive_on_balanced_labels(self):
        # precision 1/2, recall 1 -> F1 = 2/3
        assert f1([0.9, 0.9, 0.9, 0.9], [0, 0, 1, 1]) == pytest.approx(2.0 / 3.0)

    def test_no_predicted_positives_is_zero_with_warning(self):
        with pytest.warns(UserWarning):
            assert f1([0.1, 0.1, 0.2], [0, 1, 1]) == 0.0

    def test_single_class_is_signaled(self):
        with pytest.raises(DomainError):
            f1([0.6, 0.7], [1, 1])

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, data):
        n = data.draw(st.integers(2, 12))
        scores = data.draw(
            st.lists(st.sampled_from([0.0, 0.5, 1.0]), min_size=n, max_size=n)
        )
        labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        if len(set(labels)) < 2:
            labels[0], labels[-1] = 0, 1
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert f1(scores, labels) == pytest.approx(brute_f1(scores, labels), abs=1e-12)


class TestMutualInformation:
    def test_constant_x_has_zero_mi(self):
        assert mutual_information([3, 3, 3, 3], [0, 1, 0, 1]) == 0.0

    def test_identical_balanced_bits_give_ln_two(self):
        assert mutual_information([0, 1, 0, 1], [0, 1, 0, 1]) == pytest.approx(np.log(2.0))

    def test_hand_summed_four_point_table(self):
        x, y = [0, 0, 1, 1], [0, 0, 1, 0]
        expected = brute_mi(x, y)
        # p(0,0)=1/2, p(1,0)=1/4, p(1,1)=1/4:
        # 0.5 ln(4/3) + 0.25 ln(2/3) + 0.25 ln 2
        hand = 0.5 * np.log(4 / 3) + 0.25 * np.log(2 / 3) + 0.25 * np.log(2.0)
        assert expected == pytest.approx(hand, abs=1e-15)
        assert mutual_information(x, y) == pytest.approx(hand, abs=1e-12)

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_nonnegative_and_matches_brute_force(self, data):
        n = data.draw(st.integers(1, 12))
        x = data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
        y = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        value = mutual_information(x, y)
        assert value >= 0.0
        assert value == pytest.approx(brute_mi(x, y), abs=1e-12)

    def test_factorizing_table_gives_exactly_zero(self):
        x = [0, 0, 1, 1, 0, 0, 1, 1]
        y = [0, 1, 0, 1, 0, 1, 0, 1]
        assert mutual_information(x, y) == 0.0


class TestSpearman:
    def test_monotone_is_one(self):
        assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)

    def test_zero_variance_is_signaled(self):
        with pytest.raises(DomainError):
            spearman([1, 1, 1], [1, 2, 3])


class TestCausalityAtK:
    def test_all_causal_top_k_is_one(self):
        truth = np.array([1, 1, 1, 0, 0])
        assert causality_at_k([0, 1, 2, 3, 4], truth, 3) == 1.0

    def test_reverse_ranking_hits_zero(self):
        truth = np.array([1, 1, 0, 0, 0])
        ranking = [4, 3, 2, 1, 0]  # all non-causal first
        assert causality_at_k(ranking, truth, 3) == 0.0

    def test_half_scores_supported(self):
        truth = np.array([1.0, 0.5, 0.0])
        assert causality_at_k([0, 1, 2], truth, 2) == pytest.approx(0.75)

    def test_oversized_k_warns_and_uses_full_list(self):
        truth = np.array([1, 0])
        with pytest.warns(UserWarning):
            assert causality_at_k([0, 1], truth, 5) == pytest.approx(0.5)

    def test_random_ranking_expectation_is_causal_fraction(self):
        rng = np.random.default_rng(0)
        truth = (rng.random(40) < 0.3).astype(float)
        k = 10
        vals = []
        for _ in range(1000):
            ranking = rng.permutation(40)
            vals.append(causality_at_k(ranking, truth, k))
        assert abs(np.mean(vals) - truth.mean()) < 0.03

    def test_k_validated(self):
        with pytest.raises(DomainError):
            causality_at_k([0, 1], np.array([1, 0]), 0)
