import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from guidedforest.core import (
    ClassCounts,
    ImportanceVector,
    RegWeights,
    compute_lambda,
    gini_gain,
    gini_impurity,
    normalize_importance,
    weighted_gain,
)
from guidedforest.errors import (
    AllZeroImportanceError,
    ChildCountsMismatchError,
    GammaOutOfRangeError,
    WeightOutOfRangeError,
)
from helpers_oracle import impurity_by_pair_enumeration

counts_strategy = st.lists(st.integers(min_value=0, max_value=12), min_size=1, max_size=6)


class TestClassCounts:
    def test_total_is_sum(self):
        cc = ClassCounts((4, 3, 2))
        assert cc.total == 9

    def test_from_labels(self):
        cc = ClassCounts.from_labels([0, 1, 0, 2], n_classes=4)
        assert cc.counts == (2, 1, 1, 0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ClassCounts((1, -1))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ClassCounts(())


class TestGiniImpurity:
    def test_pure_node(self):
        assert gini_impurity(ClassCounts((5, 0))) == 0.0

    def test_symmetric_two_class_maximum(self):
        assert gini_impurity(ClassCounts((2, 2))) == 0.5

    def test_three_class_exact(self):
        # 1 - (16 + 9 + 4)/81 = 52/81
        assert gini_impurity(ClassCounts((4, 3, 2))) == pytest.approx(52 / 81, abs=1e-15)

    def test_empty_node(self):
        assert gini_impurity(ClassCounts((0, 0))) == 0.0

    @given(counts_strategy)
    def test_range_and_purity(self, counts):
        v = gini_impurity(ClassCounts(tuple(counts)))
        assert 0.0 <= v < 1.0
        nonzero = sum(1 for c in counts if c > 0)
        assert (v == 0.0) == (nonzero <= 1)

    @given(counts_strategy)
    def test_matches_pair_draw_enumeration(self, counts):
        # exact oracle: chance that two draws with replacement differ in class
        v = gini_impurity(ClassCounts(tuple(counts)))
        assert v == pytest.approx(impurity_by_pair_enumeration(counts), abs=1e-12)


def _split_strategy():
    # a parent counts vector and a componentwise left/right decomposition
    return counts_strategy.flatmap(
        lambda parent: st.tuples(
            st.just(parent),
            st.tuples(*[st.integers(min_value=0, max_value=c) for c in parent]),
        )
    )


class TestGiniGain:
    def test_perfect_separation(self):
        g = gini_gain(ClassCounts((2, 2)), ClassCounts((2, 0)), ClassCounts((0, 2)))
        assert g == 0.5

    def test_children_replicate_parent(self):
        g = gini_gain(ClassCounts((3, 3)), ClassCounts((2, 2)), ClassCounts((1, 1)))
        assert g == 0.0

    def test_direct_arithmetic(self):
        # 0.375 - 0.5 * 0 - 0.5 * 0.5
        g = gini_gain(ClassCounts((3, 1)), ClassCounts((2, 0)), ClassCounts((1, 1)))
        assert g == pytest.approx(0.125, abs=1e-15)

    def test_child_mismatch_raises(self):
        with pytest.raises(ChildCountsMismatchError):
            gini_gain(ClassCounts((3, 1)), ClassCounts((2, 0)), ClassCounts((0, 1)))
        with pytest.raises(ChildCountsMismatchError):
            gini_gain(ClassCounts((3, 1)), ClassCounts((3,)), ClassCounts((0, 1)))

    @given(_split_strategy())
    def test_symmetric_under_child_swap(self, case):
        parent, left = case
        right = tuple(p - l for p, l in zip(parent, left))
        if sum(parent) < 2:
            return
        p, l, r = ClassCounts(tuple(parent)), ClassCounts(left), ClassCounts(right)
        assert gini_gain(p, l, r) == gini_gain(p, r, l)

    @given(_split_strategy())
    def test_never_negative(self, case):
        parent, left = case
        right = tuple(p - l for p, l in zip(parent, left))
        if sum(parent) < 2:
            return
        assert gini_gain(ClassCounts(tuple(parent)), ClassCounts(left), ClassCounts(right)) >= 0.0


class TestNormalizeImportance:
    def test_direct_division(self):
        out = normalize_importance(ImportanceVector(np.array([2.0, 1.0, 0.0])))
        assert np.array_equal(out, [1.0, 0.5, 0.0])

    def test_single_feature(self):
        assert np.array_equal(normalize_importance(ImportanceVector(np.array([7.0]))), [1.0])

    def test_all_zero_raises(self):
        with pytest.raises(AllZeroImportanceError):
            normalize_importance(ImportanceVector(np.array([0.0, 0.0])))

    @given(st.lists(st.floats(min_value=0.0, max_value=1e6), min_size=1, max_size=20))
    def test_max_entry_is_one(self, raw):
        if max(raw) == 0.0:
            return
        out = normalize_importance(ImportanceVector(np.asarray(raw)))
        assert out.max() == 1.0
        assert np.all((out >= 0.0) & (out <= 1.0))


class TestComputeLambda:
    def test_gamma_zero_recovers_unit_weights(self):
        # zero guidance strength must leave every weight at exactly 1
        w = compute_lambda(np.array([0.0, 0.3, 1.0]), 0.0)
        assert np.array_equal(w.values, [1.0, 1.0, 1.0])

    def test_gamma_one_endpoints(self):
        w = compute_lambda(np.array([1.0, 0.0]), 1.0)
        assert np.array_equal(w.values, [1.0, 0.0])

    def test_direct_substitution(self):
        w = compute_lambda(np.array([0.4]), 0.5)
        assert w.values[0] == pytest.approx(0.7, abs=1e-15)

    @pytest.mark.parametrize("gamma", [-0.1, 1.5, 2.0])
    def test_gamma_out_of_range(self, gamma):
        with pytest.raises(GammaOutOfRangeError):
            compute_lambda(np.array([0.5]), gamma)

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=10),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_monotone_in_importance(self, imp, gamma):
        w = compute_lambda(np.asarray(imp), gamma).values
        order = np.argsort(imp, kind="stable")
        assert np.all(np.diff(w[order]) >= -1e-15)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_max_importance_feature_keeps_unit_weight(self, gamma):
        w = compute_lambda(np.array([1.0, 0.2]), gamma)
        assert w.values[0] == 1.0

    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_weights_non_increasing_in_gamma(self, imp, g1, g2):
        lo, hi = sorted([g1, g2])
        w_lo = compute_lambda(np.array([imp]), lo).values[0]
        w_hi = compute_lambda(np.array([imp]), hi).values[0]
        assert w_hi <= w_lo + 1e-15
        # a weight can only vanish under maximum guidance with zero importance
        assert (w_hi == 0.0) == (hi == 1.0 and imp == 0.0)


class TestRegWeights:
    def test_rejects_out_of_range_values(self):
        with pytest.raises(WeightOutOfRangeError):
            RegWeights(np.array([0.5, 1.2]), gamma=1.0)
        with pytest.raises(WeightOutOfRangeError):
            RegWeights(np.array([-0.1]), gamma=1.0)

    def test_rejects_bad_gamma(self):
        with pytest.raises(GammaOutOfRangeError):
            RegWeights(np.array([0.5]), gamma=1.5)

    def test_factories(self):
        assert np.array_equal(RegWeights.all_ones(3).values, [1.0, 1.0, 1.0])
        assert np.array_equal(RegWeights.constant(2, 0.8).values, [0.8, 0.8])


class TestWeightedGain:
    def test_identity_weight(self):
        assert weighted_gain(1.0, 0.125) == 0.125

    def test_fully_penalized(self):
        assert weighted_gain(0.0, 0.5) == 0.0

    def test_direct_product(self):
        assert weighted_gain(0.5, 0.125) == 0.0625

    def test_weights_can_flip_the_argmax(self):
        raw = [0.5, 0.2]
        lam = [0.1, 1.0]
        weighted = [weighted_gain(l, g) for l, g in zip(lam, raw)]
        assert weighted == [0.05, 0.2]
        assert int(np.argmax(weighted)) == 1
        assert int(np.argmax(raw)) == 0

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=12),
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=12),
    )
    def test_argmax_preserved_at_gamma_zero(self, gains, imp):
        n = min(len(gains), len(imp))
        gains, imp = np.asarray(gains[:n]), np.asarray(imp[:n])
        lam = compute_lambda(imp, 0.0).values
        weighted = lam * gains
        assert int(np.argmax(weighted)) == int(np.argmax(gains))
