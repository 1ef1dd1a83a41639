import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridann.core import (
    DEFAULT_BIAS,
    INV_LG2,
    AttributeMetric,
    DimensionMismatch,
    FeatureMetric,
    FusionParams,
    HybridPoint,
)
from hybridann.metrics import (
    attribute_distance,
    attribute_distances,
    feature_distance,
    feature_distances,
    fused_distance,
    fused_distances,
    hamming_attribute_distance,
    manhattan_distance,
)

DEFAULTS = FusionParams()


class TestFeatureDistance:
    def test_ip_identical_unit_vector_is_zero(self, unit_vecs):
        x, _ = unit_vecs
        assert feature_distance(FeatureMetric.IP, x, x) == pytest.approx(0.0, abs=1e-12)

    def test_ip_orthogonal_is_one(self, unit_vecs):
        x, y = unit_vecs
        assert feature_distance(FeatureMetric.IP, x, y) == pytest.approx(1.0, rel=1e-12)

    def test_l2_is_true_euclidean(self):
        # 3-4-5 triangle
        assert feature_distance(FeatureMetric.L2, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            feature_distance(FeatureMetric.L2, [1.0], [1.0, 2.0])


class TestAttributeMappings:
    @pytest.mark.parametrize(
        "v,w,expected",
        [([1, 3], [2, 5], 3), ([7], [7], 0), ([0, 0, 0], [1, 1, 1], 3)],
    )
    def test_manhattan(self, v, w, expected):
        assert manhattan_distance(v, w) == expected

    @pytest.mark.parametrize(
        "v,w,expected",
        [([1, 3], [2, 5], 2), ([1, 3], [1, 5], 1), ([4], [4], 0)],
    )
    def test_hamming(self, v, w, expected):
        assert hamming_attribute_distance(v, w) == expected

    def test_mismatched_lengths(self):
        with pytest.raises(DimensionMismatch):
            manhattan_distance([1], [1, 2])
        with pytest.raises(DimensionMismatch):
            hamming_attribute_distance([1], [1, 2])

    def test_hamming_collapses_manhattan_distinctions(self):
        """Distinct attribute vectors with equal Hamming but different
        Manhattan distance to one reference: the collapse witness."""
        ref = [0, 0]
        v1 = [1, 1]
        v2 = [9, 4]
        assert v1 != v2
        assert hamming_attribute_distance(v1, ref) == hamming_attribute_distance(v2, ref) == 2
        assert manhattan_distance(v1, ref) == 2
        assert manhattan_distance(v2, ref) == 13
        assert manhattan_distance(v1, ref) != manhattan_distance(v2, ref)


class TestAttributeDistance:
    def test_equal_attrs_zero(self):
        assert attribute_distance(DEFAULTS, [5, 2], [5, 2]) == 0.0

    def test_adjacent_attrs(self):
        # e = 1: bias - 1/log10(2)
        got = attribute_distance(DEFAULTS, [4], [5])
        assert got == pytest.approx(DEFAULT_BIAS - INV_LG2, rel=1e-9)
        assert got == pytest.approx(1.0000, abs=1e-4)

    def test_e_nine(self):
        # e = 9: 1/log10(10) = 1 exactly
        got = attribute_distance(DEFAULTS, [0], [9])
        assert got == pytest.approx(DEFAULT_BIAS - 1.0, rel=1e-9)
        assert got == pytest.approx(3.3219, abs=1e-4)

    def test_hamming_variant_uses_same_log_wrapper(self):
        params = FusionParams(attr_metric=AttributeMetric.HAMMING)
        # two differing dims -> h = 2 -> bias - 1/log10(3)
        got = attribute_distance(params, [1, 3], [2, 5])
        assert got == pytest.approx(DEFAULT_BIAS - 1.0 / math.log10(3.0), rel=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 10**6), st.integers(1, 10**6))
    def test_monotone_in_e(self, e1, e2):
        """Larger attribute difference, larger distance (e >= 1)."""
        if e1 == e2:
            return
        lo, hi = sorted((e1, e2))
        d_lo = attribute_distance(DEFAULTS, [0], [lo])
        d_hi = attribute_distance(DEFAULTS, [0], [hi])
        assert d_lo < d_hi

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.integers(0, 1000), min_size=1, max_size=6),
        st.lists(st.integers(0, 1000), min_size=1, max_size=6),
    )
    def test_symmetry(self, v, w):
        if len(v) != len(w):
            return
        assert attribute_distance(DEFAULTS, v, w) == attribute_distance(DEFAULTS, w, v)

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.integers(0, 1000), min_size=1, max_size=6),
        st.lists(st.integers(0, 1000), min_size=1, max_size=6),
    )
    def test_mismatch_range(self, v, w):
        """Every mismatch lands in [bias - 1/log10(2), bias)."""
        if len(v) != len(w) or v == w:
            return
        d = attribute_distance(DEFAULTS, v, w)
        assert DEFAULT_BIAS - INV_LG2 <= d < DEFAULT_BIAS


class TestFusedDistance:
    def test_matching_attrs_scale_feature_term(self):
        # attrs equal, g = 0.4 under IP, w = 0.25 -> 0.1
        a = HybridPoint(0, [1.0, 0.0], [3])
        b = HybridPoint(1, [0.6, 0.8], [3])  # dot = 0.6 -> g = 0.4
        assert fused_distance(DEFAULTS, a, b) == pytest.approx(0.25 * 0.4, rel=1e-9)

    def test_identical_points_zero(self):
        a = HybridPoint(0, [0.6, 0.8], [1, 2])
        b = HybridPoint(1, [0.6, 0.8], [1, 2])
        assert fused_distance(DEFAULTS, a, b) == 0.0

    def test_mismatch_combines_both_terms(self):
        # e = 1, g = 1.0 (orthogonal), w = 0.25: 0.25 + (bias - 1/lg2)
        a = HybridPoint(0, [1.0, 0.0], [4])
        b = HybridPoint(1, [0.0, 1.0], [5])
        got = fused_distance(DEFAULTS, a, b)
        assert got == pytest.approx(0.25 + DEFAULT_BIAS - INV_LG2, rel=1e-9)
        assert got == pytest.approx(1.25, abs=1e-4)

    def test_symmetric_for_point_pairs(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            fa, fb = rng.standard_normal((2, 8))
            aa, ab = rng.integers(0, 5, size=(2, 3))
            a = HybridPoint(0, fa, aa)
            b = HybridPoint(1, fb, ab)
            assert fused_distance(DEFAULTS, a, b) == pytest.approx(
                fused_distance(DEFAULTS, b, a), rel=1e-12
            )


class TestBatchAgreement:
    """Vectorized paths must agree with the scalar reference."""

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(7)
        feats = rng.standard_normal((50, 8))
        feats /= np.linalg.norm(feats, axis=1, keepdims=True)
        attrs = rng.integers(0, 6, size=(50, 3))
        qf = feats[0]
        qa = attrs[0]
        batch = fused_distances(DEFAULTS, feats, attrs, qf, qa)
        for i in range(50):
            a = HybridPoint(0, qf, qa)
            b = HybridPoint(1, feats[i], attrs[i])
            assert batch[i] == pytest.approx(fused_distance(DEFAULTS, a, b), rel=1e-12)

    def test_batch_feature_and_attr_components(self):
        rng = np.random.default_rng(9)
        feats = rng.standard_normal((20, 4))
        attrs = rng.integers(0, 3, size=(20, 2))
        g = feature_distances(FeatureMetric.L2, feats, feats[3])
        f = attribute_distances(DEFAULTS, attrs, attrs[3])
        assert g[3] == pytest.approx(0.0, abs=1e-12)
        assert f[3] == 0.0
        for i in range(20):
            assert g[i] == pytest.approx(
                feature_distance(FeatureMetric.L2, feats[i], feats[3]), rel=1e-12
            )
            assert f[i] == pytest.approx(
                attribute_distance(DEFAULTS, attrs[i], attrs[3]), rel=1e-12
            )


class TestDominance:
    def test_matches_sort_before_mismatches_with_defaults(self):
        """With defaults on unit-norm IP data, w*g tops out at 0.5 while
        any mismatch costs at least ~1.0, so matches always win."""
        rng = np.random.default_rng(21)
        feats = rng.standard_normal((500, 16))
        feats /= np.linalg.norm(feats, axis=1, keepdims=True)
        attrs = rng.integers(0, 4, size=(500, 1))
        qf = feats[17] * -1.0  # adversarial: antipodal to one point, g up to 2
        qf /= np.linalg.norm(qf)
        qa = attrs[17]
        d = fused_distances(DEFAULTS, feats, attrs, qf, qa)
        match = (attrs == qa).all(axis=1)
        assert match.any() and (~match).any()
        assert d[match].max() < d[~match].min()
