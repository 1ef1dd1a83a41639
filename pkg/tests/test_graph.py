import numpy as np
import pytest

from hybridann.core import (
    AttributeMetric,
    DatasetMismatch,
    DimensionMismatch,
    EmptyDataset,
    FeatureMetric,
    FormatError,
    FusionParams,
    HybridDataset,
    HybridQuery,
)
from hybridann.dataio import SyntheticSpec, attach_attributes, generate_synthetic, make_queries
from hybridann.graph import GraphParams, build, build_feature_graph, load, save
from hybridann.metrics import fused_distances
from hybridann.strategies import exact_fused_topk

DEFAULTS = FusionParams()


def _unit_rows(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


class TestBuildBasics:
    def test_empty_dataset_rejected(self):
        ds = HybridDataset(
            features=np.empty((0, 4)), attrs=np.empty((0, 1), dtype=np.int64)
        )
        with pytest.raises(EmptyDataset):
            build(ds, DEFAULTS, GraphParams(M=4, ef_construction=8))

    def test_single_point_graph(self):
        ds = HybridDataset(features=np.array([[1.0, 0.0]]), attrs=np.array([[3]]))
        g = build(ds, DEFAULTS, GraphParams(M=4, ef_construction=8))
        assert g.entry_point == 0
        assert g.deg0[0] == 0
        hits = g.search(HybridQuery(feature=[1.0, 0.0], attrs=[3], k=1, ef_search=1))
        assert hits[0].id == 0 and hits[0].fused_dist == pytest.approx(0.0, abs=1e-12)

    def test_matched_pair_links_before_mismatch(self):
        """Two same-attribute points end up mutual base-layer neighbors:
        their fused distance beats any cross-attribute alternative."""
        feats = np.array([[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]])
        attrs = np.array([[0], [0], [1]])
        ds = HybridDataset(feats, attrs)
        g = build(ds, DEFAULTS, GraphParams(M=2, ef_construction=4, seed=1))
        assert 1 in g.neighbors(0, 0)
        assert 0 in g.neighbors(1, 0)

    def test_metric_conflict_rejected(self):
        ds = HybridDataset(
            features=np.array([[3.0, 4.0]]), attrs=np.array([[0]]),
            feature_metric=FeatureMetric.L2,
        )
        with pytest.raises(ValueError):
            build(ds, FusionParams(feature_metric=FeatureMetric.IP), GraphParams(M=2, ef_construction=4))

    def test_graph_params_validation(self):
        with pytest.raises(ValueError):
            GraphParams(M=1, ef_construction=8)
        with pytest.raises(ValueError):
            GraphParams(M=8, ef_construction=4)


class TestStructuralInvariants:
    def test_degree_bounds_and_link_validity(self, small_graph):
        small_graph.check_invariants()

    def test_level0_connected_with_populated_classes(self, small_graph):
        assert small_graph.level0_connected()

    def test_same_attribute_neighbor_presence(self, small_dataset, small_graph):
        """Nodes of well-populated attribute classes keep at least one
        same-class base-layer neighbor (fused metric links them first)."""
        ds = small_dataset
        M = small_graph.params.M
        classes, counts = np.unique(ds.attrs, return_counts=True)
        populous = {c for c, n in zip(classes, counts) if n >= M}
        checked = good = 0
        for i in range(len(ds)):
            if int(ds.attrs[i, 0]) not in populous:
                continue
            checked += 1
            nbrs = small_graph.neighbors(i, 0)
            if (ds.attrs[nbrs, 0] == ds.attrs[i, 0]).any():
                good += 1
        assert checked > 0
        assert good / checked >= 0.99

    def test_determinism(self, small_dataset):
        gp = GraphParams(M=8, ef_construction=64, seed=123)
        g1 = build(small_dataset, DEFAULTS, gp)
        g2 = build(small_dataset, DEFAULTS, gp)
        assert g1 == g2
        q = make_queries(5, small_dataset.m, 10, seed=77, k=10, ef_search=50)[0]
        assert [h.id for h in g1.search(q)] == [h.id for h in g2.search(q)]

    def test_different_seed_changes_graph(self, small_dataset):
        g1 = build(small_dataset, DEFAULTS, GraphParams(M=8, ef_construction=64, seed=1))
        g2 = build(small_dataset, DEFAULTS, GraphParams(M=8, ef_construction=64, seed=2))
        assert g1 != g2


class TestSearch:
    def test_self_query_comes_back_first(self, small_dataset, small_graph):
        i = 137
        q = HybridQuery(
            feature=small_dataset.features[i], attrs=small_dataset.attrs[i],
            k=5, ef_search=50,
        )
        hits = small_graph.search(q)
        assert hits[0].id == i
        assert hits[0].fused_dist == pytest.approx(0.0, abs=1e-9)
        assert hits[0].attrs_match

    def test_unmatched_attrs_flagged(self, small_dataset, small_graph):
        q = HybridQuery(
            feature=small_dataset.features[0], attrs=[999], k=10, ef_search=80
        )
        hits = small_graph.search(q)
        assert len(hits) == 10
        assert all(not h.attrs_match for h in hits)
        dists = [h.fused_dist for h in hits]
        assert dists == sorted(dists)

    def test_query_dimension_checked(self, small_graph):
        with pytest.raises(DimensionMismatch):
            small_graph.search(HybridQuery(feature=[1.0, 0.0], attrs=[0], k=1, ef_search=1))
        q = HybridQuery(
            feature=small_graph.dataset.features[0], attrs=[0, 1], k=1, ef_search=1
        )
        with pytest.raises(DimensionMismatch):
            small_graph.search(q)

    def test_monotone_budget(self, small_dataset, small_graph):
        """Raising ef never worsens any of the k best distances."""
        queries = make_queries(20, small_dataset.m, 10, seed=31, k=10, ef_search=10)
        for q in queries:
            lo = small_graph.search(HybridQuery(q.feature, q.attrs, k=10, ef_search=20))
            hi = small_graph.search(HybridQuery(q.feature, q.attrs, k=10, ef_search=200))
            for a, b in zip(hi, lo):
                assert a.fused_dist <= b.fused_dist + 1e-12

    def test_full_budget_matches_exact_oracle(self, small_dataset, small_graph):
        queries = make_queries(
            100, small_dataset.m, 10, seed=41, k=10, ef_search=len(small_dataset)
        )
        agree = 0
        for q in queries:
            got = [h.id for h in small_graph.search(q)]
            want = [h.id for h in exact_fused_topk(small_dataset, DEFAULTS, q)]
            agree += got == want
        if small_graph.level0_connected():
            assert agree == len(queries)
        else:
            assert agree >= 0.99 * len(queries)

    def test_fused_distances_match_reference_path(self, small_dataset, small_graph):
        """Kernel arithmetic vs the numpy metrics module (independent paths)."""
        q = make_queries(1, small_dataset.m, 10, seed=4, k=10, ef_search=100)[0]
        ref = fused_distances(
            DEFAULTS, small_dataset.features, small_dataset.attrs, q.feature, q.attrs
        )
        for h in small_graph.search(q):
            assert h.fused_dist == pytest.approx(ref[h.id], rel=1e-12)

    def test_l2_graph_agrees_with_oracle(self):
        rng = np.random.default_rng(5)
        feats = rng.standard_normal((400, 8)) * 3.0
        ds = attach_attributes(feats, categories=5, seed=6, feature_metric=FeatureMetric.L2)
        fusion = FusionParams(w=0.05, bias=DEFAULTS.bias, g_max=20.0, feature_metric=FeatureMetric.L2)
        g = build(ds, fusion, GraphParams(M=8, ef_construction=64, seed=2))
        qf = rng.standard_normal(8) * 3.0
        q = HybridQuery(feature=qf, attrs=[2], k=10, ef_search=400)
        got = [h.id for h in g.search(q)]
        want = [h.id for h in exact_fused_topk(ds, fusion, q)]
        assert got == want

    def test_hamming_graph_searchable(self):
        ds = generate_synthetic(SyntheticSpec(count=300, m=8, categories=4, n=2, seed=9))
        fusion = FusionParams(attr_metric=AttributeMetric.HAMMING)
        g = build(ds, fusion, GraphParams(M=6, ef_construction=32, seed=3))
        q = HybridQuery(feature=ds.features[7], attrs=ds.attrs[7], k=5, ef_search=300)
        hits = g.search(q)
        assert hits[0].id == 7
        ref = fused_distances(fusion, ds.features, ds.attrs, ds.features[7], ds.attrs[7])
        for h in hits:
            assert h.fused_dist == pytest.approx(ref[h.id], rel=1e-12)


class TestPersistence:
    def test_round_trip_identity(self, small_dataset, small_graph, tmp_path):
        path = tmp_path / "graph.hqann"
        save(small_graph, path)
        loaded = load(path, small_dataset)
        assert loaded == small_graph
        q = HybridQuery(
            feature=small_dataset.features[3], attrs=small_dataset.attrs[3],
            k=5, ef_search=50,
        )
        assert [h.id for h in loaded.search(q)] == [h.id for h in small_graph.search(q)]

    def test_feature_only_round_trip(self, small_dataset, tmp_path):
        g = build_feature_graph(small_dataset, GraphParams(M=8, ef_construction=64, seed=5))
        path = tmp_path / "plain.hqann"
        save(g, path)
        loaded = load(path, small_dataset)
        assert loaded.feature_only
        assert loaded == g

    def test_bad_magic(self, small_dataset, tmp_path):
        path = tmp_path / "junk.hqann"
        path.write_bytes(b"NOPE" + b"\x00" * 100)
        with pytest.raises(FormatError):
            load(path, small_dataset)

    def test_bad_version(self, small_dataset, small_graph, tmp_path):
        path = tmp_path / "graph.hqann"
        save(small_graph, path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load(path, small_dataset)

    def test_wrong_point_count(self, small_dataset, small_graph, tmp_path):
        path = tmp_path / "graph.hqann"
        save(small_graph, path)
        smaller = HybridDataset(
            small_dataset.features[:100], small_dataset.attrs[:100]
        )
        with pytest.raises(DatasetMismatch):
            load(path, smaller)

    def test_checksum_catches_changed_data(self, small_dataset, small_graph, tmp_path):
        path = tmp_path / "graph.hqann"
        save(small_graph, path)
        feats = small_dataset.features.copy()
        feats[0, 0] += 0.25
        tampered = HybridDataset(feats, small_dataset.attrs)
        with pytest.raises(DatasetMismatch):
            load(path, tampered)

    def test_truncated_body(self, small_dataset, small_graph, tmp_path):
        path = tmp_path / "graph.hqann"
        save(small_graph, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 7])
        with pytest.raises(FormatError):
            load(path, small_dataset)
