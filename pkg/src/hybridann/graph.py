"""Hierarchical navigable proximity graph over an arbitrary fused metric.

Built under the attribute-dominant fused distance, the layered graph
links same-attribute points first and spends leftover neighbor slots on
attribute-distant points (a consequence of the diversity heuristic), so
one traversal serves both the filtering and the ranking half of a
hybrid query. The same machinery with the attribute term disabled
yields the plain feature-only graph used by the post-filtering
baseline.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import (
    AttributeMetric,
    DatasetMismatch,
    DimensionMismatch,
    EmptyDataset,
    FeatureMetric,
    FormatError,
    FusionParams,
    HybridDataset,
    HybridQuery,
    SearchHit,
)
from .metrics import feature_distances

__all__ = [
    "GraphParams",
    "CompositeGraph",
    "build",
    "build_feature_graph",
    "save",
    "load",
    "sample_levels",
]

_MAGIC = b"HQAN"
_VERSION = 1
_FLAG_FEATURE_ONLY = 0x1

_FEATURE_CODE = {FeatureMetric.L2: K.F_L2, FeatureMetric.IP: K.F_IP}
_ATTR_CODE = {AttributeMetric.MANHATTAN_LOG: K.A_MANHATTAN, AttributeMetric.HAMMING: K.A_HAMMING}


@dataclass(frozen=True)
class GraphParams:
    """Construction parameters.

    M bounds the out-degree per node per layer (the base layer allows
    2M); ef_construction is the candidate-beam width during insertion;
    level_norm is the geometric level-sampling multiplier, defaulting to
    1/ln(M); seed drives level sampling and makes builds reproducible.
    """

    M: int = 32
    ef_construction: int = 512
    level_norm: float | None = None
    seed: int = 42

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if self.ef_construction < self.M:
            raise ValueError(
                f"ef_construction must be >= M, got {self.ef_construction} < {self.M}"
            )

    def resolved_level_norm(self) -> float:
        if self.level_norm is not None:
            return self.level_norm
        return 1.0 / math.log(self.M)


def sample_levels(count: int, level_norm: float, seed: int) -> np.ndarray:
    """Geometric level per node: floor(-ln(U) * level_norm), U ~ (0, 1]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(count)
    return np.floor(-np.log1p(-u) * level_norm).astype(np.int32)


class CompositeGraph:
    """A built index: layered adjacency plus a handle to its dataset.

    Immutable after construction; search is read-only and safe to call
    from multiple threads concurrently.
    """

    def __init__(
        self,
        dataset: HybridDataset,
        params: GraphParams,
        fusion: FusionParams | None,
        levels: np.ndarray,
        adj0: np.ndarray,
        deg0: np.ndarray,
        adj_upper: np.ndarray,
        deg_upper: np.ndarray,
        entry_point: int,
        max_level: int,
    ):
        self.dataset = dataset
        self.params = params
        self.fusion = fusion  # None means feature-only (attribute term dropped)
        self.levels = levels
        self.adj0 = adj0
        self.deg0 = deg0
        self.adj_upper = adj_upper
        self.deg_upper = deg_upper
        self.entry_point = entry_point
        self.max_level = max_level

    @property
    def feature_only(self) -> bool:
        return self.fusion is None

    def _metric_codes(self) -> tuple[float, float, int, int]:
        if self.fusion is None:
            return 1.0, 0.0, _FEATURE_CODE[self.dataset.feature_metric], K.A_NONE
        return (
            self.fusion.w,
            self.fusion.bias,
            _FEATURE_CODE[self.fusion.feature_metric],
            _ATTR_CODE[self.fusion.attr_metric],
        )

    def search(self, q: HybridQuery) -> list[SearchHit]:
        """Top-k hits by fused distance, ascending, ties by id."""
        ids, dists = self.search_ids(q)
        ds = self.dataset
        metric = (
            self.dataset.feature_metric if self.fusion is None else self.fusion.feature_metric
        )
        g = feature_distances(metric, ds.features[ids], q.feature)
        match = (ds.attrs[ids] == q.attrs).all(axis=1)
        return [
            SearchHit(
                id=int(i),
                fused_dist=float(fd),
                feature_dist=float(gv),
                attrs_match=bool(mv),
            )
            for i, fd, gv, mv in zip(ids, dists, g, match)
        ]

    def search_ids(self, q: HybridQuery) -> tuple[np.ndarray, np.ndarray]:
        """Raw (ids, fused distances) arrays for the top-k, ascending."""
        ds = self.dataset
        if len(q.feature) != ds.m:
            raise DimensionMismatch(ds.m, len(q.feature))
        if len(q.attrs) != ds.n:
            raise DimensionMismatch(ds.n, len(q.attrs))
        w, bias, fkind, akind = self._metric_codes()
        return K.search_graph(
            ds.features, ds.attrs,
            self.adj0, self.deg0, self.adj_upper, self.deg_upper,
            self.entry_point, self.max_level,
            q.feature, q.attrs, q.k, q.ef_search,
            w, bias, fkind, akind,
        )

    def neighbors(self, node: int, level: int) -> np.ndarray:
        """Neighbor ids of `node` at `level` (copy)."""
        if level == 0:
            return self.adj0[node, : self.deg0[node]].copy()
        return self.adj_upper[level - 1, node, : self.deg_upper[level - 1, node]].copy()

    def level0_connected(self) -> bool:
        """BFS over the undirected base layer from the entry point."""
        n = len(self.dataset)
        if n == 0:
            return True
        seen = np.zeros(n, dtype=bool)
        undirected: list[list[int]] = [[] for _ in range(n)]
        for i in range(n):
            for j in self.adj0[i, : self.deg0[i]]:
                undirected[i].append(int(j))
                undirected[int(j)].append(i)
        queue = deque([self.entry_point])
        seen[self.entry_point] = True
        while queue:
            u = queue.popleft()
            for v in undirected[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return bool(seen.all())

    def check_invariants(self) -> None:
        """Assert degree bounds, link validity and entry-point level."""
        n = len(self.dataset)
        M = self.params.M
        if n == 0:
            return
        assert self.levels[self.entry_point] == self.max_level
        assert (self.deg0 <= 2 * M).all()
        for i in range(n):
            nbrs = self.adj0[i, : self.deg0[i]]
            assert (nbrs >= 0).all() and (nbrs < n).all()
            assert (nbrs != i).all()
            assert len(set(nbrs.tolist())) == len(nbrs)
        for lv in range(1, self.max_level + 1):
            deg = self.deg_upper[lv - 1]
            assert (deg <= M).all()
            active = np.flatnonzero(self.levels >= lv)
            inactive = np.flatnonzero(self.levels < lv)
            assert (deg[inactive] == 0).all()
            for i in active:
                nbrs = self.adj_upper[lv - 1, i, : deg[i]]
                assert (nbrs >= 0).all() and (nbrs < n).all()
                assert (nbrs != i).all()
                assert len(set(nbrs.tolist())) == len(nbrs)
                assert (self.levels[nbrs] >= lv).all()

    def __eq__(self, other) -> bool:
        """Structural equality over everything the index file carries.

        GraphParams.seed and level_norm are not part of the on-disk
        format (levels are stored explicitly), so they are excluded.
        """
        if not isinstance(other, CompositeGraph):
            return NotImplemented
        return (
            self.params.M == other.params.M
            and self.params.ef_construction == other.params.ef_construction
            and self.fusion == other.fusion
            and self.entry_point == other.entry_point
            and self.max_level == other.max_level
            and np.array_equal(self.levels, other.levels)
            and np.array_equal(self.deg0, other.deg0)
            and np.array_equal(self.adj0, other.adj0)
            and np.array_equal(self.deg_upper, other.deg_upper)
            and np.array_equal(self.adj_upper, other.adj_upper)
        )


def _mask_unused(adj: np.ndarray, deg: np.ndarray) -> None:
    # Pruning can shrink a degree and leave stale ids behind it; reset
    # those slots so array equality and serialization see a canonical form.
    cap = adj.shape[-1]
    stale = np.arange(cap)[None, :] >= deg[..., None]
    adj[stale] = -1


def _build_impl(
    ds: HybridDataset, fusion: FusionParams | None, gp: GraphParams
) -> CompositeGraph:
    if len(ds) == 0:
        raise EmptyDataset("cannot build a graph over an empty dataset")
    if fusion is not None and fusion.feature_metric is not ds.feature_metric:
        raise ValueError(
            f"fusion params use {fusion.feature_metric}, dataset declares {ds.feature_metric}"
        )
    levels = sample_levels(len(ds), gp.resolved_level_norm(), gp.seed)
    if fusion is None:
        w, bias, fkind, akind = 1.0, 0.0, _FEATURE_CODE[ds.feature_metric], K.A_NONE
    else:
        w, bias, fkind, akind = (
            fusion.w,
            fusion.bias,
            _FEATURE_CODE[fusion.feature_metric],
            _ATTR_CODE[fusion.attr_metric],
        )
    adj0, deg0, adj_upper, deg_upper, entry, max_level = K.build_graph(
        ds.features, ds.attrs, levels, gp.M, gp.ef_construction, w, bias, fkind, akind
    )
    _mask_unused(adj0, deg0)
    if adj_upper.size:
        _mask_unused(adj_upper, deg_upper)
    return CompositeGraph(
        dataset=ds,
        params=gp,
        fusion=fusion,
        levels=levels,
        adj0=adj0,
        deg0=deg0,
        adj_upper=adj_upper,
        deg_upper=deg_upper,
        entry_point=int(entry),
        max_level=int(max_level),
    )


def build(ds: HybridDataset, fusion: FusionParams, gp: GraphParams) -> CompositeGraph:
    """Build the composite graph under the fused metric.

    Deterministic given (dataset, fusion, gp.seed): points are inserted
    in id order and every tie is broken by ascending id.
    """
    if fusion is None:
        raise ValueError("fusion params required; use build_feature_graph instead")
    return _build_impl(ds, fusion, gp)


def build_feature_graph(ds: HybridDataset, gp: GraphParams) -> CompositeGraph:
    """Build a plain feature-metric graph (attribute term disabled).

    Used by the search-then-filter baseline; reported distances equal
    the raw feature distance.
    """
    return _build_impl(ds, None, gp)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------
#
# Little-endian layout:
#   magic "HQAN" | version u32 | flags u32 | M u32 | ef_construction u32
#   | w f64 | bias f64 | g_max f64 | attr_metric u8 | feature_metric u8
#   | count u64 | entry u64 | max_level u32 | dataset checksum (16 bytes)
#   then per node: level u32, then per level 0..level: count u32 + ids u32[]
# Vectors and attributes are not stored; the dataset files stay
# authoritative and the checksum ties the index to them.

_HEADER = struct.Struct("<4sIIII ddd BB QQI")


def dataset_checksum(ds: HybridDataset) -> bytes:
    """16 bytes: count, m, n (u32 each) and a u32 xor-fold of the data.

    The fold runs over the canonical file encodings (float32 features,
    int32 attrs) so it matches what the fvecs/ivecs files contain.
    """
    fold = np.uint32(0)
    fbytes = np.ascontiguousarray(ds.features, dtype="<f4").view(np.uint32)
    abytes = np.ascontiguousarray(ds.attrs, dtype="<i4").view(np.uint32)
    if fbytes.size:
        fold ^= np.bitwise_xor.reduce(fbytes.ravel())
    if abytes.size:
        fold ^= np.bitwise_xor.reduce(abytes.ravel())
    return struct.pack("<IIII", len(ds) & 0xFFFFFFFF, ds.m, ds.n, int(fold))


def save(g: CompositeGraph, path) -> None:
    """Write the index to `path` (see layout above)."""
    if g.fusion is None:
        flags = _FLAG_FEATURE_ONLY
        w, bias, g_max = 1.0, 0.0, 0.0
        attr_code = 0
        feat_code = _FEATURE_CODE[g.dataset.feature_metric]
    else:
        flags = 0
        w, bias, g_max = g.fusion.w, g.fusion.bias, g.fusion.g_max
        attr_code = _ATTR_CODE[g.fusion.attr_metric]
        feat_code = _FEATURE_CODE[g.fusion.feature_metric]
    header = _HEADER.pack(
        _MAGIC, _VERSION, flags, g.params.M, g.params.ef_construction,
        w, bias, g_max, attr_code, feat_code,
        len(g.dataset), g.entry_point, g.max_level,
    )
    parts = [header, dataset_checksum(g.dataset)]
    count_buf = struct.Struct("<I")
    for i in range(len(g.dataset)):
        lvl = int(g.levels[i])
        parts.append(count_buf.pack(lvl))
        for lev in range(lvl + 1):
            if lev == 0:
                nbrs = g.adj0[i, : g.deg0[i]]
            else:
                nbrs = g.adj_upper[lev - 1, i, : g.deg_upper[lev - 1, i]]
            parts.append(count_buf.pack(len(nbrs)))
            parts.append(np.ascontiguousarray(nbrs, dtype="<u4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load(path, ds: HybridDataset) -> CompositeGraph:
    """Read an index written by save() and bind it to `ds`.

    Raises FormatError on bad magic/version/layout and DatasetMismatch
    when the dataset does not match the stored count/dims/checksum.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size + 16:
        raise FormatError("file too short for index header")
    (
        magic, version, flags, M, efc,
        w, bias, g_max, attr_code, feat_code,
        count, entry, max_level,
    ) = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    stored_sum = buf[_HEADER.size : _HEADER.size + 16]
    if count != len(ds):
        raise DatasetMismatch(f"index holds {count} nodes, dataset has {len(ds)}")
    if stored_sum != dataset_checksum(ds):
        raise DatasetMismatch("dataset checksum does not match the index")
    feature_metric = FeatureMetric.IP if feat_code == K.F_IP else FeatureMetric.L2
    if feature_metric is not ds.feature_metric:
        raise DatasetMismatch(
            f"index was built with {feature_metric}, dataset declares {ds.feature_metric}"
        )
    if flags & _FLAG_FEATURE_ONLY:
        fusion = None
    else:
        attr_metric = (
            AttributeMetric.HAMMING if attr_code == K.A_HAMMING else AttributeMetric.MANHATTAN_LOG
        )
        fusion = FusionParams(
            w=w, bias=bias, g_max=g_max,
            attr_metric=attr_metric, feature_metric=feature_metric,
        )
    gp = GraphParams(M=M, ef_construction=efc)
    levels = np.zeros(count, dtype=np.int32)
    adj0 = np.full((count, 2 * M), -1, dtype=np.int32)
    deg0 = np.zeros(count, dtype=np.int32)
    adj_upper = np.full((max_level, count, M), -1, dtype=np.int32)
    deg_upper = np.zeros((max_level, count), dtype=np.int32)
    pos = _HEADER.size + 16
    u32 = struct.Struct("<I")
    try:
        for i in range(count):
            (lvl,) = u32.unpack_from(buf, pos)
            pos += 4
            if lvl > max_level:
                raise FormatError(f"node {i} level {lvl} exceeds max level {max_level}")
            levels[i] = lvl
            for lev in range(lvl + 1):
                (cnt,) = u32.unpack_from(buf, pos)
                pos += 4
                ids = np.frombuffer(buf, dtype="<u4", count=cnt, offset=pos).astype(np.int32)
                pos += 4 * cnt
                if lev == 0:
                    adj0[i, :cnt] = ids
                    deg0[i] = cnt
                else:
                    adj_upper[lev - 1, i, :cnt] = ids
                    deg_upper[lev - 1, i] = cnt
    except (struct.error, ValueError) as exc:
        raise FormatError(f"truncated or corrupt index body: {exc}") from exc
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after index body")
    return CompositeGraph(
        dataset=ds,
        params=gp,
        fusion=fusion,
        levels=levels,
        adj0=adj0,
        deg0=deg0,
        adj_upper=adj_upper,
        deg_upper=deg_upper,
        entry_point=int(entry),
        max_level=int(max_level),
    )
