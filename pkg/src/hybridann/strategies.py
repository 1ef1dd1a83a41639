"""Hybrid-query execution strategies and the exact oracles behind them.

Three ways to answer "top-k by feature distance among points whose
attributes equal the query's":

* fusion -- one traversal of the composite graph under the fused metric;
  filtering happens implicitly because matches dominate the ordering.
* search-then-filter -- feature-only ANN retrieval of an expanded
  candidate list (F * k), then drop attribute mismatches (post-filter).
  May return fewer than k hits; recall pays for the loss.
* filter-then-search -- exact scan of the attribute-matching whitelist
  ranked by feature distance (pre-filter). Exact by construction and
  doubles as the latency baseline for whitelist scanning.

Ground truth for recall is exact_filtered_topk: the feature-metric
top-k restricted to exact attribute matches, padded with -1 when fewer
than k matches exist.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    DimensionMismatch,
    FusionParams,
    HybridDataset,
    HybridQuery,
    SearchHit,
)
from .graph import CompositeGraph
from .metrics import feature_distances, fused_distances

__all__ = [
    "StrategyKind",
    "Strategy",
    "GroundTruth",
    "SENTINEL",
    "exact_fused_topk",
    "exact_filtered_topk",
    "compute_ground_truth",
    "run_strategy",
]

SENTINEL = -1


class StrategyKind(Enum):
    FUSION = "fusion"
    SEARCH_THEN_FILTER = "post-filter"
    FILTER_THEN_SEARCH = "pre-filter"


@dataclass(frozen=True)
class Strategy:
    """A strategy choice; `expansion` (F >= 1) only matters to post-filter."""

    kind: StrategyKind
    expansion: int = 100

    def __post_init__(self):
        if self.expansion < 1:
            raise ValueError(f"expansion factor must be >= 1, got {self.expansion}")

    @classmethod
    def parse(cls, text: str, expansion: int = 100) -> "Strategy":
        """Accept canonical names and the descriptive aliases."""
        aliases = {
            "fusion": StrategyKind.FUSION,
            "post-filter": StrategyKind.SEARCH_THEN_FILTER,
            "search-then-filter": StrategyKind.SEARCH_THEN_FILTER,
            "pre-filter": StrategyKind.FILTER_THEN_SEARCH,
            "filter-then-search": StrategyKind.FILTER_THEN_SEARCH,
        }
        key = text.strip().lower()
        if key not in aliases:
            raise ValueError(f"unknown strategy {text!r}; expected one of {sorted(aliases)}")
        return cls(kind=aliases[key], expansion=expansion)


@dataclass(frozen=True)
class GroundTruth:
    """Per-query ranked id lists, shape (n_queries, k), -1-padded."""

    ids: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ValueError("ground truth must be a (n_queries, k) matrix")
        object.__setattr__(self, "ids", ids)

    @property
    def k(self) -> int:
        return self.ids.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def _check_query_dims(ds: HybridDataset, q: HybridQuery) -> None:
    if len(q.feature) != ds.m:
        raise DimensionMismatch(ds.m, len(q.feature))
    if len(q.attrs) != ds.n:
        raise DimensionMismatch(ds.n, len(q.attrs))


def exact_fused_topk(
    ds: HybridDataset, fusion: FusionParams, q: HybridQuery, k: int | None = None
) -> list[SearchHit]:
    """Brute-force top-k by fused distance; the oracle the graph chases."""
    _check_query_dims(ds, q)
    k = q.k if k is None else k
    dists = fused_distances(fusion, ds.features, ds.attrs, q.feature, q.attrs)
    order = np.lexsort((np.arange(len(ds)), dists))[:k]
    g = feature_distances(fusion.feature_metric, ds.features[order], q.feature)
    match = (ds.attrs[order] == q.attrs).all(axis=1)
    return [
        SearchHit(
            id=int(i),
            fused_dist=float(dists[i]),
            feature_dist=float(gv),
            attrs_match=bool(mv),
        )
        for i, gv, mv in zip(order, g, match)
    ]


def exact_filtered_topk(
    ds: HybridDataset, q: HybridQuery, k: int | None = None
) -> np.ndarray:
    """Ground-truth row: feature-metric top-k over exact attribute
    matches, padded with -1 when fewer than k matches exist."""
    _check_query_dims(ds, q)
    k = q.k if k is None else k
    mask = (ds.attrs == q.attrs).all(axis=1)
    ids = np.flatnonzero(mask)
    out = np.full(k, SENTINEL, dtype=np.int64)
    if len(ids) == 0:
        return out
    g = feature_distances(ds.feature_metric, ds.features[ids], q.feature)
    order = np.lexsort((ids, g))[:k]
    out[: len(order)] = ids[order]
    return out


def compute_ground_truth(
    ds: HybridDataset, queries: Sequence[HybridQuery], k: int
) -> GroundTruth:
    rows = np.stack([exact_filtered_topk(ds, q, k) for q in queries])
    return GroundTruth(ids=rows)


def _post_filter(graph: CompositeGraph, q: HybridQuery, expansion: int) -> list[SearchHit]:
    fetch = expansion * q.k
    wide = HybridQuery(
        feature=q.feature,
        attrs=q.attrs,
        k=fetch,
        ef_search=max(q.ef_search, fetch),
    )
    hits = graph.search(wide)
    kept = [h for h in hits if h.attrs_match]
    return kept[: q.k]


def _pre_filter(ds: HybridDataset, q: HybridQuery) -> list[SearchHit]:
    _check_query_dims(ds, q)
    mask = (ds.attrs == q.attrs).all(axis=1)
    ids = np.flatnonzero(mask)
    if len(ids) == 0:
        return []
    g = feature_distances(ds.feature_metric, ds.features[ids], q.feature)
    order = np.lexsort((ids, g))[: q.k]
    return [
        SearchHit(
            id=int(ids[o]),
            fused_dist=float(g[o]),
            feature_dist=float(g[o]),
            attrs_match=True,
        )
        for o in order
    ]


def run_strategy(
    strategy: Strategy,
    target: CompositeGraph | HybridDataset,
    q: HybridQuery,
) -> list[SearchHit]:
    """Execute one query under a strategy.

    fusion needs a composite (fused-metric) graph, post-filter a
    feature-only graph, pre-filter just the dataset. Short result lists
    are legitimate outcomes, not errors.
    """
    if strategy.kind is StrategyKind.FUSION:
        if not isinstance(target, CompositeGraph) or target.feature_only:
            raise ValueError("fusion strategy requires a fused composite graph")
        return target.search(q)
    if strategy.kind is StrategyKind.SEARCH_THEN_FILTER:
        if not isinstance(target, CompositeGraph) or not target.feature_only:
            raise ValueError("post-filter strategy requires a feature-only graph")
        return _post_filter(target, q, strategy.expansion)
    if not isinstance(target, HybridDataset):
        if isinstance(target, CompositeGraph):
            target = target.dataset
        else:
            raise ValueError("pre-filter strategy requires a dataset")
    return _pre_filter(target, q)
