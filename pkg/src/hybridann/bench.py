"""Recall and throughput measurement for hybrid-query strategies.

A sweep runs one strategy over a query set at a list of budgets (beam
width for fusion, expansion factor for post-filter) and emits one
RunRecord per budget: recall against exact ground truth, QPS over a
warmed-up timed pass, and latency percentiles. The robustness suite
replays the same measurement while the number of attribute categories
grows; the sensitivity suite replays it across feature-weight settings.

Recall is deterministic given seeds; QPS and latency are whatever the
machine gives. Worker threads each execute whole queries against the
shared read-only graph, and per-query latencies land in per-index slots
so no locking is needed.
"""

from __future__ import annotations

import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_BIAS,
    AttributeMetric,
    FeatureMetric,
    FusionParams,
    HybridDataset,
    HybridQuery,
    LengthMismatch,
    validate_dataset,
)
from .dataio import ATTR_SALT, QUERY_SALT, derive_seed, random_attributes, random_features
from .graph import CompositeGraph, GraphParams, build, build_feature_graph
from .strategies import (
    GroundTruth,
    Strategy,
    StrategyKind,
    compute_ground_truth,
    run_strategy,
)

__all__ = [
    "RunRecord",
    "CSV_COLUMNS",
    "recall_at_k",
    "sweep",
    "robustness_suite",
    "w_sensitivity_suite",
    "write_csv",
    "records_to_csv",
]

CSV_COLUMNS = (
    "dataset,strategy,C,w,bias,M,ef_construction,budget,k,threads,recall,qps,p50_us,p99_us"
)


@dataclass(frozen=True)
class RunRecord:
    """One measurement row; mirrors the CSV schema exactly."""

    dataset: str
    strategy: str
    C: int
    w: float
    bias: float
    M: int
    ef_construction: int
    budget: int
    k: int
    threads: int
    recall: float
    qps: float
    p50_us: float
    p99_us: float

    def to_csv_row(self) -> str:
        return (
            f"{self.dataset},{self.strategy},{self.C},{self.w:g},{self.bias:.9g},"
            f"{self.M},{self.ef_construction},{self.budget},{self.k},{self.threads},"
            f"{self.recall:.6f},{self.qps:.3f},{self.p50_us:.3f},{self.p99_us:.3f}"
        )


def recall_at_k(
    results: Sequence[Sequence[int]], gt: GroundTruth, k: int | None = None
) -> float:
    """Mean over queries of |returned[:k] ∩ truth| / |truth|.

    Truth per query is the non-sentinel prefix of the ground-truth row;
    queries whose truth is empty are left out of the mean entirely.
    """
    if len(results) != len(gt):
        raise LengthMismatch(f"{len(results)} result lists vs {len(gt)} truth rows")
    k = gt.k if k is None else k
    total = 0.0
    counted = 0
    for returned, row in zip(results, gt.ids):
        truth = row[row >= 0][:k]
        if len(truth) == 0:
            continue
        got = set(int(r) for r in returned[:k])
        total += len(got.intersection(truth.tolist())) / len(truth)
        counted += 1
    return total / counted if counted else 0.0


def _run_pass(
    strategy: Strategy,
    target,
    queries: Sequence[HybridQuery],
    threads: int,
) -> tuple[list[list[int]], np.ndarray, float]:
    """Execute all queries; returns (id lists, per-query latency us, wall s)."""
    nq = len(queries)
    ids: list[list[int]] = [[] for _ in range(nq)]
    lat = np.zeros(nq, dtype=np.float64)

    def one(i: int) -> None:
        t0 = time.perf_counter_ns()
        hits = run_strategy(strategy, target, queries[i])
        lat[i] = (time.perf_counter_ns() - t0) / 1e3
        ids[i] = [h.id for h in hits]

    wall0 = time.perf_counter()
    if threads <= 1:
        for i in range(nq):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(nq)))
    wall = time.perf_counter() - wall0
    return ids, lat, wall


def sweep(
    target: CompositeGraph | HybridDataset,
    strategy: Strategy,
    queries: Sequence[HybridQuery],
    gt: GroundTruth,
    budgets: Sequence[int],
    threads: int = 1,
    categories: int = -1,
    warmup: bool = True,
) -> list[RunRecord]:
    """One RunRecord per budget: warm-up pass, then a timed pass.

    Budget means ef_search for fusion and the expansion factor F for
    post-filter; pre-filter ignores it (exact scan) but the value is
    still recorded.
    """
    if len(queries) != len(gt):
        raise LengthMismatch(f"{len(queries)} queries vs {len(gt)} truth rows")
    if isinstance(target, CompositeGraph):
        ds = target.dataset
        M, efc = target.params.M, target.params.ef_construction
        w, bias = (1.0, 0.0) if target.fusion is None else (target.fusion.w, target.fusion.bias)
    else:
        ds = target
        M = efc = 0
        w, bias = 1.0, 0.0
    records = []
    for budget in budgets:
        if strategy.kind is StrategyKind.FUSION:
            strat_b = strategy
            run_queries = [replace(q, ef_search=int(budget)) for q in queries]
        elif strategy.kind is StrategyKind.SEARCH_THEN_FILTER:
            strat_b = replace(strategy, expansion=int(budget))
            run_queries = list(queries)
        else:
            strat_b = strategy
            run_queries = list(queries)
        if warmup:
            _run_pass(strat_b, target, run_queries, threads)
        ids, lat, wall = _run_pass(strat_b, target, run_queries, threads)
        records.append(
            RunRecord(
                dataset=ds.name,
                strategy=strategy.kind.value,
                C=categories,
                w=w,
                bias=bias,
                M=M,
                ef_construction=efc,
                budget=int(budget),
                k=gt.k,
                threads=threads,
                recall=recall_at_k(ids, gt),
                qps=len(run_queries) / wall if wall > 0 else float("inf"),
                p50_us=float(np.percentile(lat, 50)),
                p99_us=float(np.percentile(lat, 99)),
            )
        )
    return records


def _query_features(nq: int, m: int, seed: int, normalized: bool) -> np.ndarray:
    return random_features(nq, m, derive_seed(seed, QUERY_SALT), normalized)


def robustness_suite(
    features: np.ndarray,
    c_values: Sequence[int],
    *,
    n: int = 1,
    k: int = 10,
    ef_search: int = 80,
    expansion: int = 100,
    n_queries: int = 200,
    fusion_template: FusionParams | None = None,
    graph_params: GraphParams | None = None,
    strategies: Sequence[Strategy] | None = None,
    threads: int = 1,
    seed: int = 42,
    feature_metric: FeatureMetric = FeatureMetric.IP,
    dataset_name: str = "synthetic",
) -> list[RunRecord]:
    """Fix the feature set, grow the attribute cardinality, re-measure.

    Per cardinality C the base and query attributes are regenerated
    from seeds derived as (seed, C, role), indexes are rebuilt, fresh
    ground truth is computed, and each strategy contributes one record
    at the fixed budget (ef_search for fusion, F for post-filter).
    """
    features = np.asarray(features, dtype=np.float64)
    count, m = features.shape
    fusion_template = fusion_template or FusionParams(feature_metric=feature_metric)
    graph_params = graph_params or GraphParams(seed=seed)
    if strategies is None:
        strategies = [
            Strategy(StrategyKind.FUSION),
            Strategy(StrategyKind.SEARCH_THEN_FILTER, expansion=expansion),
            Strategy(StrategyKind.FILTER_THEN_SEARCH),
        ]
    qf = _query_features(n_queries, m, seed, feature_metric is FeatureMetric.IP)
    feature_graph = None
    if any(s.kind is StrategyKind.SEARCH_THEN_FILTER for s in strategies):
        base_plain = HybridDataset(
            features,
            np.zeros((count, n), dtype=np.int64),
            feature_metric=feature_metric,
            name=dataset_name,
        )
        feature_graph = build_feature_graph(base_plain, graph_params)
    records: list[RunRecord] = []
    for C in c_values:
        attrs = random_attributes(count, C, n, derive_seed(seed, C, ATTR_SALT))
        ds = HybridDataset(features, attrs, feature_metric=feature_metric, name=dataset_name)
        validate_dataset(ds)
        qa = random_attributes(n_queries, C, n, derive_seed(seed, C, QUERY_SALT))
        queries = [
            HybridQuery(feature=qf[i], attrs=qa[i], k=k, ef_search=ef_search)
            for i in range(n_queries)
        ]
        gt = compute_ground_truth(ds, queries, k)
        fused_graph = None
        for strategy in strategies:
            if strategy.kind is StrategyKind.FUSION:
                if fused_graph is None:
                    fused_graph = build(ds, fusion_template, graph_params)
                target: CompositeGraph | HybridDataset = fused_graph
                budget = ef_search
            elif strategy.kind is StrategyKind.SEARCH_THEN_FILTER:
                # Feature graph is attribute-free: rebind it to this C's dataset
                # so post-filtering sees the right attributes.
                target = CompositeGraph(
                    dataset=ds,
                    params=feature_graph.params,
                    fusion=None,
                    levels=feature_graph.levels,
                    adj0=feature_graph.adj0,
                    deg0=feature_graph.deg0,
                    adj_upper=feature_graph.adj_upper,
                    deg_upper=feature_graph.deg_upper,
                    entry_point=feature_graph.entry_point,
                    max_level=feature_graph.max_level,
                )
                budget = strategy.expansion
            else:
                target = ds
                budget = ef_search
            records.extend(
                sweep(target, strategy, queries, gt, [budget], threads=threads, categories=C)
            )
    return records


def w_sensitivity_suite(
    features: np.ndarray,
    w_values: Sequence[float],
    categories: int,
    *,
    n: int = 1,
    k: int = 10,
    ef_search: int = 80,
    n_queries: int = 200,
    bias: float = DEFAULT_BIAS,
    g_max: float = 1.0,
    attr_metric: AttributeMetric = AttributeMetric.MANHATTAN_LOG,
    graph_params: GraphParams | None = None,
    threads: int = 1,
    seed: int = 42,
    feature_metric: FeatureMetric = FeatureMetric.IP,
    dataset_name: str = "synthetic",
) -> list[RunRecord]:
    """Rebuild the fused graph per feature weight w at a fixed bias and
    attribute cardinality; one fusion record per w."""
    features = np.asarray(features, dtype=np.float64)
    count, m = features.shape
    graph_params = graph_params or GraphParams(seed=seed)
    attrs = random_attributes(count, categories, n, derive_seed(seed, categories, ATTR_SALT))
    ds = HybridDataset(features, attrs, feature_metric=feature_metric, name=dataset_name)
    validate_dataset(ds)
    qf = _query_features(n_queries, m, seed, feature_metric is FeatureMetric.IP)
    qa = random_attributes(n_queries, categories, n, derive_seed(seed, categories, QUERY_SALT))
    queries = [
        HybridQuery(feature=qf[i], attrs=qa[i], k=k, ef_search=ef_search)
        for i in range(n_queries)
    ]
    gt = compute_ground_truth(ds, queries, k)
    records: list[RunRecord] = []
    for w in w_values:
        fusion = FusionParams(
            w=w, bias=bias, g_max=g_max, attr_metric=attr_metric, feature_metric=feature_metric
        )
        g = build(ds, fusion, graph_params)
        records.extend(
            sweep(
                g,
                Strategy(StrategyKind.FUSION),
                queries,
                gt,
                [ef_search],
                threads=threads,
                categories=categories,
            )
        )
    return records


def records_to_csv(records: Sequence[RunRecord], comment: str | None = None) -> str:
    out = io.StringIO()
    if comment:
        for line in comment.splitlines():
            out.write(f"# {line}\n")
    out.write(CSV_COLUMNS + "\n")
    for r in records:
        out.write(r.to_csv_row() + "\n")
    return out.getvalue()


def write_csv(records: Sequence[RunRecord], path, comment: str | None = None) -> None:
    text = records_to_csv(records, comment)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def default_threads() -> int:
    return os.cpu_count() or 1
