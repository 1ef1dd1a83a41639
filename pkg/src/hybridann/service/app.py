"""FastAPI service wrapping the search library.

Endpoints mirror the benchmark pipeline: generate datasets, build
indexes, compute ground truth, search, and run the measurement suites.
Inputs and outputs are files on the service host plus JSON payloads;
the CLI drives these endpoints either in-process or over HTTP.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bench import (
    RunRecord,
    records_to_csv,
    robustness_suite,
    sweep,
    w_sensitivity_suite,
)
from ..core import (
    AttributeMetric,
    FeatureMetric,
    FusionParams,
    HybridAnnError,
    HybridDataset,
    HybridQuery,
    validate_dataset,
)
from ..dataio import (
    ATTR_SALT,
    QUERY_SALT,
    derive_seed,
    load_ground_truth,
    random_attributes,
    random_features,
    read_fvecs,
    read_ivecs,
    save_ground_truth,
    write_fvecs,
    write_ivecs,
)
from ..graph import GraphParams, build, build_feature_graph, load, save
from ..strategies import Strategy, StrategyKind, compute_ground_truth
from . import models as m

_FEATURE_METRICS = {"ip": FeatureMetric.IP, "l2": FeatureMetric.L2}
_ATTR_METRICS = {
    "manhattan-log": AttributeMetric.MANHATTAN_LOG,
    "hamming": AttributeMetric.HAMMING,
}


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p


def _require_absent(path: str, force: bool) -> Path:
    p = Path(path)
    if p.exists() and not force:
        raise FileExistsError(f"{path} exists; pass force to overwrite")
    return p


def _load_dataset(base: str, attrs: str, metric: str) -> HybridDataset:
    features = read_fvecs(_require_file(base))
    attr_matrix = read_ivecs(_require_file(attrs)).astype(np.int64)
    ds = HybridDataset(
        features,
        attr_matrix,
        feature_metric=_FEATURE_METRICS[metric],
        name=Path(base).stem,
    )
    validate_dataset(ds)
    return ds


def _load_queries(req: m.SearchRequest | m.GroundTruthRequest, k: int, ef: int) -> list[HybridQuery]:
    if isinstance(req, m.SearchRequest) and req.query_vectors is not None:
        if req.query_attr_vectors is None:
            raise HybridAnnError("query_attr_vectors required with query_vectors")
        feats = np.asarray(req.query_vectors, dtype=np.float64)
        attrs = np.asarray(req.query_attr_vectors, dtype=np.int64)
    else:
        if req.queries is None or req.query_attrs is None:
            raise HybridAnnError("queries and query_attrs file paths required")
        feats = read_fvecs(_require_file(req.queries))
        attrs = read_ivecs(_require_file(req.query_attrs)).astype(np.int64)
    if len(feats) != len(attrs):
        raise HybridAnnError(
            f"{len(feats)} query vectors vs {len(attrs)} query attribute rows"
        )
    return [
        HybridQuery(feature=feats[i], attrs=attrs[i], k=k, ef_search=ef)
        for i in range(len(feats))
    ]


def _record_models(records: list[RunRecord]) -> list[m.RunRecordModel]:
    return [m.RunRecordModel(**r.__dict__) for r in records]


def _bench_response(records: list[RunRecord], comment: str, out: str | None, force: bool) -> m.BenchResponse:
    csv_text = records_to_csv(records, comment)
    out_path = None
    if out:
        p = _require_absent(out, force)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(csv_text, encoding="utf-8")
        out_path = str(p)
    return m.BenchResponse(records=_record_models(records), csv=csv_text, out=out_path)


def create_app() -> FastAPI:
    app = FastAPI(title="hybridann", version=__version__)

    @app.exception_handler(HybridAnnError)
    async def _domain_error(_: Request, exc: HybridAnnError):
        return JSONResponse(
            status_code=400,
            content={"detail": str(exc), "error": type(exc).__name__},
        )

    @app.exception_handler(FileNotFoundError)
    async def _missing(_: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(FileExistsError)
    async def _exists(_: Request, exc: FileExistsError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/healthz", response_model=m.HealthResponse)
    def healthz() -> m.HealthResponse:
        return m.HealthResponse(status="ok", version=__version__)

    @app.post("/datasets/generate", response_model=m.GenerateResponse)
    def generate(req: m.GenerateRequest) -> m.GenerateResponse:
        out_dir = Path(req.out_dir)
        if out_dir.exists() and any(out_dir.iterdir()) and not req.force:
            raise FileExistsError(
                f"{req.out_dir} exists and is not empty; pass force to overwrite"
            )
        out_dir.mkdir(parents=True, exist_ok=True)
        base = random_features(req.count, req.dim, req.seed, req.normalized)
        attrs = random_attributes(
            req.count, req.categories, req.attr_dim, derive_seed(req.seed, ATTR_SALT)
        )
        qf = random_features(
            req.queries, req.dim, derive_seed(req.seed, QUERY_SALT), req.normalized
        )
        qa = random_attributes(
            req.queries, req.categories, req.attr_dim, derive_seed(req.seed, QUERY_SALT, ATTR_SALT)
        )
        outputs = [
            ("base.fvecs", base.astype(np.float32), "f32", write_fvecs),
            ("attrs.ivecs", attrs.astype(np.int32), "i32", write_ivecs),
            ("query.fvecs", qf.astype(np.float32), "f32", write_fvecs),
            ("query_attrs.ivecs", qa.astype(np.int32), "i32", write_ivecs),
        ]
        files = []
        for fname, matrix, kind, writer in outputs:
            path = out_dir / fname
            writer(matrix, path)
            files.append(
                m.FileInfo(path=str(path), rows=matrix.shape[0], dim=matrix.shape[1], kind=kind)
            )
        return m.GenerateResponse(files=files)

    @app.post("/index/build", response_model=m.BuildResponse)
    def build_index(req: m.BuildRequest) -> m.BuildResponse:
        out = _require_absent(req.out, req.force)
        ds = _load_dataset(req.base, req.attrs, req.metric)
        gp = GraphParams(M=req.M, ef_construction=req.ef_construction, seed=req.seed)
        t0 = time.perf_counter()
        if req.feature_only:
            g = build_feature_graph(ds, gp)
        else:
            fusion = FusionParams(
                w=req.w,
                bias=req.bias,
                g_max=req.g_max,
                attr_metric=_ATTR_METRICS[req.attr_metric],
                feature_metric=_FEATURE_METRICS[req.metric],
            )
            g = build(ds, fusion, gp)
        elapsed = time.perf_counter() - t0
        out.parent.mkdir(parents=True, exist_ok=True)
        save(g, out)
        return m.BuildResponse(
            index=str(out),
            count=len(ds),
            max_level=g.max_level,
            entry_point=g.entry_point,
            build_seconds=elapsed,
        )

    @app.post("/ground-truth", response_model=m.GroundTruthResponse)
    def ground_truth(req: m.GroundTruthRequest) -> m.GroundTruthResponse:
        out = _require_absent(req.out, req.force)
        ds = _load_dataset(req.base, req.attrs, req.metric)
        queries = _load_queries(req, req.k, max(req.k, 1))
        gt = compute_ground_truth(ds, queries, req.k)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_ground_truth(gt, out)
        return m.GroundTruthResponse(ground_truth=str(out), queries=len(queries), k=req.k)

    @app.post("/search", response_model=m.SearchResponse)
    def search(req: m.SearchRequest) -> m.SearchResponse:
        ds = _load_dataset(req.base, req.attrs, req.metric)
        g = load(_require_file(req.index), ds)
        # HybridQuery construction enforces ef_search >= k (BudgetTooSmall -> 400)
        queries = _load_queries(req, req.k, req.ef_search)
        results = []
        for q in queries:
            hits = g.search(q)
            results.append(
                [
                    m.SearchHitModel(
                        id=h.id,
                        fused_dist=h.fused_dist,
                        feature_dist=h.feature_dist,
                        attrs_match=h.attrs_match,
                    )
                    for h in hits
                ]
            )
        return m.SearchResponse(results=results)

    @app.post("/bench/sweep", response_model=m.BenchResponse)
    def bench_sweep(req: m.SweepRequest) -> m.BenchResponse:
        strategy = Strategy.parse(req.strategy)
        ds = _load_dataset(req.base, req.attrs, req.metric)
        gt = load_ground_truth(_require_file(req.ground_truth))
        qf = read_fvecs(_require_file(req.queries))
        qa = read_ivecs(_require_file(req.query_attrs)).astype(np.int64)
        if len(qf) != len(gt.ids):
            raise HybridAnnError(
                f"{len(qf)} queries vs {len(gt.ids)} ground-truth rows"
            )
        queries = [
            HybridQuery(feature=qf[i], attrs=qa[i], k=req.k, ef_search=max(req.k, min(req.budgets)))
            for i in range(len(qf))
        ]
        if strategy.kind is StrategyKind.FILTER_THEN_SEARCH:
            target: HybridDataset | object = ds
        else:
            if req.index is None:
                raise HybridAnnError(f"strategy {req.strategy!r} requires an index file")
            target = load(_require_file(req.index), ds)
            if strategy.kind is StrategyKind.FUSION and target.feature_only:
                raise HybridAnnError("fusion strategy requires a fused index, got feature-only")
            if strategy.kind is StrategyKind.SEARCH_THEN_FILTER and not target.feature_only:
                raise HybridAnnError("post-filter strategy requires a feature-only index")
        records = sweep(
            target, strategy, queries, gt, req.budgets,
            threads=req.threads, categories=req.categories,
        )
        comment = (
            f"strategy={req.strategy} budgets={req.budgets} k={req.k} "
            f"threads={req.threads} base={req.base}"
        )
        return _bench_response(records, comment, req.out, req.force)

    @app.post("/bench/robustness", response_model=m.BenchResponse)
    def bench_robustness(req: m.RobustnessRequest) -> m.BenchResponse:
        features = read_fvecs(_require_file(req.base))
        fusion = FusionParams(
            w=req.w,
            bias=req.bias,
            g_max=req.g_max,
            feature_metric=_FEATURE_METRICS[req.metric],
        )
        records = robustness_suite(
            features,
            req.c_values,
            n=req.attr_dim,
            k=req.k,
            ef_search=req.ef_search,
            expansion=req.expansion,
            n_queries=req.queries,
            fusion_template=fusion,
            graph_params=GraphParams(M=req.M, ef_construction=req.ef_construction, seed=req.seed),
            strategies=[Strategy.parse(s, expansion=req.expansion) for s in req.strategies],
            threads=req.threads,
            seed=req.seed,
            feature_metric=_FEATURE_METRICS[req.metric],
            dataset_name=Path(req.base).stem,
        )
        comment = (
            f"c_values={req.c_values} n={req.attr_dim} k={req.k} ef_search={req.ef_search} "
            f"expansion={req.expansion} queries={req.queries} w={req.w:g} bias={req.bias:.9g} "
            f"M={req.M} ef_construction={req.ef_construction} seed={req.seed} "
            f"threads={req.threads} base={req.base}"
        )
        return _bench_response(records, comment, req.out, req.force)

    @app.post("/bench/sensitivity", response_model=m.BenchResponse)
    def bench_sensitivity(req: m.SensitivityRequest) -> m.BenchResponse:
        features = read_fvecs(_require_file(req.base))
        records = w_sensitivity_suite(
            features,
            req.w_values,
            req.categories,
            n=req.attr_dim,
            k=req.k,
            ef_search=req.ef_search,
            n_queries=req.queries,
            bias=req.bias,
            g_max=req.g_max,
            graph_params=GraphParams(M=req.M, ef_construction=req.ef_construction, seed=req.seed),
            threads=req.threads,
            seed=req.seed,
            feature_metric=_FEATURE_METRICS[req.metric],
            dataset_name=Path(req.base).stem,
        )
        comment = (
            f"categories={req.categories} w_values={req.w_values} k={req.k} "
            f"ef_search={req.ef_search} queries={req.queries} bias={req.bias:.9g} "
            f"M={req.M} ef_construction={req.ef_construction} seed={req.seed} "
            f"threads={req.threads} base={req.base}"
        )
        return _bench_response(records, comment, req.out, req.force)

    return app


app = create_app()


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("hybridann.service:app", host="127.0.0.1", port=8000)
