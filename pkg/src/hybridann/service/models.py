"""Pydantic request/response models for the HTTP service.

Paths in requests are interpreted on the machine running the service;
the bundled CLI runs the app in-process by default, so they resolve
locally unless a remote server is configured.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..core import DEFAULT_BIAS, DEFAULT_W


class FileInfo(BaseModel):
    path: str
    rows: int
    dim: int
    kind: str


class GenerateRequest(BaseModel):
    out_dir: str
    count: int = Field(ge=1)
    dim: int = Field(ge=1)
    categories: int = Field(ge=1)
    attr_dim: int = Field(default=1, ge=1)
    queries: int = Field(default=100, ge=1)
    seed: int = 42
    normalized: bool = True
    force: bool = False


class GenerateResponse(BaseModel):
    files: list[FileInfo]


class BuildRequest(BaseModel):
    base: str
    attrs: str
    out: str
    metric: str = Field(default="ip", pattern="^(ip|l2)$")
    attr_metric: str = Field(default="manhattan-log", pattern="^(manhattan-log|hamming)$")
    feature_only: bool = False
    w: float = Field(default=DEFAULT_W, gt=0)
    bias: float = DEFAULT_BIAS
    g_max: float = Field(default=1.0, gt=0)
    M: int = Field(default=32, ge=2)
    ef_construction: int = Field(default=512, ge=2)
    seed: int = 42
    force: bool = False


class BuildResponse(BaseModel):
    index: str
    count: int
    max_level: int
    entry_point: int
    build_seconds: float


class GroundTruthRequest(BaseModel):
    base: str
    attrs: str
    queries: str
    query_attrs: str
    out: str
    k: int = Field(default=10, ge=1)
    metric: str = Field(default="ip", pattern="^(ip|l2)$")
    force: bool = False


class GroundTruthResponse(BaseModel):
    ground_truth: str
    queries: int
    k: int


class SearchRequest(BaseModel):
    index: str
    base: str
    attrs: str
    metric: str = Field(default="ip", pattern="^(ip|l2)$")
    queries: str | None = None
    query_attrs: str | None = None
    query_vectors: list[list[float]] | None = None
    query_attr_vectors: list[list[int]] | None = None
    k: int = Field(default=10, ge=1)
    ef_search: int = Field(default=80, ge=1)


class SearchHitModel(BaseModel):
    id: int
    fused_dist: float
    feature_dist: float
    attrs_match: bool


class SearchResponse(BaseModel):
    results: list[list[SearchHitModel]]


class RunRecordModel(BaseModel):
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


class SweepRequest(BaseModel):
    base: str
    attrs: str
    queries: str
    query_attrs: str
    ground_truth: str
    strategy: str = "fusion"
    index: str | None = None
    budgets: list[int] = Field(default=[80], min_length=1)
    k: int = Field(default=10, ge=1)
    threads: int = Field(default=1, ge=1)
    categories: int = -1
    metric: str = Field(default="ip", pattern="^(ip|l2)$")
    out: str | None = None
    force: bool = False


class RobustnessRequest(BaseModel):
    base: str
    c_values: list[int] = Field(min_length=1)
    attr_dim: int = Field(default=1, ge=1)
    k: int = Field(default=10, ge=1)
    ef_search: int = Field(default=80, ge=1)
    expansion: int = Field(default=100, ge=1)
    queries: int = Field(default=200, ge=1)
    w: float = Field(default=DEFAULT_W, gt=0)
    bias: float = DEFAULT_BIAS
    g_max: float = Field(default=1.0, gt=0)
    M: int = Field(default=32, ge=2)
    ef_construction: int = Field(default=512, ge=2)
    seed: int = 42
    threads: int = Field(default=1, ge=1)
    strategies: list[str] = Field(default=["fusion", "post-filter", "pre-filter"], min_length=1)
    metric: str = Field(default="ip", pattern="^(ip|l2)$")
    out: str | None = None
    force: bool = False


class SensitivityRequest(BaseModel):
    base: str
    categories: int = Field(ge=1)
    w_values: list[float] = Field(default=[1.0, 0.5, 0.25, 0.1], min_length=1)
    attr_dim: int = Field(default=1, ge=1)
    k: int = Field(default=10, ge=1)
    ef_search: int = Field(default=80, ge=1)
    queries: int = Field(default=200, ge=1)
    bias: float = DEFAULT_BIAS
    g_max: float = Field(default=1.0, gt=0)
    M: int = Field(default=32, ge=2)
    ef_construction: int = Field(default=512, ge=2)
    seed: int = 42
    threads: int = Field(default=1, ge=1)
    metric: str = Field(default="ip", pattern="^(ip|l2)$")
    out: str | None = None
    force: bool = False


class BenchResponse(BaseModel):
    records: list[RunRecordModel]
    csv: str
    out: str | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
