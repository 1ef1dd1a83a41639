"""Hybrid vector + attribute nearest-neighbor search.

An approximate-nearest-neighbor library for hybrid queries: a feature
vector paired with required integer attributes. The fused distance
makes attribute agreement dominate the ordering, so a single layered
proximity-graph traversal answers the filtered query; exact oracles,
baseline strategies and a benchmark harness are included, along with a
FastAPI service and a thin CLI client.
"""

from .core import (
    DEFAULT_BIAS,
    DEFAULT_W,
    INV_LG2,
    AttributeMetric,
    BiasTooSmall,
    BudgetTooSmall,
    DatasetMismatch,
    DimensionMismatch,
    EmptyDataset,
    FeatureMetric,
    FormatError,
    FusionParams,
    HybridAnnError,
    HybridDataset,
    HybridPoint,
    HybridQuery,
    LengthMismatch,
    NonContiguousIds,
    NotNormalized,
    RaggedDims,
    SearchHit,
    TruncatedRecord,
    dataset_from_points,
    make_fusion_params,
    min_admissible_bias,
    validate_dataset,
)
from .graph import CompositeGraph, GraphParams, build, build_feature_graph, load, save
from .metrics import (
    attribute_distance,
    feature_distance,
    fused_distance,
    hamming_attribute_distance,
    manhattan_distance,
)
from .strategies import (
    GroundTruth,
    Strategy,
    StrategyKind,
    compute_ground_truth,
    exact_filtered_topk,
    exact_fused_topk,
    run_strategy,
)

__version__ = "0.1.0"
