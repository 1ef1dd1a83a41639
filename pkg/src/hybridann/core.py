"""Core domain types for hybrid (vector + attribute) search.

A hybrid point pairs a real-valued feature vector with an integer
attribute vector. Everything downstream (metrics, graph, strategies,
bench) consumes the packed array form held by :class:`HybridDataset`;
the validation entry points in this module are what guarantee the
invariants those modules rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "INV_LG2",
    "DEFAULT_W",
    "DEFAULT_BIAS",
    "NORM_TOL",
    "FeatureMetric",
    "AttributeMetric",
    "HybridAnnError",
    "DimensionMismatch",
    "NotNormalized",
    "NonContiguousIds",
    "BiasTooSmall",
    "EmptyDataset",
    "BudgetTooSmall",
    "FormatError",
    "DatasetMismatch",
    "RaggedDims",
    "TruncatedRecord",
    "LengthMismatch",
    "HybridPoint",
    "HybridDataset",
    "FusionParams",
    "HybridQuery",
    "SearchHit",
    "make_fusion_params",
    "min_admissible_bias",
    "validate_dataset",
    "dataset_from_points",
]

# 1 / log10(2): the largest value the fine-tuning term 1/log10(e + 1) can
# take over mismatched integer attribute vectors (e >= 1).
INV_LG2 = 1.0 / math.log10(2.0)

DEFAULT_W = 0.25

# Canonical bias. Chosen a hair above 1.0 + INV_LG2 = 4.321928094887362 so
# that the strict dominance inequality still admits w = 1.0 at g_max = 1.0,
# which the sensitivity sweep needs to construct.
DEFAULT_BIAS = 4.3219281

# Tolerance on |norm - 1| for inner-product datasets.
NORM_TOL = 1e-4


class FeatureMetric(Enum):
    """Distance family used on the feature-vector side."""

    L2 = "l2"
    IP = "ip"


class AttributeMetric(Enum):
    """Mapping used on the attribute-vector side before the log wrapper.

    MANHATTAN_LOG preserves the relative layout of attribute vectors;
    HAMMING collapses it to a count of differing dimensions and exists
    as a degradation baseline.
    """

    MANHATTAN_LOG = "manhattan-log"
    HAMMING = "hamming"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class HybridAnnError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(HybridAnnError):
    """A vector's length disagrees with the declared dimensionality."""

    def __init__(self, expected: int, got: int, point_id: int | None = None):
        self.expected = expected
        self.got = got
        self.point_id = point_id
        where = "query" if point_id is None else f"point {point_id}"
        super().__init__(f"{where}: expected dimension {expected}, got {got}")


class NotNormalized(HybridAnnError):
    """An IP dataset contains a feature vector that is not unit-norm."""

    def __init__(self, point_id: int, norm: float):
        self.point_id = point_id
        self.norm = norm
        super().__init__(
            f"point {point_id}: norm {norm:.6g} outside {NORM_TOL:g} of 1.0"
        )


class NonContiguousIds(HybridAnnError):
    """Point ids are not exactly 0..count-1."""


class BiasTooSmall(HybridAnnError):
    """Fusion bias fails the dominance constraint; carries the minimum."""

    def __init__(self, bias: float, min_bias: float):
        self.bias = bias
        self.min_bias = min_bias
        super().__init__(
            f"bias {bias!r} must exceed w*g_max + 1/log10(2) = {min_bias!r}"
        )


class EmptyDataset(HybridAnnError):
    """Operation requires at least one point."""


class BudgetTooSmall(HybridAnnError):
    """Search budget ef_search is smaller than k."""

    def __init__(self, ef_search: int, k: int):
        self.ef_search = ef_search
        self.k = k
        super().__init__(f"ef_search={ef_search} must be >= k={k}")


class FormatError(HybridAnnError):
    """A binary file does not carry the expected magic/version/layout."""


class DatasetMismatch(HybridAnnError):
    """An index file was built from a different dataset."""


class RaggedDims(HybridAnnError):
    """A vecs file mixes records of different dimension."""

    def __init__(self, record_index: int, expected: int, got: int):
        self.record_index = record_index
        self.expected = expected
        self.got = got
        super().__init__(
            f"record {record_index}: dimension {got} differs from first record ({expected})"
        )


class TruncatedRecord(HybridAnnError):
    """A vecs file ends in the middle of a record."""


class LengthMismatch(HybridAnnError):
    """Two per-query collections have different lengths."""


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


def _as_feature(vec) -> np.ndarray:
    arr = np.ascontiguousarray(vec, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("feature vector must be one-dimensional")
    return arr


def _as_attrs(vec) -> np.ndarray:
    arr = np.asarray(vec)
    if arr.ndim != 1:
        raise ValueError("attribute vector must be one-dimensional")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"attribute vector must be integer-typed, got {arr.dtype}")
    return np.ascontiguousarray(arr, dtype=np.int64)


@dataclass(frozen=True)
class HybridPoint:
    """One datapoint: dense id, feature vector, integer attribute vector."""

    id: int
    feature: np.ndarray
    attrs: np.ndarray

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"point id must be >= 0, got {self.id}")
        object.__setattr__(self, "feature", _as_feature(self.feature))
        object.__setattr__(self, "attrs", _as_attrs(self.attrs))


class HybridDataset:
    """An ordered, array-backed collection of hybrid points.

    `features` is a (count, m) float64 matrix, `attrs` a (count, n) int64
    matrix; point ids are the row indices. Instances are treated as
    immutable after construction and are safe to share across threads.
    """

    def __init__(
        self,
        features,
        attrs,
        feature_metric: FeatureMetric = FeatureMetric.IP,
        name: str = "dataset",
    ):
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        attrs = np.asarray(attrs)
        if attrs.ndim != 2:
            raise ValueError("attrs must be a 2-d matrix")
        if not np.issubdtype(attrs.dtype, np.integer):
            raise ValueError(f"attrs must be integer-typed, got {attrs.dtype}")
        attrs = np.ascontiguousarray(attrs, dtype=np.int64)
        if len(features) != len(attrs):
            raise LengthMismatch(
                f"{len(features)} feature rows vs {len(attrs)} attribute rows"
            )
        self.features = features
        self.attrs = attrs
        self.feature_metric = feature_metric
        self.name = name

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def n(self) -> int:
        return self.attrs.shape[1]

    def __len__(self) -> int:
        return len(self.features)

    def __getitem__(self, i: int) -> HybridPoint:
        if not 0 <= i < len(self):
            raise IndexError(i)
        return HybridPoint(id=i, feature=self.features[i], attrs=self.attrs[i])

    def __iter__(self) -> Iterator[HybridPoint]:
        for i in range(len(self)):
            yield self[i]

    @property
    def points(self) -> list[HybridPoint]:
        return list(self)


@dataclass(frozen=True)
class FusionParams:
    """Configuration of the fused distance w * g + f.

    Any instance that exists satisfies the dominance constraint
    bias > w * g_max + 1/log10(2): with the worst admissible feature
    distance g_max, a matched-attribute point still sorts strictly
    before the closest mismatched one.
    """

    w: float = DEFAULT_W
    bias: float = DEFAULT_BIAS
    g_max: float = 1.0
    attr_metric: AttributeMetric = AttributeMetric.MANHATTAN_LOG
    feature_metric: FeatureMetric = FeatureMetric.IP

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"w must be > 0, got {self.w}")
        if not self.g_max > 0:
            raise ValueError(f"g_max must be > 0, got {self.g_max}")
        min_bias = min_admissible_bias(self.w, self.g_max)
        if not self.bias > min_bias:
            raise BiasTooSmall(self.bias, min_bias)


def min_admissible_bias(w: float, g_max: float) -> float:
    """Smallest bias (exclusive) for which attribute mismatch dominates."""
    return w * g_max + INV_LG2


def make_fusion_params(
    w: float,
    bias: float,
    g_max: float = 1.0,
    attr_metric: AttributeMetric = AttributeMetric.MANHATTAN_LOG,
    feature_metric: FeatureMetric = FeatureMetric.IP,
) -> FusionParams:
    """Construct FusionParams, raising BiasTooSmall when the strict
    inequality bias > w*g_max + 1/log10(2) does not hold."""
    return FusionParams(
        w=w,
        bias=bias,
        g_max=g_max,
        attr_metric=attr_metric,
        feature_metric=feature_metric,
    )


@dataclass(frozen=True)
class HybridQuery:
    """A query: feature vector, required attribute vector, k, beam budget."""

    feature: np.ndarray
    attrs: np.ndarray
    k: int = 10
    ef_search: int = 80

    def __post_init__(self):
        object.__setattr__(self, "feature", _as_feature(self.feature))
        object.__setattr__(self, "attrs", _as_attrs(self.attrs))
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.ef_search < self.k:
            raise BudgetTooSmall(self.ef_search, self.k)


@dataclass(frozen=True)
class SearchHit:
    """One result row; result lists sort by (fused_dist, id) ascending."""

    id: int
    fused_dist: float
    feature_dist: float
    attrs_match: bool


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_dataset(ds: HybridDataset) -> None:
    """Check every dataset invariant; raise the first violation found.

    Raises DimensionMismatch, NotNormalized or NonContiguousIds. Shape
    consistency is mostly enforced by construction; the checks that can
    actually fail on an array-backed dataset are the unit-norm invariant
    for IP datasets and degenerate (zero-dimensional) shapes.
    """
    if ds.features.shape[1] == 0:
        raise DimensionMismatch(1, 0, point_id=0)
    if ds.attrs.shape[1] == 0:
        raise DimensionMismatch(1, 0, point_id=0)
    if ds.feature_metric is FeatureMetric.IP and len(ds) > 0:
        norms = np.linalg.norm(ds.features, axis=1)
        bad = np.abs(norms - 1.0) > NORM_TOL
        if bad.any():
            i = int(np.argmax(bad))
            raise NotNormalized(i, float(norms[i]))


def dataset_from_points(
    points: Sequence[HybridPoint],
    m: int | None = None,
    n: int | None = None,
    feature_metric: FeatureMetric = FeatureMetric.IP,
    name: str = "dataset",
) -> HybridDataset:
    """Validate a point sequence against declared dims and pack it.

    Declared m/n default to the first point's shape. Raises
    NonContiguousIds when ids are not exactly 0..count-1 in order,
    DimensionMismatch(point id) on the first shape violation, and
    NotNormalized via the final whole-dataset validation.
    """
    points = list(points)
    if not points:
        raise EmptyDataset("cannot build a dataset from zero points")
    if m is None:
        m = len(points[0].feature)
    if n is None:
        n = len(points[0].attrs)
    for row, p in enumerate(points):
        if p.id != row:
            raise NonContiguousIds(f"expected id {row} at position {row}, got {p.id}")
        if len(p.feature) != m:
            raise DimensionMismatch(m, len(p.feature), point_id=p.id)
        if len(p.attrs) != n:
            raise DimensionMismatch(n, len(p.attrs), point_id=p.id)
    ds = HybridDataset(
        features=np.stack([p.feature for p in points]),
        attrs=np.stack([p.attrs for p in points]),
        feature_metric=feature_metric,
        name=name,
    )
    validate_dataset(ds)
    return ds
