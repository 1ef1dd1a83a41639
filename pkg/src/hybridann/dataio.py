"""Dataset file I/O and synthetic data generation.

File formats are the classic vecs family: each record is a
little-endian int32 dimension d followed by d elements (float32 for
.fvecs, int32 for .ivecs, uint8 for .bvecs), and every record in a file
shares one dimension. Attributes ride alongside features as ivecs;
ground truth is ivecs of ids with -1 padding.

Generators are pure functions of (spec, seed). The PRNG is numpy's
PCG64; derived streams (query sets, per-cardinality attribute refreshes)
use documented seed offsets rather than one shared stream, so any part
can be regenerated independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    FeatureMetric,
    HybridDataset,
    HybridQuery,
    RaggedDims,
    TruncatedRecord,
)
from .strategies import GroundTruth

__all__ = [
    "VECS_DTYPES",
    "QUERY_SALT",
    "ATTR_SALT",
    "derive_seed",
    "read_vecs",
    "write_vecs",
    "read_fvecs",
    "read_ivecs",
    "read_bvecs",
    "write_fvecs",
    "write_ivecs",
    "write_bvecs",
    "SyntheticSpec",
    "generate_synthetic",
    "attach_attributes",
    "random_features",
    "random_attributes",
    "make_queries",
    "save_ground_truth",
    "load_ground_truth",
]

VECS_DTYPES = {
    "f32": np.dtype("<f4"),
    "i32": np.dtype("<i4"),
    "u8": np.dtype("u1"),
}

_SUFFIX_KIND = {".fvecs": "f32", ".ivecs": "i32", ".bvecs": "u8"}


def _kind_for(path, kind: str | None) -> str:
    if kind is not None:
        if kind not in VECS_DTYPES:
            raise ValueError(f"unknown vecs kind {kind!r}; expected one of {sorted(VECS_DTYPES)}")
        return kind
    suffix = Path(path).suffix.lower()
    if suffix not in _SUFFIX_KIND:
        raise ValueError(f"cannot infer vecs kind from suffix {suffix!r}; pass kind=")
    return _SUFFIX_KIND[suffix]


def read_vecs(path, kind: str | None = None) -> np.ndarray:
    """Read a whole vecs file into a (count, dim) array.

    The element kind is inferred from the suffix unless given. Raises
    RaggedDims when records disagree on dimension and TruncatedRecord
    when the file ends mid-record. An empty file reads as a (0, 0) array.
    """
    kind = _kind_for(path, kind)
    dtype = VECS_DTYPES[kind]
    raw = Path(path).read_bytes()
    if len(raw) == 0:
        return np.empty((0, 0), dtype=dtype)
    if len(raw) < 4:
        raise TruncatedRecord(f"{path}: {len(raw)} bytes is too short for a dimension header")
    dim = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if dim <= 0:
        raise RaggedDims(0, 1, dim)
    rec_bytes = 4 + dim * dtype.itemsize
    if len(raw) % rec_bytes != 0:
        _scan_for_error(raw, dim, dtype, path)
    count = len(raw) // rec_bytes
    if dtype.itemsize == 4:
        flat = np.frombuffer(raw, dtype="<i4").reshape(count, 1 + dim)
        dims = flat[:, 0]
        if not (dims == dim).all():
            bad = int(np.argmax(dims != dim))
            raise RaggedDims(bad, dim, int(dims[bad]))
        return flat[:, 1:].copy().view(dtype)
    # u8 payloads are not 4-byte aligned with their headers; walk records.
    out = np.empty((count, dim), dtype=dtype)
    pos = 0
    for r in range(count):
        d = int(np.frombuffer(raw, dtype="<i4", count=1, offset=pos)[0])
        if d != dim:
            raise RaggedDims(r, dim, d)
        pos += 4
        out[r] = np.frombuffer(raw, dtype=dtype, count=dim, offset=pos)
        pos += dim * dtype.itemsize
    return out


def _scan_for_error(raw: bytes, first_dim: int, dtype, path) -> None:
    """File size is inconsistent: walk records to name the actual defect."""
    pos = 0
    r = 0
    while pos < len(raw):
        if pos + 4 > len(raw):
            raise TruncatedRecord(f"{path}: record {r} cut off in dimension header")
        d = int(np.frombuffer(raw, dtype="<i4", count=1, offset=pos)[0])
        if d != first_dim:
            raise RaggedDims(r, first_dim, d)
        pos += 4 + d * dtype.itemsize
        r += 1
    raise TruncatedRecord(f"{path}: record {r - 1} extends past end of file")


def write_vecs(matrix, path, kind: str | None = None) -> None:
    """Write a rectangular matrix as a vecs file (round-trips bit-exact)."""
    kind = _kind_for(path, kind)
    dtype = VECS_DTYPES[kind]
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("write_vecs needs a 2-d matrix")
    count, dim = matrix.shape
    body = np.ascontiguousarray(matrix, dtype=dtype)
    headers = np.full(count, dim, dtype="<i4")
    with open(path, "wb") as fh:
        if dtype.itemsize == 4:
            merged = np.empty((count, 1 + dim), dtype="<i4")
            merged[:, 0] = dim
            merged[:, 1:] = body.view("<i4")
            fh.write(merged.tobytes())
        else:
            for r in range(count):
                fh.write(headers[r : r + 1].tobytes())
                fh.write(body[r].tobytes())


def read_fvecs(path) -> np.ndarray:
    return read_vecs(path, "f32")


def read_ivecs(path) -> np.ndarray:
    return read_vecs(path, "i32")


def read_bvecs(path) -> np.ndarray:
    return read_vecs(path, "u8")


def write_fvecs(matrix, path) -> None:
    write_vecs(matrix, path, "f32")


def write_ivecs(matrix, path) -> None:
    write_vecs(matrix, path, "i32")


def write_bvecs(matrix, path) -> None:
    write_vecs(matrix, path, "u8")


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

# Salts for derived PRNG streams (mixed into a SeedSequence with the base
# seed), so features, attributes and query sets regenerate independently.
QUERY_SALT = 0x51
ATTR_SALT = 0xA7


def derive_seed(seed: int, *salts: int) -> int:
    """Collision-resistant derived seed for an independent substream."""
    return int(np.random.SeedSequence([seed, *salts]).generate_state(1)[0])


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic hybrid dataset.

    Features are i.i.d. standard normal per coordinate (unit-normalized
    when `normalized`); each attribute dimension is uniform over
    {0..categories-1}. Deterministic per seed.
    """

    count: int
    m: int
    categories: int
    n: int = 1
    seed: int = 42
    normalized: bool = True

    def __post_init__(self):
        if self.count < 1 or self.m < 1 or self.n < 1:
            raise ValueError("count, m and n must all be positive")
        if self.categories < 1:
            raise ValueError(f"categories must be >= 1, got {self.categories}")


def random_features(count: int, m: int, seed: int, normalized: bool) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    feats = rng.standard_normal((count, m))
    if normalized:
        feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    return feats


def random_attributes(count: int, categories: int, n: int, seed: int) -> np.ndarray:
    """Per-dimension uniform categorical attributes in {0..categories-1}."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.integers(0, categories, size=(count, n), dtype=np.int64)


def generate_synthetic(spec: SyntheticSpec) -> HybridDataset:
    feats = random_features(spec.count, spec.m, spec.seed, spec.normalized)
    attrs = random_attributes(
        spec.count, spec.categories, spec.n, derive_seed(spec.seed, ATTR_SALT)
    )
    metric = FeatureMetric.IP if spec.normalized else FeatureMetric.L2
    name = f"synthetic-{spec.count}x{spec.m}-C{spec.categories}-s{spec.seed}"
    return HybridDataset(feats, attrs, feature_metric=metric, name=name)


def attach_attributes(
    features: np.ndarray,
    categories: int,
    n: int = 1,
    seed: int = 42,
    feature_metric: FeatureMetric = FeatureMetric.L2,
    name: str = "dataset",
) -> HybridDataset:
    """Attach randomly generated attributes to existing feature vectors."""
    features = np.asarray(features, dtype=np.float64)
    attrs = random_attributes(
        len(features), categories, n, derive_seed(seed, ATTR_SALT)
    )
    return HybridDataset(features, attrs, feature_metric=feature_metric, name=name)


def make_queries(
    count: int,
    m: int,
    categories: int,
    n: int = 1,
    seed: int = 42,
    normalized: bool = True,
    k: int = 10,
    ef_search: int = 80,
) -> list[HybridQuery]:
    """Query set drawn from the same distributions as the base data but
    from a derived seed, so queries never coincide with base points."""
    feats = random_features(count, m, derive_seed(seed, QUERY_SALT), normalized)
    attrs = random_attributes(count, categories, n, derive_seed(seed, QUERY_SALT, ATTR_SALT))
    return [
        HybridQuery(feature=feats[i], attrs=attrs[i], k=k, ef_search=ef_search)
        for i in range(count)
    ]


def save_ground_truth(gt: GroundTruth, path) -> None:
    write_ivecs(gt.ids.astype(np.int32), path)


def load_ground_truth(path) -> GroundTruth:
    return GroundTruth(ids=read_ivecs(path).astype(np.int64))
