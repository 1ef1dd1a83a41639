import numpy as np
import pytest

from hybridann.core import FusionParams, HybridDataset
from hybridann.dataio import SyntheticSpec, generate_synthetic, make_queries
from hybridann.graph import GraphParams, build


@pytest.fixture(scope="session")
def small_dataset() -> HybridDataset:
    """1K unit-norm points, 16 dims, 10 attribute categories."""
    return generate_synthetic(SyntheticSpec(count=1000, m=16, categories=10, seed=11))


@pytest.fixture(scope="session")
def small_queries(small_dataset):
    return make_queries(
        50, small_dataset.m, 10, seed=13, k=10, ef_search=len(small_dataset)
    )


@pytest.fixture(scope="session")
def small_graph(small_dataset) -> "CompositeGraph":
    return build(small_dataset, FusionParams(), GraphParams(M=8, ef_construction=64, seed=5))


@pytest.fixture()
def unit_vecs():
    """Two orthogonal unit vectors plus a copy of the first."""
    x = np.array([1.0, 0.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0, 0.0])
    return x, y
