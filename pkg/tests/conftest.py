import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from markov_infogeo import ExponentialFamily, KernelGraph, MarkovKernel

settings.register_profile(
    "default",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def k2_kernel(a: float, b: float) -> MarkovKernel:
    """Two-state complete graph with ``w(1|0) = a`` and ``w(0|1) = b``."""
    g = KernelGraph.complete(2)
    return MarkovKernel(g, [1 - a, a, b, 1 - b])


@pytest.fixture
def k2():
    return KernelGraph.complete(2)


@pytest.fixture
def k2_family(k2):
    # carrier 0, single basis function on edge (0, 1)
    return ExponentialFamily.from_arrays(k2, np.zeros(4), [[0.0, 1.0, 0.0, 0.0]])


@pytest.fixture
def k2_pair():
    return k2_kernel(0.5, 0.5), k2_kernel(1 / 3, 1 / 3)
