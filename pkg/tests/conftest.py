"""Shared fixtures for the batts test suite."""

import numpy as np
import pytest

from batts import TwoSampleDataset, build_cut_grid


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def shifted_2d():
    """Two clearly separated 2-D Gaussian samples plus their cut grid."""
    gen = np.random.default_rng(42)
    data = TwoSampleDataset(
        gen.standard_normal((400, 2)) - 0.5,
        gen.standard_normal((400, 2)) + 0.5,
    )
    return data, build_cut_grid(data, 15)


@pytest.fixture
def null_2d():
    """Two halves of one sample: the true log-ratio is identically zero."""
    gen = np.random.default_rng(7)
    pooled = gen.standard_normal((800, 2))
    data = TwoSampleDataset(pooled[:400], pooled[400:])
    return data, build_cut_grid(data, 15)
