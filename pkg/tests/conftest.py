import numpy as np
import pytest

import nestcov as nc

BENCH_C = 30.0
BENCH_ALPHA = 0.002


@pytest.fixture(scope="session")
def bench_lam():
    """Laplacian spectrum of the 10x10 benchmark grid."""
    return nc.laplace_eigenvalues(10, 10)


@pytest.fixture(scope="session")
def bench_model2(bench_lam):
    return nc.DecayModel.two_param(bench_lam, BENCH_C, BENCH_ALPHA)


@pytest.fixture(scope="session")
def bench_model3(bench_lam):
    return nc.DecayModel.three_param(bench_lam, BENCH_C, 0.0, BENCH_ALPHA)


@pytest.fixture(scope="session")
def bench_truth(bench_model2):
    return nc.decay_diagonal(bench_model2)


@pytest.fixture(scope="session")
def small_lam():
    """A small strictly-decreasing spectrum for cheap oracle tests."""
    return np.array([-1.0, -2.5, -4.0, -7.0])
