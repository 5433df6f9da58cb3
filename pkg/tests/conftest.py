import numpy as np
import pytest

from ptpflow import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile (or no-op for the numpy backend) before any timed test runs.
    kernels.warmup()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
