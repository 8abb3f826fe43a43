import numpy as np
import pytest

from lrsdp import generate


@pytest.fixture(scope="session")
def small_instance():
    # p=6 keeps finite-difference and naive-summation oracles instant.
    return generate(p=6, r=2, n=40, seed=5)


@pytest.fixture(scope="session")
def desk_instance():
    # The desk-scale benchmark problem used across solver tests.
    return generate(p=20, r=3, n=200, seed=1)


@pytest.fixture(scope="session")
def theory_instance():
    # Enumeration scale for the exact b=1 expectation checks.
    return generate(p=12, r=3, n=150, seed=11)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)
