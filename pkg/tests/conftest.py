import numpy as np
import pytest

from elastowave.assembly import assemble_forms
from elastowave.mesh import uniform_triangulation


@pytest.fixture(scope="session")
def forms_factory():
    cache = {}

    def make(n, lam=1.0, mu=1.0):
        key = (n, lam, mu)
        if key not in cache:
            cache[key] = assemble_forms(uniform_triangulation(n), lam, mu)
        return cache[key]

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
