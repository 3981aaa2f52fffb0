import numpy as np
import pytest

from flowstab.grid import Field, Grid


@pytest.fixture
def g8():
    return Grid(8, 8)


@pytest.fixture
def g12():
    return Grid(12, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_field(grid, rng, complex_=False):
    u = rng.standard_normal(grid.shape_u)
    v = rng.standard_normal(grid.shape_v)
    if complex_:
        u = u + 1j * rng.standard_normal(grid.shape_u)
        v = v + 1j * rng.standard_normal(grid.shape_v)
    return Field(grid, u, v)
