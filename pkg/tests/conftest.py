import numpy as np
import pytest

from tentflow import PeriodicGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid64():
    return PeriodicGrid(2, 2 * np.pi, 64)


@pytest.fixture
def grid128():
    return PeriodicGrid(2, 2 * np.pi, 128)


def random_scalar(grid, rng, kmax=None):
    """Random real field; with ``kmax`` it is band-limited and mean-zero."""
    from tentflow import ScalarField

    v = rng.standard_normal(grid.shape)
    if kmax is not None:
        spec = grid.forward(v)
        spec[np.sqrt(grid.k_squared) * grid.side_length / (2 * np.pi) > kmax] = 0
        spec[(0,) * grid.dim] = 0
        v = grid.inverse(spec)
    return ScalarField(grid, v)


def random_vector(grid, rng, kmax=None):
    from tentflow import VectorField

    return VectorField.from_components([random_scalar(grid, rng, kmax) for _ in range(grid.dim)])
