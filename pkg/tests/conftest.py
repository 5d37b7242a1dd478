import numpy as np
import pytest

from bosebound.model import BathSpec, ImpuritySpec, LatticeGrid
from bosebound.spectral import (CLOSED_FORM, LATTICE_SUM, QUADRATURE,
                                SpectralContext)


@pytest.fixture(scope="session")
def bath1d():
    return BathSpec(dimension=1, hopping=1.0)


@pytest.fixture(scope="session")
def ctx_closed(bath1d):
    return SpectralContext(bath1d, mode=CLOSED_FORM)


@pytest.fixture(scope="session")
def ctx_quad(bath1d):
    return SpectralContext(bath1d, mode=QUADRATURE)


def lattice_ctx(sites, bath=None, boundary="periodic"):
    bath = bath or BathSpec(dimension=1, hopping=1.0)
    grid = LatticeGrid(sites=sites, boundary=boundary)
    return SpectralContext(bath, mode=LATTICE_SUM, grid=grid), grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
