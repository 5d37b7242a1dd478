import numpy as np
import pytest

from bosebound.errors import ConfigError
from bosebound.model import (QUADRATIC, TIGHT_BINDING, BathSpec,
                             ImpuritySpec, LatticeGrid, coupling_fourier,
                             dispersion_eval)


def test_tb_dispersion_band_edges():
    bath = BathSpec(dimension=1, hopping=1.0)
    assert dispersion_eval(bath, 0.0) == 0.0
    assert dispersion_eval(bath, np.pi) == pytest.approx(4.0)
    k = np.linspace(-np.pi, np.pi, 101)
    eps = dispersion_eval(bath, k)
    assert np.all(eps >= 0.0) and np.all(eps <= 4.0)


def test_tb_dispersion_3d_vector_momenta():
    bath = BathSpec(dimension=3, hopping=0.5)
    corner = np.array([np.pi, np.pi, np.pi])
    assert dispersion_eval(bath, np.zeros(3)) == pytest.approx(0.0)
    assert dispersion_eval(bath, corner) == pytest.approx(bath.bandwidth)


def test_quadratic_dispersion():
    bath = BathSpec(dimension=1, dispersion=QUADRATIC, hopping=2.0)
    assert dispersion_eval(bath, 1.5) == pytest.approx(2.0 * 1.5**2)
    assert bath.bandwidth == np.inf


def test_bandwidth_scales_with_dimension():
    for d in (1, 2, 3):
        bath = BathSpec(dimension=d, hopping=1.0)
        assert bath.bandwidth == pytest.approx(4.0 * d)


def test_point_coupling_is_flat_in_k():
    bath = BathSpec(dimension=1)
    grid = LatticeGrid(sites=21)
    eta = coupling_fourier(bath, grid, grid.momenta)
    assert np.allclose(eta, 1.0)
    assert bath.point_coupling


def test_grid_coords_center_on_coupling_site():
    grid = LatticeGrid(sites=21)
    coords = grid.site_coords
    assert coords[10] == 0
    assert coords[0] == -10 and coords[-1] == 10
    assert grid.momenta.size == 21
    # zone covered once, symmetric pairs present
    k = np.sort(grid.momenta)
    assert np.allclose(k + k[::-1], 0.0, atol=1e-12)


def test_validation_errors():
    with pytest.raises(ConfigError):
        BathSpec(dimension=4)
    with pytest.raises(ConfigError):
        BathSpec(hopping=0.0)
    with pytest.raises(ConfigError):
        BathSpec(dispersion="phonon")
    with pytest.raises(ConfigError):
        BathSpec(coupling_sites=(0, 1), coupling_amps=(1.0,))
    with pytest.raises(ConfigError):
        ImpuritySpec(delta=0.0, omega=-0.1)
    with pytest.raises(ConfigError):
        LatticeGrid(sites=2)
    with pytest.raises(ConfigError):
        LatticeGrid(sites=9, boundary="twisted")


def test_open_boundary_has_no_momenta():
    grid = LatticeGrid(sites=9, boundary="open")
    with pytest.raises(ConfigError):
        grid.momenta


def test_tabulated_profile_roundtrip():
    bath = BathSpec(coupling_sites=(-1, 0, 1),
                    coupling_amps=(0.5, 1.0, 0.5))
    assert not bath.point_coupling
    grid = LatticeGrid(sites=21)
    eta = coupling_fourier(bath, grid, np.array([0.0]))
    assert eta[0] == pytest.approx(2.0)
