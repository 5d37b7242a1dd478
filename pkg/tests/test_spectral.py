import numpy as np
import pytest

from bosebound.errors import (ConfigError, IllPosedBathError,
                              InBandEnergyError)
from bosebound.model import QUADRATIC, BathSpec
from bosebound.spectral import (CLOSED_FORM, LATTICE_SUM, QUADRATURE,
                                SpectralContext, capital_i0, coupling_norm,
                                n_mu_nu, pole_factor, pole_profile,
                                self_energy, self_energy_derivative)
from conftest import lattice_ctx


def closed_sigma(E, J=1.0):
    return -1.0 / np.sqrt(E * (E - 4.0 * J))


def test_sigma_closed_form_values(ctx_closed):
    for E in (-0.1, -1.0, -3.7):
        assert self_energy(ctx_closed, E) == pytest.approx(
            closed_sigma(E), rel=1e-14)
    # above the band the sign flips with the square root branch
    assert self_energy(ctx_closed, 5.0) == pytest.approx(
        1.0 / np.sqrt(5.0 * 1.0), rel=1e-14)


def test_sigma_quadrature_matches_closed(ctx_closed, ctx_quad):
    for E in (-0.05, -0.7, -2.5):
        a = self_energy(ctx_closed, E)
        b = self_energy(ctx_quad, E)
        assert b == pytest.approx(a, rel=1e-8)


def test_sigma_lattice_converges_to_closed(ctx_closed):
    # convergence is exponential in L times the pole decay rate, so a
    # shallow pole keeps the errors resolvable over a few sizes
    E = -0.01
    prev = None
    for L in (41, 101, 201):
        ctx, _ = lattice_ctx(L)
        err = abs(self_energy(ctx, E) - self_energy(ctx_closed, E))
        if prev is not None:
            assert err < prev
        prev = err
    assert prev < 1e-6


def test_sigma_rejects_band_interior(ctx_closed, ctx_quad):
    for ctx in (ctx_closed, ctx_quad):
        with pytest.raises(InBandEnergyError):
            self_energy(ctx, 1.3)


def test_self_energy_derivative_matches_fd(ctx_closed):
    E, h = -0.9, 1e-6
    fd = (self_energy(ctx_closed, E + h)
          - self_energy(ctx_closed, E - h)) / (2 * h)
    assert self_energy_derivative(ctx_closed, E) == pytest.approx(
        fd, rel=1e-8)


def test_n_mu_nu_modes_agree(ctx_closed, ctx_quad):
    lat, _ = lattice_ctx(4001)
    for e1, e2 in ((-1.0, -4.0), (-0.3, -0.31), (-2.0, -2.0 + 1e-6)):
        ref = n_mu_nu(ctx_closed, e1, e2)
        assert n_mu_nu(ctx_quad, e1, e2) == pytest.approx(ref, rel=1e-8)
        assert n_mu_nu(lat, e1, e2) == pytest.approx(ref, rel=1e-3)


def test_n_mu_nu_anchor_values(ctx_closed):
    # independent quadrature anchors for the two-pole overlap integral
    assert n_mu_nu(ctx_closed, -1.0, -4.0) == pytest.approx(
        0.090145633401107, abs=1e-13)
    assert n_mu_nu(ctx_closed, -1.0, -1.0) == pytest.approx(
        3.0 / (5.0 * np.sqrt(5.0)), rel=1e-13)


def test_n_mu_nu_small_gap_stays_smooth(ctx_closed):
    # the coincident limit is -sigma'; tiny gaps must not lose digits
    base = n_mu_nu(ctx_closed, -1.0, -1.0)
    for gap in (1e-8, 1e-10, 1e-13):
        val = n_mu_nu(ctx_closed, -1.0, -1.0 - gap)
        assert val == pytest.approx(base, rel=1e-6)


def test_n_mu_nu_rejects_nonnegative_pole(ctx_closed):
    with pytest.raises(InBandEnergyError):
        n_mu_nu(ctx_closed, -1.0, 0.5)


def test_pole_profile_geometric_decay():
    J = 1.0
    E = -0.5
    b = 2.0 - E / J
    x = (b - np.sqrt(b * b - 4.0)) / 2.0
    assert pole_factor(E, J) == pytest.approx(x, rel=1e-14)
    assert 0.0 < x < 1.0
    for j in (0, 1, 5):
        assert pole_profile(E, J, j) == pytest.approx(
            -x ** (abs(j) + 1) / (J * (1 - x * x)), rel=1e-12)
    # above the band the tail staggers
    assert -1.0 < pole_factor(4.5, J) < 0.0
    with pytest.raises(InBandEnergyError):
        pole_factor(2.0, J)


def test_capital_i0_3d_value():
    bath = BathSpec(dimension=3, hopping=1.0)
    ctx = SpectralContext(bath, mode=QUADRATURE)
    assert capital_i0(ctx) == pytest.approx(0.25273, abs=1e-4)


def test_capital_i0_diverges_low_dimension():
    for d in (1, 2):
        bath = BathSpec(dimension=d, hopping=1.0)
        ctx = SpectralContext(bath, mode=QUADRATURE)
        assert np.isinf(capital_i0(ctx))


def test_capital_i0_quadratic_needs_cutoff():
    bath = BathSpec(dimension=3, dispersion=QUADRATIC, hopping=1.0)
    with pytest.raises(ConfigError):
        capital_i0(SpectralContext(bath, mode=QUADRATURE))
    ctx = SpectralContext(bath, mode=QUADRATURE, cutoff=2.0)
    assert capital_i0(ctx) == pytest.approx(
        2.0 / (2.0 * np.pi**2), rel=1e-12)


def test_lattice_context_requires_grid(bath1d):
    with pytest.raises(ConfigError):
        SpectralContext(bath1d, mode=LATTICE_SUM)


def test_coupling_norm_point_profile(ctx_closed):
    assert coupling_norm(ctx_closed) == 1.0
