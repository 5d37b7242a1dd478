import numpy as np
import pytest

from bosebound.errors import (ConfigError, DegenerateModeError,
                              GridTooSmallError)
from bosebound.exact_fewbody import diagonalize_single, solve_two_body
from bosebound.model import ImpuritySpec
from bosebound.sebs import solve_sebs
from bosebound.variational import (build_modes, condensate_matrix,
                                   energy_objective, gp_stationarity_residual,
                                   gradient_residual, optimize_ansatz,
                                   variational_observables)
from tests.conftest import lattice_ctx


def test_modes_orthonormal_on_grid():
    ctx, grid = lattice_ctx(201)
    modes = build_modes(ctx, -0.5, -1.1, 0.3)
    k = grid.momenta
    a = modes["phiA"].momentum(k)
    b = modes["phiB"].momentum(k)
    assert np.dot(a, a) == pytest.approx(1.0, abs=1e-12)
    assert np.dot(b, b) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.dot(a, b)) < 1e-12


def test_pure_pole_at_zero_mixing(ctx_closed):
    modes = build_modes(ctx_closed, -0.4, -0.9, 0.0)
    assert modes["phiA"].residues[1] == 0.0
    j, psi = modes["phiA"].realspace_table()
    assert np.sum(psi**2) == pytest.approx(1.0, abs=1e-10)
    # single-pole profile decays geometrically
    mid = j.size // 2
    r1 = psi[mid + 2] / psi[mid + 1]
    r2 = psi[mid + 5] / psi[mid + 4]
    assert r1 == pytest.approx(r2, rel=1e-10)


def test_degenerate_and_invalid_poles(ctx_closed):
    with pytest.raises(DegenerateModeError):
        build_modes(ctx_closed, -0.5, -0.5, 0.1)
    with pytest.raises(ConfigError):
        build_modes(ctx_closed, 0.5, -0.5, 0.1)


def test_energy_block_symmetric_eigenpair(ctx_closed):
    imp = ImpuritySpec(delta=-0.1, omega=0.6)
    out = energy_objective(ctx_closed, imp, 3, -0.7, -1.3, 0.2)
    E0 = out["E0"]
    assert np.array_equal(E0, E0.T)
    r = E0 @ out["v"] - out["lambda0"] * out["v"]
    assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(E0)


def test_n1_reduces_to_sebs(ctx_closed):
    for delta, omega in ((0.0, 0.5), (-0.3, 0.8), (0.2, 0.4)):
        imp = ImpuritySpec(delta=delta, omega=omega)
        sol = optimize_ansatz(ctx_closed, imp, 1)
        assert sol.EN == pytest.approx(solve_sebs(ctx_closed, imp).E1,
                                       abs=1e-8)


def test_n2_upper_bound_and_stationarity(ctx_closed):
    imp = ImpuritySpec(delta=0.0, omega=0.5)
    sol = optimize_ansatz(ctx_closed, imp, 2)
    lctx, grid = lattice_ctx(201)
    e2 = solve_two_body(diagonalize_single(lctx, imp, grid)).E2
    assert sol.EN >= e2 - 1e-9          # variational bound
    assert sol.EN - e2 <= 0.01 * abs(e2)  # and tight
    assert sol.gp_residual <= 1e-6
    assert gp_stationarity_residual(ctx_closed, imp, 2, sol) <= 1e-6
    assert gradient_residual(ctx_closed, imp, 2, sol) <= 1e-6


def test_observables_and_condensate(ctx_closed):
    imp = ImpuritySpec(delta=0.0, omega=0.5)
    sol = optimize_ansatz(ctx_closed, imp, 3)
    assert sol.xi_g > 0 and sol.xi_e > 0
    assert sol.p_plus >= sol.p_minus >= 0.0
    assert sol.p_plus + sol.p_minus == pytest.approx(3.0, rel=1e-12)
    g = condensate_matrix(sol)
    assert np.allclose(g, g.T)
    ev = np.sort(np.linalg.eigvalsh(g))
    assert np.trace(g) == pytest.approx(3.0, rel=1e-12)
    assert abs(ev[0]) < 1e-10                           # rank two
    assert ev[2] == pytest.approx(sol.p_plus, rel=1e-10)
    assert ev[1] == pytest.approx(sol.p_minus, rel=1e-10)
    # unit-norm mixing vector
    assert sum(c * c for c in sol.v) == pytest.approx(1.0, rel=1e-12)


def test_observables_refill_matches(ctx_closed):
    imp = ImpuritySpec(delta=-0.2, omega=0.4)
    sol = optimize_ansatz(ctx_closed, imp, 2)
    got = variational_observables(sol)
    assert got["xi_g"] == sol.xi_g
    assert got["p_plus"] == sol.p_plus


def test_grid_too_small():
    ctx, _ = lattice_ctx(13)
    with pytest.raises(GridTooSmallError):
        optimize_ansatz(ctx, ImpuritySpec(delta=0.0, omega=0.1), 2)


def test_init_seed_respected(ctx_closed):
    imp = ImpuritySpec(delta=0.0, omega=0.5)
    ref = optimize_ansatz(ctx_closed, imp, 2)
    seeded = optimize_ansatz(ctx_closed, imp, 2,
                             init=(ref.e1, ref.e2, ref.tA))
    assert seeded.EN == pytest.approx(ref.EN, abs=1e-10)


def test_bad_n(ctx_closed):
    with pytest.raises(ConfigError):
        optimize_ansatz(ctx_closed, ImpuritySpec(delta=0.0, omega=0.5), 0)
