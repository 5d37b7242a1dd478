import math

import numpy as np
import pytest

from bosebound.ed_oracle import (build_sector_basis, build_sector_hamiltonian,
                                 correlation_spectrum, ground_state,
                                 size_convergence)
from bosebound.errors import DimensionCapError
from bosebound.exact_fewbody import diagonalize_single
from bosebound.model import ImpuritySpec, LatticeGrid
from tests.conftest import lattice_ctx


def test_basis_dimensions():
    for L, N in ((11, 2), (11, 3), (21, 2)):
        basis = build_sector_basis(LatticeGrid(L, "periodic"), N)
        assert basis.dim_g == math.comb(L + N - 1, N)
        assert basis.dim_e == math.comb(L + N - 2, N - 1)
        assert basis.dimension == basis.dim_g + basis.dim_e


def test_dimension_cap():
    with pytest.raises(DimensionCapError):
        build_sector_basis(LatticeGrid(41, "periodic"), 3, cap=100)


def test_n1_matches_single_particle():
    ctx, grid = lattice_ctx(31)
    imp = ImpuritySpec(delta=-0.1, omega=0.8)
    rec = ground_state(ctx, imp, grid, 1)
    modes = diagonalize_single(ctx, imp, grid)
    assert rec.energy == pytest.approx(float(np.min(modes.energies)),
                                       abs=1e-11)
    assert rec.basis.dimension == grid.sites + 1


def test_hamiltonian_hermitian_and_eigsh_agrees():
    ctx, grid = lattice_ctx(9)
    imp = ImpuritySpec(delta=0.1, omega=0.7)
    H, _ = build_sector_hamiltonian(ctx, imp, grid, 2)
    gap = abs(H - H.T)
    assert gap.max() if gap.nnz else 0.0 < 1e-14
    dense = np.linalg.eigvalsh(H.toarray())
    rec = ground_state(ctx, imp, grid, 2)
    assert rec.energy == pytest.approx(float(dense[0]), abs=1e-11)


def test_record_invariants():
    ctx, grid = lattice_ctx(21)
    imp = ImpuritySpec(delta=0.0, omega=0.5)
    rec = ground_state(ctx, imp, grid, 2)
    assert rec.residual < 1e-8
    assert np.linalg.norm(rec.vector) == pytest.approx(1.0, abs=1e-12)
    assert rec.pop_g + rec.pop_e == pytest.approx(1.0, abs=1e-12)
    # g sector holds N quanta, e sector N-1
    assert np.sum(rec.density_g) == pytest.approx(2 * rec.pop_g, abs=1e-10)
    assert np.sum(rec.density_e) == pytest.approx(1 * rec.pop_e, abs=1e-10)
    assert np.sum(rec.density_total) == pytest.approx(2 - rec.pop_e,
                                                      abs=1e-10)
    assert np.all(rec.density_total >= -1e-14)


def test_correlation_spectrum_sums_to_n():
    ctx, grid = lattice_ctx(21)
    imp = ImpuritySpec(delta=0.0, omega=0.5)
    rec = ground_state(ctx, imp, grid, 3, with_correlation=True)
    ev = correlation_spectrum(rec)
    assert np.all(np.diff(ev) <= 1e-12)
    assert np.sum(ev) == pytest.approx(3.0, abs=1e-9)
    assert ev[0] > 0


def test_size_convergence_shrinks():
    ctx, _ = lattice_ctx(11)
    imp = ImpuritySpec(delta=0.0, omega=0.5)
    es = size_convergence(ctx, imp, 2, (11, 21, 31))
    d1 = abs(es[1] - es[0])
    d2 = abs(es[2] - es[1])
    assert d2 < d1


def test_open_boundary_runs():
    ctx, _ = lattice_ctx(15)
    imp = ImpuritySpec(delta=0.0, omega=0.5)
    rec = ground_state(ctx, imp, LatticeGrid(15, "open"), 2)
    assert np.isfinite(rec.energy)
    assert rec.energy < 0.0
