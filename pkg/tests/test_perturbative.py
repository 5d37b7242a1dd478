import math

import numpy as np
import pytest

from bosebound.errors import ConfigError, RegimeError
from bosebound.model import BathSpec, ImpuritySpec
from bosebound.perturbative import (jc_limit, mebs_exists_perturbative,
                                    perturbative_bound_state,
                                    secular_determinant, solve_projected_mode)
from bosebound.sebs import solve_sebs
from bosebound.spectral import QUADRATURE, SpectralContext


def test_projected_mode_basic(ctx_closed):
    imp = ImpuritySpec(delta=-0.2, omega=0.05)
    mode = solve_projected_mode(ctx_closed, imp, "e")
    assert mode.sector == "e"
    assert mode.E1s < 0.0                      # below the band bottom
    assert mode.E1s > -0.2                     # shallow: above the detuning
    assert mode.null_residual < 1e-8
    assert abs(secular_determinant(ctx_closed, imp, mode.E1s)) < 1e-8


def test_projected_mode_quartic_order(ctx_closed):
    # mediated potential goes as omega^2, so the shallow-well binding
    # goes as omega^4: halving omega shrinks |E1s| by 16
    imp = ImpuritySpec(delta=-0.2, omega=0.04)
    es = []
    for om in (0.04, 0.02, 0.01):
        m = solve_projected_mode(ctx_closed,
                                 ImpuritySpec(delta=-0.2, omega=om), "e")
        es.append(m.E1s)
    ratio = (es[0] - es[1]) / (es[1] - es[2])
    assert ratio == pytest.approx(16.0, abs=2.0)


def test_mode_profile_normalized_and_localized(ctx_closed):
    imp = ImpuritySpec(delta=-0.2, omega=0.05)
    mode = solve_projected_mode(ctx_closed, imp, "e")
    j, psi = mode.phi_A.realspace_table()
    assert np.sum(np.abs(psi) ** 2) == pytest.approx(1.0, abs=1e-6)
    xi = mode.phi_A.localization_length()
    assert xi > 0.0
    weaker = solve_projected_mode(ctx_closed,
                                  ImpuritySpec(delta=-0.2, omega=0.02), "e")
    assert weaker.phi_A.localization_length() > xi


def test_pg_assembly(ctx_closed):
    imp = ImpuritySpec(delta=-0.2, omega=0.02)
    st = perturbative_bound_state(ctx_closed, imp, 3, "PG")
    assert st.EN == pytest.approx(-0.20043793063459348, abs=1e-12)
    e1 = solve_sebs(ctx_closed, imp).E1
    assert st.EN == pytest.approx(e1 + 2 * st.mode.E1s, rel=1e-12)
    assert st.E1 == pytest.approx(e1, rel=1e-12)
    # impurity-flip coefficient is omega eta / (delta - eps); at k = pi
    # that is omega / (delta - 4J)
    assert st.c_e_coeffs(np.pi) == pytest.approx(0.02 / (-0.2 - 4.0),
                                                 rel=1e-12)


def test_pe_assembly(ctx_closed):
    imp = ImpuritySpec(delta=5.0, omega=0.05)
    st = perturbative_bound_state(ctx_closed, imp, 2, "PE")
    assert st.EN == pytest.approx(2 * st.mode.E1s, rel=1e-12)
    assert st.mode.sector == "g"
    assert st.d_g is not None and np.isfinite(st.d_g) and st.d_g != 0.0


def test_regime_gates(ctx_closed):
    with pytest.raises(RegimeError):
        perturbative_bound_state(ctx_closed,
                                 ImpuritySpec(delta=0.1, omega=0.02), 2, "PG")
    with pytest.raises(RegimeError):
        perturbative_bound_state(ctx_closed,
                                 ImpuritySpec(delta=2.0, omega=0.02), 2, "PE")
    with pytest.raises(RegimeError):
        perturbative_bound_state(ctx_closed,
                                 ImpuritySpec(delta=-0.2, omega=0.02), 2, "XX")


def test_existence_gates(ctx_closed):
    imp0 = ImpuritySpec(delta=0.0, omega=0.1)
    with pytest.raises(RegimeError):
        mebs_exists_perturbative(ctx_closed, imp0)
    assert not mebs_exists_perturbative(ctx_closed,
                                        ImpuritySpec(delta=-0.2, omega=0.0))
    # 1d: I0 diverges, always exists at finite coupling
    assert mebs_exists_perturbative(ctx_closed,
                                    ImpuritySpec(delta=-0.2, omega=0.01))


def test_existence_threshold_3d():
    bath = BathSpec(dimension=3, hopping=1.0)
    ctx = SpectralContext(bath, mode=QUADRATURE)
    assert not mebs_exists_perturbative(ctx, ImpuritySpec(delta=-1.0,
                                                          omega=0.2))
    assert mebs_exists_perturbative(ctx, ImpuritySpec(delta=-1.0, omega=5.0))


def test_jc_limit_values():
    st = jc_limit(ImpuritySpec(delta=0.0, omega=1.0), 4)
    assert st.EN == pytest.approx(-2.0, abs=1e-14)
    st1 = jc_limit(ImpuritySpec(delta=0.3, omega=0.8), 1)
    want = 0.5 * (0.3 - math.sqrt(0.09 + 4 * 0.64))
    assert st1.EN == pytest.approx(want, rel=1e-14)
    ae, ag = st.jc_weights
    assert ae**2 + ag**2 == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ConfigError):
        jc_limit(ImpuritySpec(delta=0.0, omega=1.0), 0)


def test_jc_limit_scaling():
    # at delta = 0 the ladder energy is -sqrt(N) omega
    for n in (1, 2, 3, 5):
        st = jc_limit(ImpuritySpec(delta=0.0, omega=50.0), n)
        assert st.EN == pytest.approx(-math.sqrt(n) * 50.0, rel=1e-14)
