import numpy as np
import pytest

from bosebound.analysis import (classify_regime, fit_scaling,
                                localization_length, modified_energy)
from bosebound.errors import ConfigError
from bosebound.model import BathSpec, ImpuritySpec


def test_localization_length_point_masses():
    n = np.zeros(21)
    n[10] = 1.0                       # all weight on the coupling site
    assert localization_length(n) == 0.0
    n = np.zeros(21)
    n[9] = 0.5
    n[11] = 0.5                       # split to the neighbors
    assert localization_length(n) == pytest.approx(1.0, abs=1e-14)


def test_localization_length_explicit_coords():
    dens = np.array([0.25, 0.5, 0.25])
    coords = np.array([-2.0, 0.0, 2.0])
    assert localization_length(dens, coords) == pytest.approx(
        np.sqrt(2.0), rel=1e-14)


def test_localization_length_errors():
    with pytest.raises(ConfigError):
        localization_length(np.array([]))
    with pytest.raises(ConfigError):
        localization_length(np.ones(4), np.zeros(3))
    with pytest.raises(ConfigError):
        localization_length(np.zeros(5))


def test_modified_energy_offset():
    assert modified_energy(-0.6, 0.0) == pytest.approx(0.6)
    assert modified_energy(-0.6, 0.2) == pytest.approx(0.6)
    assert modified_energy(-0.6, -0.2) == pytest.approx(0.4)
    # approaching delta = 0 from below shifts the reference continuously
    assert modified_energy(-0.6, -1e-12) == pytest.approx(0.6, abs=1e-11)


def test_fit_scaling_recovers_exponent():
    x = np.geomspace(1e-3, 1e-2, 10)
    fit = fit_scaling(list(zip(x, 2.5 * x ** (4.0 / 3.0))))
    assert fit.exponent == pytest.approx(4.0 / 3.0, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 10
    assert fit.window == (pytest.approx(1e-3), pytest.approx(1e-2))


def test_fit_scaling_noise_widens_stderr():
    rng = np.random.default_rng(7)
    x = np.geomspace(1e-3, 1e-1, 20)
    y = x**2 * np.exp(rng.normal(0.0, 0.05, x.size))
    fit = fit_scaling(list(zip(x, y)))
    assert fit.exponent == pytest.approx(2.0, abs=0.1)
    assert fit.stderr > 0.0
    assert fit.r_squared < 1.0


def test_fit_scaling_errors():
    x = np.geomspace(1e-3, 1e-2, 5)
    with pytest.raises(ConfigError):
        fit_scaling(list(zip(x, x**2)))        # too few points
    x6 = np.geomspace(1e-3, 1e-2, 6)
    bad = list(zip(x6, x6**2))
    bad[2] = (bad[2][0], 0.0)
    with pytest.raises(ConfigError):
        fit_scaling(bad)                       # nonpositive data


def _regime(delta, omega):
    return str(classify_regime(ImpuritySpec(delta, omega),
                               BathSpec(dimension=1, hopping=1.0)))


def test_regime_examples():
    assert _regime(0.0, 50.0) == "JC"
    assert _regime(-1.0, 0.1) == "PG"
    assert _regime(5.0, 0.1) == "PE"
    assert _regime(2.0, 0.3) == "NP_II"
    assert _regime(0.0, 0.5) == "NP_I"
    assert _regime(-1.0, 0.5) == "NP_I"      # too strong for PG


def test_regime_label_carries_inputs():
    lab = classify_regime(ImpuritySpec(-1.0, 0.1),
                          BathSpec(dimension=1, hopping=1.0))
    assert lab.delta == -1.0
    assert lab.omega == 0.1
    assert lab.bandwidth == 4.0
