"""Observables and figure-style reductions.

Localization lengths from site densities, the detuning-stripped energy
E~_N, log-log scaling fits, and the coupling-regime heuristic used to
label sweep output.  Everything here is pure arithmetic on values the
solver modules already produced.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

PG = "PG"
PE = "PE"
NP_I = "NP_I"
NP_II = "NP_II"
JC = "JC"

REGIME_LABELS = (PG, PE, NP_I, NP_II, JC)

# heuristic strong/weak coupling margin used by classify_regime
REGIME_FACTOR = 5.0

MIN_FIT_POINTS = 6


@dataclass(frozen=True)
class RegimeLabel:
    """Coupling-regime tag plus the raw numbers it was derived from.

    The label is a plotting aid, not a phase boundary; downstream output
    always carries (delta, omega, bandwidth) alongside it so nobody has
    to trust the heuristic.
    """

    label: str
    delta: float
    omega: float
    bandwidth: float

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    stderr: float
    window: tuple
    r_squared: float
    n_points: int


def localization_length(density, coords=None):
    """rms site index of a density profile, impurity at coordinate 0.

    xi = sqrt(sum_j j^2 n_j / sum_j n_j).  coords defaults to a centered
    integer range, which matches how the solvers lay out site tables.
    """
    n = np.asarray(density, dtype=float)
    if n.size == 0:
        raise ConfigError("empty density profile")
    if coords is None:
        coords = np.arange(n.size) - n.size // 2
    j = np.asarray(coords, dtype=float)
    if j.shape != n.shape:
        raise ConfigError("density and coordinate shapes differ")
    total = float(np.sum(n))
    if total <= 0.0:
        raise ConfigError("density profile sums to zero")
    return float(np.sqrt(np.sum(j * j * n) / total))


def modified_energy(e_n, delta):
    """E~_N = |E_N - H(-delta) delta| with the H(0) = 0 convention.

    Strips the trivial impurity-flip offset so bound-state energies on
    the delta < 0 side can be compared against the delta >= 0 side.  The
    definition jumps by |delta| across delta = 0; that is a property of
    the convention, not a bug.
    """
    offset = delta if delta < 0.0 else 0.0
    return abs(e_n - offset)


def fit_scaling(points):
    """Least-squares power-law exponent of quantity vs omega.

    points: iterable of (omega, quantity), all positive.  Returns the
    slope of log q against log omega with its standard error and the
    r^2 of the fit; refuses fewer than MIN_FIT_POINTS samples since a
    claimed exponent from 3 points is noise.
    """
    pts = [(float(w), float(q)) for w, q in points]
    if len(pts) < MIN_FIT_POINTS:
        raise ConfigError("scaling fit needs at least %d points, got %d"
                          % (MIN_FIT_POINTS, len(pts)))
    w = np.array([p[0] for p in pts])
    q = np.array([p[1] for p in pts])
    if np.any(w <= 0.0) or np.any(q <= 0.0):
        raise ConfigError("scaling fit requires positive omega and data")
    x = np.log(w)
    y = np.log(q)
    n = x.size
    xbar = x.mean()
    sxx = np.sum((x - xbar) ** 2)
    if sxx == 0.0:
        raise ConfigError("all omega values coincide")
    slope = np.sum((x - xbar) * (y - y.mean())) / sxx
    inter = y.mean() - slope * xbar
    resid = y - (slope * x + inter)
    ssr = float(np.sum(resid ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    # stderr of the slope; guard the n = 2 division even though the
    # point-count floor already rules it out
    var = ssr / max(n - 2, 1)
    stderr = float(np.sqrt(var / sxx))
    r2 = 1.0 if sst == 0.0 else 1.0 - ssr / sst
    return ScalingFit(exponent=float(slope), stderr=stderr,
                      window=(float(np.min(w)), float(np.max(w))),
                      r_squared=float(r2), n_points=n)


def classify_regime(imp, bath):
    """Tag (delta, omega) with the coupling-regime heuristic.

    JC when omega dwarfs every other scale; PG/PE/NP_II when omega is
    perturbative against the relevant gap; NP_I otherwise.  Boundaries
    use the factor REGIME_FACTOR and carry no physical meaning beyond
    sorting sweep output into families.
    """
    d = float(imp.delta)
    om = abs(float(imp.omega))
    w = float(bath.bandwidth)
    if om > REGIME_FACTOR * max(abs(d), w):
        label = JC
    elif d < 0.0 and om < abs(d) / REGIME_FACTOR:
        label = PG
    elif d > w and om < (d - w) / REGIME_FACTOR:
        label = PE
    elif 0.0 < d <= w and om < d / REGIME_FACTOR:
        label = NP_II
    else:
        label = NP_I
    return RegimeLabel(label=label, delta=d, omega=float(imp.omega),
                       bandwidth=w)
