"""Bath, impurity, coupling and lattice definitions shared by every solver.

Conventions: the bath spectrum is shifted so min_k eps_k = 0.  For the
tight-binding family eps_k = 2J*sum_i(1 - cos k_i), bandwidth W = 4dJ.
The quadratic family eps_k = c*|k|^2 has W = +inf, with c stored in the
``hopping`` slot.  Energies are quoted in units of J (or of c).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TIGHT_BINDING = "tight_binding"
QUADRATIC = "quadratic"
TABULATED = "tabulated"


@dataclass(frozen=True)
class BathSpec:
    """Free-boson bath: dimension, dispersion family, coupling profile.

    coupling_sites/coupling_amps describe a tabulated real profile eta_j;
    leaving them None selects the point profile eta_j = delta_{j0}.
    """

    dimension: int = 1
    dispersion: str = TIGHT_BINDING
    hopping: float = 1.0
    eps_table: tuple = None          # tabulated dispersion on a uniform k grid
    coupling_sites: tuple = None
    coupling_amps: tuple = None

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ConfigError("dimension must be 1, 2 or 3")
        if self.dispersion not in (TIGHT_BINDING, QUADRATIC, TABULATED):
            raise ConfigError("unknown dispersion %r" % (self.dispersion,))
        if self.hopping <= 0:
            raise ConfigError("hopping/curvature scale must be positive")
        if self.dispersion == TABULATED and self.eps_table is None:
            raise ConfigError("tabulated dispersion needs eps_table")
        if (self.coupling_sites is None) != (self.coupling_amps is None):
            raise ConfigError("coupling_sites and coupling_amps go together")
        if self.coupling_sites is not None:
            if len(self.coupling_sites) != len(self.coupling_amps):
                raise ConfigError("coupling profile length mismatch")
            if self.dimension != 1:
                raise ConfigError("tabulated coupling profiles are 1D only")

    @property
    def point_coupling(self):
        return self.coupling_sites is None

    @property
    def bandwidth(self):
        if self.dispersion == TIGHT_BINDING:
            return 4.0 * self.dimension * self.hopping
        if self.dispersion == QUADRATIC:
            return np.inf
        return float(np.max(self.eps_table) - np.min(self.eps_table))


@dataclass(frozen=True)
class ImpuritySpec:
    """Two-level impurity: detuning delta (any sign), coupling omega >= 0."""

    delta: float
    omega: float

    def __post_init__(self):
        if self.omega < 0:
            raise ConfigError("omega must be >= 0")


@dataclass(frozen=True)
class LatticeGrid:
    """Finite 1D chain of L sites with the impurity site at coordinate 0."""

    sites: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.sites < 3:
            raise ConfigError("need at least 3 sites")
        if self.boundary not in ("periodic", "open"):
            raise ConfigError("boundary must be periodic or open")

    @property
    def site_coords(self):
        # symmetric labeling, site 0 hosts the coupling for the point profile
        return np.arange(self.sites) - self.sites // 2

    @property
    def momenta(self):
        # k_n = 2*pi*n/L folded into (-pi, pi]; covers the zone exactly once
        if self.boundary != "periodic":
            raise ConfigError("momenta are defined for periodic boundaries")
        k = 2.0 * np.pi * np.arange(self.sites) / self.sites
        return np.where(k > np.pi, k - 2.0 * np.pi, k)


def dispersion_eval(bath, k):
    """eps_k for scalar k (1D) or arrays; d>1 takes vectors in the last axis."""
    k = np.asarray(k, dtype=float)
    if bath.dispersion == TIGHT_BINDING:
        if bath.dimension == 1:
            return 2.0 * bath.hopping * (1.0 - np.cos(k))
        if k.shape[-1] != bath.dimension:
            raise ConfigError("momentum vector has wrong dimension")
        return 2.0 * bath.hopping * np.sum(1.0 - np.cos(k), axis=-1)
    if bath.dispersion == QUADRATIC:
        if bath.dimension == 1:
            return bath.hopping * k**2
        if k.shape[-1] != bath.dimension:
            raise ConfigError("momentum vector has wrong dimension")
        return bath.hopping * np.sum(k**2, axis=-1)
    # tabulated: exact grid-point queries only, no interpolation
    table_k, table_e = bath.eps_table
    table_k = np.asarray(table_k, dtype=float)
    table_e = np.asarray(table_e, dtype=float)
    out = np.empty(np.shape(k), dtype=float)
    flat_k = np.atleast_1d(k).ravel()
    flat_o = np.atleast_1d(out).ravel()
    for i, kv in enumerate(flat_k):
        hits = np.nonzero(np.abs(table_k - kv) < 1e-12)[0]
        if hits.size == 0:
            raise ConfigError("tabulated dispersion queried off its grid")
        flat_o[i] = table_e[hits[0]]
    return out if out.ndim else float(flat_o[0])


def coupling_fourier(bath, grid, k):
    """eta_k = sum_j eta_j exp(-i k r_j); the point profile gives 1 for all k."""
    if bath.point_coupling:
        return np.ones_like(np.asarray(k, dtype=float))
    sites = np.asarray(bath.coupling_sites, dtype=float)
    amps = np.asarray(bath.coupling_amps)
    k = np.asarray(k, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(k, sites))
    out = phase @ amps
    return out
