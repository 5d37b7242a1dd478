"""Single-excitation bound state below the band.

The state |B1> = (u_B sigma_eg^dag + sum_k f_B(k) a_k^dag)|g,vac> has its
energy at the unique root of

    F1(E) = E - delta - Omega^2 sigma(E),  E < 0,

with sigma from the spectral module.  F1 is strictly increasing outside
the band (sigma' < 0), so a bracketed bisection is certified; one Newton
step polishes the root to the residual tolerance.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sciopt

from . import spectral
from .errors import (BracketingError, ConfigError, GridTooSmallError,
                     NoBoundStateError)

RESIDUAL_TOL = 1e-12
TAIL_TOL = 1e-12          # stricter than the 1e-8 reporting criterion
MAX_HALF_WIDTH = 1 << 21


def binding_function(ctx, imp, E):
    """F1(E) = E - delta - Omega^2 sigma(E)."""
    if imp.omega == 0.0:
        return E - imp.delta
    return E - imp.delta - imp.omega**2 * spectral.self_energy(ctx, E)


def sebs_exists(ctx, imp):
    """True iff F1(0) > 0: divergent I0, negative detuning, or Omega^2 I0 > delta."""
    if imp.delta < 0.0:
        return True
    i0 = spectral.capital_i0(ctx)
    if np.isinf(i0):
        return True
    return imp.omega**2 * i0 - imp.delta > 0.0


@dataclass
class SebsSolution:
    """Root E1 with amplitudes; f_B/xi are built lazily (tables can be wide)."""

    E1: float
    u_B: float
    ctx: object
    imp: object
    _cache: dict = field(default_factory=dict, repr=False)

    def f_B_momentum(self, k):
        """Momentum amplitude (Omega/sqrt(V)) eta_k u_B/(E1 - eps_k), without 1/sqrt(V)."""
        from .model import dispersion_eval
        eps = dispersion_eval(self.ctx.bath, k)
        return self.imp.omega * self.u_B / (self.E1 - eps)

    @property
    def site_coords(self):
        self._ensure_table()
        return self._cache["coords"]

    @property
    def f_B(self):
        self._ensure_table()
        return self._cache["f_B"]

    @property
    def xi(self):
        return sebs_localization_length(self)

    def _ensure_table(self):
        if "f_B" in self._cache:
            return
        ctx, imp = self.ctx, self.imp
        if ctx.mode == spectral.LATTICE_SUM:
            coords = ctx.grid.site_coords
            prof = spectral.lattice_pole_profile(ctx, self.E1)
            amps = imp.omega * self.u_B * prof
        elif ctx.mode == spectral.CLOSED_FORM:
            coords, amps = self._adaptive_window()
        else:
            raise ConfigError(
                "real-space amplitudes are available for the 1D closed-form "
                "and lattice contexts only; use f_B_momentum")
        self._cache["coords"] = coords
        self._cache["f_B"] = amps

    def _adaptive_window(self):
        imp, J = self.imp, self.ctx.hopping
        if imp.omega == 0.0:
            coords = np.arange(-2, 3)
            return coords, np.zeros(5)
        total = 1.0 - self.u_B**2       # exact photon weight
        half = 8
        while True:
            coords = np.arange(-half, half + 1)
            amps = imp.omega * self.u_B * spectral.pole_profile(
                self.E1, J, coords)
            if total <= 0.0 or 1.0 - np.sum(amps**2) / total <= TAIL_TOL:
                return coords, amps
            if half >= MAX_HALF_WIDTH:
                raise GridTooSmallError(
                    "bound state too shallow for a real-space table "
                    "(E1=%g)" % self.E1)
            half *= 2


def solve_sebs(ctx, imp):
    """Root of F1 below the band plus normalized amplitudes."""
    if not sebs_exists(ctx, imp):
        raise NoBoundStateError(
            "no state below the band at delta=%g, omega=%g"
            % (imp.delta, imp.omega))
    J = ctx.hopping
    scale = max(J, abs(imp.delta), imp.omega)

    if imp.omega == 0.0:
        if imp.delta >= 0.0:
            raise NoBoundStateError("decoupled impurity with delta >= 0")
        return SebsSolution(E1=imp.delta, u_B=1.0, ctx=ctx, imp=imp)

    # upper bracket: walk toward 0- until F1 turns positive
    hi = -1e-12 * J
    if ctx.mode == spectral.QUADRATURE:
        hi = -2.0 * spectral.EDGE_MARGIN * J
    for _ in range(600):
        if binding_function(ctx, imp, hi) > 0.0:
            break
        if ctx.mode == spectral.QUADRATURE or hi > -1e-280 * J:
            raise BracketingError(
                "F1 stays negative up to the band edge; state too shallow "
                "to resolve")
        hi /= 16.0
    else:
        raise BracketingError("could not place the upper bracket")

    lo = min(imp.delta, 0.0) - max(J, imp.omega)
    for _ in range(200):
        if binding_function(ctx, imp, lo) < 0.0:
            break
        lo = min(imp.delta, 0.0) + 2.0 * (lo - min(imp.delta, 0.0))
    else:
        raise BracketingError("could not place the lower bracket")

    root = sciopt.brentq(lambda E: binding_function(ctx, imp, E), lo, hi,
                         xtol=1e-300, rtol=4 * np.finfo(float).eps,
                         maxiter=300)
    # one Newton polish; F1' = 1 - Omega^2 sigma'
    slope = 1.0 - imp.omega**2 * spectral.self_energy_derivative(ctx, root)
    root -= binding_function(ctx, imp, root) / slope

    resid = abs(binding_function(ctx, imp, root))
    if resid > RESIDUAL_TOL * scale:
        raise BracketingError("root residual %g exceeds tolerance" % resid)

    u_B = 1.0 / np.sqrt(1.0 - imp.omega**2
                        * spectral.self_energy_derivative(ctx, root))
    return SebsSolution(E1=root, u_B=float(u_B), ctx=ctx, imp=imp)


def sebs_localization_length(sol):
    """xi = sqrt(sum j^2 |f_B|^2 / sum |f_B|^2) of the photon cloud."""
    ctx = sol.ctx
    if ctx.mode == spectral.CLOSED_FORM:
        # exact geometric sums: |f(j)|^2 prop x^(2|j|), xi = sqrt(2) x/(1-x^2)
        if sol.imp.omega == 0.0:
            return 0.0
        x = spectral.pole_factor(sol.E1, ctx.hopping)
        return float(np.sqrt(2.0) * abs(x) / (1.0 - x * x))
    coords, amps = sol.site_coords, sol.f_B
    dens = np.abs(amps) ** 2
    total = dens.sum()
    if total <= 0.0:
        return 0.0
    edge = dens[np.abs(coords) == np.max(np.abs(coords))].sum()
    if edge > 1e-8 * total:
        raise GridTooSmallError("tail weight %g of the photon cloud sits on "
                                "the grid edge" % (edge / total))
    return float(np.sqrt(np.sum(coords**2 * dens) / total))
