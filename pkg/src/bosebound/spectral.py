"""Scalar integrals and sums over the bath.

Everything a solver needs from the bath reduces to a handful of momentum
integrals evaluated outside the band:

    sigma(E)   = int d^dk/(2pi)^d |eta_k|^2 / (E - eps_k)
    sigma'(E)  = -int |eta_k|^2 / (E - eps_k)^2
    I0         = int |eta_k|^2 / eps_k
    N(e1, e2)  = int eta_k^2 / ((e1 - eps_k)(e2 - eps_k))
    w_a(E)     = (Omega^2/2) int eps^{a-1} |eta|^2 / (E - eps)^a

Three evaluation modes are supported: exact closed forms for the 1D
tight-binding bath with point coupling, adaptive quadrature for the other
continuum baths, and finite lattice sums.  The d-dimensional tight-binding
quadrature goes through the Laplace representation

    1/(eps - E) = int_0^inf dt exp(-t(eps - E))        (E below the band)

which turns the d-fold momentum integral into a single t integral over
exp(tE) * [exp(-2Jt) I_Bessel(2Jt)]^d, so one adaptive pass reaches the
requested tolerance in any dimension.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, IllPosedBathError, InBandEnergyError
from .model import (QUADRATIC, TABULATED, TIGHT_BINDING, coupling_fourier,
                    dispersion_eval)

CLOSED_FORM = "closed_form_1d_tb"
QUADRATURE = "quadrature"
LATTICE_SUM = "lattice_sum"

# quadrature refuses evaluations closer to a band edge than this (units of J)
EDGE_MARGIN = 1e-6

# poles closer than this relative distance are treated as coincident
_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class SpectralContext:
    """Bath plus a fixed evaluation strategy for all spectral integrals."""

    bath: object
    mode: str = CLOSED_FORM
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    grid: object = None
    cutoff: float = None     # momentum cutoff for the quadratic dispersion

    def __post_init__(self):
        if self.mode not in (CLOSED_FORM, QUADRATURE, LATTICE_SUM):
            raise ConfigError("unknown spectral mode %r" % (self.mode,))
        if self.mode == CLOSED_FORM:
            ok = (self.bath.dimension == 1
                  and self.bath.dispersion == TIGHT_BINDING
                  and self.bath.point_coupling)
            if not ok:
                raise ConfigError(
                    "closed forms only cover the 1D tight-binding bath "
                    "with point coupling")
        if self.mode == QUADRATURE:
            if self.abs_tol <= 0 or self.rel_tol <= 0:
                raise ConfigError("quadrature tolerances must be positive")
            if self.bath.dispersion == TABULATED:
                raise ConfigError("tabulated dispersions need lattice_sum")
            if not self.bath.point_coupling:
                raise ConfigError("quadrature assumes the point profile")
        if self.mode == LATTICE_SUM:
            if self.grid is None:
                raise ConfigError("lattice_sum needs a grid")
            if self.grid.boundary != "periodic":
                raise ConfigError("lattice sums need periodic boundaries")
            object.__setattr__(self, "_tables", _build_lattice_tables(self))

    @property
    def hopping(self):
        return self.bath.hopping


def _build_lattice_tables(ctx):
    """Momentum mesh energies and coupling weights, built once per context."""
    grid, bath = ctx.grid, ctx.bath
    k1 = grid.momenta
    if bath.dimension == 1:
        if bath.dispersion == TABULATED:
            ktab, etab = bath.eps_table
            if len(etab) != grid.sites:
                raise ConfigError("eps_table does not match the grid")
            eps = np.asarray(etab, dtype=float)
        else:
            eps = dispersion_eval(bath, k1)
        eta2 = np.abs(coupling_fourier(bath, grid, k1)) ** 2
        return eps, eta2, float(grid.sites)
    mesh = np.meshgrid(*([k1] * bath.dimension), indexing="ij")
    kvecs = np.stack([m.ravel() for m in mesh], axis=-1)
    eps = dispersion_eval(bath, kvecs)
    eta2 = np.ones_like(eps)
    return eps, eta2, float(grid.sites**bath.dimension)


def _check_outside_band(ctx, E):
    W = ctx.bath.bandwidth
    J = ctx.hopping
    if ctx.mode == QUADRATURE:
        if not (E < -EDGE_MARGIN * J or E > W + EDGE_MARGIN * J):
            raise InBandEnergyError(
                "E=%g is inside the band or within %g*J of an edge"
                % (E, EDGE_MARGIN))
    else:
        if 0.0 <= E <= W:
            raise InBandEnergyError("E=%g lies inside the band [0, %g]"
                                    % (E, W))


# ---------------------------------------------------------------------------
# closed forms, 1D tight binding

def pole_factor(E, J):
    """x with x + 1/x = 2 - E/J and |x| < 1, for E outside [0, 4J].

    x is the per-site decay factor of the real-space pole function: x in
    (0,1) below the band, in (-1,0) above it (staggered tail).
    """
    b = 2.0 - np.asarray(E, dtype=float) / J
    if np.any(np.abs(b) <= 2.0):
        raise InBandEnergyError("pole factor needs E outside the band")
    return (b - np.sign(b) * np.sqrt(b * b - 4.0)) / 2.0


def pole_profile(E, J, j):
    """Real-space transform h_E(j) = int dk/2pi e^{ikj}/(E - eps_k).

    Equals -x^(|j|+1) / (J (1 - x^2)) with x = pole_factor(E, J).
    """
    x = pole_factor(E, J)
    return -(x ** (np.abs(np.asarray(j)) + 1.0)) / (J * (1.0 - x * x))


def _closed_sigma(E, J):
    u = E * (E - 4.0 * J)
    r = np.sqrt(u)
    return -1.0 / r if E < 0 else 1.0 / r


def _closed_sigma2(E, J):
    # -d sigma / dE; positive on both sides of the band
    u = E * (E - 4.0 * J)
    if E < 0:
        return (2.0 * J - E) / u**1.5
    return (E - 2.0 * J) / u**1.5


# ---------------------------------------------------------------------------
# adaptive quadrature

def _tb_laplace(ctx, E, order):
    """int_0^inf t^order e^{-t|...|} ive(0,2Jt)^d dt for the TB bath."""
    d, J = ctx.bath.dimension, ctx.hopping
    rate = -E if E < 0 else E - 4.0 * d * J

    def f(t):
        return t**order * np.exp(-rate * t) * special.ive(0, 2.0 * J * t)**d

    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=ctx.abs_tol,
                            epsrel=ctx.rel_tol, limit=400)
    return val


def _quadratic_cutoff(ctx, E):
    c = ctx.hopping
    if ctx.cutoff is not None:
        return ctx.cutoff
    return np.sqrt(100.0 * abs(E) / c)


_SPHERE = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


def _quadratic_radial(ctx, E, power):
    """int_0^Lam k^{d-1}/(c k^2 + |E|)^power dk times the angular factor."""
    d, c = ctx.bath.dimension, ctx.hopping
    lam = _quadratic_cutoff(ctx, E)
    pref = _SPHERE[d] / (2.0 * np.pi) ** d

    def f(k):
        return k ** (d - 1) / (c * k * k + abs(E)) ** power

    val, _ = integrate.quad(f, 0.0, lam, epsabs=ctx.abs_tol,
                            epsrel=ctx.rel_tol, limit=400)
    return pref * val


def _quad_sigma(ctx, E):
    if ctx.bath.dispersion == TIGHT_BINDING:
        val = _tb_laplace(ctx, E, 0)
        return -val if E < 0 else val
    if E > 0:
        raise InBandEnergyError("quadratic band extends to +inf")
    return -_quadratic_radial(ctx, E, 1)


def _quad_sigma2(ctx, E):
    if ctx.bath.dispersion == TIGHT_BINDING:
        return _tb_laplace(ctx, E, 1)
    if E > 0:
        raise InBandEnergyError("quadratic band extends to +inf")
    return _quadratic_radial(ctx, E, 2)


# ---------------------------------------------------------------------------
# public operations

def _sigma(ctx, E):
    _check_outside_band(ctx, E)
    if ctx.mode == CLOSED_FORM:
        return _closed_sigma(E, ctx.hopping)
    if ctx.mode == QUADRATURE:
        return _quad_sigma(ctx, E)
    eps, eta2, vol = ctx._tables
    return float(np.sum(eta2 / (E - eps)) / vol)


def _sigma2(ctx, E):
    _check_outside_band(ctx, E)
    if ctx.mode == CLOSED_FORM:
        return _closed_sigma2(E, ctx.hopping)
    if ctx.mode == QUADRATURE:
        return _quad_sigma2(ctx, E)
    eps, eta2, vol = ctx._tables
    return float(np.sum(eta2 / (E - eps) ** 2) / vol)


def self_energy(ctx, E):
    """sigma(E): negative below the band, positive above it."""
    return _sigma(ctx, E)


def self_energy_derivative(ctx, E):
    """d sigma / dE, valid on either side of the band (always negative)."""
    return -_sigma2(ctx, E)


def coupling_norm(ctx):
    """int d^dk/(2pi)^d |eta_k|^2 = sum_j |eta_j|^2 (Parseval)."""
    if ctx.bath.point_coupling:
        return 1.0
    return float(np.sum(np.abs(ctx.bath.coupling_amps) ** 2))


def capital_i0(ctx):
    """I0 = int |eta|^2/eps, or +inf when the band-edge integral diverges.

    Divergence is decided analytically from the band-edge density of
    states: for both dispersion families the DOS goes like eps^(d/2-1),
    so the integral diverges iff d <= 2 (point coupling).  A finite
    lattice with eps=0 on the grid inherits the divergent verdict.
    """
    bath = ctx.bath
    if ctx.mode == LATTICE_SUM:
        eps, eta2, vol = ctx._tables
        zero = eps <= 0.0
        if np.any(zero & (eta2 > 0.0)):
            if bath.dispersion == TABULATED:
                raise IllPosedBathError("tabulated dispersion touches zero")
            return np.inf
        keep = ~zero
        return float(np.sum(eta2[keep] / eps[keep]) / vol)
    if bath.dimension <= 2:
        return np.inf
    if bath.dispersion == TIGHT_BINDING:
        d, J = bath.dimension, bath.hopping

        def f(t):
            return special.ive(0, 2.0 * J * t)**d

        val, _ = integrate.quad(f, 0.0, np.inf, epsabs=ctx.abs_tol,
                                epsrel=ctx.rel_tol, limit=400)
        return val
    # quadratic, d = 3: finite only with an explicit cutoff
    if ctx.cutoff is None:
        raise ConfigError("3D quadratic I0 needs an explicit momentum cutoff")
    return ctx.cutoff / (2.0 * np.pi**2 * ctx.hopping)


def w_alpha(ctx, imp, E, alpha):
    """w_a(E) = (Omega^2/2) int eps^{a-1} |eta|^2/(E-eps)^a, a in {1, 2}."""
    if alpha not in (1, 2):
        raise ConfigError("alpha must be 1 or 2")
    if imp.omega == 0.0:
        return 0.0
    half = 0.5 * imp.omega**2
    if alpha == 1:
        return half * _sigma(ctx, E)
    # eps/(E-eps)^2 = E/(E-eps)^2 - 1/(E-eps)
    return half * (E * _sigma2(ctx, E) - _sigma(ctx, E))


def n_mu_nu(ctx, e_mu, e_nu):
    """N(e_mu, e_nu) = int eta^2/((e_mu-eps)(e_nu-eps)), both poles below 0.

    Evaluated without differencing sigma: the quotient
    (sigma(e1)-sigma(e2))/(e2-e1) loses roughly |log10 gap| digits and
    poisons mode orthogonalization at small pole gaps, where the overlap
    approaches 1 like gap^2.  Coincident poles give -sigma'.
    """
    if e_mu >= 0.0 or e_nu >= 0.0:
        raise InBandEnergyError("n_mu_nu needs both poles below the band")
    _check_outside_band(ctx, e_mu)
    _check_outside_band(ctx, e_nu)
    scale = max(abs(e_mu), abs(e_nu))
    if abs(e_mu - e_nu) <= _MERGE_TOL * scale:
        return _sigma2(ctx, 0.5 * (e_mu + e_nu))
    if ctx.mode == CLOSED_FORM:
        J = ctx.hopping
        r1 = np.sqrt(e_mu * (e_mu - 4.0 * J))
        r2 = np.sqrt(e_nu * (e_nu - 4.0 * J))
        return -(e_mu + e_nu - 4.0 * J) / (r1 * r2 * (r1 + r2))
    if ctx.mode == LATTICE_SUM:
        eps, eta2, vol = ctx._tables
        return float(np.sum(eta2 / ((e_mu - eps) * (e_nu - eps))) / vol)
    return _quad_two_pole(ctx, e_mu, e_nu)


def _quad_two_pole(ctx, e_mu, e_nu):
    d, J = ctx.bath.dimension, ctx.hopping
    if ctx.bath.dispersion == TIGHT_BINDING:
        c = 0.5 * (e_mu + e_nu)
        g = 0.5 * (e_mu - e_nu)

        def f(u):
            x = u * g
            if abs(x) > 30.0:
                return (np.exp(u * e_mu) - np.exp(u * e_nu)) / (e_mu - e_nu) \
                    * special.ive(0, 2.0 * J * u)**d
            shc = np.sinh(x) / x if abs(x) > 1e-8 else 1.0 + x * x / 6.0
            return u * np.exp(u * c) * shc * special.ive(0, 2.0 * J * u)**d

        val, _ = integrate.quad(f, 0.0, np.inf, epsabs=ctx.abs_tol,
                                epsrel=ctx.rel_tol, limit=400)
        return val
    # quadratic dispersion: direct radial product integral
    a1, a2 = abs(e_mu), abs(e_nu)
    lam = _quadratic_cutoff(ctx, -max(a1, a2))
    pref = _SPHERE[d] / (2.0 * np.pi) ** d

    def f(k):
        k2 = ctx.hopping * k * k
        return k ** (d - 1) / ((k2 + a1) * (k2 + a2))

    val, _ = integrate.quad(f, 0.0, lam, epsabs=ctx.abs_tol,
                            epsrel=ctx.rel_tol, limit=400)
    return pref * val


def cross_pole_21(ctx, E, D):
    """int eta^2 / ((E-eps)^2 (D-eps)) with E, D on either side of the band."""
    a = D - E
    return (_sigma2(ctx, E) / a
            + (_sigma(ctx, D) - _sigma(ctx, E)) / a**2)


def cross_pole_22(ctx, E, D):
    """int eta^2 / ((E-eps)^2 (D-eps)^2)."""
    a = D - E
    return (_sigma2(ctx, E) + _sigma2(ctx, D)
            - 2.0 * (_sigma(ctx, E) - _sigma(ctx, D)) / a) / a**2


def lattice_pole_profile(ctx, E):
    """(1/L) sum_k e^{ikj}/(E - eps_k) on the grid, ordered like site_coords."""
    if ctx.mode != LATTICE_SUM or ctx.bath.dimension != 1:
        raise ConfigError("lattice pole profiles need a 1D lattice context")
    _check_outside_band(ctx, E)
    eps, _, _ = ctx._tables
    h = np.fft.ifft(1.0 / (E - eps))
    return np.real(np.roll(h, ctx.grid.sites // 2))
