"""Weak-coupling solvers on the projected two-band problem, plus the
strong-coupling single-mode limit.

Both weak-coupling regimes reduce the impurity-bath problem to a 2x2
secular matrix M^s(E) whose determinant root E_1^s is the binding energy
of one collective excitation on top of the (dressed or bare) impurity.
The matrix entries only involve the kernels w_1, w_2 and the derivative
of w_1 at the impurity detuning, so everything runs on any spectral
context.  Sector "e" sits on top of the dressed excited impurity
(detuning below the band); sector "g" on the bare ground state
(detuning above it).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import (BracketingError, ConfigError, DegenerateModeError,
                     NoBoundStateError, RegimeError)
from .model import dispersion_eval, coupling_fourier
from .sebs import solve_sebs
from .spectral import (LATTICE_SUM, capital_i0, cross_pole_21, cross_pole_22,
                       lattice_pole_profile, pole_factor, pole_profile,
                       self_energy, self_energy_derivative, w_alpha)

SCAN_POINTS = 200
SCAN_FLOOR_FRACTION = 1e-12   # innermost scan magnitude, units of the scale
ROOT_CLASS_TOL = 1e-6         # |det| above this at convergence means pole
NULL_RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-8
_TAIL_TOL = 1e-16
_MAX_HALF_WIDTH = 1 << 21


def _sector_sign(sector):
    """+1 for sector g (detuning above band), -1 for sector e (below)."""
    if sector == "e":
        return -1.0
    if sector == "g":
        return 1.0
    raise ConfigError("sector must be 'e' or 'g', got %r" % (sector,))


def _check_sector_regime(ctx, imp, sector):
    W = ctx.bath.bandwidth
    if sector == "e" and not imp.delta < 0.0:
        raise RegimeError("sector e needs delta < 0, got delta=%g"
                          % imp.delta)
    if sector == "g" and not imp.delta > W:
        raise RegimeError("sector g needs delta above the band (delta > %g),"
                          " got delta=%g" % (W, imp.delta))


# ---------------------------------------------------------------------------
# effective Hamiltonian after the polaron-type rotation

def effective_hamiltonian_kernel(ctx, imp):
    """Lamb shift and induced two-boson potential at second order.

    Returns a dict with 'lamb_shift' = Omega^2 sigma(Delta) and
    'potential_kernel', the symmetric function (k, k') -> matrix element
    (per unit volume) of the induced boson-boson attraction.
    """
    delta, omega = imp.delta, imp.omega
    if omega == 0.0:
        return {"lamb_shift": 0.0,
                "potential_kernel":
                    lambda k, kp: 0.0 * dispersion_eval(ctx.bath, k)}
    # raises in-band for 0 <= delta <= W
    shift = omega**2 * self_energy(ctx, delta)
    pref = 0.5 * omega**2

    def kernel(k, kp):
        ek = _denom(ctx, delta, k)
        ekp = _denom(ctx, delta, kp)
        eta_k = _coupling_value(ctx, k)
        eta_kp = _coupling_value(ctx, kp)
        return pref * np.conj(eta_kp) * eta_k * (1.0 / ekp + 1.0 / ek)

    return {"lamb_shift": shift, "potential_kernel": kernel}


def _denom(ctx, delta, k):
    return delta - dispersion_eval(ctx.bath, k)


def _coupling_value(ctx, k):
    if ctx.bath.point_coupling:
        return 1.0
    return coupling_fourier(ctx.bath, ctx.grid, k)


# ---------------------------------------------------------------------------
# existence criterion

def mebs_exists_perturbative(ctx, imp):
    """Sign test of the projected scattering threshold function at E=0.

    Returns True when the projected problem supports a bound collective
    mode at weak coupling.  A divergent band-edge integral I0 (any bath
    with d <= 2) short-circuits to True.
    """
    delta, omega = imp.delta, imp.omega
    if delta == 0.0:
        raise RegimeError("existence test undefined at delta = 0")
    if omega == 0.0:
        return False
    i0 = capital_i0(ctx)
    if np.isinf(i0):
        return True
    adelta = abs(delta)
    w1 = w_alpha(ctx, imp, delta, 1)
    w2 = w_alpha(ctx, imp, delta, 2)
    f0 = (1.0 - w1 / adelta) ** 2 \
        - (2.0 + w2 / adelta) * omega**2 * i0 / (2.0 * adelta)
    return bool(f0 < 0.0)


# ---------------------------------------------------------------------------
# secular matrix and its determinant root

def _m_matrix(ctx, imp, E):
    delta, omega = imp.delta, imp.omega
    w1E = w_alpha(ctx, imp, E, 1)
    w1D = w_alpha(ctx, imp, delta, 1)
    # d w_1 / d Delta at the detuning
    dw1D = 0.5 * omega**2 * self_energy_derivative(ctx, delta)
    diag = 1.0 + (w1E - w1D) / abs(delta - E)
    m21 = -(w1E - w1D) / (delta - E) ** 2 - dw1D / (delta - E)
    return np.array([[diag, -w1E], [m21, diag]])


def secular_determinant(ctx, imp, E):
    """det M^s(E), expanded so the large-|w1| cancellation is analytic.

    The raw 2x2 determinant subtracts w1(E)^2 against itself near deep
    roots; the expanded form keeps only the surviving combinations and
    tends to 1 as E -> -inf.
    """
    delta, omega = imp.delta, imp.omega
    w1E = w_alpha(ctx, imp, E, 1)
    w1D = w_alpha(ctx, imp, delta, 1)
    dw1D = 0.5 * omega**2 * self_energy_derivative(ctx, delta)
    diff = w1E - w1D
    a = delta - E
    return (1.0 + 2.0 * diff / abs(a)
            - w1D * diff / a**2
            - w1E * dw1D / a)


def _scan_energies(ctx, imp):
    scale = max(ctx.hopping, imp.omega, abs(imp.delta), ctx.bath.bandwidth)
    mags = np.geomspace(SCAN_FLOOR_FRACTION * scale, 10.0 * scale,
                        SCAN_POINTS)
    return -mags[::-1]            # ascending: deep to shallow


def solve_projected_mode(ctx, imp, sector):
    """Largest root below the band of det M^s, with the mode profile.

    Scans a log-spaced grid from deep below the band up to the edge,
    bisects every sign change, discards pole crossings (the determinant
    jumps through a pole at E = delta in sector e), and keeps the root
    closest to zero.  The nullvector of M^s at the root fixes the
    internal mixing of the collective mode; its momentum profile is
    normalized to unit total weight.
    """
    _check_sector_regime(ctx, imp, sector)
    if imp.omega == 0.0:
        raise NoBoundStateError("no projected mode at zero coupling")
    delta = imp.delta
    grid = _scan_energies(ctx, imp)
    scale = abs(grid[0]) / 10.0

    def det(E):
        if abs(E - delta) < 1e-12 * scale:
            E = E + 1e-11 * scale
        return secular_determinant(ctx, imp, E)

    # bisect in u = log(-E): shallow roots then resolve to full relative
    # precision, keeping |det| at the root near machine level
    def det_u(u):
        return det(-math.exp(u))

    us = np.log(-grid)            # descending as E ascends
    vals = np.array([det(E) for E in grid])
    roots = []
    for i in range(len(grid) - 1):
        f0, f1 = vals[i], vals[i + 1]
        if not (np.isfinite(f0) and np.isfinite(f1)):
            continue
        if f0 == 0.0:
            roots.append(grid[i])
            continue
        if f0 * f1 < 0.0:
            u = optimize.brentq(det_u, us[i + 1], us[i], xtol=1e-15,
                                rtol=4.0 * np.finfo(float).eps)
            r = -math.exp(u)
            if abs(det(r)) <= ROOT_CLASS_TOL:
                roots.append(r)
    if not roots:
        raise NoBoundStateError(
            "det M^%s has no root below the band for delta=%g, omega=%g"
            % (sector, delta, imp.omega))
    E1s = max(roots)
    det_residual = abs(det(E1s))

    M = _m_matrix(ctx, imp, E1s)
    _, s, Vh = np.linalg.svd(M)
    if s[0] <= DEGENERACY_TOL:
        # whole matrix collapsed: double root within tolerance
        raise DegenerateModeError("degenerate nullspace of M^s at the root")
    C = Vh[-1]
    null_residual = float(np.linalg.norm(M @ C))
    if null_residual > NULL_RESIDUAL_TOL:
        raise BracketingError(
            "nullvector residual %g exceeds tolerance at E=%g"
            % (null_residual, E1s))
    # deterministic orientation
    pivot = C[1] if abs(C[1]) >= abs(C[0]) else C[0]
    if pivot < 0.0:
        C = -C

    profile = ModeProfile(ctx, imp, E1s, _sector_sign(sector), C)
    return ProjectedModeSolution(sector=sector, E1s=float(E1s),
                                 C=(float(C[0]), float(C[1])),
                                 phi_A=profile,
                                 det_residual=float(det_residual),
                                 null_residual=null_residual)


class ModeProfile:
    """Normalized amplitudes of a projected collective mode.

    The momentum amplitude splits into two out-of-band poles,

        phi(k) ~ A_E / (E - eps_k) + A_D / (delta - eps_k),

    so the real-space profile is the matching combination of the two
    pole transforms.  On a lattice context the normalization is the
    exact finite sum over grid momenta; otherwise it is the density
    integral evaluated with the two-pole kernels.
    """

    def __init__(self, ctx, imp, E, s, C):
        self.ctx = ctx
        self.energy = float(E)
        self.delta = float(imp.delta)
        self.sector_sign = s
        delta = imp.delta
        pref = 0.5 * imp.omega**2
        self.A_E = pref * (C[1] - s * C[0] / (delta - E))
        self.A_D = pref * s * C[0] / (delta - E)
        if ctx.mode == LATTICE_SUM:
            eps, eta2, vol = ctx._tables
            raw = np.sqrt(eta2) * (self.A_E / (E - eps)
                                   + self.A_D / (delta - eps))
            norm = np.linalg.norm(raw)
            self.momentum_table = raw / norm
            self._vol_norm = norm      # sum convention on the grid
        else:
            s2 = pref**2 * (C[1]**2 * (-self_energy_derivative(ctx, E))
                            - 2.0 * s * C[0] * C[1] * cross_pole_21(ctx, E, delta)
                            + C[0]**2 * cross_pole_22(ctx, E, delta))
            self.momentum_table = None
            self._density_norm = math.sqrt(s2)

    def momentum(self, k):
        """Amplitude at momentum k (density convention off-lattice)."""
        eps = dispersion_eval(self.ctx.bath, k)
        raw = (self.A_E / (self.energy - eps)
               + self.A_D / (self.delta - eps))
        if self.momentum_table is not None:
            return raw / self._vol_norm
        return raw / self._density_norm

    def realspace_table(self):
        """(coords, amplitudes) with unit total weight; 1D baths only."""
        ctx = self.ctx
        if ctx.mode == LATTICE_SUM:
            if ctx.bath.dimension != 1:
                raise ConfigError("real-space profiles are 1D only")
            hE = lattice_pole_profile(ctx, self.energy)
            hD = lattice_pole_profile(ctx, self.delta)
            psi = (self.A_E * hE + self.A_D * hD) \
                * math.sqrt(ctx._tables[2]) / self._vol_norm
            return ctx.grid.site_coords, psi
        if ctx.bath.dimension != 1 or not ctx.bath.point_coupling:
            raise ConfigError("real-space profiles need the 1D point model")
        J = ctx.hopping
        xs = max(abs(pole_factor(self.energy, J)),
                 abs(pole_factor(self.delta, J)))
        half = 64
        if xs > 0.0:
            half = max(half, int(math.log(_TAIL_TOL) / math.log(xs)) + 1)
        half = min(half, _MAX_HALF_WIDTH)
        j = np.arange(-half, half + 1)
        psi = (self.A_E * pole_profile(self.energy, J, j)
               + self.A_D * pole_profile(self.delta, J, j)) \
            / self._density_norm
        return j, psi

    def localization_length(self):
        j, psi = self.realspace_table()
        w = np.abs(psi) ** 2
        return float(np.sqrt(np.sum(j.astype(float)**2 * w) / np.sum(w)))


@dataclass(frozen=True)
class ProjectedModeSolution:
    sector: str
    E1s: float
    C: tuple
    phi_A: ModeProfile
    det_residual: float
    null_residual: float


# ---------------------------------------------------------------------------
# assembled weak-coupling bound states

@dataclass(frozen=True)
class PerturbativeBoundState:
    regime: str
    N: int
    EN: float
    state_descriptor: str
    mode: object = None            # ProjectedModeSolution for PG/PE
    c_e_coeffs: object = None      # PG: callable k -> correction coefficient
    d_g: float = None              # PE: scalar weight of the impurity term
    jc_weights: tuple = None       # JC: (excited, ground) branch amplitudes
    E1: float = None               # PG: single-excitation energy


def perturbative_bound_state(ctx, imp, N, regime):
    """Energy and structure of the N-excitation bound state at weak coupling.

    PG stacks N-1 projected e-modes on the dressed single-excitation
    state; PE stacks N projected g-modes on the bare impurity ground
    state with a scalar impurity-flip admixture D_g.
    """
    if N < 1:
        raise ConfigError("need N >= 1")
    delta, omega = imp.delta, imp.omega
    W = ctx.bath.bandwidth
    if regime == "PG":
        if not delta < 0.0:
            raise RegimeError("PG regime needs delta < 0, got %g" % delta)
        mode = solve_projected_mode(ctx, imp, "e")
        e1 = solve_sebs(ctx, imp).E1
        EN = e1 + (N - 1) * mode.E1s
        vol = ctx._tables[2] if ctx.mode == LATTICE_SUM else None

        def c_e(k):
            eps = dispersion_eval(ctx.bath, k)
            eta = _coupling_value(ctx, k)
            val = omega * eta / (delta - eps)
            if vol is not None:
                val = val / math.sqrt(vol)
            return val

        desc = ("dressed single-excitation state with %d projected e-modes"
                " plus impurity-flip correction" % (N - 1))
        return PerturbativeBoundState(regime="PG", N=N, EN=float(EN),
                                      state_descriptor=desc, mode=mode,
                                      c_e_coeffs=c_e, E1=float(e1))
    if regime == "PE":
        if not delta > W:
            raise RegimeError("PE regime needs delta above the band, got %g"
                              % delta)
        mode = solve_projected_mode(ctx, imp, "g")
        EN = N * mode.E1s
        d_g = _impurity_weight(ctx, imp, mode, N)
        desc = ("%d projected g-modes on the bare ground state with scalar"
                " impurity admixture" % N)
        return PerturbativeBoundState(regime="PE", N=N, EN=float(EN),
                                      state_descriptor=desc, mode=mode,
                                      d_g=d_g)
    raise RegimeError("regime must be 'PG' or 'PE', got %r" % (regime,))


def _impurity_weight(ctx, imp, mode, N):
    """D_g = (Omega sqrt(N)/sqrt(V)) sum_k eta phi_A / (delta - eps)."""
    delta, omega = imp.delta, imp.omega
    if ctx.mode == LATTICE_SUM:
        eps, eta2, vol = ctx._tables
        total = np.sum(np.sqrt(eta2) * mode.phi_A.momentum_table
                       / (delta - eps))
        return float(omega * math.sqrt(N) * total / math.sqrt(vol))
    E = mode.E1s
    s = mode.phi_A.sector_sign
    C1, C2 = mode.C
    pref = 0.5 * omega**2
    j1 = (self_energy(ctx, E) - self_energy(ctx, delta)) / (delta - E)
    j2 = cross_pole_21(ctx, delta, E)
    s1 = pref * (C2 * j1 - s * C1 * j2)
    return float(omega * math.sqrt(N) * s1 / mode.phi_A._density_norm)


def jc_limit(imp, N):
    """Single-mode strong-coupling bound state, exact at J = 0.

    E_N = (Delta - sqrt(Delta^2 + 4 N Omega^2))/2, with the two-branch
    descriptor weights fixed by normalization of the (N-1, e)/(N, g)
    pair.
    """
    if N < 1:
        raise ConfigError("need N >= 1")
    delta, omega = imp.delta, imp.omega
    EN = 0.5 * (delta - math.sqrt(delta**2 + 4.0 * N * omega**2))
    norm2 = EN**2 * math.factorial(N - 1) \
        + N * omega**2 * math.factorial(N)
    if norm2 == 0.0:
        # omega = 0 and EN = 0 (delta >= 0): pure N-boson ground branch
        amp_e, amp_g = 0.0, -1.0
    else:
        root = math.sqrt(norm2)
        amp_e = abs(EN) * math.sqrt(math.factorial(N - 1)) / root
        amp_g = -math.sqrt(N) * omega * math.sqrt(math.factorial(N)) / root
    desc = ("photon-mode pair: |E_N| x (N-1 quanta, excited) "
            "- sqrt(N) Omega x (N quanta, ground), normalized")
    return PerturbativeBoundState(regime="JC", N=N, EN=float(EN),
                                  state_descriptor=desc,
                                  jc_weights=(float(amp_e), float(amp_g)))
