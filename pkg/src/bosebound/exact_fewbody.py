"""Exact one-, two-, and three-excitation bound states on a finite ring.

The quadratic part of the model is diagonalized once as an (L+1)-mode
arrowhead problem.  The hard-core constraint on the impurity mode acts
only through the pair amplitude at the impurity, V = U0 |bb><bb| in the
two-excitation space, so eigenstates in the N=2,3 sectors follow from
resolvent algebra on the dressed single-excitation spectrum:

  N=2:  |psi> ~ G0(E2)|bb>,  E2 the root of Pi_bb(E)=0 between the two
        lowest coupled pair poles.
  N=3:  |psi> ~ G0(E3)(b+)^2|chi>, with chi fixed by a small secular
        matrix M(E) over the coupled levels and E3 a root of det M = 0.

All pair propagators reduce, by partial fractions, to sums over the
coupled levels of the dressed impurity propagator g_b0, so amplitude
tables cost O(L^2) and individual N=3 amplitudes O(n_levels) after an
O(n_levels L^2) precompute.  Everything is validated against the sector
diagonalization oracle, which is the authoritative check on the algebra.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (ConfigError, DegenerateModeError, DimensionCapError,
                     NoBoundStateError, PoleHitError)
from .model import coupling_fourier, dispersion_eval

TWO_BODY_MAX_SITES = 401
THREE_BODY_MAX_SITES = 41
_WEIGHT_CUT = 1e-24      # relative u^2 below which a level is uncoupled
_POLE_TOL = 1e-12        # in units of J


@dataclass
class SingleParticleModes:
    """Eigenpairs of the one-excitation arrowhead Hamiltonian."""

    energies: np.ndarray            # (L+1,)
    impurity_weights: np.ndarray    # (L+1,) u_lambda
    bath_wavefunctions: np.ndarray  # (L+1, L) f_lambda(k)
    momenta: np.ndarray
    eps: np.ndarray
    coords: np.ndarray
    hopping: float
    omega: float
    delta: float

    @property
    def sites(self):
        return self.eps.shape[0]

    @property
    def weighted(self):
        """Mask of levels actually coupled to the impurity."""
        u2 = self.impurity_weights ** 2
        return u2 > _WEIGHT_CUT * u2.max()


def diagonalize_single(ctx, imp, grid):
    """Full eigendecomposition of the (L+1)x(L+1) one-excitation matrix."""
    bath = getattr(ctx, "bath", ctx)
    if grid.boundary != "periodic":
        raise ConfigError("momentum labels need a periodic grid")
    if bath.dimension != 1:
        raise ConfigError("few-body solvers are 1D")
    L = grid.sites
    k = grid.momenta
    eps = dispersion_eval(bath, k)
    eta = coupling_fourier(bath, grid, k)
    if np.max(np.abs(np.imag(eta))) > 1e-12:
        raise ConfigError("complex coupling profiles are not supported here")
    eta = np.real(eta)
    H = np.zeros((L + 1, L + 1))
    H[0, 0] = imp.delta
    H[0, 1:] = imp.omega * eta / np.sqrt(L)
    H[1:, 0] = H[0, 1:]
    H[np.arange(1, L + 1), np.arange(1, L + 1)] = eps
    w, v = np.linalg.eigh(H)
    return SingleParticleModes(
        energies=w, impurity_weights=v[0, :].copy(),
        bath_wavefunctions=v[1:, :].T.copy(),
        momenta=k, eps=eps, coords=grid.site_coords,
        hopping=bath.hopping, omega=imp.omega, delta=imp.delta)


def _weighted(modes):
    m = modes.weighted
    return modes.energies[m], modes.impurity_weights[m] ** 2


def g_b0(modes, w):
    """Dressed impurity propagator sum_l u_l^2 / (w - E_l)."""
    Ew, u2 = _weighted(modes)
    w = np.asarray(w, dtype=float)
    gap = np.min(np.abs(w[..., None] - Ew), axis=-1)
    if np.min(gap) < _POLE_TOL * modes.hopping:
        raise PoleHitError("g_b0 evaluated within 1e-12 J of a pole")
    out = np.sum(u2 / (w[..., None] - Ew), axis=-1)
    return out if out.ndim else float(out)


def g_b0_derivative(modes, w):
    Ew, u2 = _weighted(modes)
    w = np.asarray(w, dtype=float)
    gap = np.min(np.abs(w[..., None] - Ew), axis=-1)
    if np.min(gap) < _POLE_TOL * modes.hopping:
        raise PoleHitError("g_b0 derivative within 1e-12 J of a pole")
    out = -np.sum(u2 / (w[..., None] - Ew) ** 2, axis=-1)
    return out if out.ndim else float(out)


def _pair_tables(modes):
    Ew, u2 = _weighted(modes)
    P = (Ew[:, None] + Ew[None, :]).ravel()
    W = (u2[:, None] * u2[None, :]).ravel()
    return Ew, u2, P, W


def _g_raw(modes, w):
    """g_b0 without the pole guard; near-pole values come back huge."""
    Ew, u2 = _weighted(modes)
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum(u2 / (w[..., None] - Ew), axis=-1)
    return out if out.ndim else float(out)


def pi_bb(modes, w):
    """Pair bubble of the impurity mode, sum u^2 u'^2 / (w - E - E')."""
    _, _, P, W = _pair_tables(modes)
    w = np.asarray(w, dtype=float)
    out = np.sum(W / (w[..., None] - P), axis=-1)
    return out if out.ndim else float(out)


def _t2_factory(modes):
    _, _, P, W = _pair_tables(modes)

    def t2(w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            pib = np.sum(W / (w[..., None] - P), axis=-1)
            out = -1.0 / pib
        return out
    return t2


def _b_kernel(modes, eps_vals, y):
    """B(eps; y) = sum_l u^2 g_b0(y - E_l) / (y - eps - E_l)."""
    Ew, u2 = _weighted(modes)
    gy = g_b0(modes, y - Ew)                      # (n_w,)
    den = y - eps_vals[:, None] - Ew[None, :]     # (n_eps, n_w)
    return np.sum(u2 * gy / den, axis=1)


def _s_kernel(modes, y):
    """Pair amplitude table S(eps_p, eps_q; y) on the full momentum grid.

    S = sum_{ab} u_a^2 u_b^2 / [(E_a - eps_p)(E_b - eps_q)(y - E_a - E_b)]
    collapsed by partial fractions to table lookups:
      S (y - e_p - e_q) = B(e_p;y) + B(e_q;y) + g(e_p)g(e_q)
                          - g(e_p)g(y-e_p) - g(e_q)g(y-e_q).
    """
    eps = modes.eps
    B = _b_kernel(modes, eps, y)
    gk = g_b0(modes, eps)
    gyk = g_b0(modes, y - eps)
    num = (B[:, None] + B[None, :] + gk[:, None] * gk[None, :]
           - (gk * gyk)[:, None] - (gk * gyk)[None, :])
    return num / (y - eps[:, None] - eps[None, :])


def _phases(modes):
    return np.exp(1j * np.outer(modes.momenta, modes.coords))


def _realify(a, scale):
    if np.max(np.abs(a.imag)) > 1e-9 * max(scale, 1e-300):
        return a
    return a.real


@dataclass
class TwoBodySolution:
    """Two-excitation bound state from the pair-bubble root."""

    E2: float
    Z2B: float
    u_B2: float
    modes: SingleParticleModes
    residual: float
    _tables: dict = field(default_factory=dict, repr=False)

    def f1B2(self, k=None):
        """Impurity-plus-one-boson amplitudes over the momentum grid."""
        t = self._ensure_momentum()
        f1 = t["f1"]
        return f1 if k is None else f1[k]

    def f2B2(self, k1=None, k2=None):
        t = self._ensure_momentum()
        f2 = t["f2"]
        if k1 is None:
            return f2
        return f2[k1, k2]

    def _ensure_momentum(self):
        if "f1" in self._tables:
            return self._tables
        m = self.modes
        L = m.sites
        Ew, u2 = _weighted(m)
        c = m.omega / np.sqrt(L)
        gE = g_b0(m, self.E2 - Ew)
        gk = g_b0(m, m.eps)
        den = self.E2 - m.eps[:, None] - Ew[None, :]
        f1 = np.sqrt(2 * self.Z2B) * c * np.sum(
            u2 * (gE[None, :] - gk[:, None]) / den, axis=1)
        S = _s_kernel(m, self.E2)
        f2 = np.sqrt(self.Z2B / 2) * c ** 2 * S
        self._tables["f1"] = f1
        self._tables["f2"] = f2
        return self._tables

    def _ensure_realspace(self):
        if "f1r" in self._tables:
            return self._tables
        t = self._ensure_momentum()
        m = self.modes
        L = m.sites
        P = _phases(m)
        scale = np.max(np.abs(t["f1"])) + np.max(np.abs(t["f2"]))
        f1r = _realify(P.T @ t["f1"] / np.sqrt(L), scale)
        f2r = _realify(P.T @ t["f2"] @ P / L, scale)
        self._tables["f1r"] = f1r
        self._tables["f2r"] = f2r
        return self._tables

    def realspace_f1(self):
        return self._ensure_realspace()["f1r"]

    def realspace_f2(self):
        return self._ensure_realspace()["f2r"]

    def occupation_vector(self, basis):
        """Normalized amplitudes on a two-excitation sector basis."""
        t = self._ensure_realspace()
        f1r, f2r = t["f1r"], t["f2r"]
        v = np.zeros(basis.dimension)
        sg = basis.states_g
        j1, j2 = sg[:, 0], sg[:, 1]
        amp = f2r[j1, j2]
        v[:basis.dim_g] = np.where(j1 == j2, np.sqrt(2.0), 2.0) * amp
        v[basis.dim_g:] = f1r[basis.states_e[:, 0]]
        return v

    def norm_closure(self):
        """Sum of sector weights; exactly 1 for the normalized state."""
        t = self._ensure_momentum()
        return (self.u_B2 ** 2 + np.sum(np.abs(t["f1"]) ** 2)
                + 2 * np.sum(np.abs(t["f2"]) ** 2))


def solve_two_body(modes):
    """Root of the pair bubble between the two lowest coupled pair poles."""
    if modes.sites > TWO_BODY_MAX_SITES:
        raise DimensionCapError("two-body solver capped at L = %d"
                                % TWO_BODY_MAX_SITES)
    Ew, u2 = _weighted(modes)
    order = np.argsort(Ew)
    Ew = Ew[order]
    if Ew.size < 2:
        raise NoBoundStateError("fewer than two coupled levels: "
                                "the pair bubble has no zero")
    lo_pole = 2 * Ew[0]
    hi_pole = Ew[0] + Ew[1]
    scale = max(modes.hopping, abs(lo_pole), abs(hi_pole))
    f = lambda w: pi_bb(modes, w)
    delta = 1e-9 * scale
    for _ in range(40):
        lo, hi = lo_pole + delta, hi_pole - delta
        if lo < hi and f(lo) > 0 > f(hi):
            break
        delta *= 0.1
    else:
        raise NoBoundStateError("pair bubble does not change sign between "
                                "its two lowest poles")
    E2 = brentq(f, lo, hi, xtol=1e-300, rtol=8 * np.finfo(float).eps,
                maxiter=300)
    resid = abs(f(E2))
    _, _, P, W = _pair_tables(modes)
    Z2B = 1.0 / np.sum(W / (E2 - P) ** 2)
    u_B2 = np.sqrt(Z2B / 2) * pi_bb(modes, E2)
    return TwoBodySolution(E2=float(E2), Z2B=float(Z2B), u_B2=float(u_B2),
                           modes=modes, residual=float(resid))


@dataclass
class ThreeBodySolution:
    """Three-excitation bound state from the det M secular problem."""

    E3: float
    F_on_shell: np.ndarray
    modes: SingleParticleModes
    two_body: TwoBodySolution
    det_residual: float
    nullvector_residual: float
    _tables: dict = field(default_factory=dict, repr=False)

    # -- precomputed kernels -------------------------------------------
    def _ensure_kernels(self):
        if "g" in self._tables:
            return self._tables
        m = self.modes
        L = m.sites
        Ew, u2 = _weighted(m)
        t2 = _t2_factory(m)
        F = self.F_on_shell[m.weighted]
        g = u2 * t2(self.E3 - Ew) * F          # chi weights, one per level
        c = m.omega / np.sqrt(L)
        ys = self.E3 - Ew
        S3 = np.empty((L, L, Ew.size))
        for i, y in enumerate(ys):
            S3[:, :, i] = _s_kernel(m, y)
        A = u2[None, :] / (Ew[None, :] - m.eps[:, None])     # (L, n_w)
        Ag = g[None, :] / (Ew[None, :] - m.eps[:, None])
        GEE = g_b0(m, self.E3 - Ew[:, None] - Ew[None, :])
        self._tables.update(dict(g=g, Ew=Ew, u2=u2, c=c, S3=S3, A=A,
                                 Ag=Ag, GEE=GEE))
        return self._tables

    def _amp2_table(self):
        """<0| b a_{k2} a_{k1} |psi> over the full momentum grid."""
        if "amp2" in self._tables:
            return self._tables["amp2"]
        t = self._ensure_kernels()
        T1 = t["A"] @ t["GEE"] @ t["Ag"].T
        T5 = t["S3"] @ t["g"]
        amp2 = 2 * t["c"] ** 2 * (T1 + T1.T + T5)
        amp2 *= self._tables.get("scale", 1.0)
        self._tables["amp2"] = amp2
        return amp2

    def _amp3_slice(self, i3):
        """amp3(k1, k2, k3 = grid[i3]) as an L x L table, unnormalized."""
        t = self._ensure_kernels()
        m = self.modes
        g, Ew, S3, c = t["g"], t["Ew"], t["S3"], t["c"]
        wr = g / (Ew - m.eps[i3])                 # chi leg on k3
        D12 = S3 @ wr                             # D(k1,k2;k3)
        Ag = t["Ag"]
        D13 = S3[:, i3, :] @ Ag.T                 # D(k1,k3;k2), rows k1
        return (2 * c ** 3 * (D12 + D13 + D13.T)
                * self._tables.get("scale", 1.0))

    def f2B3(self, k1=None, k2=None):
        amp2 = self._amp2_table()
        f2 = amp2 / 2.0
        if k1 is None:
            return f2
        return f2[k1, k2]

    def f3B3(self, k1, k2, k3):
        """Single fully symmetric three-boson momentum amplitude."""
        a = self._amp3_slice(k3)[k1, k2]
        return a / 6.0

    # -- realspace ------------------------------------------------------
    def _ensure_realspace(self):
        if "f2r" in self._tables:
            return self._tables
        t = self._ensure_kernels()
        m = self.modes
        L = m.sites
        P = _phases(m)
        amp2 = self._amp2_table()
        scale = np.max(np.abs(amp2)) + 1e-300
        f2r = _realify(P.T @ (amp2 / 2.0) @ P / L, scale)
        # per-level FT tables for lazy three-boson amplitudes
        Ew = t["Ew"]
        rho = (P.T @ (1.0 / (Ew[None, :] - m.eps[:, None]))).T   # (n_w, L)
        ts = np.empty((Ew.size, L, L), dtype=complex)
        for i in range(Ew.size):
            ts[i] = P.T @ t["S3"][:, :, i] @ P
        self._tables["f2r"] = f2r
        self._tables["rho"] = rho
        self._tables["tsr"] = ts
        return self._tables

    def realspace_f2(self):
        return self._ensure_realspace()["f2r"]

    def realspace_f3(self, j1, j2, j3):
        """Three-boson site amplitude, lazily from per-level FT tables."""
        t = self._ensure_realspace()
        g, c = t["g"], t["c"]
        rho, ts = t["rho"], t["tsr"]
        L = self.modes.sites
        s = (np.sum(g * rho[:, j3] * ts[:, j1, j2])
             + np.sum(g * rho[:, j2] * ts[:, j1, j3])
             + np.sum(g * rho[:, j1] * ts[:, j2, j3]))
        amp = 2 * c ** 3 * s * self._tables.get("scale", 1.0)
        val = amp / 6.0 / L ** 1.5
        return float(val.real) if abs(val.imag) < 1e-9 * (abs(val) + 1e-300) \
            else val

    def normalize(self):
        """Fix the overall scale so the assembled state has unit norm."""
        if "scale" in self._tables:
            return self._tables["scale"]
        self._tables.pop("amp2", None)
        amp2 = self._amp2_table()
        total = 0.5 * np.sum(np.abs(amp2) ** 2)
        L = self.modes.sites
        for i3 in range(L):
            sl = self._amp3_slice(i3)
            total += np.sum(np.abs(sl) ** 2) / 6.0
        scale = 1.0 / np.sqrt(total)
        self._tables["scale"] = scale
        for key in ("amp2", "f2r", "rho", "tsr"):
            self._tables.pop(key, None)
        return scale

    def occupation_vector(self, basis):
        """Normalized amplitudes on a three-excitation sector basis."""
        self.normalize()
        t = self._ensure_realspace()
        g, c = t["g"], t["c"]
        rho, ts = t["rho"], t["tsr"]
        L = self.modes.sites
        sg = basis.states_g
        j1, j2, j3 = sg[:, 0], sg[:, 1], sg[:, 2]
        s = (np.einsum("w,wn,wn->n", g, rho[:, j3], ts[:, j1, j2])
             + np.einsum("w,wn,wn->n", g, rho[:, j2], ts[:, j1, j3])
             + np.einsum("w,wn,wn->n", g, rho[:, j1], ts[:, j2, j3]))
        psi3 = (2 * c ** 3 * self._tables["scale"] * s / 6.0) / L ** 1.5
        # multiplicity factor 3!/sqrt(prod n_j!) per occupation state
        mult = np.full(sg.shape[0], 6.0)
        pair12 = j1 == j2
        pair23 = j2 == j3
        triple = pair12 & pair23
        mult[pair12 | pair23] = 6.0 / np.sqrt(2.0)
        mult[triple] = 6.0 / np.sqrt(6.0)
        v = np.zeros(basis.dimension, dtype=complex)
        v[:basis.dim_g] = mult * psi3
        f2r = t["f2r"]
        se = basis.states_e
        i1, i2 = se[:, 0], se[:, 1]
        amp = f2r[i1, i2]
        v[basis.dim_g:] = np.where(i1 == i2, np.sqrt(2.0), 2.0) * amp
        if np.max(np.abs(v.imag)) < 1e-9:
            v = v.real
        return v


def _det_m(modes, t2, E):
    Ew, u2 = _weighted(modes)
    G = _g_raw(modes, E - Ew[:, None] - Ew[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        M = 2 * u2[None, :] * G * t2(E - Ew)[None, :] - np.eye(Ew.size)
    return M


def _slogdet_m(modes, t2, E):
    M = _det_m(modes, t2, E)
    if not np.all(np.isfinite(M)):
        return 0.0, np.inf
    sign, logabs = np.linalg.slogdet(M)
    return sign, logabs


_ASSEMBLY_TOL = 1e-4


def _pair_sector_weight(sol):
    """Assembled two-boson amplitude against its unsymmetrized parts.

    At strong coupling det M grows a ladder of zeros between the pair
    resonance poles (two deep quasiparticles sharing one two-level
    impurity).  Those nullvectors assemble to amplitudes that cancel
    under symmetrization, so no eigenstate exists there; a genuine root
    keeps this ratio at order one.
    """
    t = sol._ensure_kernels()
    T1 = t["A"] @ t["GEE"] @ t["Ag"].T
    T5 = t["S3"] @ t["g"]
    comp = np.linalg.norm(T1) + np.linalg.norm(T5)
    if not np.isfinite(comp) or comp == 0.0:
        return 0.0
    return float(np.linalg.norm(T1 + T1.T + T5) / comp)


def solve_three_body(modes, scan_points=600):
    """Lowest verified root of det M(E) = 0 below the pair threshold."""
    if modes.sites > THREE_BODY_MAX_SITES:
        raise DimensionCapError("three-body solver capped at L = %d"
                                % THREE_BODY_MAX_SITES)
    two = solve_two_body(modes)
    Ew, u2 = _weighted(modes)
    E0 = np.min(Ew)
    t2 = _t2_factory(modes)
    scale = max(modes.hopping, abs(E0))
    lo = 3 * E0 + 1e-7 * scale
    hi = two.E2 - 1e-7 * scale
    if not lo < hi:
        raise NoBoundStateError("empty three-body search window")

    grid = np.linspace(lo, hi, scan_points)
    signs = np.empty(scan_points)
    logs = np.empty(scan_points)
    for i, E in enumerate(grid):
        s, la = _slogdet_m(modes, t2, E)
        signs[i] = s
        logs[i] = la
    roots = []
    for i in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
        a, b = grid[i], grid[i + 1]
        sa, la = signs[i], logs[i]
        for _ in range(200):
            mid = 0.5 * (a + b)
            sm, lm = _slogdet_m(modes, t2, mid)
            if sm == sa:
                a = mid
            else:
                b = mid
            if b - a < 1e-14 * scale:
                break
        mid = 0.5 * (a + b)
        _, lmid = _slogdet_m(modes, t2, mid)
        edge = max(logs[i], logs[i + 1])
        if lmid < edge - 8:          # det collapsed: a root, not a pole
            roots.append(mid)
    if not roots:
        raise NoBoundStateError("det M has no sign-change root in the "
                                "three-body window")

    passed = False
    for E3 in sorted(roots):
        M = _det_m(modes, t2, E3)
        _, sv, vt = np.linalg.svd(M)
        Fw = vt[-1]
        resid = float(np.linalg.norm(M @ Fw))
        if resid > 1e-8 * max(1.0, np.linalg.norm(M)):
            continue
        passed = True
        if Fw[np.argmax(np.abs(Fw))] < 0:
            Fw = -Fw
        F = np.zeros(modes.energies.size)
        F[modes.weighted] = Fw
        sg, la = _slogdet_m(modes, t2, E3)
        det_rel = float(np.exp(la - np.max(logs)))
        sol = ThreeBodySolution(E3=float(E3), F_on_shell=F, modes=modes,
                                two_body=two, det_residual=det_rel,
                                nullvector_residual=resid)
        try:
            weight = _pair_sector_weight(sol)
        except PoleHitError:
            # bisection converged onto a kernel resonance, not a root;
            # the midpoint log-det is LU noise there
            continue
        if weight < _ASSEMBLY_TOL:
            continue
        if sv.size > 1 and sv[-2] < 1e-8 * sv[0]:
            raise DegenerateModeError("nullspace of M is more than "
                                      "one-dimensional")
        return sol
    if passed:
        raise NoBoundStateError("every det M root assembles to a vanishing "
                                "symmetrized state")
    raise NoBoundStateError("no det M root passed the nullvector check")


def realspace_wavefunction(sol, sites):
    """Site-space amplitudes at the requested tuples.

    Tuple length counts the bath bosons; the impurity carries the rest of
    the excitation number.  Site labels are lattice coordinates (centered
    at the coupling site).
    """
    m = sol.modes
    off = m.sites // 2
    out = []
    if isinstance(sol, TwoBodySolution):
        f1r = sol.realspace_f1()
        f2r = sol.realspace_f2()
        for tup in sites:
            if len(tup) == 1:
                out.append(f1r[tup[0] + off])
            elif len(tup) == 2:
                out.append(f2r[tup[0] + off, tup[1] + off])
            else:
                raise ConfigError("two-excitation states take 1- or "
                                  "2-site tuples")
    elif isinstance(sol, ThreeBodySolution):
        sol.normalize()
        for tup in sites:
            if len(tup) == 2:
                f2r = sol.realspace_f2()
                out.append(f2r[tup[0] + off, tup[1] + off])
            elif len(tup) == 3:
                out.append(sol.realspace_f3(tup[0] + off, tup[1] + off,
                                            tup[2] + off))
            else:
                raise ConfigError("three-excitation states take 2- or "
                                  "3-site tuples")
    else:
        raise ConfigError("unknown solution type")
    return np.asarray(out)
