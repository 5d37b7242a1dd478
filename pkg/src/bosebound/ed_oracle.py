"""Brute-force diagonalization in a fixed excitation sector.

The conserved total N splits the Hilbert space into a g block (N bosons)
and an e block (N-1 bosons); the two-level impurity is the hard-core
mode, never holding more than one excitation.  Basis states are sorted
site tuples; a combinatorial (colex) rank function replaces hashing so
every lookup is a vectorized table read.

H = J*(2*n_tot - hop) + delta*P_e + omega*coupling, with the three
parameter-independent sparse pieces built once per (L, N, boundary) and
cached, so parameter sweeps pay only for the eigensolve.  The bath term
uses the band-minimum-zero convention eps_k = 2J(1 - cos k); with open
boundaries the same 2J offset per boson is kept so energies stay
comparable.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from .errors import ConfigError, DimensionCapError

DIM_CAP = 5_000_000
_CACHE = {}
_CACHE_SLOTS = 4


def _binom_table(max_m, max_t):
    t = np.zeros((max_m + 1, max_t + 1), dtype=np.int64)
    t[:, 0] = 1
    for m in range(1, max_m + 1):
        for j in range(1, max_t + 1):
            t[m, j] = t[m - 1, j - 1] + t[m - 1, j]
    return t


def _rank_rows(states, binom):
    """Colex rank of each sorted row: sum_t C(s_t + t, t+1)."""
    n = states.shape[1]
    if n == 0:
        return np.zeros(states.shape[0], dtype=np.int64)
    m = states + np.arange(n, dtype=states.dtype)
    r = np.zeros(states.shape[0], dtype=np.int64)
    for t in range(n):
        r += binom[m[:, t], t + 1]
    return r


def _enumerate_sector(L, n):
    """All sorted n-tuples over L sites, ordered by colex rank.

    Built iteratively: in colex order the rows whose last entry is <= v
    are exactly the leading C(v+k-1, k-1) rows, so each extension step
    is a stack of table prefixes.
    """
    if n == 0:
        return np.zeros((1, 0), dtype=np.int32)
    binom = _binom_table(L + n, n)
    T = np.arange(L, dtype=np.int32).reshape(-1, 1)
    for k in range(2, n + 1):
        blocks = []
        for v in range(L):
            rows = int(binom[v + k - 1, k - 1])
            blocks.append(np.hstack(
                [T[:rows], np.full((rows, 1), v, dtype=np.int32)]))
        T = np.vstack(blocks)
    return T


@dataclass
class SectorBasis:
    """Occupation enumeration for the g (N bosons) and e (N-1) blocks."""

    N: int
    L: int
    boundary: str
    states_g: np.ndarray
    states_e: np.ndarray
    binom: np.ndarray

    @property
    def dim_g(self):
        return self.states_g.shape[0]

    @property
    def dim_e(self):
        return self.states_e.shape[0]

    @property
    def dimension(self):
        return self.dim_g + self.dim_e

    def rank_g(self, rows):
        return _rank_rows(rows, self.binom)

    def rank_e(self, rows):
        return _rank_rows(rows, self.binom)


def build_sector_basis(grid, N, cap=DIM_CAP):
    L = grid.sites
    binom = _binom_table(L + N + 1, N)
    dim = int(binom[L + N - 1, N] + (binom[L + N - 2, N - 1] if N >= 1 else 0))
    if dim > cap:
        raise DimensionCapError("sector dimension %d exceeds cap %d"
                                % (dim, cap))
    return SectorBasis(N=N, L=L, boundary=grid.boundary,
                       states_g=_enumerate_sector(L, N),
                       states_e=_enumerate_sector(L, N - 1),
                       binom=binom)


def _occupancy_of(states, site):
    """Per-row count of a given site value (site may be a scalar or column)."""
    if states.shape[1] == 0:
        return np.zeros(states.shape[0], dtype=np.int64)
    return np.sum(states == np.asarray(site).reshape(-1, 1), axis=1)


def _hop_block(states, L, boundary, binom):
    """COO pieces of sum_<jm> (a_j^dag a_m + h.c.) within one sector."""
    dim, n = states.shape
    rows, cols, vals = [], [], []
    if n == 0 or dim == 0:
        return rows, cols, vals
    for t in range(n):
        first = np.ones(dim, dtype=bool) if t == 0 \
            else states[:, t] != states[:, t - 1]
        src = states[first]
        idx = np.nonzero(first)[0]
        j = src[:, t].astype(np.int64)
        nj = _occupancy_of(src, j)
        for step in (1, -1):
            j2 = j + step
            if boundary == "periodic":
                j2 = np.mod(j2, L)
                keep = np.ones(j2.shape, dtype=bool)
            else:
                keep = (j2 >= 0) & (j2 < L)
            if not np.any(keep):
                continue
            sub = src[keep]
            n2 = _occupancy_of(sub, j2[keep])
            amp = np.sqrt(nj[keep] * (n2 + 1.0))
            moved = sub.copy()
            moved[:, t] = j2[keep]
            moved = np.sort(moved, axis=1)
            rows.append(idx[keep])
            cols.append(_rank_rows(moved, binom))
            vals.append(amp)
    return rows, cols, vals


def _build_pieces(grid, N, cap):
    """Parameter-independent sparse pieces for one (L, N, boundary)."""
    key = (grid.sites, N, grid.boundary, cap)
    if key in _CACHE:
        return _CACHE[key]
    basis = build_sector_basis(grid, N, cap)
    L, binom = basis.L, basis.binom
    dg, de, dim = basis.dim_g, basis.dim_e, basis.dimension

    rows, cols, vals = _hop_block(basis.states_g, L, grid.boundary, binom)
    er, ec, ev = _hop_block(basis.states_e, L, grid.boundary, binom)
    rows += [r + dg for r in er]
    cols += [c + dg for c in ec]
    vals += ev
    if rows:
        hop = sparse.coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim)).tocsr()
    else:
        hop = sparse.csr_matrix((dim, dim))

    # coupling: |e, m> <-> |g, m + boson at the center site>
    c0 = L // 2
    m = basis.states_e
    occ0 = _occupancy_of(m, np.full(basis.dim_e, c0))
    target = np.sort(np.hstack([m, np.full((de, 1), c0, dtype=m.dtype)]),
                     axis=1)
    gcols = basis.rank_g(target)
    amp = np.sqrt(occ0 + 1.0)
    erow = dg + np.arange(de)
    coup = sparse.coo_matrix(
        (np.concatenate([amp, amp]),
         (np.concatenate([erow, gcols]), np.concatenate([gcols, erow]))),
        shape=(dim, dim)).tocsr()

    nb = np.concatenate([np.full(dg, N, dtype=float),
                         np.full(de, N - 1, dtype=float)])
    pe = np.concatenate([np.zeros(dg), np.ones(de)])

    pieces = (basis, hop, coup, nb, pe)
    _CACHE[key] = pieces
    while len(_CACHE) > _CACHE_SLOTS:
        _CACHE.pop(next(iter(_CACHE)))
    return pieces


def _bath_of(ctx_or_bath):
    return getattr(ctx_or_bath, "bath", ctx_or_bath)


def build_sector_hamiltonian(ctx, imp, grid, N, cap=DIM_CAP):
    """Sparse symmetric H in the total-N sector."""
    bath = _bath_of(ctx)
    if bath.dispersion != "tight_binding" or bath.dimension != 1:
        raise ConfigError("the sector oracle covers the 1D TB bath")
    if not bath.point_coupling:
        raise ConfigError("the sector oracle assumes the point profile")
    if N < 1:
        raise ConfigError("need N >= 1")
    basis, hop, coup, nb, pe = _build_pieces(grid, N, cap)
    J = bath.hopping
    H = (-J) * hop + imp.omega * coup
    H = H + sparse.diags(2.0 * J * nb + imp.delta * pe)
    return H.tocsr(), basis


@dataclass
class GroundStateRecord:
    """Lowest eigenpair of one sector plus derived observables."""

    energy: float
    vector: np.ndarray
    basis: SectorBasis
    density_g: np.ndarray     # per site, coordinate order
    density_e: np.ndarray
    pop_g: float
    pop_e: float
    residual: float
    correlation: np.ndarray = None

    @property
    def density_total(self):
        return self.density_g + self.density_e


def _sector_density(states, weights, L):
    dens = np.zeros(L)
    if states.shape[1]:
        np.add.at(dens, states.ravel(),
                  np.repeat(weights, states.shape[1]))
    return dens


def ground_state(ctx, imp, grid, N, cap=DIM_CAP, v0=None, tol=1e-11,
                 with_correlation=False):
    """Lowest eigenpair via Lanczos, with densities (and optionally G)."""
    H, basis = build_sector_hamiltonian(ctx, imp, grid, N, cap)
    dim = basis.dimension
    if v0 is None:
        v0 = np.full(dim, 1.0 / np.sqrt(dim))
    if dim <= 2:
        w, v = np.linalg.eigh(H.toarray())
        E, vec = float(w[0]), v[:, 0]
    else:
        w, v = eigsh(H, k=1, which="SA", v0=v0, tol=tol, maxiter=50 * dim)
        E, vec = float(w[0]), v[:, 0]
    hnorm = abs(H).dot(np.ones(dim)).max()     # Gershgorin-style bound
    resid = float(np.linalg.norm(H @ vec - E * vec))
    if resid > 1e-10 * hnorm:
        w, v = eigsh(H, k=1, which="SA", v0=vec, tol=0, maxiter=100 * dim)
        E, vec = float(w[0]), v[:, 0]
        resid = float(np.linalg.norm(H @ vec - E * vec))

    wg = vec[:basis.dim_g] ** 2
    we = vec[basis.dim_g:] ** 2
    rec = GroundStateRecord(
        energy=E, vector=vec, basis=basis,
        density_g=_sector_density(basis.states_g, wg, basis.L),
        density_e=_sector_density(basis.states_e, we, basis.L),
        pop_g=float(wg.sum()), pop_e=float(we.sum()),
        residual=resid)
    if with_correlation:
        rec.correlation = _correlation_matrix(rec)
    return rec


def _moved_rank_cols(states, t, j, binom):
    moved = states.copy()
    moved[:, t] = j
    return _rank_rows(np.sort(moved, axis=1), binom)


def _correlation_matrix(rec):
    """G with index 0 the impurity hard-core mode, then the L bath sites."""
    basis = rec.basis
    L, binom = basis.L, basis.binom
    vg = rec.vector[:basis.dim_g]
    ve = rec.vector[basis.dim_g:]
    G = np.zeros((L + 1, L + 1))
    G[0, 0] = rec.pop_e
    dens = rec.density_total
    G[np.arange(1, L + 1), np.arange(1, L + 1)] = dens

    # impurity-bath row: <b0^dag a_j> couples e states to g partners
    if basis.dim_e:
        me = basis.states_e
        for j in range(L):
            part = np.sort(np.hstack([me, np.full((basis.dim_e, 1), j,
                                                  dtype=me.dtype)]), axis=1)
            occ = _occupancy_of(me, np.full(basis.dim_e, j))
            val = float(np.sum(ve * np.sqrt(occ + 1.0)
                               * vg[_rank_rows(part, binom)]))
            G[0, 1 + j] = val
            G[1 + j, 0] = val

    # bath-bath off-diagonals, both sectors
    for states, v in ((basis.states_g, vg), (basis.states_e, ve)):
        dim, n = states.shape
        if n == 0 or dim == 0:
            continue
        for t in range(n):
            first = np.ones(dim, dtype=bool) if t == 0 \
                else states[:, t] != states[:, t - 1]
            src = states[first]
            vv = v[first]
            m_site = src[:, t].astype(np.int64)
            nm = _occupancy_of(src, m_site)
            for j in range(L):
                keep = m_site != j
                if not np.any(keep):
                    continue
                sub = src[keep]
                nj = _occupancy_of(sub, np.full(sub.shape[0], j))
                amp = np.sqrt(nm[keep] * (nj + 1.0))
                cols = _moved_rank_cols(sub, t, j, binom)
                # repeated column indices must accumulate, not overwrite
                np.add.at(G[1 + j], 1 + m_site[keep],
                          vv[keep] * amp * v[cols])
    return G


def correlation_spectrum(rec):
    """Eigenvalues of G sorted descending; they sum to N."""
    G = rec.correlation
    if G is None:
        G = _correlation_matrix(rec)
        rec.correlation = G
    return np.sort(np.linalg.eigvalsh(G))[::-1]


def size_convergence(ctx, imp, N, sizes, boundary="periodic"):
    """E_N over growing L; successive differences should shrink."""
    from .model import LatticeGrid
    energies = []
    for L in sizes:
        rec = ground_state(ctx, imp, LatticeGrid(L, boundary), N)
        energies.append(rec.energy)
    return np.asarray(energies)
