"""Row transfer matrix of the dilute loop model, acting on link patterns.

A row of L vertices is applied as a single left-to-right sweep.  The sweep
state is a link pattern over L+2 slots packed in one integer: slot 0 holds
the pending end of a strand crossing the seam edge of the row (if any),
slots 1..L hold already-emitted top points and not-yet-consumed bottom
points, and the slot after the current site holds the strand end on the
horizontal edge.  Each site consumes (horizontal, bottom) occupancies and
emits (top, new horizontal), multiplying one of the nine vertex weights;
when the two ends of a single arc are joined, a loop closes and contributes
a factor n (contractible) or n_nc (non-contractible, odd number of seam
crossings).  Both states of the seam edge are swept and summed.

The sweep is compiled once per (width, sector) into a chain of sparse
gather-scatter stages; a transfer-matrix application is then a handful of
numpy bincounts with per-stage weight lookups, so one compiled chain serves
every choice of vertex weights and loop fugacities.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.sparse.linalg import LinearOperator, eigs

from .linkstate import CLOSE, OPEN, SectorBasis, enumerate_sector
from .weights import VertexWeights

__all__ = [
    "RowOperator",
    "Eigenpacket",
    "apply_row",
    "dense_matrix",
    "leading_eigenvalues",
    "free_energy_series",
]


@njit(cache=True)
def _partner(code, pos, nslots):
    """Slot of the bracket matched (cyclically) with the bracket at pos."""
    stack = np.empty(nslots, np.int64)
    top = 0
    part = np.full(nslots, -1, np.int64)
    dang = np.empty(nslots, np.int64)
    nd = 0
    for j in range(nslots):
        v = (code >> (4 * j)) & 0xF
        if v == 2:  # OPEN
            stack[top] = j
            top += 1
        elif v == 3:  # CLOSE
            if top > 0:
                top -= 1
                o = stack[top]
                part[o] = j
                part[j] = o
            else:
                dang[nd] = j
                nd += 1
    for t in range(nd):
        o = stack[top - 1 - t]
        c = dang[t]
        part[o] = c
        part[c] = o
    return part[pos]


@njit(cache=True)
def _join(code, a, b, nslots, wrap):
    """Connect the strand ends at slots a and b.

    Returns (valid, new_code, closure) with closure 0: none, 1: contractible
    loop, 2: non-contractible loop.  Joining two legs would contract the
    through-line pair and is dropped (valid=False): only the leg-conserving
    diagonal block of the transfer matrix is represented.
    """
    va = (code >> (4 * a)) & 0xF
    vb = (code >> (4 * b)) & 0xF
    cleared = code & ~((np.int64(0xF) << (4 * a)) | (np.int64(0xF) << (4 * b)))
    if va == 1 and vb == 1:  # LEG + LEG
        return False, np.int64(0), 0
    if va == 1 or vb == 1:
        bpos = b if va == 1 else a
        p = _partner(code, bpos, nslots)
        newc = (cleared & ~(np.int64(0xF) << (4 * p))) | (np.int64(1) << (4 * p))
        return True, newc, 0
    pa = _partner(code, a, nslots)
    if pa == b:  # both ends of one arc: a loop closes
        lo = a if a < b else b
        vlo = (code >> (4 * lo)) & 0xF
        par = 0 if vlo == 2 else 1
        if wrap:
            par ^= 1
        return True, cleared, 1 if par == 0 else 2
    pb = _partner(code, b, nslots)
    ea = 0 if ((code >> (4 * min(a, pa))) & 0xF) == 2 else 1
    eb = 0 if ((code >> (4 * min(b, pb))) & 0xF) == 2 else 1
    par = ea ^ eb
    if wrap:
        par ^= 1
    lo, hi = (pa, pb) if pa < pb else (pb, pa)
    newc = cleared & ~((np.int64(0xF) << (4 * lo)) | (np.int64(0xF) << (4 * hi)))
    if par == 0:
        newc |= (np.int64(2) << (4 * lo)) | (np.int64(3) << (4 * hi))
    else:
        newc |= (np.int64(3) << (4 * lo)) | (np.int64(2) << (4 * hi))
    return True, newc, 0


@njit(cache=True)
def _step_kernel(codes, i, L):
    """All single-site transitions at site i (1-based); h at slot i, bottom at i+1."""
    n = codes.shape[0]
    src = np.empty(3 * n, np.int64)
    out = np.empty(3 * n, np.int64)
    wc = np.empty(3 * n, np.uint8)
    k = 0
    nslots = L + 2
    hmask = np.int64(0xF) << (4 * i)
    bmask = np.int64(0xF) << (4 * (i + 1))
    for s in range(n):
        c = codes[s]
        hv = (c >> (4 * i)) & 0xF
        bv = (c >> (4 * (i + 1))) & 0xF
        base = c & ~(hmask | bmask)
        if hv == 0 and bv == 0:
            src[k] = s; out[k] = c; wc[k] = 1; k += 1  # empty site
            newc = base | (np.int64(2) << (4 * i)) | (np.int64(3) << (4 * (i + 1)))
            src[k] = s; out[k] = newc; wc[k] = 5; k += 1  # corner {N,E}: new arc
        elif hv == 0:
            src[k] = s; out[k] = c; wc[k] = 2; k += 1  # corner {S,E}: bottom turns east
            src[k] = s; out[k] = base | (np.int64(bv) << (4 * i)); wc[k] = 7; k += 1  # straight {N,S}
        elif bv == 0:
            src[k] = s; out[k] = c; wc[k] = 3; k += 1  # corner {N,W}: h turns up
            src[k] = s; out[k] = base | (np.int64(hv) << (4 * (i + 1))); wc[k] = 6; k += 1  # straight {E,W}
        else:
            src[k] = s; out[k] = c; wc[k] = 8; k += 1  # contact, both strands pass east/up
            ok, newc, cl = _join(c, i, i + 1, nslots, False)
            if ok:
                src[k] = s; out[k] = newc; wc[k] = 4 | (cl << 4); k += 1  # corner {S,W}: join
                newc9 = newc | (np.int64(2) << (4 * i)) | (np.int64(3) << (4 * (i + 1)))
                src[k] = s; out[k] = newc9; wc[k] = 9 | (cl << 4); k += 1  # contact, join + new arc
    return src[:k], out[:k], wc[:k]


@njit(cache=True)
def _canonical_disk(code, L):
    """Rewrite every arc as a direct (non-seam) pair: the pairing-only state."""
    stack = np.empty(L, np.int64)
    top = 0
    dang = np.empty(L, np.int64)
    nd = 0
    newc = code
    for j in range(L):
        v = (code >> (4 * j)) & 0xF
        if v == 2:
            stack[top] = j
            top += 1
        elif v == 3:
            if top > 0:
                top -= 1
            else:
                dang[nd] = j
                nd += 1
    for t in range(nd):
        o = stack[top - 1 - t]
        c = dang[t]
        lo, hi = (o, c) if o < c else (c, o)
        newc = newc & ~((np.int64(0xF) << (4 * lo)) | (np.int64(0xF) << (4 * hi)))
        newc |= (np.int64(2) << (4 * lo)) | (np.int64(3) << (4 * hi))
    return newc


@njit(cache=True)
def _wrap_kernel(codes, L, disk):
    """Close the row: reconcile the pending seam end with the final horizontal end."""
    n = codes.shape[0]
    src = np.empty(n, np.int64)
    out = np.empty(n, np.int64)
    wc = np.empty(n, np.uint8)
    k = 0
    nslots = L + 2
    hslot = L + 1
    mask = (np.int64(1) << (4 * L)) - 1
    for s in range(n):
        c = codes[s]
        sv = c & 0xF
        hv = (c >> (4 * hslot)) & 0xF
        cl = 0
        if sv == 0:
            if hv != 0:
                continue  # strand exits a seam edge declared empty
            newc = c
        else:
            if hv == 0:
                continue  # seam edge declared occupied but nothing arrives
            ok, newc, cl = _join(c, 0, hslot, nslots, True)
            if not ok:
                continue
        patt = (newc >> 4) & mask
        if disk:
            patt = _canonical_disk(patt, L)
        src[k] = s; out[k] = patt; wc[k] = np.uint8(cl << 4); k += 1
    return src[:k], out[:k], wc[:k]


class _RowFactors:
    """Compiled sweep: a chain of (src, dst, wcode) gather-scatter stages."""

    def __init__(self, basis: SectorBasis):
        L = basis.L
        self.basis = basis
        self.dim = basis.dim
        disk = basis.ell == 0 and not basis.annular
        codes = basis.codes.astype(np.int64)
        # stage 0: inject each pattern with both seam-edge states; before the
        # first site the layout is [S, h, bot_1..bot_L], so patterns shift up
        # two slots and an occupied seam edge is an arc between S and h
        empty_seam = codes << 8
        occ_seam = (codes << 8) | OPEN | (np.int64(CLOSE) << 4)
        init_src = np.concatenate([np.arange(self.dim), np.arange(self.dim)])
        init_out = np.concatenate([empty_seam, occ_seam])
        lev, inv = np.unique(init_out, return_inverse=True)
        stages = [(init_src.astype(np.int32), inv.astype(np.int32),
                   np.zeros(init_src.shape[0], np.uint8), lev.shape[0])]
        for i in range(1, L + 1):
            src, out, wcode = _step_kernel(lev, i, L)
            lev, inv = np.unique(out, return_inverse=True)
            stages.append((src.astype(np.int32), inv.astype(np.int32), wcode, lev.shape[0]))
        src, out, wcode = _wrap_kernel(lev, L, disk)
        dst = np.searchsorted(basis.codes, out.astype(np.uint64))
        if not np.all(basis.codes[dst] == out.astype(np.uint64)):
            raise AssertionError("row sweep left the sector basis")
        stages.append((src.astype(np.int32), dst.astype(np.int32), wcode, self.dim))
        self.stages = self._prune(stages)
        self.nnz = int(sum(st[0].shape[0] for st in self.stages))

    @staticmethod
    def _prune(stages):
        """Drop intermediate states that cannot reach a valid row closure."""
        nstages = len(stages)
        keeps = [None] * (nstages + 1)
        keeps[0] = None  # input basis: keep all
        keeps[nstages] = None  # output basis: keep all
        for k in range(nstages - 1, 0, -1):
            src, dst, wc, dim_out = stages[k]
            if keeps[k + 1] is None:
                mask = np.ones(src.shape[0], bool)
            else:
                mask = keeps[k + 1][dst]
            src, dst, wc = src[mask], dst[mask], wc[mask]
            dim_in = stages[k - 1][3]
            keep_in = np.zeros(dim_in, bool)
            keep_in[src] = True
            keeps[k] = keep_in
            stages[k] = (src, dst, wc, dim_out)
        # renumber pruned intermediate spaces
        for k in range(nstages):
            src, dst, wc, dim_out = stages[k]
            if keeps[k] is not None:
                remap = np.cumsum(keeps[k]).astype(np.int32) - 1
                src = remap[src]
            if k + 1 <= nstages - 1 and keeps[k + 1] is not None:
                keep_out = keeps[k + 1]
                if k == 0:
                    mask = keep_out[dst]
                    src, dst, wc = src[mask], dst[mask], wc[mask]
                remap = np.cumsum(keep_out).astype(np.int32) - 1
                dst = remap[dst]
                dim_out = int(keep_out.sum())
            stages[k] = (src, dst, wc, dim_out)
        return stages

    def weight_table(self, weights: VertexWeights, n_nc: float):
        wtab = np.zeros(3 * 16, dtype=float)
        fac = (1.0, weights.n, float(n_nc))
        for cl in range(3):
            wtab[cl << 4] = fac[cl]
            for t in range(1, 10):
                wtab[t | (cl << 4)] = weights.rho[t - 1] * fac[cl]
        return wtab

    def apply(self, wtab, v):
        cur = np.asarray(v, dtype=float)
        if cur.shape != (self.dim,):
            raise ValueError(f"vector length {cur.shape} does not match dim {self.dim}")
        for src, dst, wcode, dim_out in self.stages:
            amp = wtab[wcode] * cur[src]
            cur = np.bincount(dst, weights=amp, minlength=dim_out)
        if not np.all(np.isfinite(cur)):
            raise FloatingPointError("non-finite amplitude during row application")
        return cur


@lru_cache(maxsize=64)
def _factors_for(L, ell, annular):
    return _RowFactors(enumerate_sector(L, ell, annular=annular))


@dataclass
class RowOperator:
    """The loop-model row transfer matrix restricted to one leg sector.

    n_nc is the fugacity of non-contractible loops.  It only plays a role
    for ell = 0; with legs present a closed loop can never wind around the
    cylinder.  A disk basis is valid only when n_nc equals the contractible
    weight n; when they differ the seam-flagged annular basis is used.
    """

    weights: VertexWeights
    L: int
    ell: int
    n_nc: float | None = None
    annular: bool | None = None

    def __post_init__(self):
        if self.n_nc is None:
            self.n_nc = self.weights.n
        if self.ell > 0:
            self.n_nc = self.weights.n
            self.annular = False
        elif self.annular is None:
            self.annular = abs(self.n_nc - self.weights.n) > 1e-13
        if self.ell == 0 and not self.annular and abs(self.n_nc - self.weights.n) > 1e-13:
            raise ValueError(
                "disk basis cannot weight non-contractible loops differently; use annular=True"
            )
        self._factors = _factors_for(self.L, self.ell, bool(self.annular))
        self._wtab = self._factors.weight_table(self.weights, self.n_nc)

    @property
    def basis(self):
        return self._factors.basis

    @property
    def dim(self):
        return self._factors.dim

    def matvec(self, v):
        return self._factors.apply(self._wtab, v)

    def aslinearoperator(self):
        return LinearOperator((self.dim, self.dim), matvec=self.matvec, dtype=float)


def apply_row(v, op: RowOperator):
    """v' = T v for the row transfer matrix T."""
    return op.matvec(v)


def dense_matrix(op: RowOperator):
    """Materialize T column by column (small sectors only)."""
    if op.dim > 4096:
        raise ValueError("dense materialization restricted to dim <= 4096")
    T = np.empty((op.dim, op.dim), dtype=float)
    e = np.zeros(op.dim)
    for i in range(op.dim):
        e[i] = 1.0
        T[:, i] = op.matvec(e)
        e[i] = 0.0
    return T


@dataclass
class Eigenpacket:
    """Sorted leading eigenvalues of one sector, with solver diagnostics."""

    L: int
    ell: int
    n_nc: float
    values: np.ndarray  # complex, sorted by descending real part
    residuals: np.ndarray
    converged: bool
    complex_leading: bool

    @property
    def leading(self):
        return self.values[0]

    def label(self, rank):
        """(m, j) label by rank within the sector (m = ell)."""
        return (self.ell, rank)


_DENSE_CUTOFF = 600


def leading_eigenvalues(weights, L, ell, n_nc=None, k=1, tol=1e-10, maxiter=None, seed=7):
    """Top-k eigenvalues (by real part) of the sector transfer matrix.

    Small sectors are diagonalized densely; larger ones use implicitly
    restarted Arnoldi on the matrix-free row application, deterministically
    seeded.  Residuals ||T v - lambda v|| / |lambda| are reported for every
    returned value.
    """
    op = RowOperator(weights=weights, L=L, ell=ell, n_nc=n_nc)
    dim = op.dim
    if dim == 0:
        return Eigenpacket(L, ell, op.n_nc, np.empty(0, complex), np.empty(0), True, False)
    k = min(k, dim)
    converged = True
    if dim <= _DENSE_CUTOFF or k >= dim - 2:
        if dim > 4096:
            raise ValueError("requested k too close to a large dimension")
        T = dense_matrix(op)
        vals, vecs = np.linalg.eig(T)
        order = np.argsort(-vals.real)
        vals, vecs = vals[order[:k]], vecs[:, order[:k]]
    else:
        rng = np.random.RandomState(seed)
        v0 = rng.standard_normal(dim)
        try:
            vals, vecs = eigs(
                op.aslinearoperator(), k=k, which="LR", v0=v0, tol=tol,
                maxiter=maxiter if maxiter is not None else 10000,
            )
        except Exception:
            vals, vecs = eigs(op.aslinearoperator(), k=k, which="LR", v0=v0, tol=1e-8)
            converged = False
        order = np.argsort(-vals.real)
        vals, vecs = vals[order], vecs[:, order]
    res = np.empty(len(vals))
    for i in range(len(vals)):
        v = vecs[:, i]
        if np.max(np.abs(v.imag)) < 1e-14 * max(1.0, np.max(np.abs(v.real))):
            tv = op.matvec(v.real)
            res[i] = np.linalg.norm(tv - vals[i].real * v.real) / max(abs(vals[i]), 1e-300)
        else:
            tv = op.matvec(v.real) + 1j * op.matvec(v.imag)
            res[i] = np.linalg.norm(tv - vals[i] * v) / max(abs(vals[i]), 1e-300)
    complex_leading = bool(abs(vals[0].imag) > 1e-9 * max(1.0, abs(vals[0].real)))
    return Eigenpacket(L, ell, op.n_nc, vals, res, converged, complex_leading)


def free_energy_series(weights, ell, L_list, n_nc=None, k=1, **kw):
    """Rows (L, -log Lambda_0 / L) for ascending widths L."""
    out = []
    for L in L_list:
        pk = leading_eigenvalues(weights, L, ell, n_nc=n_nc, k=k, **kw)
        lam0 = pk.leading.real
        if lam0 <= 0:
            raise ArithmeticError(f"non-positive leading eigenvalue at L={L}")
        out.append((L, -np.log(lam0) / L))
    return out
