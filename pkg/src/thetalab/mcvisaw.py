"""Grand-canonical Metropolis sampling of vertex-interacting self-avoiding
walks (VISAWs) on the L x L torus.

One walk end is pinned at the center; the other evolves under four move
types, each proposed with probability 1/16 per (type, direction) pair:

  grow      extend the free end by one edge
  retract   remove the final edge
  backbite  connect the free end to a singly visited site by an unused
            edge and cut that site's onward edge, reversing the tail
  special   at a free end parked on a doubly visited site, swap the end
            across the other strand (reconnect with its incoming edge)

Every reverse move is the same (type, direction) machinery at probability
1/16, so Metropolis acceptance min(1, W'/W) with the configuration weight
W = K^edges * tau^(doubly visited sites) * p^(straight pairs) satisfies
detailed balance.  Edges are identified by (orientation, x, y), which keeps
the L = 2 torus (a multigraph) honest.

Randomness comes from numpy's counter-based Philox generator, one stream
per replica; the compiled kernel consumes pre-drawn uniform blocks so runs
are bit-reproducible for a given seed regardless of threading.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.random import Generator, Philox

__all__ = [
    "WalkConfig",
    "RunConfig",
    "G1Histogram",
    "step",
    "run_replica",
    "run_protocol",
    "g1_estimate",
    "g1_at_ratio",
    "lattice_multiplicity",
    "weight_of",
]

_DX = np.array([1, 0, -1, 0], dtype=np.int64)
_DY = np.array([0, 1, 0, -1], dtype=np.int64)


@njit(cache=True, inline="always")
def _edge_id(x, y, d, L):
    """(orientation, ex, ey) of the edge leaving (x, y) in direction d."""
    if d == 0:
        return 0, x, y
    if d == 2:
        return 0, (x - 1) % L, y
    if d == 1:
        return 1, x, y
    return 1, x, (y - 1) % L


@njit(cache=True, inline="always")
def _crossing(a, b, c, d):
    """Do the direction pairs {a,b} and {c,d} interleave around a site?"""
    span = (b - a) % 4
    ic = 0 < ((c - a) % 4) < span
    idd = 0 < ((d - a) % 4) < span
    return ic != idd


@njit(cache=True)
def _mc_kernel(
    L, K, tau, p, uni, measuring, stride, phase_step0,
    pos_x, pos_y, ux, uy, sdir, scalars, edge_used, visit_count, visit_idx,
    hist, attempts, accepts, occ,
):
    """Advance the chain by len(uni)//2 proposals; state persists in arrays.

    scalars: [N, n_straight, n_double, global_step]
    visit_idx[x, y, k]: path indices of the visits of site (x, y), -1 if free.
    occ: when longer than 1, per-state occupancy histogram keyed by the
    packed step sequence (small lattices only; used by exactness tests).
    """
    n_steps = uni.shape[0] // 2
    N = scalars[0]
    n_str = scalars[1]
    n_dbl = scalars[2]
    gstep = scalars[3]
    cx = pos_x[0]
    cy = pos_y[0]
    for it in range(n_steps):
        sel = int(uni[2 * it] * 16.0)
        if sel > 15:
            sel = 15
        t = sel >> 2
        d = sel & 3
        acc_u = uni[2 * it + 1]
        attempts[t] += 1

        bx = pos_x[N]
        by = pos_y[N]

        if t == 0:
            # ---- grow ----
            eo, ex, ey = _edge_id(bx, by, d, L)
            if edge_used[eo, ex, ey] == 0:
                nx = (bx + _DX[d]) % L
                ny = (by + _DY[d]) % L
                vcu = visit_count[nx, ny]
                ok = vcu < 2
                ds = 0
                if ok and N > 0:
                    din = sdir[N - 1]  # direction traveled into B
                    if visit_count[bx, by] == 2:
                        # parked end: new pair (terminal-in, d) vs passing pair
                        i = visit_idx[bx, by, 0]
                        if i == N:
                            i = visit_idx[bx, by, 1]
                        if i == 0:
                            a1 = sdir[0]
                        else:
                            a1 = (sdir[i - 1] + 2) & 3
                        a2 = sdir[i] if i < N else 0  # i < N always here
                        if _crossing(a1, a2, (din + 2) & 3, d):
                            ok = False
                    if ok and d == din:
                        ds = 1
                if ok:
                    ratio = K
                    if ds == 1:
                        ratio *= p
                    if vcu == 1:
                        ratio *= tau
                    if acc_u < ratio:
                        accepts[0] += 1
                        edge_used[eo, ex, ey] = 1
                        sdir[N] = d
                        N += 1
                        pos_x[N] = nx
                        pos_y[N] = ny
                        ux[N] = ux[N - 1] + _DX[d]
                        uy[N] = uy[N - 1] + _DY[d]
                        visit_idx[nx, ny, visit_count[nx, ny]] = N
                        visit_count[nx, ny] += 1
                        if vcu == 1:
                            n_dbl += 1
                        n_str += ds

        elif t == 1:
            # ---- retract ----
            if N > 0 and d == ((sdir[N - 1] + 2) & 3):
                ds = 0
                if N > 1 and sdir[N - 2] == sdir[N - 1]:
                    ds = 1
                ratio = 1.0 / K
                if ds == 1:
                    ratio /= p if p > 0 else 1.0  # p=0 pairs never exist
                if visit_count[bx, by] == 2:
                    ratio /= tau
                if acc_u < ratio:
                    accepts[1] += 1
                    if visit_idx[bx, by, 1] == N:
                        visit_idx[bx, by, 1] = -1
                    else:
                        visit_idx[bx, by, 0] = visit_idx[bx, by, 1]
                        visit_idx[bx, by, 1] = -1
                    if visit_count[bx, by] == 2:
                        n_dbl -= 1
                    visit_count[bx, by] -= 1
                    dlast = sdir[N - 1]
                    eo, ex, ey = _edge_id(pos_x[N - 1], pos_y[N - 1], dlast, L)
                    edge_used[eo, ex, ey] = 0
                    n_str -= ds
                    N -= 1

        elif t == 2:
            # ---- backbite ----
            eo, ex, ey = _edge_id(bx, by, d, L)
            if N > 0 and edge_used[eo, ex, ey] == 0:
                tx = (bx + _DX[d]) % L
                ty = (by + _DY[d]) % L
                if visit_count[tx, ty] == 1:
                    k = visit_idx[tx, ty, 0]
                    ok = True
                    din = sdir[N - 1]
                    # when u = v_{N-1} (a double edge on L = 2) the cut edge is
                    # the old terminal edge and B stays terminal: no new pair
                    # forms at B and parking stays unconstrained
                    b_gets_pair = k != N - 1
                    if b_gets_pair and visit_count[bx, by] == 2:
                        i = visit_idx[bx, by, 0]
                        if i == N:
                            i = visit_idx[bx, by, 1]
                        if i == 0:
                            a1 = sdir[0]
                        else:
                            a1 = (sdir[i - 1] + 2) & 3
                        a2 = sdir[i]
                        if _crossing(a1, a2, (din + 2) & 3, d):
                            ok = False
                    if ok:
                        # straightness delta: remove pair at v_{k+1} (edge
                        # k->k+1 dissolves) and pair at u if k>0 changes;
                        # add pair at B
                        ds = 0
                        if k + 1 < N and sdir[k] == sdir[k + 1]:
                            ds -= 1
                        if k > 0:
                            if sdir[k - 1] == sdir[k]:
                                ds -= 1
                            if sdir[k - 1] == ((d + 2) & 3):
                                ds += 1
                        if b_gets_pair and d == din:
                            ds += 1
                        ratio = 1.0
                        if ds > 0:
                            for _ in range(ds):
                                ratio *= p
                        elif ds < 0:
                            if p <= 0.0:
                                ratio = -1.0  # removing a straight pair at p=0: never proposed from valid state
                            else:
                                for _ in range(-ds):
                                    ratio /= p
                        if ratio >= 0 and acc_u < ratio:
                            accepts[2] += 1
                            # remove edge k -> k+1, add edge B -> u
                            eo2, ex2, ey2 = _edge_id(pos_x[k], pos_y[k], sdir[k], L)
                            edge_used[eo2, ex2, ey2] = 0
                            edge_used[eo, ex, ey] = 1
                            # clear visit indices of rewritten range k+1..N
                            for m in range(k + 1, N + 1):
                                xx = pos_x[m]
                                yy = pos_y[m]
                                if visit_idx[xx, yy, 0] == m:
                                    visit_idx[xx, yy, 0] = visit_idx[xx, yy, 1]
                                    visit_idx[xx, yy, 1] = -1
                                elif visit_idx[xx, yy, 1] == m:
                                    visit_idx[xx, yy, 1] = -1
                            # rebuild reversed tail: new index k+1+m holds old v_{N-m}
                            nrev = N - k  # number of rewritten points
                            tmpx = np.empty(nrev, np.int64)
                            tmpy = np.empty(nrev, np.int64)
                            tmpux = np.empty(nrev, np.int64)
                            tmpuy = np.empty(nrev, np.int64)
                            tmpd = np.empty(nrev, np.int64)
                            for m in range(nrev):
                                tmpx[m] = pos_x[N - m]
                                tmpy[m] = pos_y[N - m]
                                tmpux[m] = ux[N - m]
                                tmpuy[m] = uy[N - m]
                            for m in range(nrev - 1):
                                tmpd[m + 1] = (sdir[N - 1 - m] + 2) & 3
                            # the new edge is traversed from u to B
                            tmpd[0] = (d + 2) & 3
                            # write back
                            ubx = ux[k] - _DX[d]
                            uby = uy[k] - _DY[d]
                            offx = ubx - tmpux[0]
                            offy = uby - tmpuy[0]
                            for m in range(nrev):
                                idx = k + 1 + m
                                pos_x[idx] = tmpx[m]
                                pos_y[idx] = tmpy[m]
                                ux[idx] = tmpux[m] + offx
                                uy[idx] = tmpuy[m] + offy
                                sdir[idx - 1] = tmpd[m]
                            for m in range(k + 1, N + 1):
                                xx = pos_x[m]
                                yy = pos_y[m]
                                if visit_idx[xx, yy, 0] < 0:
                                    visit_idx[xx, yy, 0] = m
                                else:
                                    visit_idx[xx, yy, 1] = m
                            n_str += ds

        else:
            # ---- special: end parked at a doubly visited site ----
            if N > 0 and visit_count[bx, by] == 2:
                i = visit_idx[bx, by, 0]
                if i == N:
                    i = visit_idx[bx, by, 1]
                if 0 < i < N:
                    # incoming edge of the passing visit, as an edge id
                    eo, ex, ey = _edge_id(bx, by, d, L)
                    pin = sdir[i - 1]
                    eoi, exi, eyi = _edge_id(pos_x[i - 1], pos_y[i - 1], pin, L)
                    if eo == eoi and ex == exi and ey == eyi:
                        # ds: pair at s changes from (alpha,beta) to (alpha,eps)
                        ds = 0
                        if sdir[i - 1] == sdir[i]:
                            ds -= 1
                        if sdir[i - 1] == ((sdir[N - 1] + 2) & 3):
                            ds += 1
                        ratio = 1.0
                        if ds > 0:
                            for _ in range(ds):
                                ratio *= p
                        elif ds < 0:
                            if p <= 0.0:
                                ratio = -1.0
                            else:
                                for _ in range(-ds):
                                    ratio /= p
                        if ratio >= 0 and acc_u < ratio:
                            accepts[3] += 1
                            for m in range(i + 1, N + 1):
                                xx = pos_x[m]
                                yy = pos_y[m]
                                if visit_idx[xx, yy, 0] == m:
                                    visit_idx[xx, yy, 0] = visit_idx[xx, yy, 1]
                                    visit_idx[xx, yy, 1] = -1
                                elif visit_idx[xx, yy, 1] == m:
                                    visit_idx[xx, yy, 1] = -1
                            nrev = N - i
                            tmpx = np.empty(nrev, np.int64)
                            tmpy = np.empty(nrev, np.int64)
                            tmpux = np.empty(nrev, np.int64)
                            tmpuy = np.empty(nrev, np.int64)
                            tmpd = np.empty(nrev, np.int64)
                            # new index i+1+m holds old v_{N-1-m}; final point is s
                            for m in range(nrev - 1):
                                tmpx[m] = pos_x[N - 1 - m]
                                tmpy[m] = pos_y[N - 1 - m]
                                tmpux[m] = ux[N - 1 - m]
                                tmpuy[m] = uy[N - 1 - m]
                            tmpx[nrev - 1] = bx
                            tmpy[nrev - 1] = by
                            # step dirs: first step s -> v_{N-1} reverses old last step
                            tmpd[0] = (sdir[N - 1] + 2) & 3
                            for m in range(1, nrev - 1):
                                tmpd[m] = (sdir[N - 1 - m] + 2) & 3
                            if nrev >= 1:
                                tmpd[nrev - 1] = (sdir[i] + 2) & 3
                            # unwrapped: new index i+1 = old v_{N-1} relative to s
                            ubx = ux[i] + (ux[N - 1] - ux[N])
                            uby = uy[i] + (uy[N - 1] - uy[N])
                            if nrev >= 1:
                                tmpux[nrev - 1] = 0  # filled below
                            offx = ubx - ux[N - 1]
                            offy = uby - uy[N - 1]
                            for m in range(nrev - 1):
                                tmpux[m] = ux[N - 1 - m] + offx
                                tmpuy[m] = uy[N - 1 - m] + offy
                            # final point s: one step of direction tmpd[nrev-1] beyond
                            lastux = (tmpux[nrev - 2] if nrev >= 2 else ubx) + _DX[tmpd[nrev - 1]]
                            lastuy = (tmpuy[nrev - 2] if nrev >= 2 else uby) + _DY[tmpd[nrev - 1]]
                            tmpux[nrev - 1] = lastux
                            tmpuy[nrev - 1] = lastuy
                            for m in range(nrev):
                                idx = i + 1 + m
                                pos_x[idx] = tmpx[m]
                                pos_y[idx] = tmpy[m]
                                ux[idx] = tmpux[m]
                                uy[idx] = tmpuy[m]
                                sdir[idx - 1] = tmpd[m]
                            for m in range(i + 1, N + 1):
                                xx = pos_x[m]
                                yy = pos_y[m]
                                if visit_idx[xx, yy, 0] < 0:
                                    visit_idx[xx, yy, 0] = m
                                else:
                                    visit_idx[xx, yy, 1] = m
                            n_str += ds

        gstep += 1
        if measuring and (gstep % stride) == 0:
            wx_ok = 0 <= ux[N] < L
            wy_ok = 0 <= uy[N] < L
            if wx_ok and wy_ok:
                dx = ux[N] - cx
                dy = uy[N] - cy
                hist[dx * dx + dy * dy] += 1
        if occ.shape[0] > 1:
            code = N
            for m in range(N):
                code |= sdir[m] << (5 + 2 * m)
            occ[code] += 1

    scalars[0] = N
    scalars[1] = n_str
    scalars[2] = n_dbl
    scalars[3] = gstep


@dataclass
class WalkConfig:
    """Python-side view of the walk state (used by tests and diagnostics)."""

    L: int
    path: np.ndarray  # (N+1, 2) wrapped sites
    steps: np.ndarray  # (N,) directions
    unwrapped: np.ndarray  # (N+1, 2)

    @property
    def n_edges(self):
        return len(self.steps)

    @property
    def winding(self):
        L = self.L
        return (
            int(self.unwrapped[-1, 0] // L) - int(self.unwrapped[0, 0] // L),
            int(self.unwrapped[-1, 1] // L) - int(self.unwrapped[0, 1] // L),
        )


def weight_of(cfg: WalkConfig, K, tau, p):
    """Boltzmann weight K^edges tau^doubles p^straights of a walk."""
    n = cfg.n_edges
    sites = {}
    for px, py in map(tuple, cfg.path):
        sites[(px, py)] = sites.get((px, py), 0) + 1
    n_dbl = sum(1 for v in sites.values() if v == 2)
    n_str = sum(1 for a, b in zip(cfg.steps, cfg.steps[1:]) if a == b)
    return (K**n) * (tau**n_dbl) * (p**n_str if (p > 0 or n_str == 0) else 0.0)


class _ChainState:
    """Allocated state arrays for one Markov chain."""

    def __init__(self, L):
        self.L = L
        maxlen = 2 * L * L + 2
        c = L // 2
        self.pos_x = np.zeros(maxlen, np.int64)
        self.pos_y = np.zeros(maxlen, np.int64)
        self.ux = np.zeros(maxlen, np.int64)
        self.uy = np.zeros(maxlen, np.int64)
        self.sdir = np.zeros(maxlen, np.int64)
        self.pos_x[0] = self.pos_y[0] = c
        self.ux[0] = self.uy[0] = c
        self.scalars = np.zeros(4, np.int64)
        self.edge_used = np.zeros((2, L, L), np.uint8)
        self.visit_count = np.zeros((L, L), np.uint8)
        self.visit_idx = np.full((L, L, 2), -1, np.int32)
        self.visit_count[c, c] = 1
        self.visit_idx[c, c, 0] = 0
        self.hist = np.zeros(2 * L * L + 1, np.int64)
        self.attempts = np.zeros(4, np.int64)
        self.accepts = np.zeros(4, np.int64)
        self.occ = np.zeros(1, np.int64)  # state-occupancy recording off

    def config(self):
        N = int(self.scalars[0])
        path = np.stack([self.pos_x[: N + 1], self.pos_y[: N + 1]], axis=1).copy()
        unw = np.stack([self.ux[: N + 1], self.uy[: N + 1]], axis=1).copy()
        return WalkConfig(L=self.L, path=path, steps=self.sdir[:N].copy(), unwrapped=unw)

    def run(self, K, tau, p, n_steps, rng, measuring=False, stride=1, chunk=1 << 20):
        done = 0
        while done < n_steps:
            m = min(chunk, n_steps - done)
            uni = rng.random(2 * m)
            _mc_kernel(
                self.L, K, tau, p, uni, measuring, stride, 0,
                self.pos_x, self.pos_y, self.ux, self.uy, self.sdir,
                self.scalars, self.edge_used, self.visit_count, self.visit_idx,
                self.hist, self.attempts, self.accepts, self.occ,
            )
            done += m


def step(state: _ChainState, K, tau, p, rng, n=1):
    """Advance a chain by n Metropolis proposals (testing hook)."""
    state.run(K, tau, p, n, rng)
    return state


@dataclass
class RunConfig:
    """Parameters of one sampling run."""

    L: int
    p: float
    K: float
    tau: float
    seed: int = 20250810
    warmup_sweeps: int = 500  # in units of L*L proposals
    measure_sweeps: int = 100000
    n_replicas: int = 10
    sample_stride: int = 4
    threads: int | None = None


@dataclass
class G1Histogram:
    """Replica-averaged histogram of squared end separations at w = 0."""

    L: int
    r2_counts_mean: np.ndarray
    r2_counts_err: np.ndarray
    replicas: int
    samples_per_replica: np.ndarray
    acceptance: dict
    config: RunConfig = None
    warning: str | None = None


def _replica_seeds(seed, n):
    return [np.uint64(seed) + np.uint64(1000003) * np.uint64(r) for r in range(n)]


def run_replica(rc: RunConfig, replica_index):
    """One full warmup+measurement chain; its own Philox stream."""
    rng = Generator(Philox(key=_replica_seeds(rc.seed, rc.n_replicas)[replica_index]))
    st = _ChainState(rc.L)
    steps_warm = rc.warmup_sweeps * rc.L * rc.L
    steps_meas = rc.measure_sweeps * rc.L * rc.L
    st.run(rc.K, rc.tau, rc.p, steps_warm, rng, measuring=False)
    st.run(rc.K, rc.tau, rc.p, steps_meas, rng, measuring=True, stride=rc.sample_stride)
    return st


def run_protocol(rc: RunConfig):
    """Warmup, measure, and merge replicas into a G1Histogram."""
    threads = rc.threads
    if threads is None:
        threads = int(os.environ.get("THETALAB_THREADS", "0")) or min(rc.n_replicas, os.cpu_count() or 1)
    warning = None
    if rc.measure_sweeps < rc.warmup_sweeps:
        warning = "measurement shorter than warmup"
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as exe:
            states = list(exe.map(lambda r: run_replica(rc, r), range(rc.n_replicas)))
    else:
        states = [run_replica(rc, r) for r in range(rc.n_replicas)]
    hists = np.stack([s.hist for s in states]).astype(float)
    samples = hists.sum(axis=1)
    att = np.stack([s.attempts for s in states]).sum(axis=0)
    acc = np.stack([s.accepts for s in states]).sum(axis=0)
    mean = hists.mean(axis=0)
    err = hists.std(axis=0, ddof=1) / np.sqrt(rc.n_replicas) if rc.n_replicas > 1 else np.zeros_like(mean)
    return G1Histogram(
        L=rc.L,
        r2_counts_mean=mean,
        r2_counts_err=err,
        replicas=rc.n_replicas,
        samples_per_replica=samples,
        acceptance={
            "grow": float(acc[0] / max(att[0], 1)),
            "retract": float(acc[1] / max(att[1], 1)),
            "backbite": float(acc[2] / max(att[2], 1)),
            "special": float(acc[3] / max(att[3], 1)),
        },
        config=rc,
        warning=warning,
    )


def lattice_multiplicity(r2max):
    """Number of integer lattice vectors with each squared norm <= r2max."""
    mult = np.zeros(r2max + 1, np.int64)
    amax = int(np.floor(np.sqrt(r2max)))
    for a in range(-amax, amax + 1):
        for b in range(-amax, amax + 1):
            s = a * a + b * b
            if s <= r2max:
                mult[s] += 1
    return mult


def g1_estimate(hist: G1Histogram):
    """Normalized G1 per realizable r^2 bin: counts / multiplicity, scaled
    so G1(r=1) = 1.  Returns (r2 array, value array, error array)."""
    counts = hist.r2_counts_mean
    errs = hist.r2_counts_err
    mult = lattice_multiplicity(len(counts) - 1)
    realizable = mult > 0
    r2 = np.nonzero(realizable)[0]
    vals = counts[r2] / mult[r2]
    es = errs[r2] / mult[r2]
    if counts[1] <= 0:
        raise ArithmeticError("empty r^2 = 1 bin; cannot normalize G1(0,1) = 1")
    norm = counts[1] / mult[1]
    return r2, vals / norm, es / norm


def g1_at_ratio(hist: G1Histogram, alpha=0.25):
    """Normalized G1 at separation r = alpha L (nearest populated bin).

    Raises a LookupError listing nearby populated bins when the target bin
    carries no samples.
    """
    r2, vals, errs = g1_estimate(hist)
    target = (alpha * hist.L) ** 2
    populated = vals > 0
    if not populated.any():
        raise LookupError("histogram is empty")
    cand = r2[populated]
    j = int(np.argmin(np.abs(cand - target)))
    r2best = cand[j]
    if abs(np.sqrt(r2best) - alpha * hist.L) > 1.5:
        near = cand[np.argsort(np.abs(cand - target))[:5]]
        raise LookupError(
            f"no populated bin near r^2 = {target:.0f}; nearest populated: {list(near)}"
        )
    i = int(np.nonzero(r2 == r2best)[0][0])
    return float(vals[i]), float(errs[i]), int(r2best)
