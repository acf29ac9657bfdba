"""Independent brute-force oracles used by the test suite.

These deliberately share no machinery with the package: the row transfer
matrix is rebuilt here by enumerating every assignment of the nine vertex
tiles to a row and following strands through an explicit port graph.
"""

from itertools import product

import numpy as np

from thetalab.linkstate import CLOSE, EMPTY, LEG, OPEN, match_pairs, pattern_symbols

# tile -> (edge occupancy (W,S,N,E), internal connections)
TILES = {
    1: ((0, 0, 0, 0), []),
    2: ((0, 1, 0, 1), [("S", "E")]),
    3: ((1, 0, 1, 0), [("N", "W")]),
    4: ((1, 1, 0, 0), [("S", "W")]),
    5: ((0, 0, 1, 1), [("N", "E")]),
    6: ((1, 0, 0, 1), [("E", "W")]),
    7: ((0, 1, 1, 0), [("N", "S")]),
    8: ((1, 1, 1, 1), [("S", "E"), ("W", "N")]),
    9: ((1, 1, 1, 1), [("S", "W"), ("N", "E")]),
}


def _ports_of(i, L):
    """Global ports of site i's edges; h_L is the seam edge (between L and 1)."""
    return {
        "W": ("h", i - 1 if i > 1 else L),
        "E": ("h", i),
        "S": ("bot", i),
        "N": ("top", i),
    }


def _cross_weight(a, b, L, arc_flags):
    """Seam crossings incurred by the step a->b."""
    w = 0
    if b == ("h", L):
        w += 1
    if a[0] == "bot" and b[0] == "bot":
        w += arc_flags[frozenset((a, b))]
    return w


def row_matrix_bruteforce(in_syms_list, out_index, L, rho, n, n_nc, orient_out):
    """Dense row transfer matrix by explicit tile enumeration.

    in_syms_list: per-site symbol tuples (basis, column order)
    out_index: output symbol tuple -> row index
    orient_out: callable(base_syms, pairs, L) fixing the output arc encoding
    """
    dim_in = len(in_syms_list)
    T = np.zeros((len(out_index), dim_in))
    for col, syms in enumerate(in_syms_list):
        arcs = match_pairs(syms)  # 0-based (i, j, seam)
        base_adj = {}
        arc_flags = {}
        leg_bots = set()
        for i, j, seam in arcs:
            a, b = ("bot", i + 1), ("bot", j + 1)
            base_adj.setdefault(a, []).append(b)
            base_adj.setdefault(b, []).append(a)
            arc_flags[frozenset((a, b))] = 1 if seam else 0
        for i, s in enumerate(syms):
            if s == LEG:
                leg_bots.add(("bot", i + 1))
        occupied_bot = [s != EMPTY for s in syms]
        for assign in product(range(1, 10), repeat=L):
            ok = True
            for i in range(1, L + 1):
                if bool(TILES[assign[i - 1]][0][1]) != occupied_bot[i - 1]:
                    ok = False
                    break
            if ok:
                for i in range(1, L + 1):
                    j = i % L + 1
                    if TILES[assign[i - 1]][0][3] != TILES[assign[j - 1]][0][0]:
                        ok = False
                        break
            if not ok:
                continue
            adj = {k: list(v) for k, v in base_adj.items()}
            for i in range(1, L + 1):
                pm = _ports_of(i, L)
                for a, b in TILES[assign[i - 1]][1]:
                    pa, pb = pm[a], pm[b]
                    adj.setdefault(pa, []).append(pb)
                    adj.setdefault(pb, []).append(pa)
            weight = 1.0
            for t in assign:
                weight *= rho[t - 1]

            terminals = [("top", i) for i in range(1, L + 1) if ("top", i) in adj]
            terminals += sorted(leg_bots)

            def step(cur):
                nxt = adj[cur].pop()
                adj[nxt].remove(cur)
                return nxt, _cross_weight(cur, nxt, L, arc_flags)

            out_pairs = []
            out_leg_tops = []
            dropped = False
            for t in terminals:
                if not adj[t]:
                    continue  # consumed from the other end
                crossings = 0
                cur = t
                while adj[cur]:
                    cur, dx = step(cur)
                    crossings += dx
                end = cur
                t_leg, e_leg = t in leg_bots, end in leg_bots
                if t_leg and e_leg:
                    dropped = True  # two through-lines contracted
                    break
                if t_leg or e_leg:
                    top = end if t_leg else t
                    out_leg_tops.append(top[1])
                else:
                    out_pairs.append((t[1], end[1], crossings % 2))
            if dropped:
                continue
            # remaining edges form closed loops
            for p in sorted(adj):
                while adj[p]:
                    crossings = 0
                    cur = p
                    while True:
                        cur, dx = step(cur)
                        crossings += dx
                        if cur == p:
                            break
                    weight *= n_nc if crossings % 2 else n
            pairs = [(min(a, b) - 1, max(a, b) - 1, par) for a, b, par in out_pairs]
            syms_out = [EMPTY] * L
            for i in out_leg_tops:
                syms_out[i - 1] = LEG
            syms_out = orient_out(tuple(syms_out), pairs, L)
            row = out_index.get(tuple(syms_out))
            if row is None:
                raise AssertionError(f"output {syms_out} not in basis")
            T[row, col] += weight
    return T


def orient_disk(base, pairs, L):
    syms = list(base)
    for i, j, par in pairs:
        syms[i], syms[j] = OPEN, CLOSE
    return tuple(syms)


def orient_annular(base, pairs, L):
    syms = list(base)
    for i, j, par in pairs:
        if par == 0:
            syms[i], syms[j] = OPEN, CLOSE
        else:
            syms[i], syms[j] = CLOSE, OPEN
    return tuple(syms)


def basis_symbols(basis):
    return [tuple(pattern_symbols(c, basis.L)) for c in basis.codes]


def dense_from_basis(basis, rho, n, n_nc):
    """Oracle dense transfer matrix on a SectorBasis (matching its encoding)."""
    syms = basis_symbols(basis)
    index = {s: i for i, s in enumerate(syms)}
    orient = orient_disk if (basis.ell == 0 and not basis.annular) else orient_annular
    return row_matrix_bruteforce(syms, index, basis.L, rho, n, n_nc, orient)


# ---------------------------------------------------------------------------
# VISAW enumeration oracle: every directed walk from the center of a small
# torus, built by depth-first growth with the same legality rules the
# sampler enforces, weighted K^edges tau^doubles p^straights.

_DXY = [(1, 0), (0, 1), (-1, 0), (0, -1)]


def _edge_key(x, y, d, L):
    if d == 0:
        return (0, x, y)
    if d == 2:
        return (0, (x - 1) % L, y)
    if d == 1:
        return (1, x, y)
    return (1, x, (y - 1) % L)


def _dirs_cross(a, b, c, d):
    span = (b - a) % 4
    ic = 0 < ((c - a) % 4) < span
    idd = 0 < ((d - a) % 4) < span
    return ic != idd


def enumerate_visaws(L, Kmax_len=None):
    """All walks from the center as step tuples (includes the empty walk)."""
    start = (L // 2, L // 2)
    maxlen = Kmax_len if Kmax_len is not None else 2 * L * L
    walks = []

    def rec(path, steps, used, visits):
        walks.append(tuple(steps))
        if len(steps) >= maxlen:
            return
        x, y = path[-1]
        for d in range(4):
            ek = _edge_key(x, y, d, L)
            if ek in used:
                continue
            nx, ny = (x + _DXY[d][0]) % L, (y + _DXY[d][1]) % L
            if visits.get((nx, ny), 0) >= 2:
                continue
            if visits[(x, y)] == 2 and len(steps) > 0:
                # parked end: find passing visit and test planarity
                idxs = [i for i, p in enumerate(path) if p == (x, y)]
                i = idxs[0] if idxs[1] == len(path) - 1 else idxs[1]
                a1 = steps[0] if i == 0 else (steps[i - 1] + 2) % 4
                a2 = steps[i]
                din = (steps[-1] + 2) % 4
                if _dirs_cross(a1, a2, din, d):
                    continue
            path.append((nx, ny))
            steps.append(d)
            used.add(ek)
            visits[(nx, ny)] = visits.get((nx, ny), 0) + 1
            rec(path, steps, used, visits)
            visits[(nx, ny)] -= 1
            used.discard(ek)
            steps.pop()
            path.pop()

    rec([start], [], set(), {start: 1})
    return walks


def visaw_weight(steps, L, K, tau, p):
    start = (L // 2, L // 2)
    x, y = start
    visits = {start: 1}
    n_str = 0
    for i, d in enumerate(steps):
        x, y = (x + _DXY[d][0]) % L, (y + _DXY[d][1]) % L
        visits[(x, y)] = visits.get((x, y), 0) + 1
        if i > 0 and steps[i - 1] == d:
            n_str += 1
    n_dbl = sum(1 for v in visits.values() if v == 2)
    if p == 0 and n_str > 0:
        return 0.0
    return K ** len(steps) * tau**n_dbl * (p**n_str if n_str else 1.0)


def visaw_code(steps):
    """The sampler kernel's packed state key."""
    code = len(steps)
    for m, d in enumerate(steps):
        code |= d << (5 + 2 * m)
    return code
