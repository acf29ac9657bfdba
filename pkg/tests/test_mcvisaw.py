import numpy as np
import pytest
from numpy.random import Generator, Philox

from thetalab.mcvisaw import (
    G1Histogram,
    RunConfig,
    _ChainState,
    _mc_kernel,
    g1_at_ratio,
    g1_estimate,
    lattice_multiplicity,
    run_protocol,
    weight_of,
)

from oracles import enumerate_visaws, visaw_code, visaw_weight


def drive(st, K, tau, p, moves, acc=0.0):
    """Apply forced (type, direction) proposals; returns accepted count."""
    uni = []
    for t, d in moves:
        uni += [(4 * t + d + 0.5) / 16, acc]
    before = st.accepts.sum()
    uni = np.array(uni, float)
    _mc_kernel(st.L, K, tau, p, uni, False, 1, 0, st.pos_x, st.pos_y, st.ux, st.uy,
               st.sdir, st.scalars, st.edge_used, st.visit_count, st.visit_idx,
               st.hist, st.attempts, st.accepts, st.occ)
    return int(st.accepts.sum() - before)


def state_from_steps(L, steps, K=1.0, tau=1.0, p=1.0):
    st = _ChainState(L)
    for d in steps:
        acc = drive(st, K, tau, p, [(0, d)])
        assert acc == 1, f"setup grow {d} rejected"
    return st


def steps_of(st):
    return tuple(int(x) for x in st.sdir[: int(st.scalars[0])])


def full_check(st):
    """Recompute all bookkeeping from the path; empty string if consistent."""
    L, N = st.L, int(st.scalars[0])
    vc = np.zeros((L, L), np.int64)
    eu = np.zeros((2, L, L), np.int64)
    x, y = int(st.pos_x[0]), int(st.pos_y[0])
    vc[x, y] += 1
    for m in range(N):
        d = int(st.sdir[m])
        if d == 0:
            e = (0, x, y)
        elif d == 2:
            e = (0, (x - 1) % L, y)
        elif d == 1:
            e = (1, x, y)
        else:
            e = (1, x, (y - 1) % L)
        if eu[e]:
            return f"edge reuse at {m}"
        eu[e] = 1
        x, y = (x + [1, 0, -1, 0][d]) % L, (y + [0, 1, 0, -1][d]) % L
        if (st.pos_x[m + 1], st.pos_y[m + 1]) != (x, y):
            return f"pos mismatch {m}"
        vc[x, y] += 1
    if not np.all(vc <= 2):
        return "triple visit"
    if not np.all(vc == st.visit_count):
        return "visit_count"
    if not np.all(eu == st.edge_used):
        return "edge_used"
    if sum(1 for m in range(1, N) if st.sdir[m - 1] == st.sdir[m]) != st.scalars[1]:
        return "straight count"
    if int((vc == 2).sum()) != st.scalars[2]:
        return "double count"
    for m in range(N):
        d = int(st.sdir[m])
        if (st.ux[m + 1] - st.ux[m], st.uy[m + 1] - st.uy[m]) != ([1, 0, -1, 0][d], [0, 1, 0, -1][d]):
            return f"unwrapped at {m}"
    return ""


COUPLINGS = (0.4, 1.4, 0.6)


def test_state_consistency_random_walk():
    K, tau, p = COUPLINGS
    for L in (2, 3, 5):
        st = _ChainState(L)
        rng = Generator(Philox(key=7))
        for _ in range(40):
            st.run(K, tau, p, 2500, rng)
            assert full_check(st) == ""


def test_zero_fugacity_freezes_chain():
    st = _ChainState(4)
    rng = Generator(Philox(key=1))
    st.run(0.0, 1.0, 1.0, 20000, rng)
    assert st.scalars[0] == 0
    assert st.accepts[0] == 0


def test_grow_acceptance_threshold_is_K_times_p():
    # straight extension with no new contact: threshold K*p
    K, tau, p = 0.3, 2.0, 0.7
    st = state_from_steps(5, [0])
    assert drive(st, K, tau, p, [(0, 0)], acc=K * p + 1e-9) == 0
    st = state_from_steps(5, [0])
    assert drive(st, K, tau, p, [(0, 0)], acc=K * p - 1e-9) == 1
    # a corner extension: threshold K
    st = state_from_steps(5, [0])
    assert drive(st, K, tau, p, [(0, 1)], acc=K - 1e-9) == 1
    st = state_from_steps(5, [0])
    assert drive(st, K, tau, p, [(0, 1)], acc=K + 1e-9) == 0


@pytest.mark.parametrize("L", [2, 3])
def test_detailed_balance_per_move_type(L):
    """Every realizable move: exactly one reverse proposal of the same 1/16
    weight, and the Metropolis threshold equals min(1, W(b)/W(a))."""
    K, tau, p = COUPLINGS
    configs = enumerate_visaws(L, Kmax_len=6 if L == 3 else None)
    rng = np.random.default_rng(0)
    idx = rng.choice(len(configs), size=min(120, len(configs)), replace=False)
    checked = 0
    for i in idx:
        a = configs[i]
        Wa = visaw_weight(a, L, K, tau, p)
        if Wa == 0:
            continue
        for t in range(4):
            for d in range(4):
                st = state_from_steps(L, a)
                acc = drive(st, K, tau, p, [(t, d)], acc=0.0)
                if acc == 0:
                    continue
                assert full_check(st) == "", (a, t, d)
                b = steps_of(st)
                assert b != a or t in (2, 3), (a, t, d)
                Wb = visaw_weight(b, L, K, tau, p)
                assert Wb > 0
                ratio = Wb / Wa
                # threshold bracketing (only binding when ratio < 1)
                if ratio < 1:
                    st2 = state_from_steps(L, a)
                    assert drive(st2, K, tau, p, [(t, d)], acc=ratio + 1e-9) == 0, (a, t, d)
                    st3 = state_from_steps(L, a)
                    assert drive(st3, K, tau, p, [(t, d)], acc=ratio - 1e-9) == 1
                # exactly one reverse proposal restores a
                nrev = 0
                for t2 in range(4):
                    for d2 in range(4):
                        st4 = state_from_steps(L, b)
                        if drive(st4, K, tau, p, [(t2, d2)], acc=0.0) == 1 and steps_of(st4) == a:
                            nrev += 1
                nfwd = 0
                for t2 in range(4):
                    for d2 in range(4):
                        st5 = state_from_steps(L, a)
                        if drive(st5, K, tau, p, [(t2, d2)], acc=0.0) == 1 and steps_of(st5) == b:
                            nfwd += 1
                assert nrev == nfwd > 0, (a, b, t, d, nrev, nfwd)
                checked += 1
    assert checked > 100


@pytest.mark.slow
def test_exact_stationary_distribution_2x2():
    # total-variation distance against the enumerated Boltzmann weights
    K, tau, p = COUPLINGS
    walks = enumerate_visaws(2)
    Wd = {visaw_code(s): visaw_weight(s, 2, K, tau, p) for s in walks}
    Z = sum(Wd.values())
    st = _ChainState(2)
    st.occ = np.zeros(1 << 22, np.int64)
    st.run(K, tau, p, 10**7, Generator(Philox(key=12345)))
    tot = st.occ.sum()
    extra = tot - sum(st.occ[c] for c in Wd)
    assert extra == 0, "chain left the enumerated configuration space"
    tv = sum(abs(st.occ[c] / tot - w / Z) for c, w in Wd.items()) / 2
    assert tv < 0.01, tv


@pytest.mark.slow
def test_ergodic_coverage_3x3():
    # all short configurations within 1e6 proposals; bulk coverage grows
    from numba import njit, types
    from numba.typed import Dict

    @njit
    def run_track(L, K, tau, p, uni, pos_x, pos_y, ux, uy, sdir, scalars, edge_used,
                  visit_count, visit_idx, hist, attempts, accepts, occ, seen):
        n = uni.shape[0] // 2
        for i in range(n):
            _mc_kernel(L, K, tau, p, uni[2 * i:2 * i + 2], False, 1, 0, pos_x, pos_y,
                       ux, uy, sdir, scalars, edge_used, visit_count, visit_idx,
                       hist, attempts, accepts, occ)
            N = scalars[0]
            code = N
            for m in range(N):
                code |= sdir[m] << (5 + 2 * m)
            seen[code] = types.uint8(1)

    K, tau, p = 0.7, 1.3, 0.8
    st = _ChainState(3)
    rng = Generator(Philox(key=4))
    seen = Dict.empty(types.int64, types.uint8)
    uni = rng.random(2 * 10**6)
    run_track(st.L, K, tau, p, uni, st.pos_x, st.pos_y, st.ux, st.uy, st.sdir,
              st.scalars, st.edge_used, st.visit_count, st.visit_idx,
              st.hist, st.attempts, st.accepts, st.occ, seen)
    visited = set(seen.keys())
    all_cfg = enumerate_visaws(3)
    targets = set(map(visaw_code, all_cfg))
    assert not (visited - targets), "invalid states visited"
    short = {visaw_code(s) for s in all_cfg if len(s) <= 8}
    missing_short = short - visited
    assert not missing_short, f"{len(missing_short)} short configs unvisited"
    assert len(visited & targets) > 0.7 * len(targets)


def test_weight_of_matches_oracle():
    K, tau, p = COUPLINGS
    for s in [(0, 1), (0, 0, 1), (1, 1, 0, 3)]:
        st = state_from_steps(4, s)
        assert abs(weight_of(st.config(), K, tau, p) - visaw_weight(s, 4, K, tau, p)) < 1e-14


def test_winding_numbers():
    # straight walk across the torus: crossing the boundary bumps wx
    L = 4
    st = state_from_steps(L, [0] * (L - 1))
    assert st.config().winding == (0, 0)
    st = state_from_steps(L, [0] * L)  # wraps once
    assert st.config().winding == (1, 0)
    st = state_from_steps(L, [3] * 3)  # going south from the center crosses y=0
    assert st.config().winding == (0, -1)


def test_lattice_multiplicity_against_divisor_formula():
    # r2(n) = 4 (d_1(n) - d_3(n)) via sympy factorization, r^2 <= 50
    import sympy

    mult = lattice_multiplicity(50)
    for n in range(1, 51):
        d1 = d3 = 0
        for d in sympy.divisors(n):
            if d % 4 == 1:
                d1 += 1
            elif d % 4 == 3:
                d3 += 1
        assert mult[n] == 4 * (d1 - d3), n
    assert mult[0] == 1
    assert mult[3] == 0 and mult[6] == 0  # not sums of two squares


def test_g1_estimate_normalization_and_exclusions():
    hist = G1Histogram(
        L=6,
        r2_counts_mean=np.array([5.0, 8.0, 4.0, 0.0, 2.0, 4.0]),
        r2_counts_err=np.zeros(6),
        replicas=1,
        samples_per_replica=np.array([23.0]),
        acceptance={},
    )
    r2, vals, errs = g1_estimate(hist)
    assert 3 not in r2  # unrealizable squared norm excluded from the support
    i1 = int(np.nonzero(r2 == 1)[0][0])
    assert vals[i1] == 1.0  # G1 at unit separation normalized to one
    i0 = int(np.nonzero(r2 == 0)[0][0])
    assert vals[i0] == (5.0 / 1.0) / (8.0 / 4.0)


def test_g1_at_ratio_missing_bin():
    hist = G1Histogram(
        L=40,
        r2_counts_mean=np.concatenate([[0.0], [8.0], np.zeros(3200)]),
        r2_counts_err=np.zeros(3202),
        replicas=1,
        samples_per_replica=np.array([8.0]),
        acceptance={},
    )
    with pytest.raises(LookupError):
        g1_at_ratio(hist, 0.25)


def test_zero_measurement_sweeps_well_formed():
    rc = RunConfig(L=4, p=0.3, K=0.4, tau=1.5, warmup_sweeps=2, measure_sweeps=0,
                   n_replicas=2, seed=3)
    hist = run_protocol(rc)
    assert hist.warning == "measurement shorter than warmup"
    assert hist.r2_counts_mean.sum() == 0.0
    assert hist.samples_per_replica.tolist() == [0.0, 0.0]


def test_replica_reproducibility():
    rc = RunConfig(L=4, p=0.3, K=0.4, tau=1.5, warmup_sweeps=5, measure_sweeps=50,
                   n_replicas=3, seed=77, sample_stride=2)
    h1 = run_protocol(rc)
    h2 = run_protocol(rc)
    assert np.array_equal(h1.r2_counts_mean, h2.r2_counts_mean)
    # replica partition invariance of the pooled histogram
    rc1 = RunConfig(L=4, p=0.3, K=0.4, tau=1.5, warmup_sweeps=5, measure_sweeps=50,
                    n_replicas=1, seed=77, sample_stride=2)
    single = run_protocol(rc1)
    assert np.array_equal(single.r2_counts_mean * 1.0, np.stack([single.r2_counts_mean]).mean(0))
