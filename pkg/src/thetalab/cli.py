"""Command-line front end: queries, spectra, sweeps, sampling, and pinned
reproduction pipelines.

Every invocation that writes artifacts also writes a run manifest capturing
the command line, the fully resolved configuration, package version, seeds,
thread count, wall time, and SHA-256 hashes of every artifact, so a run can
be reproduced and compared bit for bit (at a fixed thread count).

Floating-point output is printed with 17 significant digits to make hash
comparison meaningful.  A plain key=value config file can pre-set any flag;
explicit flags win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, analysis, cftpred, linkstate, looptm, mcvisaw, vertextm, weights

_REPRO_IDS = (
    "c0-thetabn",
    "watermelon-thetabn",
    "crosscheck-L3",
    "virial",
    "density-sweep",
    "g1-thetads",
    "g1-thetabn",
    "thetads-gap",
)

_POINT_ALIASES = {
    "theta-bn": "ThetaBN",
    "dense": "Dense",
    "dilute": "Dilute",
    "regime2": "RegimeII",
    "theta-ds": "ThetaDS",
}


def _fmt(x):
    """17-significant-digit rendering for floats; passthrough otherwise."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, complex):
        return f"{_fmt(x.real)}{'+' if x.imag >= 0 else '-'}{_fmt(abs(x.imag))}j"
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(_fmt(obj))
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, complex):
        return {"re": float(_fmt(obj.real)), "im": float(_fmt(obj.imag))}
    return obj


def _dump_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def _csv(rows, header):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(_fmt(x)) for x in row))
    return "\n".join(lines) + "\n"


class _Artifacts:
    """Collects output files and writes them with a manifest."""

    def __init__(self, outdir, argv, config):
        self.outdir = outdir
        self.argv = argv
        self.config = config
        self.files = {}
        self.t0 = time.time()
        self.seeds = []

    def add(self, name, content):
        self.files[name] = content

    def flush(self):
        if self.outdir is None:
            return
        os.makedirs(self.outdir, exist_ok=True)
        hashes = {}
        for name, content in self.files.items():
            path = os.path.join(self.outdir, name)
            with open(path, "w") as f:
                f.write(content)
            hashes[name] = hashlib.sha256(content.encode()).hexdigest()
        manifest = {
            "command": self.argv,
            "config": _jsonable(self.config),
            "version": __version__,
            "seeds": self.seeds,
            "threads": int(os.environ.get("THETALAB_THREADS", "0")) or (os.cpu_count() or 1),
            "wall_time_s": float(_fmt(time.time() - self.t0)),
            "outputs": hashes,
        }
        with open(os.path.join(self.outdir, "manifest.json"), "w") as f:
            f.write(_dump_json(manifest))


def _resolve_point(name):
    tag = _POINT_ALIASES.get(name, name)
    if tag not in weights.NAMED_POINT_TAGS:
        raise SystemExit(_error(f"unknown point {name!r}"))
    return tag


def _error(msg):
    print(json.dumps({"error": msg}), file=sys.stderr)
    return 2


# ---------------------------------------------------------------- commands


def cmd_weights(args, art):
    if args.point:
        tag = _resolve_point(args.point)
        pt, w = weights.named_point(tag)
    else:
        if args.gamma is None:
            raise SystemExit(_error("need --point or --gamma"))
        up, um = weights.isotropic_points(args.gamma)
        u = up if args.branch == "plus" else um
        w = weights.zb_weights(args.gamma, u)
    cpl = w.couplings()
    rec = {
        "rho": list(w.rho),
        "n": w.n,
        "p": cpl.p,
        "K": cpl.K,
        "tau": cpl.tau,
        "w": cpl.w,
    }
    out = _dump_json(rec)
    print(out)
    art.add("weights.json", out)
    return 0


def cmd_basis(args, art):
    if args.ell is not None:
        b = linkstate.enumerate_sector(args.L, args.ell, annular=args.annular)
        row = [args.L, args.ell, b.dim]
        content = _csv([row], ["L", "ell", "dim"])
    else:
        table = linkstate.dimension_table(args.L, annular=args.annular)
        row = table[-1]
        print(",".join(map(str, row)))
        content = _csv(table, ["L"] + [f"ell{j}" for j in range(args.L + 1)])
        art.add("dimensions.csv", content)
        return 0
    print(content.strip().splitlines()[-1])
    art.add("dimensions.csv", content)
    return 0


def _twist_value(spec_str, n):
    """Parse --twist loop|none|phi=X into a non-contractible weight."""
    if spec_str == "loop":
        return n
    if spec_str == "none":
        return 2.0
    if spec_str.startswith("phi="):
        return float(2.0 * np.cos(float(spec_str[4:])))
    raise SystemExit(_error(f"bad twist spec {spec_str!r}"))


def cmd_spectrum(args, art):
    tag = _resolve_point(args.point)
    pt, w = weights.named_point(tag)
    a, b = (args.L, args.L) if args.L2 is None else (args.L, args.L2)
    rows = []
    for L in range(a, b + 1, args.Lstep):
        nnc = _twist_value(args.twist, w.n)
        pk = looptm.leading_eigenvalues(w, L, args.ell, n_nc=nnc, k=args.count)
        for r, (val, res) in enumerate(zip(pk.values, pk.residuals)):
            rows.append([L, args.ell, r, val.real, val.imag, res])
    content = _csv(rows, ["L", "ell", "rank", "eig_re", "eig_im", "residual"])
    print(content, end="")
    art.add("spectrum.csv", content)
    return 0


def cmd_vertex_spectrum(args, art):
    x = vertextm.isotropic_x(args.gamma, args.branch)
    pk = vertextm.transfer_spectrum(args.gamma, x, args.L, args.m, phi=args.phi)
    rows = [[args.L, args.m, r, v.real, v.imag] for r, v in enumerate(pk.values)]
    content = _csv(rows, ["L", "m", "rank", "eig_re", "eig_im"])
    print(content, end="")
    art.add("vertex_spectrum.csv", content)
    return 0


def cmd_crosscheck(args, art):
    gamma = args.gamma
    x = vertextm.isotropic_x(gamma, args.branch)
    pt, w = weights.named_point("ThetaBN") if abs(gamma - np.pi / 4) < 1e-12 and args.branch == "minus" else (None, None)
    if w is None:
        up, um = weights.isotropic_points(gamma)
        w = weights.zb_weights(gamma, up if args.branch == "plus" else um)
    phi_loop = weights.twist_for_loop_weight(gamma).phi
    worst = 0.0
    rows = []
    for ell in range(0, args.L + 1):
        if ell == 0:
            op = looptm.RowOperator(weights=w, L=args.L, ell=0, n_nc=w.n)
            phi = phi_loop
        else:
            op = looptm.RowOperator(weights=w, L=args.L, ell=ell)
            phi = 0.0
        lv = np.linalg.eigvals(looptm.dense_matrix(op))
        vv = vertextm.transfer_spectrum(gamma, x, args.L, ell, phi=phi).values
        mism = max(min(abs(l - v) for v in vv) for l in lv)
        worst = max(worst, mism)
        rows.append([args.L, ell, len(lv), len(vv), mism])
    content = _csv(rows, ["L", "ell", "loop_dim", "vertex_dim", "max_mismatch"])
    print(content, end="")
    print(f"worst mismatch: {_fmt(worst)}")
    art.add("crosscheck.csv", content)
    return 0 if worst < 1e-10 else 1


def cmd_predict(args, art):
    what = args.what
    g = args.gamma if args.gamma is not None else np.pi / 4
    if what == "watermelon":
        rec = {"gamma": g, "m": args.m, "x_m": cftpred.watermelon(g, args.m)}
    elif what == "ceff":
        rec = {
            "gamma": g, "m": args.m, "j": args.j, "L": args.L, "B": args.B,
            "c_eff": cftpred.ceff_continuum(g, args.m, args.j, args.L, args.B),
            "A": cftpred.coupling_A(g), "N": cftpred.N_mj(args.m, args.j),
        }
    elif what == "cg":
        rec = {
            "g": args.g, "e0": args.e0, "e": args.e, "m": args.m,
            "x": cftpred.coulomb_gas(args.g, args.e0, args.e, args.m),
            "c": cftpred.coulomb_gas_central_charge(args.g, args.e0),
        }
    elif what == "blackhole":
        d, db = cftpred.blackhole_dimension(args.k, args.j_bh, args.n_bh, args.w)
        rec = {"k": args.k, "j": args.j_bh, "n": args.n_bh, "w": args.w,
               "Delta": d, "DeltaBar": db, "nu": cftpred.nu_of_level(args.k)}
    elif what == "virial":
        a1, a2 = cftpred.virial_prediction()
        rec = {"a1": a1, "a2": a2}
    elif what == "exponents":
        e = cftpred.polymer_exponents(args.point_name)
        rec = {k: [v.numerator, v.denominator] for k, v in e.items()}
    else:
        raise SystemExit(_error(f"unknown prediction {what!r}"))
    out = _dump_json(rec)
    print(out)
    art.add("predict.json", out)
    return 0


def cmd_mc(args, art):
    if args.point == "custom":
        p, K, tau = args.p, args.K, args.tau
    else:
        tag = _resolve_point(args.point)
        pt, w = weights.named_point(tag)
        cpl = pt.couplings
        p, K, tau = cpl.p, cpl.K, cpl.tau
    rc = mcvisaw.RunConfig(
        L=args.L, p=p, K=K, tau=tau, seed=args.seed,
        warmup_sweeps=args.warmup, measure_sweeps=args.sweeps,
        n_replicas=args.replicas, sample_stride=args.stride,
    )
    hist = mcvisaw.run_protocol(rc)
    art.seeds.append(args.seed)
    r2, vals, errs = mcvisaw.g1_estimate(hist)
    rows = [[int(a), b, c] for a, b, c in zip(r2, vals, errs) if b > 0]
    content = _csv(rows, ["r2", "G1", "err"])
    art.add("g1_histogram.csv", content)
    rec = {
        "L": args.L, "p": p, "K": K, "tau": tau, "seed": args.seed,
        "warmup_sweeps": rc.warmup_sweeps, "measure_sweeps": rc.measure_sweeps,
        "replicas": rc.n_replicas, "sample_stride": rc.sample_stride,
        "acceptance": hist.acceptance,
        "samples_per_replica": hist.samples_per_replica.tolist(),
        "warning": hist.warning,
    }
    out = _dump_json(rec)
    print(out)
    art.add("mc_run.json", out)
    return 0


def cmd_fit(args, art):
    data = np.loadtxt(args.infile, delimiter=",", skiprows=1)
    series = [(row[0], row[1]) for row in data]
    sigma = data[:, 2] if data.shape[1] > 2 and args.use_errors else None
    if args.model == "central-charge":
        rep = analysis.fit_central_charge(series, tail=args.tail)
    elif args.model == "g1-powerlaw":
        rep = analysis.fit_g1(series, model="powerlaw", x1=args.x1, sigma=sigma)
    elif args.model == "g1-logcorrected":
        rep = analysis.fit_g1(series, model="logcorrected", x1=args.x1, sigma=sigma)
    elif args.model == "ceff-log":
        rep = analysis.fit_ceff_log(series, args.gamma, args.m, args.j, fit_A=not args.fix_A)
    else:
        raise SystemExit(_error(f"unknown model {args.model!r}"))
    rec = {
        "model": rep.model, "params": rep.params, "errors": rep.errors,
        "chi2": rep.chi2, "dof": rep.dof, "chi2_per_dof": rep.chi2_per_dof,
        "meta": {k: v for k, v in rep.meta.items() if isinstance(v, (str, int, float, bool))},
    }
    out = _dump_json(rec)
    print(out)
    art.add("fit.json", out)
    return 0


def cmd_density_sweep(args, art):
    tag = _resolve_point(args.point)
    pt, w = weights.named_point(tag)
    lo, hi, step = (float(s) for s in args.K.split(":"))
    K_grid = np.arange(lo, hi + 1e-12, step)
    L_list = [int(s) for s in args.L.split(",")]
    nnc = _twist_value(args.twist, w.n)
    sweep = analysis.density_sweep(pt.couplings, L_list, K_grid, n_nc=nnc, n=w.n)
    rows = []
    for L in L_list:
        for i, K in enumerate(K_grid):
            rows.append([L, K, sweep.f0[L][i], sweep.density[L][i], sweep.gap[L][i]])
    content = _csv(rows, ["L", "K", "f0", "density", "gap"])
    art.add("density_sweep.csv", content)
    rec = {"crossing": {str(L): sweep.crossing[L] for L in L_list},
           "jump": {str(L): sweep.jump[L] for L in L_list}}
    out = _dump_json(rec)
    print(out)
    art.add("density_summary.json", out)
    return 0


def cmd_virial(args, art):
    tag = _resolve_point(args.point)
    pt, w = weights.named_point(tag)
    L_list = [int(s) for s in args.L.split(",")]
    rep = analysis.virial_coefficients(w, L_list)
    rec = {"a1": rep.params["a1"], "a2": rep.params["a2"],
           "a1_sequence": rep.meta["a1_sequence"], "a2_sequence": rep.meta["a2_sequence"],
           "a2_positive_from_L6": rep.meta["a2_positive_from_L6"]}
    out = _dump_json(rec)
    print(out)
    art.add("virial.json", out)
    return 0


def cmd_reproduce(args, art):
    """Pinned desk-scale reproduction pipelines (smaller than the acceptance
    suite, same machinery)."""
    rid = args.id
    if rid not in _REPRO_IDS:
        raise SystemExit(_error(f"unknown experiment id {rid!r}; choose from {_REPRO_IDS}"))
    ptBN, wBN = weights.named_point("ThetaBN")
    ptDS, wDS = weights.named_point("ThetaDS")
    if rid == "c0-thetabn":
        Ls = [4, 6, 8, 10, 12]
        ser = looptm.free_energy_series(wBN, 0, Ls, n_nc=0.0)
        rep = analysis.fit_central_charge(ser)
        rec = {"series": ser, "c": rep.params["c"], "f_inf": rep.params["f_inf"]}
    elif rid == "watermelon-thetabn":
        Ls = [4, 6, 8, 10, 12]
        ser = looptm.free_energy_series(wBN, 2, Ls)
        xs = [(L, L * L * f / (2 * np.pi)) for L, f in ser]
        rep = analysis.fit_gap_log(xs, A=cftpred.coupling_A(np.pi / 4))
        rec = {"x2_sequence": xs, "x2": rep.params["x_inf"], "B": rep.params["B"]}
    elif rid == "crosscheck-L3":
        ns = argparse.Namespace(L=3, gamma=np.pi / 4, branch="minus")
        return cmd_crosscheck(ns, art)
    elif rid == "virial":
        rep = analysis.virial_coefficients(wBN, [4, 6, 8, 10])
        rec = {"a1": rep.params["a1"], "a2": rep.params["a2"],
               "a1_sequence": rep.meta["a1_sequence"], "a2_sequence": rep.meta["a2_sequence"]}
    elif rid == "density-sweep":
        Kbn = ptBN.couplings.K
        K_grid = np.linspace(0.9 * Kbn, 1.1 * Kbn, 13)
        sweep = analysis.density_sweep(ptBN.couplings, [6, 8], K_grid, n_nc=0.0)
        rec = {"crossing": {str(L): sweep.crossing[L] for L in [6, 8]},
               "jump": {str(L): sweep.jump[L] for L in [6, 8]},
               "K_BN": Kbn}
    elif rid in ("g1-thetads", "g1-thetabn"):
        pt = ptDS if rid == "g1-thetads" else ptBN
        cpl = pt.couplings
        series = []
        for L in (12, 16, 20, 24):
            rc = mcvisaw.RunConfig(L=L, p=cpl.p, K=cpl.K, tau=cpl.tau,
                                   measure_sweeps=20000, n_replicas=6, seed=args.seed)
            art.seeds.append(args.seed)
            hist = mcvisaw.run_protocol(rc)
            val, err, r2 = mcvisaw.g1_at_ratio(hist, 0.25)
            series.append((L, float(np.log(val))))
        if rid == "g1-thetads":
            rep = analysis.fit_g1(series, model="powerlaw")
            rec = {"series": series, "x1": rep.params["x1"]}
        else:
            rp = analysis.fit_g1(series, model="powerlaw", x1=-5 / 48)
            rl = analysis.fit_g1(series, model="logcorrected", x1=-5 / 48)
            rec = {"series": series, "chi2_powerlaw": rp.chi2_per_dof,
                   "chi2_logcorrected": rl.chi2_per_dof}
    elif rid == "thetads-gap":
        Ls = [4, 6, 8, 10, 12]
        xs = []
        for L in Ls:
            pk = looptm.leading_eigenvalues(wDS, L, 0, n_nc=0.0, k=2)
            lam = np.sort(pk.values.real)[::-1]
            xs.append((L, L * (np.log(lam[0]) - np.log(lam[1])) * L / (2 * np.pi)))
        rep = analysis.extrapolate_tail([x[0] for x in xs], [x[1] for x in xs])
        rec = {"x_sequence": xs, "x": rep.params["y_inf"]}
    out = _dump_json(rec)
    print(out)
    art.add(f"reproduce_{rid}.json", out)
    return 0


# ---------------------------------------------------------------- wiring


def _load_config(path):
    cfg = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            k, v = line.split("=", 1)
            cfg[k.strip()] = v.strip()
    return cfg


def build_parser():
    ap = argparse.ArgumentParser(prog="thetalab", description=__doc__)
    ap.add_argument("--config", help="key=value config file; flags override")
    ap.add_argument("--out", help="artifact directory (also writes manifest.json)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("weights", help="vertex weights and couplings of a point")
    p.add_argument("--point", help="theta-bn|dense|dilute|regime2|theta-ds")
    p.add_argument("--gamma", type=float)
    p.add_argument("--branch", choices=["plus", "minus"], default="minus")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("basis", help="link-pattern sector dimensions")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--ell", type=int)
    p.add_argument("--annular", action="store_true")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("spectrum", help="loop transfer-matrix eigenvalues")
    p.add_argument("--point", required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--L2", type=int, help="sweep L..L2")
    p.add_argument("--Lstep", type=int, default=2)
    p.add_argument("--ell", type=int, default=0)
    p.add_argument("--twist", default="loop", help="loop|none|phi=X")
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("vertex-spectrum", help="IK transfer-matrix eigenvalues")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--branch", choices=["plus", "minus"], default="minus")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--phi", type=float, default=0.0)
    p.set_defaults(func=cmd_vertex_spectrum)

    p = sub.add_parser("crosscheck", help="loop vs vertex spectral inclusion")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--gamma", type=float, default=np.pi / 4)
    p.add_argument("--branch", choices=["plus", "minus"], default="minus")
    p.set_defaults(func=cmd_crosscheck)

    p = sub.add_parser("predict", help="closed-form continuum predictions")
    p.add_argument("--what", required=True,
                   help="watermelon|ceff|cg|blackhole|virial|exponents")
    p.add_argument("--gamma", type=float)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--B", type=float, default=0.0)
    p.add_argument("--g", type=float, default=2 / 3)
    p.add_argument("--e0", type=float, default=1 / 3)
    p.add_argument("--e", type=float, default=0.0)
    p.add_argument("--k", type=float, default=8.0)
    p.add_argument("--j-bh", type=float, default=-0.5)
    p.add_argument("--n-bh", type=int, default=0)
    p.add_argument("--w", type=int, default=0)
    p.add_argument("--point-name", default="ThetaBN")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("mc", help="grand-canonical VISAW sampling")
    p.add_argument("--point", default="theta-ds")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--sweeps", type=int, default=100000)
    p.add_argument("--warmup", type=int, default=500)
    p.add_argument("--replicas", type=int, default=10)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--seed", type=int, default=20250810)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("fit", help="fit a CSV series")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--x1", type=float)
    p.add_argument("--gamma", type=float, default=np.pi / 4)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--fix-A", action="store_true")
    p.add_argument("--tail", default="auto")
    p.add_argument("--use-errors", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("density-sweep", help="monomer density across a K window")
    p.add_argument("--point", default="theta-bn")
    p.add_argument("--K", required=True, help="lo:hi:step")
    p.add_argument("--L", required=True, help="comma list")
    p.add_argument("--twist", default="loop")
    p.set_defaults(func=cmd_density_sweep)

    p = sub.add_parser("virial", help="second-virial expansion coefficients")
    p.add_argument("--point", default="theta-bn")
    p.add_argument("--L", default="4,6,8,10")
    p.set_defaults(func=cmd_virial)

    p = sub.add_parser("reproduce", help="pinned desk-scale pipelines")
    p.add_argument("id", choices=_REPRO_IDS)
    p.add_argument("--seed", type=int, default=20250810)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    # config file pre-pass: values become defaults, flags override
    if "--config" in argv:
        i = argv.index("--config")
        cfg = _load_config(argv[i + 1])
        extra = []
        for k, v in cfg.items():
            flag = f"--{k.replace('_', '-')}"
            if flag not in argv:
                extra += [flag, v]
        argv = argv[: i + 2] + extra + argv[i + 2 :]
    args = ap.parse_args(argv)
    art = _Artifacts(args.out, ["thetalab"] + argv, vars(args).copy())
    try:
        code = args.func(args, art)
    except SystemExit as e:
        raise
    except Exception as e:  # machine-readable error record
        print(json.dumps({"error": f"{type(e).__name__}: {e}"}), file=sys.stderr)
        return 3
    art.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
