"""Command-line front end.

Subcommands: eigen, simulate-dt, simulate-ct, connection-test, fixpoint,
charfix, cascade, expmoments, moments, odecheck, analyze, report.  Global
flags (--m, --seed, --threads, --out) are accepted by every subcommand;
MST_LIMITS_THREADS is the environment fallback for --threads.

Sample data is written as CSV (complex values as paired re/im columns),
reports as JSON with a versioned ``schema`` field.  A fixed seed
reproduces byte-identical outputs: all computations run single-threaded
and every subcommand derives its random streams from (seed, task label),
so adding tasks never perturbs existing streams.
"""

import argparse
import csv
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import analysis, cascade, fixpoint, moments, spectral, stats, treesim, verification


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, np.complexfloating):
        return _jsonable(complex(obj))
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(payload, out_path):
    _emit(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", out_path)


def _write_csv(rows, header, out_path):
    if out_path:
        fh = open(out_path, "w", newline="")
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if out_path:
            fh.close()


def _resolve_threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("MST_LIMITS_THREADS")
    return int(env) if env else 1


def _resolve_lambda(args, m):
    if args.lam in (None, "auto"):
        return spectral.lambda2_of(m)
    re, im = (float(v) for v in args.lam.split(","))
    return complex(re, im)


def _parse_x0(args, m):
    if args.x0 is None:
        return treesim.CompositionVector.unit(m)
    vec = np.array([int(v) for v in args.x0.split(",")], dtype=np.int64)
    return treesim.CompositionVector(m, vec)


def _fmt(x):
    return repr(float(x))


# --------------------------------------------------------------------------
# subcommand handlers
# --------------------------------------------------------------------------


def _cmd_eigen(args):
    m = args.m
    ev = spectral.eigenvalues(m)
    resid = spectral.residuals(m, ev)
    try:
        lam2 = spectral.lambda2_of(m)
    except (spectral.NoSecondEigenvalueError, spectral.SpectralError):
        lam2 = None
    if args.csv:
        rows = [(_fmt(e.real), _fmt(e.imag), _fmt(r)) for e, r in zip(ev, resid)]
        _write_csv(rows, ["re", "im", "residual"], args.out)
        return 0
    payload = {
        "schema": 1,
        "m": m,
        "eigenvalues": [complex(e) for e in ev],
        "lambda2": complex(lam2) if lam2 is not None else None,
        "sigma2": lam2.real if lam2 is not None else None,
        "residuals": [float(r) for r in resid],
    }
    _emit_json(payload, args.out)
    return 0


def _cmd_simulate_dt(args):
    m = args.m
    x0 = _parse_x0(args, m)
    rng = stats.seed_substream(args.seed, "simulate-dt")
    finals = treesim.dt_simulate_batch(m, x0, args.n, args.reps, rng)
    try:
        sp = spectral.eigen_data(m)
        gamma_n = treesim.discrete_normalizer(sp.lambda2, x0.gap_count(), args.n)
        wdt = (finals @ sp.u2_coeffs) / gamma_n
    except (spectral.NoSecondEigenvalueError, spectral.SpectralError):
        wdt = None
    header = ["rep"] + [f"x{k}" for k in range(1, m)]
    if wdt is not None:
        header += ["wdt_re", "wdt_im"]
    rows = []
    for r in range(args.reps):
        row = [r] + [int(v) for v in finals[r]]
        if wdt is not None:
            row += [_fmt(wdt[r].real), _fmt(wdt[r].imag)]
        rows.append(row)
    _write_csv(rows, header, args.out)
    return 0


def _cmd_simulate_ct(args):
    m = args.m
    sp = spectral.eigen_data(m)
    x0 = _parse_x0(args, m)
    rng = stats.seed_substream(args.seed, "simulate-ct")
    xi, w, wdt = treesim.ct_limit_batch(m, x0, args.n, args.reps, sp, rng)
    rows = [
        (
            r,
            _fmt(xi[r]),
            _fmt(w[r].real),
            _fmt(w[r].imag),
            _fmt(wdt[r].real),
            _fmt(wdt[r].imag),
        )
        for r in range(args.reps)
    ]
    _write_csv(rows, ["rep", "xi_hat", "w_re", "w_im", "wdt_re", "wdt_im"], args.out)
    return 0


def _cmd_connection_test(args):
    m = args.m
    sp = spectral.eigen_data(m)
    x0 = treesim.CompositionVector.unit(m)
    n, reps = args.n, args.reps
    _, w, _ = treesim.ct_limit_batch(
        m, x0, n, reps, sp, stats.seed_substream(args.seed, "connection-w")
    )
    tau = treesim.ct_final_jump_time_batch(
        n, 1, reps, stats.seed_substream(args.seed, "connection-xi")
    )
    xi = n * np.exp(-tau)
    finals = treesim.dt_simulate_batch(
        m, x0, n, reps, stats.seed_substream(args.seed, "connection-wdt")
    )
    gamma_n = treesim.discrete_normalizer(sp.lambda2, 1, n)
    wdt = (finals @ sp.u2_coeffs) / gamma_n
    report = treesim.martingale_connection_test(
        xi,
        wdt,
        w,
        sp,
        n0=1,
        n_steps=n,
        n_permutations=args.permutations,
        rng=stats.seed_substream(args.seed, "connection-perm"),
    )
    _emit_json(
        {
            "schema": 1,
            "m": m,
            "n": n,
            "reps": reps,
            "statistic": report.statistic,
            "p_value": report.p_value,
            "permutations": report.n_permutations,
        },
        args.out,
    )
    return 0 if report.p_value > 0.01 else 1


def _cmd_fixpoint(args):
    m = args.m
    lam = _resolve_lambda(args, m)
    rng = stats.seed_substream(args.seed, "fixpoint")
    pool, diags = fixpoint.iterate_to_fixpoint(
        m,
        lam,
        pool_size=args.pool,
        iters=args.iters,
        C=complex(args.mean),
        rng=rng,
        variant=args.variant,
        track_d2star=not args.no_diagnostics,
    )
    rows = [
        (i, _fmt(z.real), _fmt(z.imag)) for i, z in enumerate(pool.points)
    ]
    _write_csv(rows, ["index", "re", "im"], args.out)
    summary = {
        "schema": 1,
        "m": m,
        "lambda": complex(lam),
        "variant": args.variant,
        "pool": args.pool,
        "iters": args.iters,
        "final_mean": pool.mean(),
        "final_variance": pool.second_central_moment(),
        "contraction": diags.contraction,
        "contracting": diags.contracting,
    }
    sys.stderr.write(json.dumps(_jsonable(summary), sort_keys=True) + "\n")
    return 0


def _cmd_charfix(args):
    m = args.m
    lam = _resolve_lambda(args, m)
    grid = fixpoint.make_char_grid(
        rmin=args.rmin,
        rmax=args.rmax,
        n_radii=args.nr,
        n_angles=args.ntheta,
        C=complex(args.mean),
    )
    grid = fixpoint.char_iteration(
        m, lam, grid, iters=args.iters, quad_order=args.quad_order
    )
    rows = []
    for i, r in enumerate(grid.radii):
        for j, th in enumerate(grid.angles):
            v = grid.values[i, j]
            rows.append((_fmt(r), _fmt(th), _fmt(v.real), _fmt(v.imag)))
    _write_csv(rows, ["radius", "angle", "re", "im"], args.out)
    return 0


def _cmd_cascade(args):
    m = args.m
    lam = _resolve_lambda(args, m)
    cfg = cascade.CascadeConfig(m, lam, depth=args.depth, replicas=args.reps)
    samples = cascade.cascade_batch(cfg, stats.seed_substream(args.seed, "cascade"))
    rows = [(i, _fmt(z.real), _fmt(z.imag)) for i, z in enumerate(samples)]
    _write_csv(rows, ["index", "re", "im"], args.out)
    return 0


def _read_samples_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)


def _cmd_expmoments(args):
    z = _read_samples_csv(args.infile)
    radii = np.geomspace(args.eps / 8.0, args.eps, 4)
    angles = np.arange(8) * (np.pi / 4)
    tgrid = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    report = cascade.exp_moment_probe(z, tgrid, blocks=10)
    payload = {
        "schema": 1,
        "eps": args.eps,
        "c_hat": report.c_hat,
        "pairing_bound_ok": report.pairing_bound_ok,
        "modulus_bound_ok": report.modulus_bound_ok,
        "modulus_checked": report.modulus_checked,
        "failing_t": [complex(t) for t in report.failing_t],
        "n_samples": report.n_samples,
    }
    _emit_json(payload, args.out)
    return 0 if report.pairing_bound_ok and report.modulus_bound_ok else 1


def _cmd_moments(args):
    table = moments.moment_table(args.m, args.pmax)
    entries = [
        {"k": k, "p": p, "re": table.a[k - 1, p].real, "im": table.a[k - 1, p].imag}
        for k in range(1, args.m)
        for p in range(args.pmax + 1)
    ]
    payload = {
        "schema": 1,
        "m": args.m,
        "pmax": args.pmax,
        "lambda2": complex(table.lambda2),
        "scaled_moments": entries,
    }
    _emit_json(payload, args.out)
    return 0


def _cmd_odecheck(args):
    report = moments.ode_check(args.m, args.pmax)
    payload = {
        "schema": 1,
        "m": args.m,
        "pmax": args.pmax,
        "rho": complex(report.rho),
        "max_rel_residual": report.max_rel_residual,
    }
    _emit_json(payload, args.out)
    return 0 if report.max_rel_residual <= 1e-8 else 1


def _cmd_analyze(args):
    z = _read_samples_csv(args.infile)
    payload = {"schema": 1, "n_samples": int(z.size)}
    rng = stats.seed_substream(args.seed, "analyze")
    if args.psi:
        radii = np.concatenate([[0.0], np.geomspace(args.psi_rmin, args.psi_rmax, 24)])
        try:
            prof = analysis.psi_profile(z, radii, n_angles=64, rng=rng)
            payload["psi"] = {
                "radii": [float(r) for r in prof.radii],
                "psi_hat": [float(v) for v in prof.psi_hat],
                "noise": prof.noise,
                "fit_exponent": prof.fit_exponent,
                "fit_window": prof.fit_window,
            }
        except analysis.UninformativeProfileError as exc:
            payload["psi"] = {"error": str(exc)}
    if args.coverage:
        cov = analysis.support_coverage(z, args.annuli, args.sectors, args.rmax)
        payload["coverage"] = {
            "occupancy": cov.occupancy,
            "n_inside": cov.n_inside,
            "rmax": cov.rmax,
            "counts": cov.counts,
        }
    if args.spiral:
        lam2 = spectral.lambda2_of(args.m)
        u = rng.random((args.spiral_targets, 2))
        targets = np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1]) * 0.999
        ws = analysis.spiral_density(args.m, lam2, targets, eps=args.spiral_eps)
        payload["spiral"] = {
            "found": int(sum(w.found for w in ws)),
            "targets": int(len(ws)),
            "witnesses": [
                {
                    "target": complex(w.target),
                    "found": bool(w.found),
                    "n": int(w.n),
                    "k": int(w.k),
                    "t": float(w.t),
                    "distance": float(w.distance),
                }
                for w in ws
            ],
        }
    _emit_json(payload, args.out)
    return 0


def _cmd_report(args):
    report = verification.run_report(args.m, args.seed)
    gates = [
        {
            "name": g.name,
            "status": g.status(),
            "passed": bool(g.passed),
            "skipped": bool(g.skipped),
            "reason": g.reason,
            "runtime_s": g.runtime_s,
            "details": g.details,
        }
        for g in report["gates"]
    ]
    payload = dict(report)
    payload["gates"] = gates
    exit_code = payload.pop("exit_code")
    _emit_json(payload, args.out)
    return exit_code


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mst-limits",
        description="Spectral data, simulation and fixed-point analysis for "
        "the multitype branching process of m-ary search trees.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int, default=27, help="branching factor (default 27)")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (default: MST_LIMITS_THREADS or 1; current "
        "implementation is deterministic and single-threaded either way)",
    )
    common.add_argument("--out", default=None, help="output path (default stdout)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigen", parents=[common], help="spectral data and residuals")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", default=True)
    fmt.add_argument("--csv", action="store_true", default=False)
    p.set_defaults(func=_cmd_eigen)

    p = sub.add_parser("simulate-dt", parents=[common], help="discrete chain runs")
    p.add_argument("--n", type=int, default=1000, help="steps per replica")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--x0", default=None, help="initial counts, e.g. 1,0,0")
    p.set_defaults(func=_cmd_simulate_dt)

    p = sub.add_parser("simulate-ct", parents=[common], help="embedded runs with limit estimates")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--x0", default=None)
    p.set_defaults(func=_cmd_simulate_ct)

    p = sub.add_parser("connection-test", parents=[common], help="limit-identity permutation test")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--permutations", type=int, default=299)
    p.set_defaults(func=_cmd_connection_test)

    p = sub.add_parser("fixpoint", parents=[common], help="population-dynamics fixed point")
    p.add_argument("--lambda", dest="lam", default="auto", help="'auto' or 're,im'")
    p.add_argument("--variant", choices=["ct", "dt"], default="ct")
    p.add_argument("--pool", type=int, default=100000)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--mean", type=float, default=1.0, help="target mean C")
    p.add_argument("--no-diagnostics", action="store_true")
    p.set_defaults(func=_cmd_fixpoint)

    p = sub.add_parser("charfix", parents=[common], help="characteristic-function iteration")
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--rmin", type=float, default=0.05)
    p.add_argument("--rmax", type=float, default=10.0)
    p.add_argument("--nr", type=int, default=48)
    p.add_argument("--ntheta", type=int, default=32)
    p.add_argument("--quad-order", type=int, default=64)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--mean", type=float, default=1.0)
    p.set_defaults(func=_cmd_charfix)

    p = sub.add_parser("cascade", parents=[common], help="replication-martingale samples")
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--reps", type=int, default=10000)
    p.set_defaults(func=_cmd_cascade)

    p = sub.add_parser("expmoments", parents=[common], help="exponential-moment probe")
    p.add_argument("--in", dest="infile", required=True, help="samples CSV (index,re,im)")
    p.add_argument("--eps", type=float, default=0.1)
    p.set_defaults(func=_cmd_expmoments)

    p = sub.add_parser("moments", parents=[common], help="scaled complex moment table")
    p.add_argument("--pmax", type=int, default=8)
    p.add_argument("--json", action="store_true", default=True)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("odecheck", parents=[common], help="series ODE identity residual")
    p.add_argument("--pmax", type=int, default=8)
    p.set_defaults(func=_cmd_odecheck)

    p = sub.add_parser("analyze", parents=[common], help="density/support diagnostics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--psi", action="store_true")
    p.add_argument("--coverage", action="store_true")
    p.add_argument("--spiral", action="store_true")
    p.add_argument("--psi-rmin", type=float, default=0.01)
    p.add_argument("--psi-rmax", type=float, default=5.0)
    p.add_argument("--annuli", type=int, default=8)
    p.add_argument("--sectors", type=int, default=16)
    p.add_argument("--rmax", type=float, default=2.0)
    p.add_argument("--spiral-targets", type=int, default=100)
    p.add_argument("--spiral-eps", type=float, default=1e-2)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("report", parents=[common], help="end-to-end verification report")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.threads_resolved = _resolve_threads(args)
    try:
        return args.func(args)
    except (
        spectral.SpectralError,
        spectral.NoSecondEigenvalueError,
        fixpoint.FixpointError,
        moments.MomentError,
        analysis.AnalysisError,
        treesim.SimulationError,
    ) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
