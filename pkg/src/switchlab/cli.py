"""Command-line front end.

Every command writes one file (CSV by default, JSON with ``--format json``)
carrying the reproducibility header of :mod:`switchlab.io`.  Without
``--output`` the file goes to ``$SWITCHLAB_OUTPUT_DIR/<command>.<ext>``
(current directory if unset).  Exit codes: 0 success, 1 numerical failure,
2 invalid arguments.
"""
import argparse
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as sio
from . import __version__
from .errors import (BranchPointError, DomainError, SwitchLabError, ValidationError)


class UsageError(Exception):
    pass


def _grid(text):
    try:
        return sio.parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _map(func, items, jobs):
    """Ordered map, in worker processes when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _emit(args, command, params, columns, rows, data=None):
    ext = "json" if args.format == "json" else "csv"
    path = sio.output_path(args.output, f"{command}.{ext}")
    params = dict(params)
    if ext == "json":
        payload = data if data is not None else [dict(zip(columns, r)) for r in rows]
        text = sio.dump_json(command, params, payload)
    else:
        text = sio.dump_csv(sio.Table(command, params, columns, rows))
    if path == "-":
        sys.stdout.write(text)
        return "<stdout>"
    else:
        sio.write_text(path, text)
    return path


# ---- spectrum / thresholds / weakfit ----------------------------------------

def _variant_args(args):
    from .secular import DELTA, delta, delta_prime

    if args.variant == DELTA:
        if args.beta is not None or args.beta_grid is not None:
            raise UsageError("--beta applies to --variant delta-prime")
        grid = args.lambda_grid if args.lambda_grid is not None else (
            np.array([args.lam]) if args.lam is not None else None)
        make = delta
    else:
        if args.lam is not None or args.lambda_grid is not None:
            raise UsageError("--lambda applies to --variant delta")
        grid = args.beta_grid if args.beta_grid is not None else (
            np.array([args.beta]) if args.beta is not None else None)
        make = delta_prime
    if grid is None:
        raise UsageError("give a coupling (--lambda/--lambda-grid or --beta/--beta-grid)")
    variants = []
    for g in grid:
        try:
            v = make(float(g))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if not v.subcritical and v.strength != 0:
            raise UsageError(f"{v.label()} is not subcritical; the discrete spectrum in (0, 1/2) "
                             "is only defined below the critical coupling")
        variants.append(v)
    return variants


def _spectrum_job(job):
    from .secular import find_spectrum

    variant, N, tol = job
    return find_spectrum(variant, N=N, tol=tol)


def cmd_spectrum(args):
    variants = _variant_args(args)
    scans = _map(_spectrum_job, [(v, args.N, args.tol) for v in variants], args.jobs)
    k = max([s.count for s in scans] + [0])
    columns = ["coupling", "N", "convergence_gap", "count"] + [f"eps_{j}" for j in range(1, k + 1)]
    rows = []
    for s in scans:
        eig = [float(e) for e in s.eigenvalues]
        rows.append([s.variant.strength, s.N, s.convergence_gap, s.count] + eig + [None] * (k - len(eig)))
    params = dict(variant=args.variant, N=args.N, tol=args.tol,
                  couplings=[v.strength for v in variants])
    path = _emit(args, "spectrum", params, columns, rows)
    for s in scans:
        flags = " (near threshold: truncation-sensitive)" if s.near_threshold.any() else ""
        print(f"{s.variant.label()}: {s.count} eigenvalue(s){flags}")
    print(f"wrote {path}")
    return 0


def _threshold_job(job):
    from .secular import coupling_threshold

    kind, j, N, tol = job
    return coupling_threshold(kind, j, N, tol=tol)


def cmd_thresholds(args):
    if any(j < 2 for j in args.j):
        raise UsageError("--j values must be >= 2")
    values = _map(_threshold_job, [(args.variant, j, args.N, args.tol) for j in args.j], args.jobs)
    rows = [[j, v, args.N] for j, v in zip(args.j, values)]
    path = _emit(args, "thresholds", dict(variant=args.variant, N=args.N, tol=args.tol, j=args.j),
                 ["j", "threshold", "N"], rows)
    for j, v in zip(args.j, values):
        print(f"j={j}: {v:.10f}")
    print(f"wrote {path}")
    return 0


def cmd_weakfit(args):
    from .secular import DELTA, weak_coupling_fit

    if args.variant == DELTA:
        lo, hi = args.lambda_min, args.lambda_max
        if not 0 < lo < hi:
            raise UsageError("need 0 < --lambda-min < --lambda-max")
    else:
        lo, hi = args.beta_min, args.beta_max
        if not 2 * math.sqrt(2) < lo < hi:
            raise UsageError("need 2 sqrt 2 < --beta-min < --beta-max")
    grid = np.linspace(lo, hi, args.points)
    fit = weak_coupling_fit(args.variant, grid, N=args.N, corrected=not args.plain)
    rows = [[g, mu] for g, mu in zip(fit.couplings, fit.depths)]
    params = dict(variant=args.variant, range=[lo, hi], points=args.points, N=args.N,
                  corrected=not args.plain)
    data = dict(exponent=fit.exponent, coefficient=fit.coefficient, correction=fit.correction,
                correction_power=fit.correction_power, rms_residual=fit.rms_residual,
                points=[dict(coupling=g, depth=mu) for g, mu in rows])
    params.update(exponent=fit.exponent, coefficient=fit.coefficient)
    path = _emit(args, "weakfit", params, ["coupling", "depth"], rows, data=data)
    print(f"exponent {fit.exponent:.6f}")
    print(f"coefficient {fit.coefficient:.8f}")
    print(f"wrote {path}")
    return 0


# ---- gamma_p ----------------------------------------------------------------

def _gamma_job(job):
    from .schrodinger1d import gamma_p

    p, tol = job
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return gamma_p(p, tol=tol, with_error=True)


def cmd_gamma(args):
    from .schrodinger1d import gamma_minimum

    ps = args.p_grid
    if np.any(ps < 1):
        raise UsageError("p must be >= 1")
    vals = _map(_gamma_job, [(float(p), args.tol) for p in ps], args.jobs)
    rows = [[float(p), g, e] for p, (g, e) in zip(ps, vals)]
    params = dict(p_grid=[float(p) for p in ps], tol=args.tol)
    if args.minimum:
        pm, gm = gamma_minimum()
        params.update(p_min=pm, gamma_min=gm)
        print(f"minimum gamma_p = {gm:.8f} at p = {pm:.5f}")
    path = _emit(args, "gamma", params, ["p", "gamma_p", "error"], rows)
    print(f"wrote {path}")
    return 0


# ---- trap2d -----------------------------------------------------------------

def cmd_trap2d(args):
    from . import trap2d as t2
    from .wavefields import write_field_csv

    if args.critical == (args.lam is not None):
        raise UsageError("give exactly one of --critical and --lambda")
    try:
        pot = t2.TrapPotential.critical(args.p) if args.critical else t2.TrapPotential(args.p, args.lam)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    R_grid = args.R_grid
    h = args.h if args.h is not None else min(0.08, float(R_grid.min()) / 50)
    if h > R_grid.min() / 50:
        raise UsageError(f"--h {h} exceeds R/50 for R={R_grid.min()}")
    report = t2.squeeze_scan(pot, R_grid, h, count=args.count)
    columns = ["R"] + [f"dirichlet_{k}" for k in range(1, args.count + 1)] + \
              [f"neumann_{k}" for k in range(1, args.count + 1)] + ["gap"]
    rows = [[r.R] + r.dirichlet + r.neumann + [r.gap] for r in report.rows]
    params = dict(p=pot.p, lam=pot.lam, critical=bool(args.critical), h=h, count=args.count,
                  R_grid=[float(r) for r in R_grid], estimate=report.estimate, gap=report.gap,
                  R_star=report.R_star, bracket_ok=report.bracket_ok,
                  dirichlet_monotone=report.dirichlet_monotone)
    if args.refine:
        b = t2.refined_bracket(pot, float(R_grid.max()), h, count=args.count)
        params.update(refined_lower=b.lower, refined_upper=b.upper, refined_h=[h, h / 2])
        print(f"refined bracket at R={b.R}: [{b.lower:.6f}, {b.upper:.6f}]")
    path = _emit(args, "trap2d", params, columns, rows, data=report.to_dict())
    print(f"lam = {pot.lam:.10f}; estimate {report.estimate:.6f} +/- {report.gap:.2e} (h={h})")
    for flag in report.flags:
        print(f"warning: {flag}", file=sys.stderr)
    if args.field:
        fld = t2.ground_state_field(t2.DiscProblem(pot, float(R_grid.max()), h, args.field_boundary),
                                    level=args.level)
        write_field_csv(fld.field, args.field)
        fld.write_sidecar(args.field + ".json")
        print(f"wrote {args.field} and {args.field}.json")
    print(f"wrote {path}")
    return 0


# ---- resonances / scattering ------------------------------------------------

def cmd_resonances(args):
    from . import resonances as rz

    sheet = rz.SheetSignature.nth(args.sheet)
    if args.births:
        grid = args.lambda_grid if args.lambda_grid is not None else np.arange(1.25, 1.3201, 0.01)
        if not args.im_min < args.im_max < 0:
            raise UsageError("need --im-min < --im-max < 0")
        births = rz.scan_pole_births(sheet, grid, (args.re_min, args.re_max), (args.im_min, args.im_max),
                                     N=args.N)
        rows = [[b.lam, b.z.real, b.z.imag, sheet.sheet_id, b.track.poles[0].residual] for b in births]
        path = _emit(args, "resonances", dict(mode="births", sheet=args.sheet,
                                              lambda_grid=[float(x) for x in grid], N=args.N,
                                              re_range=[args.re_min, args.re_max],
                                              im_range=[args.im_min, args.im_max]),
                     ["lambda", "re_z", "im_z", "sheet", "residual"], rows)
        for b in births:
            print(f"pole birth near lam={b.lam:.4f} at Re z={b.z.real:.4f}")
        if not births:
            print("no pole birth detected")
        print(f"wrote {path}")
        return 0
    if args.channel < 0:
        raise UsageError("--channel must be >= 0")
    seed = rz.threshold_seed(args.channel, args.lambda_start)
    traj = rz.track_trajectory(args.lambda_start, args.lambda_end, args.steps, sheet, seed, N=args.N)
    rows = [[q.lam, q.z.real, q.z.imag, sheet.sheet_id, q.residual] for q in traj.poles]
    params = dict(sheet=args.sheet, channel=args.channel, lambda_start=args.lambda_start,
                  lambda_end=args.lambda_end, steps=args.steps, N=args.N, completed=traj.completed)
    path = _emit(args, "resonances", params, ["lambda", "re_z", "im_z", "sheet", "residual"], rows)
    for lam, msg in traj.failures:
        print(f"warning: continuation stopped at lam={lam:.6g}: {msg}", file=sys.stderr)
    print(f"{len(rows)} poles tracked; wrote {path}")
    return 0 if rows else 1


def cmd_scatter(args):
    from .resonances import scattering_matrix

    given = [x is not None for x in (args.k, args.k2, args.k2_grid)]
    if sum(given) != 1:
        raise UsageError("give exactly one of --k, --k2, --k2-grid")
    if args.k2_grid is not None:
        k2s = args.k2_grid
    else:
        k2s = np.array([args.k2 if args.k2 is not None else args.k ** 2])
    rows = []
    worst = 0.0
    for k2 in k2s:
        if k2 <= 0.5:
            raise UsageError(f"k^2={k2} has no open channel (needs k^2 > 1/2)")
        try:
            sol = scattering_matrix(math.sqrt(k2), args.lam, margin=args.margin)
        except BranchPointError as exc:
            raise UsageError(str(exc)) from None
        flux = sol.flux_balance()
        worst = max(worst, float(np.abs(flux).max()))
        for m in range(sol.open_channels):
            for n in range(sol.open_channels):
                rows.append([float(k2), m, n, sol.r[m, n].real, sol.r[m, n].imag,
                             sol.t[m, n].real, sol.t[m, n].imag, flux[m], sol.condition])
    columns = ["k2", "m", "n", "re_r", "im_r", "re_t", "im_t", "flux_error", "condition"]
    params = dict(lam=args.lam, k2=[float(x) for x in k2s], margin=args.margin)
    path = _emit(args, "scatter", params, columns, rows)
    print(f"max flux balance error {worst:.2e}; wrote {path}")
    return 0


# ---- fields -----------------------------------------------------------------

def cmd_field(args):
    from .secular import find_spectrum
    from .wavefields import evaluate_field, nodal_count, null_vector, write_field_binary, write_field_csv

    (variant,) = _variant_args(args)
    scan = find_spectrum(variant, N=args.N)
    if not 1 <= args.index <= scan.count:
        raise UsageError(f"{variant.label()} has {scan.count} eigenvalue(s); --index {args.index} out of range")
    j = args.index - 1
    mode = null_vector(variant, scan.eigenvalues[j], scan.N, depth=scan.depths[j])
    fld = evaluate_field(mode, x=tuple(args.x_range), y=tuple(args.y_range), step=args.step)
    path = sio.output_path(args.output, "field." + ("swf" if args.format == "binary" else "csv"))
    if args.format == "binary":
        write_field_binary(fld, path)
    else:
        write_field_csv(fld, path)
    lines = nodal_count(fld)
    meta = dict(variant=args.variant, coupling=variant.strength, index=args.index, eps=float(scan.eigenvalues[j]),
                N=scan.N, residual=mode.residual, resolved=fld.resolved, nodal_lines=lines,
                x_range=list(args.x_range), y_range=list(args.y_range), step=args.step)
    sio.write_text(path + ".json", sio.dump_json("field", meta, {}))
    if not fld.resolved:
        print("warning: grid too coarse for the fastest retained mode", file=sys.stderr)
    print(f"eps_{args.index} = {scan.eigenvalues[j]:.12f}; nodal lines in window: {lines}; wrote {path}")
    return 0


# ---- parser -----------------------------------------------------------------

def _add_common(p, formats=("csv", "json")):
    p.add_argument("--output", "-o", help="output file ('-' for stdout); default "
                   f"${sio.OUTPUT_DIR_ENV}/<command>.<ext>")
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")


def _add_coupling(p):
    from .secular import KINDS

    p.add_argument("--variant", choices=KINDS, default="delta")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-grid", type=_grid)
    p.add_argument("--beta", type=float)
    p.add_argument("--beta-grid", type=_grid)


def build_parser():
    ap = argparse.ArgumentParser(prog="switchlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"switchlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="discrete eigenvalues over a coupling grid")
    _add_coupling(p)
    p.add_argument("-N", type=int, default=None, help="truncation (default: adaptive)")
    p.add_argument("--tol", type=float, default=1e-12)
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("thresholds", help="couplings at which the j-th eigenvalue appears")
    p.add_argument("--variant", choices=("delta", "delta-prime"), default="delta")
    p.add_argument("--j", type=int, nargs="+", default=[2, 3, 4, 5, 6])
    p.add_argument("-N", type=int, default=8000)
    p.add_argument("--tol", type=float, default=1e-9)
    _add_common(p)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("weakfit", help="power-law fit of 1/2 - E_1")
    p.add_argument("--variant", choices=("delta", "delta-prime"), default="delta")
    p.add_argument("--lambda-min", type=float, default=0.05)
    p.add_argument("--lambda-max", type=float, default=0.3)
    p.add_argument("--beta-min", type=float, default=8.0)
    p.add_argument("--beta-max", type=float, default=24.0)
    p.add_argument("--points", type=int, default=12)
    p.add_argument("-N", type=int, default=2000)
    p.add_argument("--plain", action="store_true", help="two-parameter fit without the even correction")
    _add_common(p)
    p.set_defaults(func=cmd_weakfit)

    p = sub.add_parser("gamma", help="ground state gamma_p of -u'' + |t|^p u")
    p.add_argument("--p-grid", type=_grid, default=sio.parse_grid("1:20:0.5"))
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--minimum", action="store_true", help="also locate min_p gamma_p")
    _add_common(p)
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("trap2d", help="Dirichlet/Neumann squeeze for the |xy|^p trap")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--critical", action="store_true", help="lam = gamma_p")
    p.add_argument("--R-grid", type=_grid, default=sio.parse_grid("4:12"))
    p.add_argument("--h", type=float, default=None, help="lattice step (default min(0.08, R_min/50))")
    p.add_argument("--count", type=int, default=2)
    p.add_argument("--refine", action="store_true", help="h/2 extrapolated bracket at the largest R")
    p.add_argument("--field", help="also write the ground-state field CSV here")
    p.add_argument("--field-boundary", choices=("dirichlet", "neumann"), default="dirichlet")
    p.add_argument("--level", type=float, default=1e-3)
    _add_common(p)
    p.set_defaults(func=cmd_trap2d)

    p = sub.add_parser("resonances", help="resonance trajectories or pole-birth scan")
    p.add_argument("--sheet", type=int, default=2)
    p.add_argument("--channel", type=int, default=1, help="threshold the trajectory starts from")
    p.add_argument("--lambda-start", type=float, default=0.1)
    p.add_argument("--lambda-end", type=float, default=1.4)
    p.add_argument("--steps", type=int, default=130)
    p.add_argument("-N", type=int, default=None)
    p.add_argument("--births", action="store_true")
    p.add_argument("--lambda-grid", type=_grid)
    p.add_argument("--re-min", type=float, default=0.3)
    p.add_argument("--re-max", type=float, default=3.0)
    p.add_argument("--im-min", type=float, default=-1.2)
    # newborn poles sit just below the axis
    p.add_argument("--im-max", type=float, default=-0.002)
    _add_common(p)
    p.set_defaults(func=cmd_resonances)

    p = sub.add_parser("scatter", help="reflection/transmission amplitudes")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--k", type=float)
    p.add_argument("--k2", type=float, help="energy k^2")
    p.add_argument("--k2-grid", type=_grid)
    p.add_argument("--margin", type=int, default=60, help="closed channels kept beyond the open ones")
    _add_common(p)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("field", help="eigenfunction on a grid plus nodal count")
    _add_coupling(p)
    p.add_argument("--index", type=int, default=1, help="eigenvalue number, 1 = ground state")
    p.add_argument("-N", type=int, default=None)
    p.add_argument("--x-range", type=float, nargs=2, default=(-8.0, 8.0))
    p.add_argument("--y-range", type=float, nargs=2, default=(-6.0, 6.0))
    p.add_argument("--step", type=float, default=0.02)
    _add_common(p, formats=("csv", "binary"))
    p.set_defaults(func=cmd_field)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ValidationError, DomainError) as exc:
        print(f"switchlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SwitchLabError, ArithmeticError, RuntimeError, MemoryError, np.linalg.LinAlgError) as exc:
        print(f"switchlab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
