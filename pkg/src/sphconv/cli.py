"""Command line interface: tabulate, validate, fit, predict, simulate.

Exit codes: 0 success, 1 validation failure, 2 usage or input error,
3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import covariance as cov
from .field import (FitBounds, FitError, FitParams, KrigingError, NoiseLattice, SampleSet,
                    empirical_variogram, fit_wls, krige, simulate_unconditional)
from .kernel import SmoothKernelParams, StepKernel, discretize, normalize
from .oracle import QuadratureSpec, mc_cap_intersection, quad_covariance
from .sphere_geom import PI, cap_intersection_area, lonlat_to_xyz

log = logging.getLogger("sphconv")

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3


class InputError(Exception):
    pass


# ----------------------------------------------------------------- CSV I/O

def _fmt(x) -> str:
    return repr(float(x))


def read_points(path, need_value: bool = True):
    """Read a ``lon_deg,lat_deg[,value]`` CSV. Returns (lon, lat, values|None)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}:1: missing header row") from None
        cols = {name: i for i, name in enumerate(header)}
        for name in ("lon_deg", "lat_deg") + (("value",) if need_value else ()):
            if name not in cols:
                raise InputError(f"{path}:1: missing column {name!r}")
        lon, lat, val = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                x = float(row[cols["lon_deg"]])
                y = float(row[cols["lat_deg"]])
                z = float(row[cols["value"]]) if need_value else math.nan
            except (IndexError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: malformed row ({exc})") from None
            if not (math.isfinite(x) and math.isfinite(y)) or abs(y) > 90.0:
                raise InputError(f"{path}:{lineno}: invalid coordinates")
            if need_value and not math.isfinite(z):
                raise InputError(f"{path}:{lineno}: non-finite value")
            lon.append(x)
            lat.append(y)
            val.append(z)
    return np.array(lon), np.array(lat), (np.array(val) if need_value else None)


def write_rows(path, header, rows, comments=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _xyz(lon, lat):
    return lonlat_to_xyz(lon, lat).reshape(-1, 3)


# ---------------------------------------------------------------- commands

def _kernel(args) -> StepKernel:
    params = SmoothKernelParams(args.mu, args.nu, args.range)
    return normalize(discretize(params, args.n_steps))


def cmd_tabulate(args):
    k = _kernel(args)
    table = cov.tabulate(k)
    out = Path(args.out)
    cov.write_table(out, table)
    curve = Path(args.curve) if args.curve else out.with_name("curve.csv")
    grid = np.linspace(0.0, PI, 1024)
    write_rows(curve, ["d", "C"], zip(grid, cov.evaluate(table, grid)))
    print(f"wrote {out} ({table.n_pieces} cubic pieces) and {curve}")
    return EXIT_OK


def cmd_validate(args):
    failures = []

    def report(name, value, tol):
        ok = value <= tol
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (tol {tol:.0e})")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(args.seed)
    if args.table:
        table, _ = cov.read_table(args.table)
        params = SmoothKernelParams(table.mu, table.nu, table.range)
        k = normalize(discretize(params, table.n_steps))
    else:
        params = SmoothKernelParams(args.mu, args.nu, args.range)
        k = normalize(discretize(params, args.n_steps))
        table = cov.tabulate(k)

    audit = rng.uniform(0.0, PI, args.audit_points)
    try:
        tab_err = float(np.max(np.abs(cov.evaluate(table, audit) - cov.covariance_at(k, audit))))
    except cov.TabulationError as exc:
        print(f"FAIL tabulation: {exc}")
        failures.append("tabulation")
    else:
        report("tabulation max |evaluate - covariance_at|", tab_err, 1e-9)

    fine = normalize(discretize(params, args.oracle_steps))
    lags = np.linspace(0.0, min(PI, 2 * params.radius), args.oracle_lags)
    quad = quad_covariance(params, lags, QuadratureSpec(args.n_theta, args.n_phi))
    report(f"quadrature oracle (n={args.oracle_steps})",
           float(np.max(np.abs(quad - cov.covariance_at(fine, lags)))), 1e-3)

    radii = k.radii
    mc_err = 0.0
    for i in range(args.mc_triples):
        r0, r1 = rng.choice(radii, 2)
        d = rng.uniform(0.0, min(PI, r0 + r1))
        est, _ = mc_cap_intersection(r0, r1, d, args.mc_samples, seed=args.seed + i)
        mc_err = max(mc_err, abs(est - cap_intersection_area(r0, r1, d)))
    report("Monte-Carlo cap intersection", mc_err, 5e-3)

    try:
        psd = cov.check_psd(table, args.psd_points, seed=args.seed)
    except cov.TabulationError as exc:
        print(f"FAIL PSD: {exc}")
        failures.append("PSD")
    else:
        report("PSD -min_eig/max_eig", max(0.0, -psd.min_eig / psd.max_eig), 1e-10)

    if failures:
        print("validation failed: " + ", ".join(failures))
        return EXIT_VALIDATION
    print("validation passed")
    return EXIT_OK


def cmd_fit(args):
    lon, lat, val = read_points(args.data)
    if val.size < 2:
        raise InputError(f"{args.data}: need at least 2 data rows")
    s = SampleSet(_xyz(lon, lat), val)
    v = empirical_variogram(s, args.n_bins, args.max_lag)
    init = None
    if args.init_range is not None:
        init = FitParams(args.init_range, args.init_mu, args.init_nu,
                         args.init_sill, args.init_nugget)
    bounds = FitBounds(mu=tuple(args.mu_bounds), nu=tuple(args.nu_bounds))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = fit_wls(v, init, bounds, n_steps=args.n_steps)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    cov.write_table(args.out, result.model.structure, model=result.model)
    p = result.params
    rep = dict(range=p.range, mu=p.mu, nu=p.nu, sill=p.partial_sill + p.nugget,
               partial_sill=p.partial_sill, nugget=p.nugget, objective=result.objective)
    for key, value in rep.items():
        print(f"{key}={_fmt(value)}")
    if args.report:
        Path(args.report).write_text(json.dumps(rep, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _load_model(path):
    table, model = cov.read_table(path)
    if model is None:
        model = cov.CovarianceModel(0.0, 1.0, table)
    return model


def cmd_predict(args):
    model = _load_model(args.model)
    lon, lat, val = read_points(args.data)
    s = SampleSet(_xyz(lon, lat), val)
    tlon, tlat, _ = read_points(args.targets, need_value=False)
    pred, var, _ = krige(model, s, _xyz(tlon, tlat) if tlon.size else [])
    write_rows(args.out, ["lon_deg", "lat_deg", "pred", "var"], zip(tlon, tlat, pred, var))
    print(f"wrote {len(pred)} predictions to {args.out}")
    return EXIT_OK


def cmd_simulate(args):
    if args.n_nodes < 100:
        raise InputError("--n-nodes must be at least 100")
    if args.model:
        table, _ = cov.read_table(args.model)
        params = SmoothKernelParams(table.mu, table.nu, table.range)
        k = normalize(discretize(params, table.n_steps))
        meta = f"mu={_fmt(params.mu)} nu={_fmt(params.nu)} range={_fmt(params.range)} n_steps={table.n_steps}"
    elif args.levels is not None:
        levels = np.array([float(x) for x in args.levels.split(",")])
        rad = 0.5 * args.range
        radii = rad * np.arange(1, levels.size + 1) / levels.size
        k = StepKernel(radii, levels)
        if np.any(levels != 0.0):
            k = normalize(k)
        meta = f"levels={args.levels} range={_fmt(args.range)}"
    else:
        k = _kernel(args)
        meta = f"mu={_fmt(args.mu)} nu={_fmt(args.nu)} range={_fmt(args.range)} n_steps={args.n_steps}"
    tlon, tlat, _ = read_points(args.targets, need_value=False)
    lattice = NoiseLattice(args.n_nodes, args.seed)
    targets = _xyz(tlon, tlat) if tlon.size else []
    sims = simulate_unconditional(k, lattice, targets, args.n_realizations)
    header = ["lon_deg", "lat_deg"] + [f"r{j}" for j in range(args.n_realizations)]
    rows = (np.concatenate([[a, b], row]) for a, b, row in zip(tlon, tlat, sims))
    write_rows(args.out, header, rows,
               comments=[f"seed={args.seed} n_nodes={args.n_nodes} {meta}"])
    print(f"wrote {args.n_realizations} realizations at {tlon.size} targets to {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _kernel_flags(p, required=True):
    p.add_argument("--mu", type=float, required=required, default=None if required else 1.0)
    p.add_argument("--nu", type=float, required=required, default=None if required else 1.0)
    p.add_argument("--range", type=float, required=required, default=None if required else PI,
                   help="covariance range in radians (kernel radius is half of it)")
    p.add_argument("--n-steps", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sphconv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tabulate", help="tabulate a covariance model")
    _kernel_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--curve", help="companion (d, C) CSV; default curve.csv next to --out")
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("validate", help="check a model against independent oracles")
    _kernel_flags(p, required=False)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--table", help="validate this tabulated-model file instead")
    p.add_argument("--audit-points", type=int, default=20_000)
    p.add_argument("--oracle-steps", type=int, default=2048)
    p.add_argument("--oracle-lags", type=int, default=32)
    p.add_argument("--n-theta", type=int, default=512)
    p.add_argument("--n-phi", type=int, default=1024)
    p.add_argument("--mc-triples", type=int, default=5)
    p.add_argument("--mc-samples", type=int, default=10_000_000)
    p.add_argument("--psd-points", type=int, default=200)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fit", help="fit a model to point data by weighted least squares")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--n-bins", type=int, default=15)
    p.add_argument("--max-lag", type=float, default=1.5)
    p.add_argument("--n-steps", type=int, default=64)
    p.add_argument("--init-range", type=float)
    p.add_argument("--init-mu", type=float, default=1.0)
    p.add_argument("--init-nu", type=float, default=1.0)
    p.add_argument("--init-sill", type=float, default=1.0, help="initial partial sill")
    p.add_argument("--init-nugget", type=float, default=0.1)
    p.add_argument("--mu-bounds", type=float, nargs=2, default=FitBounds().mu)
    p.add_argument("--nu-bounds", type=float, nargs=2, default=FitBounds().nu)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="ordinary kriging at target points")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="unconditional simulation at target points")
    _kernel_flags(p, required=False)
    p.add_argument("--model", help="take kernel parameters from a model file")
    p.add_argument("--levels", help="explicit comma-separated step levels on uniform radii")
    p.add_argument("--n-nodes", type=int, default=20_000)
    p.add_argument("--n-realizations", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (InputError, FitError, KrigingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
