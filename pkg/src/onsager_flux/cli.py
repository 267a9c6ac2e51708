"""``onsager-flux`` command line: generate fields, sweep fluxes, take traces, estimate norms.

Exit status: 0 on success, 1 on usage or I/O errors, 2 when the analysis ran
but a convergence or validation check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import flux as flux_mod
from . import norms as norms_mod
from .errors import OnsfError, ScaleError, TraceConvergenceError
from .grid import GridField, read_field, write_field
from .pressure import solution_residuals
from .synth import FieldSpec
from .traces import Interface, jump_residuals

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2
EXACT_TOL = 1e-6
SWEEP_COLUMNS = ["ell", "l1_dr", "l1_cet", "l1_balance", "kernel", "nonsolution_flag"]
DENSITY_COLUMNS = ["delta", "ell", "t_full", "t_smooth_leg", "t_remainder"]
KIND_MAP = {
    "taylor-green": "taylor_green",
    "shear": "shear_layer",
    "weier": "weierstrass",
    "random": "random_fourier",
    "burgers": "burgers_shock",
}


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _read(path) -> GridField:
    return read_field(path)


def _scales(u: GridField, multiples, physical, flag: str) -> list:
    if physical:
        for s in physical:
            flux_mod.check_scale(u, s)
        return [float(s) for s in physical]
    return flux_mod.grid_scales(u, multiples)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _spec_from_args(args) -> FieldSpec:
    kind = KIND_MAP[args.kind]
    params = {"n": args.n, "L": args.L}
    if kind == "shear_layer":
        params.update(a=args.a, b=args.b, w=args.w, node_rule=args.node_rule)
    elif kind == "burgers_shock":
        params.update(u_L=args.u_left, u_R=args.u_right, w=args.w, node_rule=args.node_rule)
    elif kind == "weierstrass":
        N = args.N if args.N is not None else int(math.floor(math.log2(args.n / 4)))
        params.update(theta=args.theta, N=N, seed=args.seed)
    elif kind == "random_fourier":
        params.update(theta=args.theta, seed=args.seed)
    if kind in ("weierstrass", "random_fourier") and args.theta is None:
        raise UsageError(f"--theta is required for --kind {args.kind}")
    return FieldSpec(kind, params)


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        u, p = spec.generate()
        res = solution_residuals(u, p)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [out / "u.onsf"]
    write_field(files[0], u)
    if p is not None:
        files.append(out / "p.onsf")
        write_field(files[1], p)
    record = {
        "kind": spec.kind,
        "params": spec.params,
        "seed": spec.params.get("seed"),
        "divergence_residual": res["divergence_residual"],
        "momentum_residual": res["momentum_residual"],
        "exact_solution": p is not None and max(res.values()) <= EXACT_TOL,
        "files": [str(f) for f in files],
    }
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    u = _read(args.u)
    p = _read(args.p) if args.p else None
    scales = _scales(u, args.multiples, args.scales, "--scales")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = flux_mod.sweep(u, p, args.kernel, scales, tuple(args.fit_trim))
    fits = {v: (None if f is None else f.as_dict()) for v, f in res.fits.items()}
    if args.format == "json":
        doc = {"rows": list(res.rows()), "fits": fits, "residuals": res.residuals}
        _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
        return EXIT_OK
    text = _csv(SWEEP_COLUMNS, res.rows())
    fit_rows = [{"variant": v, "slope": f["slope"], "intercept": f["intercept"], "r2": f["r2"]}
                for v, f in fits.items() if f is not None]
    text += "\n" + _csv(["variant", "slope", "intercept", "r2"], fit_rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_trace(args) -> int:
    u = _read(args.u)
    p = _read(args.p) if args.p else None
    I = Interface(tuple(args.normal), args.offset, 0.0)
    if I.d != u.d:
        raise UsageError(f"normal has {I.d} components, field is {u.d}-dimensional")
    radii = _scales(u, args.radii, None, "--radii")
    rep = jump_residuals(u, p, I, radii, tol=args.tol, require_converged=False,
                         tol_n=args.tol_n, tol_u=args.tol_u)
    _emit(json.dumps(rep.as_dict(), sort_keys=True, indent=2) + "\n", args.out)
    if rep.converged_fraction < 1.0:
        print(f"warning: {sum(not s.converged for s in rep.samples)} unconverged samples",
              file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_norms(args) -> int:
    u = _read(args.u)
    if args.kind == "bd":
        # BD increments are lattice step counts, not physical radii
        dirs = [tuple(int(x) for x in d.split(",")) for d in args.directions]
        rep = norms_mod.bd_longitudinal(u, args.radii, dirs)
    else:
        scales = _scales(u, args.radii, None, "--radii")
        if args.kind == "bmo":
            rep = norms_mod.bmo_norm(u, scales)
        elif args.kind == "vmo":
            rep = norms_mod.vmo_modulus(u, scales)
        else:
            rep = norms_mod.besov_seminorm(u, args.alpha, args.p, scales)
    rows = [{"kind": k, "scale": s, "value": v} for k, s, v in rep.as_rows()]
    _emit(_csv(["kind", "scale", "value"], rows), args.out)
    return EXIT_OK


def cmd_density(args) -> int:
    u = _read(args.u)
    deltas = _scales(u, args.deltas, None, "--deltas")
    ells = _scales(u, args.ells, None, "--ells")
    rep = flux_mod.density_mechanism(u, args.kernel, deltas, ells, args.variant)
    _emit(_csv(DENSITY_COLUMNS, rep.rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="onsager-flux", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic field as ONSF files")
    g.add_argument("--kind", required=True, choices=sorted(KIND_MAP))
    g.add_argument("--n", type=int, default=128)
    g.add_argument("--L", type=float, default=1.0)
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--b", type=float, default=-1.0)
    g.add_argument("--w", type=float, default=0.0)
    g.add_argument("--u-left", type=float, default=1.0)
    g.add_argument("--u-right", type=float, default=-1.0)
    g.add_argument("--theta", type=float)
    g.add_argument("--N", type=int, help="top lacunary level (default: largest resolved)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--node-rule", default="one_sided", choices=["one_sided", "midpoint"])
    g.add_argument("--out-dir", default=".")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sweep", help="flux L1 norms across scales")
    s.add_argument("u")
    s.add_argument("--p")
    s.add_argument("--kernel", default="bump", choices=["bump", "quartic"])
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--multiples", type=int, nargs="+", default=[4, 8, 16, 32],
                     help="scales as multiples of h")
    grp.add_argument("--scales", type=float, nargs="+", help="physical scales")
    s.add_argument("--fit-trim", type=int, nargs=2, default=[0, 0], metavar=("LARGE", "SMALL"))
    s.add_argument("--format", default="csv", choices=["csv", "json"])
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("trace", help="one-sided traces and jump residuals on a plane")
    t.add_argument("u")
    t.add_argument("--p")
    t.add_argument("--normal", type=float, nargs="+", required=True)
    t.add_argument("--offset", type=float, default=0.5)
    t.add_argument("--radii", type=int, nargs="+", default=[8, 4, 2], help="multiples of h")
    t.add_argument("--tol", type=float, default=1e-6)
    t.add_argument("--tol-n", type=float, default=1e-8)
    t.add_argument("--tol-u", type=float, default=1e-8)
    t.add_argument("--out")
    t.set_defaults(func=cmd_trace)

    nm = sub.add_parser("norms", help="BMO, VMO, Besov or BD estimates")
    nm.add_argument("u")
    nm.add_argument("--kind", default="bmo", choices=["bmo", "vmo", "besov", "bd"])
    nm.add_argument("--radii", type=int, nargs="+", default=[2, 4, 8, 16], help="multiples of h")
    nm.add_argument("--alpha", type=float, default=1 / 3)
    nm.add_argument("--p", type=float, default=3.0)
    nm.add_argument("--directions", nargs="+", default=["1,0", "0,1", "1,1"])
    nm.add_argument("--out")
    nm.set_defaults(func=cmd_norms)

    dn = sub.add_parser("density", help="telescoped flux table for the density mechanism")
    dn.add_argument("u")
    dn.add_argument("--kernel", default="bump", choices=["bump", "quartic"])
    dn.add_argument("--deltas", type=int, nargs="+", default=[2, 4, 8])
    dn.add_argument("--ells", type=int, nargs="+", default=[4, 8, 16])
    dn.add_argument("--variant", default="dr", choices=list(flux_mod.VARIANTS))
    dn.add_argument("--out")
    dn.set_defaults(func=cmd_density)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except TraceConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (UsageError, ScaleError, OnsfError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
