"""Command line entry point.

Exit codes: 0 success, 2 usage error, 3 numerical failure
(ill-conditioning, unisolvency), 4 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import sys
import warnings

import numpy as np

from .density import density_field, slow_growth_majorant
from .geometry import CenterSet, Domain, GeneratorSpec, generate_centers, read_points, write_points
from .harness import (ExperimentConfig, format_domain, parse_domain, parse_function,
                      render_report, run_convergence)
from .interpolation import IllConditionedWarning, LagrangeBasis, NumericalFailure, fit
from .kernel import SplineOrder
from .stability import (decay_exponent, fit_decay, lebesgue_function, make_grid,
                        penalized_function, refinement_sweep, rho_on)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


# input helpers

def _read_header(path):
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                continue
            key, eq, val = line[1:].strip().partition("=")
            if eq:
                meta[key.strip()] = val.strip()
    return meta


def load_centers(path, domain=None, r0=None):
    """Center set from a point file; the domain comes from the flag, the file header, or the bounding box."""
    pts = read_points(path)
    meta = _read_header(path)
    if domain is None and "domain" in meta:
        domain = meta["domain"]
        if r0 is None and "r0" in meta:
            r0 = float(meta["r0"])
    if domain is None:
        return CenterSet(pts, Domain.bounding(pts))
    return CenterSet(pts, parse_domain(domain, r0))


def _file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def _args_digest(args):
    skip = {"out", "func"}
    text = "\n".join(f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in skip)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _meta(args, centers=None, extra=None):
    meta = {"command": args.command, "args_sha256": _args_digest(args)}
    if getattr(args, "centers", None):
        meta["centers_sha256"] = _file_digest(args.centers)
    if centers is not None:
        meta["domain"] = format_domain(centers.domain)
        meta["r0"] = centers.domain.r0
        meta["n"] = len(centers)
    meta.update(extra or {})
    return meta


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _grid(args, cs):
    if getattr(args, "eval", None):
        pts = read_points(args.eval)
        return pts, f"explicit points={len(pts)} file_sha256={_file_digest(args.eval)}"
    pts, spec = make_grid(cs, args.grid, args.per_interval)
    return pts, spec.describe()


def _point_cols(d):
    return [f"x{i}" for i in range(d)]


# subcommands

def cmd_gen_centers(args):
    dom = parse_domain(args.domain, args.r0)
    spec = GeneratorSpec.parse(args.spec)
    cs = generate_centers(spec, dom, seed=args.seed, degree=args.degree)
    header = f"splinestab generator={args.spec} seed={args.seed}\ndomain={format_domain(dom)}\nr0={dom.r0:.17g}"
    write_points(args.out, cs.points, header)


def cmd_density(args):
    cs = load_centers(args.centers, args.domain, args.r0)
    pts, gdesc = _grid(args, cs) if args.grid != "none" else (None, "centers only")
    fld = density_field(cs, args.degree, args.K, points=pts)
    if args.eps is not None:
        fld = slow_growth_majorant(fld, args.eps)
    text = fld.to_text(cs.domain.r0)
    meta = render_report([], [], _meta(args, cs, {"grid": gdesc}))
    _write(args.out, "".join(meta.splitlines(True)[:-1]) + text)


def cmd_interp(args):
    cs = load_centers(args.centers, args.domain, args.r0)
    if args.data:
        data = read_points(args.data)[:, 0]
        label = f"data_sha256={_file_digest(args.data)}"
    else:
        f = parse_function(args.function, cs.dim)
        data = f(cs.points)
        label = f.name
    s = fit(cs, data, SplineOrder(args.m, cs.dim))
    pts, gdesc = _grid(args, cs)
    vals = s(pts)
    rows = [[*p, v] for p, v in zip(pts, vals)]
    _write(args.out, render_report(_point_cols(cs.dim) + ["value"], rows,
                                   _meta(args, cs, {"grid": gdesc, "data": label,
                                                    "condition": s.condition,
                                                    "residual": s.residual})))


def cmd_lagrange(args):
    cs = load_centers(args.centers, args.domain, args.r0)
    basis = LagrangeBasis(cs, SplineOrder(args.m, cs.dim))
    idx = args.index if args.index else list(range(len(cs)))
    if min(idx) < 0 or max(idx) >= len(cs):
        raise UsageError(f"center index out of range 0..{len(cs) - 1}")
    pts, gdesc = _grid(args, cs)
    V = basis.values(pts)[:, idx]
    rows = [[*p, *v] for p, v in zip(pts, V)]
    _write(args.out, render_report(_point_cols(cs.dim) + [f"chi{j}" for j in idx], rows,
                                   _meta(args, cs, {"grid": gdesc,
                                                    "condition": basis.condition,
                                                    "kronecker_error": basis.kronecker_error()})))


def cmd_lebesgue(args):
    cs = load_centers(args.centers, args.domain, args.r0)
    order = SplineOrder(args.m, cs.dim)
    basis = LagrangeBasis(cs, order)
    pts, gdesc = _grid(args, cs)
    leb = lebesgue_function(basis, pts, args.restrict)
    degree = args.degree if args.degree is not None else args.m
    if args.sigma > 0:
        fld = density_field(cs, degree, args.K, points=pts)
        if args.eps is not None:
            fld = slow_growth_majorant(fld, args.eps)
        rho = rho_on(fld, pts)
        pen = penalized_function(basis, rho, args.sigma, pts, args.restrict)
    else:
        rho = np.full(len(pts), np.nan)
        pen = leb
    i0, i1 = int(np.argmax(leb)), int(np.argmax(pen))
    meta = {"grid": gdesc, "m": args.m, "degree": degree, "sigma": args.sigma,
            "restrict": args.restrict, "lebesgue": float(leb[i0]),
            "lebesgue_argmax": " ".join(f"{v:.17g}" for v in pts[i0]),
            "penalized": float(pen[i1]),
            "penalized_argmax": " ".join(f"{v:.17g}" for v in pts[i1])}
    if args.eps is not None:
        meta["eps"] = args.eps
        meta["s"] = decay_exponent(order, args.eps)
        meta["sigma1"] = args.sigma + decay_exponent(order, args.eps)
    rows = [[*p, a, b, r] for p, a, b, r in zip(pts, leb, pen, rho)]
    _write(args.out, render_report(_point_cols(cs.dim) + ["lebesgue_sum", "penalized_sum", "rho"],
                                   rows, _meta(args, cs, meta)))


def cmd_decay(args):
    cs = load_centers(args.centers, args.domain, args.r0)
    basis = LagrangeBasis(cs, SplineOrder(args.m, cs.dim))
    pts, gdesc = _grid(args, cs)
    fld = density_field(cs, args.degree if args.degree is not None else args.m, args.K, points=pts)
    fits = fit_decay(basis, fld, eps=args.eps, r0=args.decay_r0, samples=pts,
                     centers=args.index or None)
    header = ["center", "C", "lambda", "residual", "samples", "envelope_violations", "status",
              "C_normalized"]
    rows = [[f.center, f.C, f.lam, f.residual, f.samples, f.envelope_violations, f.status,
             f.C_normalized] for f in fits]
    eps = args.eps if args.eps is not None else fld.eps_star
    _write(args.out, render_report(header, rows, _meta(args, cs, {
        "grid": gdesc, "eps": eps, "s": decay_exponent(basis.order, eps)})))


def _config(args):
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.from_text()
    for item in args.set or []:
        key, eq, val = item.partition("=")
        sec, dot, name = key.partition(".")
        if not (eq and dot):
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        cfg.set(sec.strip(), name.strip(), val.strip())
    return cfg


def _config_meta(cfg):
    return {"config_sha256": cfg.digest, "config": cfg.canonical().strip().replace("\n", " | ")}


def cmd_sweep(args):
    cfg = _config(args)
    restrict = cfg.get("stability", "restrict") or "support"
    rows = refinement_sweep(cfg.family(), cfg.m, cfg.sigma, cfg.degree, cfg.K, cfg.eps,
                            restrict_to=restrict, grid=cfg.get("stability", "grid"),
                            per_interval=int(cfg.get("stability", "per_interval")))
    header = ["n", "lebesgue", "penalized", "c0", "eps_star", "max_rho", "grid_points"]
    table = [[r.n, r.lebesgue, r.penalized, r.c0, r.eps_star, r.max_rho, r.grid_points]
             for r in rows]
    _write(args.out, render_report(header, table, {"command": "sweep", **_config_meta(cfg)}))


def cmd_converge(args):
    cfg = _config(args)
    rep = run_convergence(cfg)
    meta = {"command": "converge", **_config_meta(cfg), **rep.meta()}
    _write(args.out, render_report(rep.header(), rep.rows(), meta))


# parser

def _add_centers(p, m=True):
    p.add_argument("--centers", required=True, help="point file, one center per line")
    p.add_argument("--domain", help="box:lo,hi[;lo,hi] or ball:cx,cy:r (default: file header)")
    p.add_argument("--r0", type=float, help="boundary margin of the support region")
    if m:
        p.add_argument("--m", type=int, default=2, help="spline order")


def _add_grid(p):
    p.add_argument("--grid", default="uniform", choices=["uniform", "interval"])
    p.add_argument("--per-interval", type=int, default=8, dest="per_interval")
    p.add_argument("--eval", help="explicit evaluation point file (overrides --grid)")


def _add_density(p):
    p.add_argument("--degree", type=int, help="reproduction degree (default m)")
    p.add_argument("--K", type=float, help="stability bound (default 4 dim Pi)")
    p.add_argument("--eps", type=float, help="enforce slow growth with this exponent")


def build_parser():
    ap = argparse.ArgumentParser(prog="splinestab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-centers", help="generate a center set")
    p.add_argument("--spec", required=True, help='e.g. "graded(n=17, g=2, focus=0)"')
    p.add_argument("--domain", default="box:0,1")
    p.add_argument("--r0", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, help="require unisolvency size for this degree")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_centers)

    p = sub.add_parser("density", help="local density field with diagnostics")
    _add_centers(p, m=False)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--K", type=float)
    p.add_argument("--eps", type=float, help="replace rho by its slow-growth majorant")
    p.add_argument("--grid", default="uniform", choices=["uniform", "interval", "none"])
    p.add_argument("--per-interval", type=int, default=8, dest="per_interval")
    p.add_argument("--eval")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("interp", help="evaluate an interpolant")
    _add_centers(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="file with one datum per center")
    src.add_argument("--function", help='test function, e.g. "bump(center=0.5, radius=0.4)"')
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("lagrange", help="tabulate Lagrange functions")
    _add_centers(p)
    p.add_argument("--index", type=int, nargs="*", help="center indices (default all)")
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lagrange)

    p = sub.add_parser("lebesgue", help="classical and penalized Lebesgue constants")
    _add_centers(p)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--restrict", default="support", choices=["support", "all"])
    _add_density(p)
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lebesgue)

    p = sub.add_parser("decay", help="fit Lagrange function decay envelopes")
    _add_centers(p)
    p.add_argument("--index", type=int, nargs="*")
    p.add_argument("--decay-r0", type=float, dest="decay_r0", help="cap on |x - xi| (default r0)")
    p.add_argument("--degree", type=int)
    p.add_argument("--K", type=float)
    p.add_argument("--eps", type=float, help="slow-growth exponent (default fitted)")
    _add_grid(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decay)

    for name, fn, hlp in (("sweep", cmd_sweep, "refinement sweep of Lebesgue constants"),
                          ("converge", cmd_converge, "convergence orders along a family")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
        p.add_argument("--out", required=True)
        p.set_defaults(func=fn)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default", IllConditionedWarning)
            args.func(args)
    except NumericalFailure as exc:
        print(f"splinestab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        where = exc.filename if exc.filename is not None else ""
        print(f"splinestab: I/O error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, KeyError, configparser.Error) as exc:
        print(f"splinestab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
