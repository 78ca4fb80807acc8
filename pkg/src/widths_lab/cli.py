"""Command-line front end: formula values, classification, estimation sweeps and covering diagnostics.

Exit codes: 0 ok, 2 input or window error, 3 tie, 4 certification failure,
5 coverage gap.
"""
import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import discretization_cover as dc
from .besov_embedding import (Case3Degenerate, NoStrictMinimizer, ParamsError, WindowViolation,
                              classify, read_params_file, theta_table, tilde_theta_table)
from .finite_width_lab import SearchConfig, kolmogorov_sweep, reevaluate
from .mixed_norm_core import SpaceSpec
from .width_formulas import linear_width_upper, phi, phi0, phi0_local_exponent, psi

EXIT_OK, EXIT_INPUT, EXIT_TIE, EXIT_CERT, EXIT_COVER = 0, 2, 3, 4, 5
CSV_HEADER = ("n", "formula", "estimate", "ratio", "seed")
CERT_TOL = 1e-3
REEVAL_TOL = 1e-9


def fmt(x):
    """12 significant digits, locale independent."""
    if isinstance(x, Fraction) and x.denominator == 1:
        return str(x.numerator)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _round12(x):
    return float(fmt(x))


def default_seed():
    return int(os.environ.get("WIDTHS_LAB_SEED", "0"))


def _exponent(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return sorted(set(out))


# ------------------------------------------------------------------ formula


def cmd_formula(args, out):
    m, k, n = args.m, args.k, args.n
    p1, p2, q1, q2 = args.p1, args.p2, args.q1, args.q2
    if args.kind == "phi":
        print(f"{fmt(phi(n, m, p1, p2))} PHI", file=out)
    elif args.kind == "psi":
        print(f"{fmt(psi(n, m, p1, p2))} PSI", file=out)
    elif args.kind == "phi0":
        reg = phi0(m, k, n, p1, p2, q1, q2)
        flag = " EXTRAPOLATED" if reg.extrapolated else ""
        print(f"{fmt(reg.value)} {reg.tag}{flag}", file=out)
    else:
        print(f"{fmt(linear_width_upper(m, k, n, p1, q1, p2, q2))} LINEAR_UPPER", file=out)
    return EXIT_OK


# ----------------------------------------------------------------- classify


def _print_table(table, active, out):
    for j in sorted(table):
        theta, sigma = table[j]
        mark = "*" if j in active else " "
        print(f"{mark}{j} theta={fmt(theta)} sigma={fmt(sigma)}", file=out)


def cmd_classify(args, out):
    params, extras = read_params_file(args.param_file)
    part = args.part if args.part is not None else int(extras.get("part", 1))
    try:
        res = classify(params, part)
    except NoStrictMinimizer as e:
        _print_table(e.table, tuple(e.tied), out)
        print(str(e), file=out)
        return EXIT_TIE
    if res.table is not None:
        _print_table(res.table, res.active, out)
        print(f"j*={res.j_star} theta={fmt(res.theta)} sigma={fmt(res.sigma)}", file=out)
    else:
        for theta, sigma in res.terms:
            print(f" theta={fmt(theta)} sigma={fmt(sigma)}", file=out)
        print(f"theta={fmt(res.theta)} sigma={fmt(res.sigma)}", file=out)
    print(f"order {res.render()}", file=out)
    return EXIT_OK


# -------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    fitted_slope: float
    slope_stderr: float


def fit_slope(ns, values):
    """Least-squares slope and its standard error of log value against log n (positive values only)."""
    pts = [(math.log(n), math.log(v)) for n, v in zip(ns, values) if n > 0 and v > 0]
    if len(pts) < 2:
        return float("nan"), float("nan")
    x, y = np.array(pts).T
    if len(pts) == 2:
        return float((y[1] - y[0]) / (x[1] - x[0])), 0.0
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    s2 = float(resid @ resid) / (len(x) - 2)
    se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return float(coef[0]), se


def run_sweep(m, k, p1, p2, q1, q2, ns, cfg):
    """Estimates of d_n(B_{p1,q1}, l_{p2,q2}) over ns next to the formula order."""
    src, dst = SpaceSpec(m, k, float(p1), float(q1)), SpaceSpec(m, k, float(p2), float(q2))
    ests = kolmogorov_sweep(src, dst, ns, cfg)
    rows, failed = [], []
    for est in ests:
        f = phi0(m, k, est.n, p1, p2, q1, q2).value
        v = _round12(est.value)
        ratio = _round12(est.value / f) if f > 0 else float("nan")
        rows.append((est.n, _round12(f), v, ratio, cfg.seed))
        stored = est.extra.get("inherited_from") is None
        if est.worst_point_residual > CERT_TOL:
            failed.append((est.n, "residual"))
        elif stored and est.basis is not None and est.points is not None and 0 < est.n < m * k:
            if abs(reevaluate(est) - est.value) > REEVAL_TOL * max(1.0, est.value):
                failed.append((est.n, "re-evaluation"))
    slope, se = fit_slope([r[0] for r in rows], [r[2] for r in rows])
    return SweepResult(tuple(rows), slope, se), failed


def write_sweep_csv(result, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for n, f, v, r, seed in result.rows:
            w.writerow([n, fmt(f), fmt(v), fmt(r), seed])


def read_sweep_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return tuple((int(n), float(f), float(v), float(r), int(s)) for n, f, v, r, s in rd)


def cmd_sweep(args, out):
    ns = _int_list(args.n_grid)
    cfg = SearchConfig(restarts=args.restarts, outer_iters=args.outer_iters, rounds=args.rounds,
                       seed=args.seed, workers=args.workers)
    mid = ns[len(ns) // 2]
    local = phi0_local_exponent(args.m, args.k, mid, args.p1, args.p2, args.q1, args.q2)
    result, failed = run_sweep(args.m, args.k, args.p1, args.p2, args.q1, args.q2, ns, cfg)
    write_sweep_csv(result, args.out)
    positive = sum(1 for r in result.rows if r[0] > 0 and r[2] > 0)
    print(f"fitted_slope={fmt(result.fitted_slope)} stderr={fmt(result.slope_stderr)} "
          f"local_exponent={fmt(local)} rows>0={positive}", file=out)
    if failed:
        for n, why in failed:
            print(f"uncertified n={n} ({why})", file=out)
        return EXIT_CERT
    return EXIT_OK


# -------------------------------------------------------------------- cover


def cmd_cover(args, out):
    params = None
    if args.params:
        params, _ = read_params_file(args.params)
    Nd = args.N * args.d
    jstar = Nd if args.jstar == "top" else int(args.jstar)
    atlas = dc.build_cover(args.N, args.d, args.eps, jstar, args.s, params=params,
                           q1=args.q1, q2=args.q2, nu_cap=args.nu_cap)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dc.dump_atlas(atlas))
    rep = dc.verify_cover(atlas, atlas.nu_cap, args.samples, args.seed)
    print(f"families={len(atlas.families)} j_s={fmt(atlas.j_s)} nu_cap={atlas.nu_cap}", file=out)
    print(f"rank_budget_ratio={fmt(dc.rank_budget_ratio(atlas))}", file=out)
    print(f"checked={rep.checked} gaps={len(rep.gaps)}", file=out)
    for nu, m in rep.gaps[:20]:
        print(f"gap nu={nu} m={m}", file=out)
    return EXIT_OK if rep.ok else EXIT_COVER


# --------------------------------------------------------------------- main


def build_parser():
    ap = argparse.ArgumentParser(prog="widths-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("formula", help="evaluate a width order")
    f.add_argument("--kind", required=True, choices=("phi", "psi", "phi0", "linear-upper"))
    f.add_argument("--m", type=int, required=True, help="inner dimension (nu for phi/psi)")
    f.add_argument("--k", type=int, default=1)
    f.add_argument("--n", type=int, required=True)
    f.add_argument("--p1", type=_exponent, required=True, help="source exponent (p for phi/psi)")
    f.add_argument("--p2", type=_exponent, required=True, help="target exponent (q for phi/psi)")
    f.add_argument("--q1", type=_exponent, default=Fraction(2))
    f.add_argument("--q2", type=_exponent, default=Fraction(2))
    f.set_defaults(func=cmd_formula)

    c = sub.add_parser("classify", help="width order of a weighted embedding from a parameter file")
    c.add_argument("param_file")
    c.add_argument("--part", type=int, choices=(1, 2, 3), default=None)
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("sweep", help="numeric width estimates over an n-grid")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    for name in ("p1", "p2", "q1", "q2"):
        s.add_argument(f"--{name}", type=_exponent, required=True)
    s.add_argument("--n-grid", required=True, help="comma list with a..b ranges, e.g. 1..8 or 2,4,8")
    s.add_argument("--restarts", type=int, default=4)
    s.add_argument("--outer-iters", type=int, default=150)
    s.add_argument("--rounds", type=int, default=8)
    s.add_argument("--seed", type=int, default=default_seed())
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("cover", help="build and verify the dyadic covering")
    v.add_argument("--N", type=int, required=True)
    v.add_argument("--d", type=int, default=1)
    v.add_argument("--eps", type=_exponent, default=Fraction(1, 4))
    v.add_argument("--jstar", default="0", help="0 or 'top' (= N d) or the integer N d")
    v.add_argument("--s", type=int, choices=(0, 1), default=0)
    v.add_argument("--q1", type=_exponent, default=None)
    v.add_argument("--q2", type=_exponent, default=None)
    v.add_argument("--params", default=None, help="parameter file for weights and budgets")
    v.add_argument("--nu-cap", type=int, default=None)
    v.add_argument("--samples", type=int, default=2000)
    v.add_argument("--seed", type=int, default=default_seed())
    v.add_argument("--out", default="atlas.txt")
    v.set_defaults(func=cmd_cover)
    return ap


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (Case3Degenerate, WindowViolation, ParamsError, ValueError, OSError) as e:
        msg = str(e)
        if isinstance(e, Case3Degenerate) and "Case3Degenerate" not in msg:
            msg = f"Case3Degenerate: {msg}"
        print(f"error: {msg}", file=sys.stderr)
        print(msg, file=out)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
