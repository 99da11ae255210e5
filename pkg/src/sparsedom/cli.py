"""Command-line entry point: decompositions, piece norms, sparse forms and experiments."""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from .atomic import atomic_decomposition, verify_atomic
from .cz import combined_cz, measured_sq_constant, verify_cz
from .dyadic_core import DyadicCube, GridFunction, root_cube
from .experiments import EXPERIMENTS, parse_config_text, parse_value, run_experiment
from .multiplier_ops import parse_symbol
from .norms_sparse import akl_table, greedy_lambda_star, lambda_double_star
from .reports import fmt, lemma_csv


def read_grid_csv(path: str | Path) -> GridFunction:
    """Read rows ``i[,j],re,im`` into a grid function; missing points are zero."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    d = len(rows[0]) - 2
    if d not in (1, 2) or any(len(r) != d + 2 for r in rows):
        raise ValueError(f"{path}: expected columns i,re,im or i,j,re,im")
    idx = np.array([[int(c) for c in r[:d]] for r in rows])
    n = 1 << max(2, math.ceil(math.log2(int(idx.max()) + 1)))
    vals = np.zeros((n,) * d, dtype=complex)
    for r, ix in zip(rows, idx):
        vals[tuple(ix)] = float(r[d]) + 1j * float(r[d + 1])
    return GridFunction(vals)


def write_grid_csv(f, dest) -> None:
    v = np.asarray(f, dtype=complex)
    names = ["i", "j"][: v.ndim]
    w = csv.writer(dest, lineterminator="\n")
    w.writerow([*names, "re", "im"])
    for ix in np.ndindex(v.shape):
        w.writerow([*ix, fmt(v[ix].real), fmt(v[ix].imag)])


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def parse_cube(text: str | None, n: int, d: int) -> DyadicCube:
    """``corner@log_side`` with a comma-separated corner, e.g. ``8,0@3``; default is the whole grid."""
    if not text:
        return root_cube(n, d)
    corner, _, side = text.partition("@")
    c = tuple(int(x) for x in corner.split(","))
    if len(c) != d:
        raise ValueError(f"cube corner needs {d} coordinates")
    return DyadicCube(c, int(side))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _exponent(s: str) -> float:
    return math.inf if s.lower() in ("inf", "infinity") else float(s)


def cmd_decompose(args) -> str:
    f1 = np.asarray(read_grid_csv(args.f1))
    n, d = f1.shape[0], f1.ndim
    s0 = parse_cube(args.s0, n, d)
    f2 = np.asarray(read_grid_csv(args.f2)) if args.f2 else f1
    if f2.shape != f1.shape:
        raise ValueError("f1 and f2 live on different grids")
    # the decomposition localizes f1 to S0 and f2 to 3 S0
    f1 = f1 * s0.indicator(n)
    f2 = f2 * s0.dilate_mask(3, n, periodic=True)
    sq = measured_sq_constant(min(args.p, 2.0), n, d)
    recs = verify_atomic(atomic_decomposition(f1, s0, min(args.p, 2.0)), sq, seed=args.seed)
    cz = combined_cz(f1, f2, s0, args.p, args.q, gamma=args.gamma, mode=args.mode, sq_const=sq)
    recs += verify_cz(cz, seed=args.seed)
    return lemma_csv(recs)


def cmd_norms(args) -> str:
    m = parse_symbol(args.symbol)
    ks = parse_value(args.k)
    ks = ks if isinstance(ks, list) else [ks]
    tab = akl_table(m, [int(k) for k in ks], args.ell_max, args.p, args.r, args.q, d=args.d, seed=args.seed)
    return tab.to_csv()


def cmd_sparse(args) -> str:
    f1 = np.asarray(read_grid_csv(args.f1))
    f2 = np.asarray(read_grid_csv(args.f2))
    if f1.shape != f2.shape:
        raise ValueError("f1 and f2 live on different grids")
    n, d = f1.shape[0], f1.ndim
    if args.localized:
        s0 = parse_cube(args.s0, n, d)
        value, fam = lambda_double_star(f1 * s0.indicator(n), f2, s0, args.p1, args.p2, args.gamma)
        form = "lambda_double_star"
    else:
        value, fam = greedy_lambda_star(f1, f2, args.p1, args.p2, args.gamma)
        form = "lambda_star"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "value"])
    for k, v in [("form", form), ("gamma", args.gamma), ("p1", args.p1), ("p2", args.p2), ("value", value), ("packing", "carleson")]:
        w.writerow([k, fmt(v)])
    w.writerow([])
    w.writerow(["log_side", *[f"corner{a}" for a in range(d)], "carleson_sum"])
    for row in fam.to_rows():
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def cmd_experiment(args) -> str:
    params = parse_config_text(Path(args.config).read_text()) if args.config else {}
    for item in args.set or []:
        k, _, v = item.partition("=")
        params[k.strip()] = parse_value(v)
    params.pop("experiment", None)
    cfg_seed = int(params.pop("seed", 0))
    seed = cfg_seed if args.seed is None else args.seed
    return run_experiment(args.name, params, seed=seed).csv()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsedom", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output CSV path (default stdout)")

    p = sub.add_parser("decompose", help="atomic and CZ decomposition with lemma checks")
    p.add_argument("f1")
    p.add_argument("--f2", help="second function, restricted to 3 S0 (default f1)")
    p.add_argument("--s0", help="cube as corner@log_side, e.g. 0,0@3; f1 is restricted to it")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--q", type=float, default=3.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--mode", choices=["paper", "experiment"], default="experiment")
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("norms", help="A^{k,ell} table for a symbol")
    p.add_argument("symbol", help='e.g. "oscillatory a=2 b=0.5"')
    p.add_argument("--k", default="0", help="comma-separated frequency levels; write --k=-1,0 for negative ones")
    p.add_argument("--ell-max", type=int, default=4)
    p.add_argument("--p", type=_exponent, default=2.0)
    p.add_argument("--r", type=_exponent, default=2.0)
    p.add_argument("--q", type=_exponent, default=2.0)
    p.add_argument("--d", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("sparse", help="maximized sparse form of (f1, f2)")
    p.add_argument("f1")
    p.add_argument("f2")
    p.add_argument("--p1", type=float, default=1.0)
    p.add_argument("--p2", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--localized", action="store_true", help="restrict to cubes inside S0, f2 averaged over triples")
    p.add_argument("--s0")
    common(p)
    p.set_defaults(func=cmd_sparse)

    p = sub.add_parser("experiment", help="run a scaling experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", help="key=value file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config entry")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
