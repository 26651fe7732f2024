"""Command-line interface.

Every subcommand reads an optional ``key = value`` configuration file,
applies ``--set key=value`` overrides and writes its outputs (CSV reports,
eigenvalue files, node files and a JSON summary) into ``--output``.
"""
import argparse
from dataclasses import replace
import logging
from pathlib import Path
import sys

import numpy as np

from .assembly import save_triplets
from .exceptions import RBFFDError, StageError
from .harness import (
    build_discretization,
    cardinal_trace,
    load_config,
    run_h_sweep,
    run_p_sweep,
    run_q_sweep,
    run_solves,
    run_spectrum,
    voronoi_jump,
    write_csv,
    write_json,
)
from .nodes import save_nodes

log = logging.getLogger("rbffd")


def _config(args):
    overrides = list(args.set or [])
    cfg = load_config(args.config, overrides)
    if args.output:
        cfg = replace(cfg, output=args.output)
    return cfg


def _outdir(cfg):
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args):
    cfg = _config(args)
    out = _outdir(cfg)
    rows = run_solves(cfg)
    write_csv(rows, out / "solve.csv")
    failed = [r for r in rows if r.exception is not None]
    if failed:
        write_json({"command": "solve", "config": cfg.to_dict(), "rows": [r.row() for r in rows]},
                   out / "summary.json")
        raise failed[0].exception
    if args.dump_matrices or args.dump_nodes:
        _, X, Y, disc = build_discretization(cfg)
        if args.dump_matrices:
            save_triplets(out / "D.txt", disc.operator.Dbar)
            save_triplets(out / "E.txt", disc.operator.E)
        if args.dump_nodes:
            save_nodes(out / "nodes_X.txt", X)
            save_nodes(out / "nodes_Y.txt", Y)
    write_json({"command": "solve", "config": cfg.to_dict(), "rows": [r.row() for r in rows]},
               out / "summary.json")
    for r in rows:
        print(f"{r.problem}: N={r.N} M={r.M} error={r.error:.3e} stability={r.stability_norm} status={r.status}")
    return 0


def _sweep(args, runner, name):
    cfg = _config(args)
    out = _outdir(cfg)
    rep = runner(cfg)
    write_csv(rep.rows, out / f"{name}.csv")
    write_json({"command": name, **rep.summary()}, out / "summary.json")
    for r in rep.rows:
        print(f"{r.problem} {rep.parameter}={getattr(r, rep.parameter)} N={r.N} error={r.error} status={r.status}")
    for prob, (k, res) in rep.rates.items():
        print(f"rate[{prob}] = {k} (residual {res})")
    return 0


def cmd_sweep_h(args):
    return _sweep(args, run_h_sweep, "sweep-h")


def cmd_sweep_p(args):
    return _sweep(args, run_p_sweep, "sweep-p")


def cmd_sweep_q(args):
    return _sweep(args, run_q_sweep, "sweep-q")


def cmd_spectrum(args):
    cfg = _config(args)
    out = _outdir(cfg)
    recs = run_spectrum(cfg, out_dir=out)
    summary = [{k: v for k, v in r.items() if k != "eigenvalues"} for r in recs]
    write_json({"command": "spectrum", "config": cfg.to_dict(), "spectra": summary}, out / "summary.json")
    for r in summary:
        print(f"q={r['q']:g} N={r['N']} M={r['M']} nullspace={r['nullspace']} rank={r['rank']} -> {r['file']}")
    return 0


def cmd_nodes(args):
    cfg = _config(args)
    out = _outdir(cfg)
    _, X, Y, _ = build_discretization(replace(cfg, p=2, stencil_size=0))
    px, py = out / "nodes_X.txt", out / "nodes_Y.txt"
    save_nodes(px, X)
    save_nodes(py, Y)
    write_json({"command": "nodes", "config": cfg.to_dict(), "N": len(X), "M": len(Y),
                "files": [str(px), str(py)]}, out / "summary.json")
    print(f"wrote {len(X)} trial and {len(Y)} evaluation points to {out}")
    return 0


def cmd_cardinal(args):
    cfg = _config(args)
    out = _outdir(cfg)
    t, psi, x = cardinal_trace(h=args.h, p=args.p, n=args.n, j=args.j, phs_k=cfg.phs_k)
    np.savetxt(out / "cardinal.csv", np.column_stack([t, psi]), delimiter=",", header="x,psi", comments="",
               fmt="%.17g")
    hs = [args.h / 2 ** k for k in range(4)]
    jumps = [voronoi_jump(h, args.p, args.n, phs_k=cfg.phs_k) for h in hs]
    write_json({"command": "cardinal", "h": hs, "jumps": jumps, "p": args.p, "n": args.n,
                "nodes": x.tolist()}, out / "summary.json")
    for h, jmp in zip(hs, jumps):
        print(f"h={h:g} jump={jmp:.3e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rbffd", description="RBF-FD least-squares and collocation solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-c", "--config", help="key = value configuration file")
        p.add_argument("-s", "--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
        p.add_argument("-o", "--output", help="output directory")
        p.set_defaults(func=func)
        return p

    p = add("solve", cmd_solve, "single solve with error and stability report")
    p.add_argument("--dump-matrices", action="store_true", help="write D and E as triplet files")
    p.add_argument("--dump-nodes", action="store_true", help="write trial and evaluation node sets")
    add("sweep-h", cmd_sweep_h, "h-refinement sweep with fitted convergence rate")
    add("sweep-p", cmd_sweep_p, "polynomial degree sweep")
    add("sweep-q", cmd_sweep_q, "oversampling sweep")
    add("spectrum", cmd_spectrum, "eigenvalues of the product matrix")
    add("nodes", cmd_nodes, "generate and dump node sets")
    p = add("cardinal", cmd_cardinal, "1D cardinal function trace and Voronoi-edge jumps")
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--n", type=int, default=7)
    p.add_argument("--j", type=int, default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RBFFDError as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: [io] {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
