"""``pmlp`` command line: oracle, solve, sweep and ntd subcommands.

Exit codes: 0 on success, 2 when some points failed (an errors CSV is
written next to the partial results), 1 on configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .harness import ConfigError, RunResult
from .ntd import DiscreteResonanceError, build_lateral_pair
from .solver import solve_scattering

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--out", type=Path, default=Path("pmlp-out"), help="output directory")
    common.add_argument("--threads", type=int, help=f"worker count (overrides ${harness.THREADS_ENV} and the config)")
    common.add_argument("--tol", type=float, help="absolute quadrature tolerance")

    single = argparse.ArgumentParser(add_help=False)
    single.add_argument("--k", type=float, help="wavenumber (default: first of k_values)")
    single.add_argument("--L", type=float, help="PML thickness (default: first of L_values)")

    p = argparse.ArgumentParser(prog="pmlp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("oracle", parents=[common], help="spectral PML error |w0|, |w1| against P")
    sub.add_parser("solve", parents=[common, single], help="one PML solve, field over D")
    sub.add_parser("sweep", parents=[common], help="E_rel against L for each k")
    sub.add_parser("ntd", parents=[common, single], help="lateral NtD blocks and marching spectra")
    return p


def _load(args):
    cfg = harness.read_config(args.config, tol=args.tol)
    return replace(cfg, threads=harness.resolve_threads(args.threads, cfg.threads))


def _single(args, cfg):
    k = args.k if args.k is not None else cfg.k_values[0]
    L = args.L if args.L is not None else cfg.L_values[0]
    return k, L, cfg.solve_config(k, L)


def _finish(result: RunResult, cfg, out, prefix):
    harness.write_results(result, cfg, out, prefix)
    for tag, fit in result.fits.items():
        desc = "inconclusive" if fit is None else (
            f"{fit.model.value} rate={fit.rate:.6g} r2={fit.r_squared:.6f}")
        print(f"{tag}: {desc}")
    if result.failures:
        print(f"{len(result.failures)} point(s) failed; see {out / (prefix + '_errors.csv')}",
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _write_rows(path, rows, header):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _matrix_rows(a):
    return [(i, j, "%.17g" % a[i, j].real, "%.17g" % a[i, j].imag)
            for i in range(a.shape[0]) for j in range(a.shape[1])]


def _fail_single(out, prefix, k, L, exc):
    result = RunResult(failures=[(k, L, f"{type(exc).__name__}: {exc}")])
    harness.emit_manifest(result, out / f"{prefix}_errors.csv")
    print(f"{prefix} failed: {exc}", file=sys.stderr)
    return EXIT_PARTIAL


def cmd_oracle(args, cfg):
    return _finish(harness.run_oracle_study(cfg), cfg, args.out, "oracle")


def cmd_sweep(args, cfg):
    return _finish(harness.run_sweep(cfg), cfg, args.out, "sweep")


def cmd_solve(args, cfg):
    k, L, scfg = _single(args, cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        field = solve_scattering(scfg)
    except (DiscreteResonanceError, ValueError, ArithmeticError) as exc:
        return _fail_single(args.out, "solve", k, L, exc)
    cols, rows = field.block(scfg.region_d)
    data = [("%.17g" % field.x1[i], "%.17g" % field.y[i, j],
             "%.17g" % field.total[i, j].real, "%.17g" % field.total[i, j].imag)
            for i in cols for j in rows]
    path = args.out / f"solve_k{k!r}_L{L!r}.csv"
    _write_rows(path, data, ("x1", "x2", "Re", "Im"))
    print(f"field over D: {len(data)} nodes -> {path}")
    return EXIT_OK


def cmd_ntd(args, cfg):
    k, L, scfg = _single(args, cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        pair = build_lateral_pair(scfg.spec, scfg.profile, k, scfg.resolution)
    except (DiscreteResonanceError, ValueError) as exc:
        return _fail_single(args.out, "ntd", k, L, exc)
    header = ("row", "col", "Re", "Im")
    for side, ntd, op in (("plus", pair.plus, pair.r_plus), ("minus", pair.minus, pair.r_minus)):
        _write_rows(args.out / f"ntd_{side}.csv", _matrix_rows(ntd), header)
        eig = np.sort_complex(np.linalg.eigvals(op.r))
        _write_rows(args.out / f"r_{side}_spectrum.csv", _matrix_rows(eig[:, None]), header)
        print(f"{side}: {ntd.shape[0]} trace nodes, doubling levels {op.levels}, "
              f"spectral radius {op.spectral_radius:.6f}, "
              f"weighted norm {op.weighted_norm(pair.grid):.6f}")
    return EXIT_OK


COMMANDS = {"oracle": cmd_oracle, "solve": cmd_solve, "sweep": cmd_sweep, "ntd": cmd_ntd}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
