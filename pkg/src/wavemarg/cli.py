"""Command-line front end.

Subcommands::

    wavemarg run <config>
    wavemarg reallocate <phi.wff> <rho_n.wff> [-o out.wff]
    wavemarg smooth <u.wff> --eps <e> [-o out.wff]
    wavemarg lift <psi.wff> <phi_n.wff> [<phi_n.wff> ...] [-o dir]
    wavemarg report <dir>

Exit status is 0 when every checked invariant held, 1 when one failed and
2 for usage errors. ``--trace`` streams stage hooks to stdout as
tab-separated lines.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import WavemargError
from .fieldio import read_wff, write_wff
from .grid import marginal
from .pipeline import ExperimentConfig, emit_report, read_report, run_pipeline, write_fields
from .reallocation import l2_match
from .sign_lift import sign_pipeline
from .smoothing import gauss_stencil, theta_eps

REALLOC_MARGINAL_TOL = 1e-10
SMOOTH_MARGINAL_TOL = 1e-10


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def make_tracer(stream):
    def trace(stage, *values):
        print("\t".join([stage] + [_fmt(v) for v in values]), file=stream)
    return trace


def _relative_l1(a, b):
    return float(np.sum(np.abs(a - b)) / np.sum(np.abs(b)))


def _load_config_field(path):
    header, values = read_wff(path)
    if header.n_blocks < 2:
        raise WavemargError(f"{path}: expected a configuration field (n_blocks >= 2)")
    return header, header.grid(), values


def cmd_run(args, trace) -> int:
    config = ExperimentConfig.from_file(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    report = run_pipeline(config, trace=trace)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_report(report, out / "report.csv")
    if args.fields:
        write_fields(report, out)
    h1 = report.column("h1_psi")
    print(f"rows={len(report.rows)} h1_first={h1[0]:.6g} h1_last={h1[-1]:.6g} "
          f"ratio={h1[-1] / h1[0]:.4f} max_marginal={max(report.column('marginal_l1')):.3e}")
    print(f"report written to {out / 'report.csv'}")
    return 0


def cmd_reallocate(args, trace) -> int:
    header, grid, phi = _load_config_field(args.phi)
    rho_header, rho_n = read_wff(args.rho_n)
    if rho_header.shape != grid.scalar_shape or rho_header.L != grid.L:
        raise WavemargError("rho_n does not live on the grid of phi")
    res = l2_match(grid, phi, rho_n, tol=args.tol, trace=trace)
    err = _relative_l1(marginal(grid, res.phi_out), rho_n)
    print(f"iterations={res.iterations} residual={res.residual:.3e} q={res.q_n:.6g} "
          f"mass_defect={res.mass_defect:.3e} marginal_l1={err:.3e}")
    if args.output:
        write_wff(args.output, res.phi_out, grid.d, grid.L)
    if res.residual <= 1e-12 and err > REALLOC_MARGINAL_TOL:
        print(f"marginal error {err:.3e} above {REALLOC_MARGINAL_TOL:g}", file=sys.stderr)
        return 1
    return 0


def cmd_smooth(args, trace) -> int:
    header, grid, u = _load_config_field(args.u)
    out = theta_eps(grid, u, gauss_stencil(args.eps, grid))
    if trace is not None:
        trace("smooth", args.eps, out.marginal_error, out.leakage)
    print(f"epsilon={args.eps:g} marginal_l1={out.marginal_error:.3e} leakage={out.leakage:.3e}")
    if args.output:
        write_wff(args.output, out.u_eps, grid.d, grid.L)
    if out.marginal_error > SMOOTH_MARGINAL_TOL:
        print(f"marginal error above {SMOOTH_MARGINAL_TOL:g}", file=sys.stderr)
        return 1
    return 0


def cmd_lift(args, trace) -> int:
    header, grid, psi = _load_config_field(args.psi)
    if np.iscomplexobj(psi):
        raise WavemargError("lift expects a real-valued psi")
    phi_seq = []
    for path in args.phi_n:
        h, values = read_wff(path)
        if h.shape != grid.config_shape:
            raise WavemargError(f"{path}: shape {h.shape} does not match psi")
        phi_seq.append(np.abs(values))
    run = sign_pipeline(grid, psi, phi_seq, n_max=args.n_max, trace=trace)
    print("k\tn_k\tlip\ta\tl2_err\th1_err")
    for k, (n_k, a, l2, h1) in enumerate(
            zip(run.indices, run.a, run.l2_errors, run.h1_errors), 1):
        print(f"{k}\t{n_k}\t{run.lips[n_k - 1]:.6g}\t{a:.6g}\t{l2:.6g}\t{h1:.6g}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        for k, psi_k in enumerate(run.psi_seq, 1):
            write_wff(out / f"psi_{k}.wff", psi_k, grid.d, grid.L)
    modulus = max(float(np.max(np.abs(np.abs(p) - f))) for p, f in zip(run.psi_seq, phi_seq))
    if modulus > 1e-14 or min(run.decomposition_slack) < -1e-10:
        print("lifted amplitudes or L2 decomposition bound out of tolerance", file=sys.stderr)
        return 1
    return 0


def cmd_report(args, trace) -> int:
    path = Path(args.dir) / "report.csv"
    rows = read_report(path)
    print("n\th1_sqrt_density\tl2_amplitude\th1_psi\tmarginal_l1\tepsilon")
    for r in rows:
        print(f"{r.n}\t{r.h1_sqrt_density:.6g}\t{r.l2_amplitude:.6g}\t{r.h1_psi:.6g}"
              f"\t{r.marginal_l1:.3e}\t{r.epsilon:g}")
    bad = [r.n for r in rows
           if r.marginal_l1 > args.marginal_tol
           or min(r.k_estimate_slack, r.final_bound_slack) < -args.bound_slack]
    if bad:
        print(f"rows out of tolerance: {bad}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavemarg",
        description="Marginal-constrained approximation of symmetric wavefunctions.")
    parser.add_argument("--trace", action="store_true",
                        help="stream stage hooks as tab-separated lines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("config")
    p.add_argument("--output-dir", help="override output_dir from the config")
    p.add_argument("--fields", action="store_true", help="also dump wff fields")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reallocate", help="match phi to a new one-particle density")
    p.add_argument("phi")
    p.add_argument("rho_n")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_reallocate)

    p = sub.add_parser("smooth", help="marginal-preserving smoothing of a field")
    p.add_argument("u")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("lift", help="attach smoothed phases of psi to amplitudes")
    p.add_argument("psi")
    p.add_argument("phi_n", nargs="+")
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("-o", "--output", help="directory for psi_k.wff")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("report", help="print and check a run's report.csv")
    p.add_argument("dir")
    p.add_argument("--marginal-tol", type=float, default=1e-9)
    p.add_argument("--bound-slack", type=float, default=1e-10)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    trace = make_tracer(sys.stdout) if args.trace else None
    try:
        return args.func(args, trace)
    except WavemargError as exc:
        where = ""
        if getattr(exc, "stage", None) is not None:
            where = f" [stage {exc.stage}, n={exc.n}]"
        print(f"error: {type(exc).__name__}: {exc}{where}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
