"""Command-line entry point.

Every subcommand is a thin adapter around the library: parse flags, call one
function, print a machine-readable JSON summary on stdout and a human log on
stderr.  Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .calib import CalibrationConfig, alpha_for_p, calibration_curve, p_eff
from .dln import DlnConfig, dln_train
from .errors import NormscalerError
from .harness import SweepConfig, diagnose_concentration, run_sweep
from .model import (
    DesignSpec,
    TargetSpec,
    empirical_test_mse,
    gen_instance,
    lr_norm,
    population_risk,
)
from .solver import SolverOptions, solve_min_lp
from .theory import (
    r_threshold,
    ray_scale_prediction,
    regime_prediction,
    theory_inputs,
    transition_n_star,
    unified_norm_prediction,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2, default=float)
    sys.stdout.write("\n")


def _target_from_flags(args) -> TargetSpec:
    name = args.target
    if name in ("e1", "single_spike"):
        return TargetSpec(kind="single_spike", a=args.a)
    if name in ("flat", "flat_support"):
        return TargetSpec(kind="flat_support", s=args.s, a=args.a)
    raise NormscalerError(f"unknown target {name!r} (use e1 or flat)")


def _design_from_flags(args) -> DesignSpec:
    if args.kappa is not None:
        return DesignSpec.proportional(args.kappa)
    if args.d is not None:
        return DesignSpec.fixed(args.d)
    raise NormscalerError("need --d or --kappa")


def _add_instance_flags(sub) -> None:
    sub.add_argument("--target", default="e1", help="target kind: e1 | flat")
    sub.add_argument("--s", type=int, default=1, help="support size (flat targets), dimensionless")
    sub.add_argument("--a", type=float, default=None,
                     help="per-coordinate magnitude; default 1 (e1) or 1/sqrt(s) (flat)")
    sub.add_argument("--sigma", type=float, default=0.1, help="label noise std deviation")
    sub.add_argument("--n", type=int, required=True, help="sample count (rows of X)")
    sub.add_argument("--d", type=int, default=None, help="fixed dimension (columns of X)")
    sub.add_argument("--kappa", type=float, default=None, help="proportional aspect d = ceil(kappa n)")
    sub.add_argument("--seed", type=int, default=0, help="64-bit instance seed")


def build_parser() -> _Parser:
    parser = _Parser(prog="normscaler", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("gen", help="sample an instance and summarize it")
    _add_instance_flags(sub)

    sub = subs.add_parser("solve", help="compute the minimum-lp interpolator")
    _add_instance_flags(sub)
    sub.add_argument("--p", type=float, required=True, help="norm exponent p in (1, 2]")
    sub.add_argument("--r", type=float, nargs="*", default=None,
                     help="report-norm exponents; default {1, p}")
    sub.add_argument("--tol-feas", type=float, default=1e-8, help="relative feasibility tolerance")
    sub.add_argument("--max-iters", type=int, default=50_000, help="ascent iteration cap")
    sub.add_argument("--empirical-test-size", type=int, default=0,
                     help="if > 0, report MSE on a sampled test set of this size "
                          "instead of the exact population risk")

    sub = subs.add_parser("theory", help="evaluate closed-form predictions")
    sub.add_argument("--p", type=float, required=True, help="norm exponent p in (1, 2]")
    sub.add_argument("--r", type=float, default=1.0, help="report-norm exponent")
    sub.add_argument("--target", default="e1", help="target kind: e1 | flat")
    sub.add_argument("--s", type=int, default=1, help="support size (flat targets)")
    sub.add_argument("--a", type=float, default=None, help="per-coordinate magnitude")
    sub.add_argument("--sigma", type=float, default=0.1, help="label noise std deviation")
    sub.add_argument("--n", type=int, required=True, help="sample count")
    sub.add_argument("--d", type=int, default=None, help="fixed dimension")
    sub.add_argument("--kappa", type=float, default=None, help="proportional aspect ratio")

    sub = subs.add_parser("sweep", help="run a sweep from a JSON recipe")
    sub.add_argument("--config", required=True, help="path to a SweepConfig JSON document")
    sub.add_argument("--output", default=None, help="override output CSV path")
    sub.add_argument("--base-seed", type=int, default=None, help="override base seed")
    sub.add_argument("--seeds-per-cell", type=int, default=None, help="override trials per cell")

    sub = subs.add_parser("calibrate", help="alpha -> effective p calibration")
    sub.add_argument("--alpha", type=float, default=None, help="single initialization scale")
    sub.add_argument("--p-target", type=float, default=None, help="invert: find alpha for this p")
    sub.add_argument("--out", default=None, help="write the sampled curve as CSV here")

    sub = subs.add_parser("dln-train", help="train a diagonal linear network")
    _add_instance_flags(sub)
    sub.add_argument("--alpha", type=float, required=True, help="initialization scale")
    sub.add_argument("--lr", type=float, required=True, help="learning rate")
    sub.add_argument("--max-epochs", type=int, default=2_000_000, help="epoch cap")
    sub.add_argument("--loss-tol", type=float, default=1e-10, help="stop when train MSE <= this")
    sub.add_argument("--r", type=float, nargs="*", default=(1.0, 1.1), help="report-norm exponents")

    sub = subs.add_parser("diagnose", help="concentration diagnostics on one instance")
    _add_instance_flags(sub)
    sub.add_argument("--q", type=float, default=3.0, help="moment order for X^T Y diagnostics")

    return parser


def _cmd_gen(args) -> int:
    inst = gen_instance(_target_from_flags(args), _design_from_flags(args), args.sigma, args.n, args.seed)
    _emit({
        "n": inst.n, "d": inst.d, "s": inst.s, "sigma": inst.sigma, "seed": inst.seed,
        "y_sq_over_n": float(inst.Y @ inst.Y) / inst.n,
        "w_star_l2": float(np.linalg.norm(inst.w_star)),
    })
    return EXIT_OK


def _cmd_solve(args) -> int:
    inst = gen_instance(_target_from_flags(args), _design_from_flags(args), args.sigma, args.n, args.seed)
    opts = SolverOptions(tol_feas=args.tol_feas, max_iters=args.max_iters)
    sol = solve_min_lp(inst.X, inst.Y, args.p, opts)
    r_list = args.r if args.r else sorted({1.0, args.p})
    if args.empirical_test_size > 0:
        mse = empirical_test_mse(sol.w_hat, inst.w_star, args.sigma,
                                 args.empirical_test_size, args.seed + 1)
    else:
        mse = population_risk(sol.w_hat, inst.w_star, args.sigma)
    _emit({
        "p": args.p, "n": inst.n, "d": inst.d,
        "norms": {str(r): lr_norm(sol.w_hat, r) for r in r_list},
        "feas_residual": sol.feas_residual,
        "cert_residual": sol.cert_residual,
        "t_star_empirical": sol.t_star_empirical,
        "iters": sol.iters,
        "converged": sol.converged,
        "test_mse": mse,
    })
    if not sol.converged:
        _log(f"solver did not converge: feas={sol.feas_residual:.2e}")
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_theory(args) -> int:
    if args.kappa is not None:
        d = int(np.ceil(args.kappa * args.n))
    elif args.d is not None:
        d = args.d
    else:
        raise NormscalerError("need --d or --kappa")
    target = _target_from_flags(args)
    ti = theory_inputs(target, d, args.n, args.sigma, args.p, args.r)
    pred = unified_norm_prediction(ti, args.n)
    _emit({
        "p": args.p, "q": ti.q, "r": args.r, "n": args.n, "d": d,
        "n_star": transition_n_star(ti),
        "r_star": r_threshold(args.p),
        "t_star": ray_scale_prediction(ti, args.n),
        "regime": regime_prediction(ti, args.n),
        "value": pred.value,
        "slope": pred.slope,
        "terms": pred.terms,
        "boundary_p": pred.boundary_p,
    })
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    overrides = {}
    if args.output is not None:
        overrides["output_path"] = args.output
    if args.base_seed is not None:
        overrides["base_seed"] = args.base_seed
    if args.seeds_per_cell is not None:
        overrides["seeds_per_cell"] = args.seeds_per_cell
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    _log(f"sweep {cfg.experiment_id}: {len(cfg.n_grid)} n-points, "
         f"{cfg.seeds_per_cell} seeds/cell -> {cfg.output_path}")
    records = run_sweep(cfg)
    failed = sum(1 for rec in records if rec.status.startswith("failed"))
    _emit({"experiment_id": cfg.experiment_id, "rows": len(records),
           "failed_rows": failed, "output_path": cfg.output_path})
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cfg = CalibrationConfig()
    if args.p_target is not None:
        alpha = alpha_for_p(args.p_target, cfg=cfg)
        p, se = p_eff(alpha, cfg)
        _emit({"p_target": args.p_target, "alpha": alpha, "p_eff": p, "stderr": se})
        return EXIT_OK
    if args.alpha is not None:
        p, se = p_eff(args.alpha, cfg)
        _emit({"alpha": args.alpha, "p_eff": p, "stderr": se})
        return EXIT_OK
    curve = calibration_curve(cfg=cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("alpha,p_eff,stderr\n")
            for a, p, se in curve.points:
                fh.write(f"{a:.17g},{p:.17g},{se:.17g}\n")
        _log(f"wrote {len(curve.points)} rows to {args.out}")
    _emit({
        "points": [{"alpha": a, "p_eff": p, "stderr": se} for a, p, se in curve.points],
        "monotone_violations": curve.monotone_violations,
    })
    return EXIT_OK


def _cmd_dln_train(args) -> int:
    inst = gen_instance(_target_from_flags(args), _design_from_flags(args), args.sigma, args.n, args.seed)
    cfg = DlnConfig(alpha=args.alpha, lr=args.lr, max_epochs=args.max_epochs, loss_tol=args.loss_tol)
    report = dln_train(inst.X, inst.Y, cfg)
    _emit({
        "alpha": args.alpha, "lr": args.lr, "n": inst.n, "d": inst.d,
        "status": report.status, "epochs_run": report.epochs_run,
        "final_loss": report.final_loss,
        "norms": {str(r): lr_norm(report.beta, r) for r in args.r},
        "test_mse": population_risk(report.beta, inst.w_star, args.sigma),
    })
    if report.status == "diverged":
        _log("training diverged")
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    inst = gen_instance(_target_from_flags(args), _design_from_flags(args), args.sigma, args.n, args.seed)
    rep = diagnose_concentration(inst, args.q)
    _emit({
        "n": inst.n, "d": inst.d, "s": inst.s, "q": args.q,
        "y_sq_ratio": rep.y_sq_ratio,
        "bulk_ratio": rep.bulk_ratio,
        "bulk_defined": rep.bulk_defined,
        "spike_ratio": rep.spike_ratio,
        "total_ratio": rep.total_ratio,
    })
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "theory": _cmd_theory,
    "sweep": _cmd_sweep,
    "calibrate": _cmd_calibrate,
    "dln-train": _cmd_dln_train,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (NormscalerError, OSError, json.JSONDecodeError, TypeError, ValueError) as err:
        _log(f"error: {err}")
        return EXIT_CONFIG


def entry() -> None:
    raise SystemExit(main())
