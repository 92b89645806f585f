"""Config-driven command line: pilot runs, allocation plans, estimates, sweeps.

Commands read a flat dotted-key config file, write JSON-compatible result
files embedding the config hash and master seed, and print a short human
summary to stderr.  Re-running any command with identical inputs reproduces
byte-identical output files.  NESTIQ_THREADS caps internal parallelism.

Exit codes: 0 success, 2 usage or config error, 3 infeasible plan,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .allocation import (
    FitQualityError,
    InfeasiblePlanError,
    PilotConstants,
    fit_pilot_inner,
    fit_pilot_outer,
    fit_variance_power_law,
    predicted_work,
    solve_allocation,
)
from .config import ConfigError, ExperimentConfig
from .estimators import InnerUnderflowError
from .lds import RandomizationKey
from .oed import LaplaceFitError, MapConvergenceError, build_nested_problem, eig_laplace_only

_USAGE_EXIT = 2
_INFEASIBLE_EXIT = 3
_NUMERICAL_EXIT = 4


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_json(path: str, payload: dict):
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _summary(lines):
    for k, v in lines:
        print(f"{k:>16}: {v}", file=sys.stderr)


def _parse_int_list(text: str, flag: str):
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{flag}: expected a comma-separated integer list")


def _parse_float_list(text: str, flag: str):
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{flag}: expected a comma-separated float list")


# ---------------------------------------------------------------------------
# pilot
# ---------------------------------------------------------------------------


def _model_disc_constants(cfg: ExperimentConfig):
    if cfg.values["model"] == "synthetic":
        return (
            cfg.values["synthetic.c_disc"],
            cfg.values["synthetic.eta"],
            cfg.values["synthetic.gamma"],
        )
    return 0.0, 1.0, 0.0


def cmd_pilot(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.S < 8 or args.R < 8:
        raise ConfigError("pilot runs need --S >= 8 and --R >= 8 randomizations")
    outer_ladder = _parse_int_list(args.outer_ladder, "--outer-ladder")
    inner_ladder = _parse_int_list(args.inner_ladder, "--inner-ladder")
    seed = cfg.seed if args.seed is None else args.seed
    key = RandomizationKey(seed, tag="pilot")
    problem = cfg.build_problem()
    family = cfg.estimator_family()
    sampler = cfg.sampler_kind()
    c_disc, eta, gamma = _model_disc_constants(cfg)

    if family == "laplace":
        variances = []
        for i, n in enumerate(outer_ladder):
            res = eig_laplace_only(
                problem, n,
                sampler="mc" if sampler.kind == "mc" else "rqmc-sobol-owen",
                key=key.child("outer", i), s_replicates=args.S,
            )
            variances.append(args.S * res.variance_of_mean)
        c_q1, beta, resid = fit_variance_power_law(outer_ladder, variances)
        payload = {
            "c_q1": c_q1, "beta": beta, "c_q2": 0.0, "c_q3": 0.0, "delta": 0.0,
            "c_disc": c_disc, "eta": eta, "gamma": gamma,
            "metadata": {
                "estimator": cfg.estimator,
                "outer_ladder": outer_ladder,
                "outer_variances": variances,
                "outer_residual": resid,
                "S": args.S,
                "seed": seed,
                "config_hash": cfg.config_hash(),
            },
        }
    else:
        nested = build_nested_problem(problem, family=family)
        outer = fit_pilot_outer(
            nested, outer_ladder, args.m_fixed, args.S,
            key.child("outer"), sampler=sampler,
        )
        inner = fit_pilot_inner(
            nested, inner_ladder, args.n_fixed, args.R,
            key.child("inner"), sampler=sampler,
        )
        payload = {
            "c_q1": outer.c_q1, "beta": outer.beta,
            "c_q2": inner.c_q2, "c_q3": inner.c_q3, "delta": inner.delta,
            "c_disc": c_disc, "eta": eta, "gamma": gamma,
            "metadata": {
                "estimator": cfg.estimator,
                "outer_ladder": outer_ladder,
                "inner_ladder": inner_ladder,
                "outer_variances": list(outer.rung_variances),
                "inner_variances": list(inner.rung_variances),
                "inner_biases": list(inner.rung_biases),
                "outer_residual": outer.residual,
                "inner_residual": inner.residual,
                "c_q3_low_confidence": inner.low_confidence,
                "S": args.S, "R": args.R,
                "m_fixed": args.m_fixed, "n_fixed": args.n_fixed,
                "seed": seed,
                "config_hash": cfg.config_hash(),
            },
        }
    _write_json(args.out, payload)
    _summary([
        ("pilot", args.out),
        ("c_q1", payload["c_q1"]), ("beta", payload["beta"]),
        ("c_q2", payload["c_q2"]), ("c_q3", payload["c_q3"]),
        ("delta", payload["delta"]),
    ])
    return 0


def _load_pilot(path: str) -> tuple[PilotConstants, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    meta = data.get("metadata", {})
    consts = PilotConstants(
        c_q1=data["c_q1"], beta=data["beta"], c_q2=data["c_q2"],
        c_q3=data["c_q3"], delta=data["delta"], c_disc=data.get("c_disc", 0.0),
        eta=data.get("eta", 1.0), gamma=data.get("gamma", 0.0), metadata=meta,
    )
    return consts, meta


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def _plan_payload(plan, consts, meta):
    return {
        "tol": plan.tol,
        "alpha": plan.alpha,
        "c_alpha": plan.c_alpha,
        "kappa_star": plan.kappa_star,
        "n_star": plan.n_star,
        "m_star": plan.m_star,
        "h_star": plan.h_star,
        "predicted_work": predicted_work(plan, consts),
        "n_raw": plan.n_raw,
        "m_raw": plan.m_raw,
        "constants": {
            "c_q1": consts.c_q1, "beta": consts.beta, "c_q2": consts.c_q2,
            "c_q3": consts.c_q3, "delta": consts.delta, "c_disc": consts.c_disc,
            "eta": consts.eta, "gamma": consts.gamma,
        },
        "config_hash": meta.get("config_hash"),
        "seed": meta.get("seed"),
    }


def cmd_plan(args) -> int:
    consts, meta = _load_pilot(args.pilot)
    plan = solve_allocation(
        consts, args.tol, args.alpha, chebyshev=args.chebyshev,
        bias_split=args.bias_split, h_min=args.h_min,
    )
    _write_json(args.out, _plan_payload(plan, consts, meta))
    _summary([
        ("plan", args.out), ("tol", plan.tol), ("kappa*", plan.kappa_star),
        ("N*", plan.n_star), ("M*", plan.m_star), ("h*", plan.h_star),
        ("work", plan.predicted_work), ("C_alpha", plan.c_alpha),
    ])
    return 0


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _run_config_estimator(cfg, n, m, s, r, seed, h):
    key = RandomizationKey(seed, tag="estimate")
    return cfg.run_estimator(n, m, s, r, key, h=h)


def cmd_estimate(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    h = None
    if args.plan:
        with open(args.plan, "r", encoding="utf-8") as fh:
            plan = json.load(fh)
        n, m, h = plan["n_star"], plan["m_star"], plan.get("h_star")
    elif args.N is not None:
        n, m = args.N, args.M
    else:
        raise ConfigError("provide either --plan or explicit --N (and --M)")
    result = _run_config_estimator(cfg, n, m, args.S, args.R, seed, h)
    payload = {
        "estimator": cfg.estimator,
        "model": cfg.values["model"],
        "estimate": result.estimate,
        "stderr": result.stderr,
        "variance_of_mean": result.variance_of_mean,
        "counts": result.counts,
        "work": result.work,
        "seed": seed,
        "config_hash": cfg.config_hash(),
        "h": h,
    }
    _write_json(args.out, payload)
    _summary([
        ("estimate", result.estimate),
        ("stderr", result.stderr),
        ("counts", result.counts),
        ("work", result.work),
        ("out", args.out),
    ])
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_SWEEP_COLUMNS = (
    "tol", "kappa_star", "N_star", "M_star", "h_star", "predicted_work",
    "estimate", "stderr", "realized_work", "seed", "error",
)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    consts, meta = _load_pilot(args.pilot)
    tols = _parse_float_list(args.tols, "--tols") if args.tols else []
    seed = cfg.seed if args.seed is None else args.seed
    rows = []
    for i, tol in enumerate(tols):
        row_seed = seed + i
        try:
            plan = solve_allocation(consts, tol, args.alpha)
            key = RandomizationKey(row_seed, tag="sweep")
            result = cfg.run_estimator(
                plan.n_star, plan.m_star, args.S, args.R, key, h=plan.h_star
            )
            rows.append({
                "tol": tol,
                "kappa_star": plan.kappa_star,
                "N_star": plan.n_star,
                "M_star": plan.m_star,
                "h_star": plan.h_star,
                "predicted_work": predicted_work(plan, consts),
                "estimate": result.estimate,
                "stderr": result.stderr,
                "realized_work": result.work,
                "seed": row_seed,
                "error": None,
            })
        except (ArithmeticError, ValueError, ConfigError) as exc:
            rows.append({c: None for c in _SWEEP_COLUMNS} | {
                "tol": tol, "seed": row_seed, "error": str(exc).replace(",", ";"),
            })
    lines = [",".join(_SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in _SWEEP_COLUMNS))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    _summary([("sweep", args.out), ("rows", len(rows))])
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestiq",
        description="Nested randomized-QMC estimation with pilot-based allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pilot", help="fit pilot constants for a config")
    p.add_argument("config")
    p.add_argument("--outer-ladder", default="32,128,512,2048")
    p.add_argument("--inner-ladder", default="32,128,512,2048")
    p.add_argument("--S", type=int, default=32)
    p.add_argument("--R", type=int, default=32)
    p.add_argument("--m-fixed", type=int, default=4)
    p.add_argument("--n-fixed", type=int, default=4)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pilot)

    p = sub.add_parser("plan", help="solve the allocation for a tolerance")
    p.add_argument("--pilot", required=True)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--chebyshev", action="store_true")
    p.add_argument("--bias-split", type=float, default=0.5)
    p.add_argument("--h-min", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("estimate", help="run the configured estimator")
    p.add_argument("config")
    p.add_argument("--plan", default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--S", type=int, default=1)
    p.add_argument("--R", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="plan and estimate over a tolerance list")
    p.add_argument("config")
    p.add_argument("--pilot", required=True)
    p.add_argument("--tols", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--S", type=int, default=1)
    p.add_argument("--R", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except InfeasiblePlanError as exc:
        print(f"infeasible: {exc} (binding constraint: {exc.binding})", file=sys.stderr)
        return _INFEASIBLE_EXIT
    except (
        FitQualityError,
        MapConvergenceError,
        LaplaceFitError,
        InnerUnderflowError,
        ArithmeticError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _NUMERICAL_EXIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
