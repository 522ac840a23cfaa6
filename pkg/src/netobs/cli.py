"""Command-line front end.

Exit codes: 0 holds / success, 1 fails, 2 input error, 3 indeterminate or
hypothesis unmet.

CSV trace columns
-----------------
estimate:  t, estimator, trace, P11_fro, P22_fro, ...  (one row per step and estimator)
simulate:  t, cdossp_trace_analytic, cdossp_trace_empirical, cdossp_rel_error,
           kalman_trace_analytic, kalman_trace_empirical, kalman_rel_error
"""
from __future__ import annotations

import argparse
import json
import sys as _sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .core_model import NetworkedSystem, check_well_posedness, validate_system
from .errors import NotWellPosedError, PreconditionError, StructuralError
from .estimate import (
    EstimationSetup, block, equivalence_check_steady, run_recursion, steady_state, to_csv, trace_header, trace_rows,
)
from .io import ModelFormatError, load_model
from .linalg import min_eig_sym
from .sim import SimConfig, run_estimators
from .verify import (
    Verdict, check_kalman_convergence, oracle_for, verify_controllability, verify_observability,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_INDETERMINATE = 0, 1, 2, 3

PROPERTY_FLAGS = {
    "obsv": ("observable", verify_observability),
    "ctrb": ("controllable", verify_controllability),
    "kalman-conv": ("kalman_convergent", check_kalman_convergence),
}


class InputError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _text(report: dict, indent: int = 0) -> list[str]:
    lines = []
    pad = "  " * indent
    for k, v in report.items():
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines += _text(v, indent + 1)
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            lines.append(f"{pad}{k}:")
            for item in v:
                lines.append(f"{pad}  - " + ", ".join(f"{a}={b}" for a, b in item.items()))
        else:
            lines.append(f"{pad}{k}: {v}")
    return lines


def _emit(args, report: dict, started: float, out) -> None:
    duration = time.perf_counter() - started
    if args.format == "json":
        if args.timing:
            report["duration_s"] = duration
        out.write(json.dumps(_jsonable(report), indent=1, sort_keys=False) + "\n")
    else:
        report["duration_s"] = round(duration, 4)
        out.write("\n".join(_text(_jsonable(report))) + "\n")


def _tolerances(args) -> Tolerances:
    changes = {f.name: getattr(args, f.name) for f in fields(Tolerances) if getattr(args, f.name, None) is not None}
    return DEFAULT_TOL.with_(**changes)


def _load(args) -> tuple[NetworkedSystem, str]:
    try:
        sys, digest = load_model(args.model)
    except FileNotFoundError:
        raise InputError(f"{args.model}: no such file") from None
    except ModelFormatError as exc:
        raise InputError(str(exc)) from None
    return sys, digest


def _base(args, name: str, digest: str, tol: Tolerances) -> dict:
    return {"command": name, "model": str(args.model), "input_sha256": digest, "tolerances": tol.as_dict()}


def _require_usable(sys: NetworkedSystem, tol: Tolerances, strict: bool) -> None:
    bad = validate_system(sys, strict_phi=strict)
    if bad:
        raise InputError("invalid model: " + "; ".join(bad))
    wp = check_well_posedness(sys, tol)
    if not wp.well_posed:
        raise InputError(f"model is not well-posed: I - A_SS Phi is singular (condition {wp.condition_estimate:.3e})")


def _verdict_dict(v: Verdict) -> dict:
    return v.as_dict()


# ---------------------------------------------------------------- commands


def cmd_validate(args, out) -> int:
    tol = _tolerances(args)
    sys, digest = _load(args)
    report = _base(args, "validate", digest, tol)
    violations = validate_system(sys, strict_phi=args.strict_phi)
    report["strict_phi"] = args.strict_phi
    report["subsystems"] = sys.N
    report["dimensions"] = {"M_T": sys.M_T, "M_S": sys.M_S, "M_z": sys.M_z, "M_y": sys.M_y, "M_d": sys.M_d, "M_w": sys.M_w}
    if not violations:
        wp = check_well_posedness(sys, tol)
        report["well_posed"] = wp.well_posed
        report["condition_estimate"] = wp.condition_estimate
        if not wp.well_posed:
            violations.append("I - A_SS Phi is numerically singular")
    report["violations"] = violations
    report["valid"] = not violations
    args._report = report
    return EXIT_OK if not violations else EXIT_FAIL


def cmd_verify(args, out) -> int:
    tol = _tolerances(args)
    sys, digest = _load(args)
    _require_usable(sys, tol, args.strict_phi)
    prop, fn = PROPERTY_FLAGS[args.property]
    report = _base(args, "verify", digest, tol)
    try:
        v = fn(sys, tol)
    except PreconditionError as exc:
        raise InputError(str(exc)) from None
    report["structured"] = _verdict_dict(v)
    if v.n_zeros is not None:
        report["summary"] = f"m = {v.n_zeros} zero certificates checked"
    run_oracle = args.oracle or v.result == "indeterminate"
    if v.result == "indeterminate" and not args.oracle:
        print(f"warning: structured test indeterminate ({v.diagnostics}); running the PBH oracle", file=_sys.stderr)
    if run_oracle:
        o = oracle_for(prop, sys, tol)
        report["oracle"] = _verdict_dict(o)
        if v.result != "indeterminate":
            report["agreement"] = "AGREE" if o.result == v.result else "DISAGREE"
    args._report = report
    return {"holds": EXIT_OK, "fails": EXIT_FAIL, "indeterminate": EXIT_INDETERMINATE}[v.result]


def _p0(spec: str, n: int) -> np.ndarray:
    if spec in ("identity", "I"):
        return np.eye(n)
    if spec in ("zero", "0"):
        return np.zeros((n, n))
    try:
        return float(spec) * np.eye(n)
    except ValueError:
        pass
    try:
        P = np.array(json.loads(Path(spec).read_text()), dtype=float)
    except (OSError, ValueError) as exc:
        raise InputError(f"--p0: expected identity, zero, a number or a JSON matrix file ({exc})") from None
    if P.shape != (n, n):
        raise InputError(f"--p0: matrix has shape {P.shape}, expected {(n, n)}")
    return P


def _setup(sys: NetworkedSystem, tol: Tolerances) -> EstimationSetup:
    try:
        return EstimationSetup.from_system(sys, tol)
    except PreconditionError as exc:
        raise InputError(str(exc)) from None


def cmd_estimate(args, out) -> int:
    tol = _tolerances(args)
    sys, digest = _load(args)
    _require_usable(sys, tol, args.strict_phi)
    setup = _setup(sys, tol)
    P0 = _p0(args.p0, setup.n)
    if min_eig_sym(P0) < -tol.psd_slack * max(1.0, float(np.linalg.norm(P0))):
        raise InputError("--p0 is not positive semidefinite")
    report = _base(args, "estimate", digest, tol)
    report["p0"] = args.p0
    report["steps"] = args.steps
    names = ["cdossp", "kalman"] if args.estimator == "both" else [args.estimator]
    traces, rows = {}, []
    for name in names:
        Ps = run_recursion(setup, name, P0, args.steps)
        traces[name] = Ps
        rows += trace_rows(setup, Ps, name)
        report[name] = {"final_trace": float(np.trace(Ps[-1])), "P_final": Ps[-1]}
    if args.estimator == "both":
        worst = min(
            min_eig_sym(block(setup, Pc - Pk, i, i)) / max(1.0, float(np.linalg.norm(Pk, 2)))
            for Pc, Pk in zip(traces["cdossp"], traces["kalman"]) for i in range(1, setup.N + 1)
        )
        report["gap"] = {"min_relative_eigenvalue": worst, "all_psd": worst >= -tol.psd_slack}
    code = EXIT_OK
    if args.steady:
        for name in names:
            ss = steady_state(setup, name, P0)
            report[name]["steady"] = ss.as_dict() | {"P_star": ss.P}
            if not ss.converged:
                code = EXIT_INDETERMINATE
    if args.csv:
        Path(args.csv).write_text(to_csv(trace_header(setup), rows))
        report["csv"] = args.csv
    args._report = report
    return code


def cmd_equivalence(args, out) -> int:
    tol = _tolerances(args)
    sys, digest = _load(args)
    _require_usable(sys, tol, args.strict_phi)
    setup = _setup(sys, tol)
    P0 = _p0(args.p0, setup.n)
    res = equivalence_check_steady(setup, P0)
    report = _base(args, "equivalence", digest, tol)
    report["status"] = res.status
    report["kalman"] = res.kalman.as_dict()
    if res.diagnostics:
        report["diagnostics"] = res.diagnostics
    if res.status != "hypothesis_unmet":
        report["residuals"] = [b.as_dict() for b in res.residuals]
        w = res.worst()
        report["worst"] = {"i": w.i, "j": w.worst_j, "residual": w.residual}
        report["cdossp"] = res.cdossp.as_dict()
        report["P_star"] = res.P_star
        if res.cdossp.converged:
            report["cdossp_vs_kalman_rel_diff"] = float(
                np.linalg.norm(res.cdossp.P - res.P_star) / max(1e-300, np.linalg.norm(res.P_star))
            )
        if res.cdossp_fixed is not None:
            report["cdossp_fixed_at_P_star"] = res.cdossp_fixed
    args._report = report
    return {"equivalent": EXIT_OK, "not_equivalent": EXIT_FAIL, "hypothesis_unmet": EXIT_INDETERMINATE}[res.status]


def cmd_simulate(args, out) -> int:
    tol = _tolerances(args)
    sys, digest = _load(args)
    _require_usable(sys, tol, args.strict_phi)
    _setup(sys, tol)
    try:
        cfg = SimConfig(horizon=args.horizon, trials=args.trials, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    res = run_estimators(sys, cfg, tol)
    report = _base(args, "simulate", digest, tol)
    report["trials"], report["horizon"], report["seed"] = args.trials, args.horizon, args.seed
    for name in ("cdossp", "kalman"):
        rel = res.rel_error(name)
        report[name] = {
            "rel_error_final": float(rel[-1]),
            "rel_error_max": float(rel.max()),
            "rms_final_per_subsystem": res.rms[name][-1],
        }
    if args.csv:
        Path(args.csv).write_text(res.csv())
        report["csv"] = args.csv
    args._report = report
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netobs",
        description="Structured observability/controllability checks and distributed estimation for networked LTI systems.",
        epilog="Exit codes: 0 holds/success, 1 fails, 2 input error, 3 indeterminate or hypothesis unmet.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model file (JSON)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--timing", action="store_true", help="include wall-clock duration in JSON output")
    common.add_argument("--strict-phi", action="store_true", help="require 0/1 selection rows in Phi")
    tg = common.add_argument_group("tolerances")
    for f in fields(Tolerances):
        tg.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=type(f.default), default=None,
                        help=f"default {f.default}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check dimensions, Phi and well-posedness")

    p = sub.add_parser("verify", parents=[common], help="structured observability / controllability tests")
    p.add_argument("--property", choices=tuple(PROPERTY_FLAGS), default="obsv")
    p.add_argument("--oracle", action="store_true", help="also run the PBH test on the lumped model")

    p = sub.add_parser("estimate", parents=[common], help="covariance recursions",
                       description="CSV columns: " + "t, estimator, trace, P11_fro, P22_fro, ...")
    p.add_argument("--estimator", choices=("cdossp", "kalman", "both"), default="both")
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--steady", action="store_true", help="iterate to the fixed point")
    p.add_argument("--p0", default="identity", help="identity, zero, a scalar multiple of I, or a JSON matrix file")
    p.add_argument("--csv", help="write the per-step trace here")

    p = sub.add_parser("equivalence", parents=[common], help="steady-state CDOSSP vs Kalman equivalence")
    p.add_argument("--p0", default="identity")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo validation of both predictors",
                       description="CSV columns: t, then analytic trace, empirical trace and relative error for "
                                   "cdossp and kalman")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    return ap


COMMANDS = {
    "validate": cmd_validate,
    "verify": cmd_verify,
    "estimate": cmd_estimate,
    "equivalence": cmd_equivalence,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None) -> int:
    out = _sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    started = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, out)
    except (InputError, StructuralError, NotWellPosedError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT
    _emit(args, args._report, started, out)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
