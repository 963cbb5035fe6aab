"""Command-line interface: ``tiltcond <command> PROBLEM.json [options]``.

Every command prints a JSON run report (effective configuration, library
version, wall time, results, warnings) to stdout, or to ``--report``.
CSV and cloud outputs go to ``--out``.

Exit codes: 0 success, 1 bound violated or catalog check failed, 2 input
error, 3 computation error, 4 hypotheses unmet.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import ALIASES, GROUPS, problems, run_catalog
from .conditioning import ScaleSchedule, global_condition_number, local_condition_number
from .distance import BoundCheck, d_star, d_z, fixed_point_solution_set, verify_global_bound, verify_pointwise_bound
from .efficient_set import MEMBERSHIP_TOL, delta_estimate, is_weakly_efficient, weakly_efficient_set
from .errors import SpecParseError, TiltcondError
from .problem import PerturbationH, component_from_dict, dump_problem, load_problem, perturb_componentwise

EXIT_OK, EXIT_VIOLATED, EXIT_INPUT, EXIT_COMPUTE, EXIT_UNMET = 0, 1, 2, 3, 4

# fields a problem file may carry under "config"; command-line flags win
CONFIG_KEYS = ("p", "x", "h", "grid", "seed", "scales", "pairs", "tol", "eta0", "max_iter")


def _vector(text, n: int, name: str) -> np.ndarray:
    if isinstance(text, (int, float)):
        vals = [float(text)]
    elif isinstance(text, list):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).replace(",", " ").split()]
        except ValueError:
            raise SpecParseError(f"could not parse {text!r} as a vector", f"--{name}") from None
    if len(vals) != n:
        raise SpecParseError(f"expected {n} entries, got {len(vals)}", f"--{name}")
    return np.array(vals)


def _perturbation(spec, f) -> PerturbationH:
    """``quadratic:EPS`` for ``EPS |x|^2 / 2``, a JSON component, or a path to one."""
    if isinstance(spec, dict):
        return PerturbationH(component_from_dict(spec, f.n, "--h"), f.ball)
    text = str(spec)
    if text.startswith("quadratic:"):
        try:
            eps = float(text.split(":", 1)[1])
        except ValueError:
            raise SpecParseError(f"bad shorthand {text!r}; use quadratic:EPS", "--h") from None
        return PerturbationH.isotropic(f.ball, eps)
    if text.lstrip().startswith("{"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecParseError(exc.msg, f"--h:{exc.colno}") from None
    else:
        path = Path(text)
        if not path.exists():
            raise SpecParseError(f"not a shorthand, JSON object or file: {text!r}", "--h")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SpecParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None
    return PerturbationH(component_from_dict(d, f.n, "--h"), f.ball)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _estimate_summary(est) -> dict:
    return {
        "classification": est.classification,
        "value": est.value,
        "uncertainty": est.uncertainty,
        "exponent": est.alpha,
        "fit_residual_r2": est.r2,
        "finest_quotient": est.lower_confidence,
        "monotone_in_eta": est.monotone,
        "delta": est.delta,
        "grid_resolution": est.grid_resolution,
        "excluded_pairs": sum(r.n_excluded for r in est.rows),
    }


def _check_summary(chk: BoundCheck) -> dict:
    out = {"verdict": chk.verdict, "flags": chk.flags}
    if chk.verdict != "hypotheses-unmet":
        out.update(lhs=chk.lhs, rhs=chk.rhs, lhs_bar=chk.lhs_bar, rhs_bar=chk.rhs_bar)
    for key in ("d_star", "delta_f", "delta_g", "max_grad_h", "lip_local", "lip_global"):
        if key in chk.details:
            out[key] = chk.details[key]
    return out


def _check_exit(chk: BoundCheck) -> int:
    if chk.verdict == "hypotheses-unmet":
        return EXIT_UNMET
    return EXIT_VIOLATED if chk.verdict == "violated" else EXIT_OK


def _write(path, text: str):
    Path(path).write_text(text)


# --------------------------------------------------------------------------- commands


def cmd_solve(f, h, cfg, warnings):
    cloud = weakly_efficient_set(f, cfg["p"], cfg["grid"], cfg["tol"])
    if cloud.n_discarded:
        warnings.append(f"{cloud.n_discarded} scalarization minimizers failed certification and were dropped")
    if cfg["out"]:
        cloud.write(cfg["out"])
    lo = cloud.points.min(axis=0) if len(cloud) else None
    hi = cloud.points.max(axis=0) if len(cloud) else None
    return {"n_points": len(cloud), "fill_distance": cloud.fill_distance, "min": lo, "max": hi,
            "grid_resolution": cloud.grid_resolution}, EXIT_OK


def cmd_membership(f, h, cfg, warnings):
    m = is_weakly_efficient(f, cfg["p"], cfg["x"], cfg["tol"])
    return {"is_member": m.is_member, "stationarity": m.certificate}, EXIT_OK


def _schedule(cfg) -> ScaleSchedule:
    return ScaleSchedule(cfg["eta0"], cfg["scales"], cfg["pairs"], cfg["seed"])


def cmd_cond_local(f, h, cfg, warnings):
    est = local_condition_number(f, cfg["x"], _schedule(cfg), cfg["grid"])
    if cfg["out"]:
        _write(cfg["out"], est.to_csv())
    return _estimate_summary(est), EXIT_OK


def cmd_cond_global(f, h, cfg, warnings):
    est = global_condition_number(f, _schedule(cfg), cfg["grid"])
    if cfg["out"]:
        _write(cfg["out"], est.to_csv())
    return _estimate_summary(est), EXIT_OK


def cmd_dz(f, h, cfg, warnings):
    i, j = cfg["components"]
    for k in (i, j):
        if not 0 <= k < f.m:
            raise SpecParseError(f"component index {k} out of range for m = {f.m}", "--components")
    val = d_z(f.components[i], f.components[j], f.radius, cfg["pairs"] * 32, cfg["seed"])
    return {"value": val.value, "method": val.method, "n_pairs": val.n_pairs}, EXIT_OK


def cmd_dstar(f, h, cfg, warnings):
    if cfg["other"]:
        g, _ = load_problem(cfg["other"])
    else:
        g = perturb_componentwise(f, h)
    val = d_star(f, g, cfg["grid"], seed=cfg["seed"])
    return {"value": val.value, "method": val.method, "weights": val.weights}, EXIT_OK


def cmd_fixed_point(f, h, cfg, warnings):
    run = fixed_point_solution_set(f, h, cfg["p"], cfg["grid"], cfg["max_iter"], tol=cfg["tol"])
    if not run.converged:
        warnings.append(f"no convergence within {cfg['max_iter']} steps")
    if cfg["out"]:
        run.limit.write(cfg["out"])
    return {"converged": run.converged, "iterations": run.iterations, "theta_hat": run.theta_hat,
            "deltas": list(run.deltas), "budget": run.budget, "n_points": len(run.limit),
            "min": run.limit.points.min(axis=0), "max": run.limit.points.max(axis=0)}, EXIT_OK


def cmd_verify_local(f, h, cfg, warnings):
    chk = verify_pointwise_bound(f, h, cfg["x"], _schedule(cfg), cfg["grid"])
    return _check_summary(chk), _check_exit(chk)


def cmd_verify_global(f, h, cfg, warnings):
    chk = verify_global_bound(f, h, _schedule(cfg), cfg["grid"])
    return _check_summary(chk), _check_exit(chk)


def cmd_delta(f, h, cfg, warnings):
    cert = delta_estimate(f, seed=cfg["seed"], grid_resolution=cfg["grid"])
    return {"delta": cert.delta, "witness_margin": cert.witness_margin, "directions": cert.directions}, EXIT_OK


COMMANDS = {
    "solve": (cmd_solve, "point cloud of the weakly efficient set at a tilt"),
    "membership": (cmd_membership, "first-order membership test for one point"),
    "cond-local": (cmd_cond_local, "pointwise condition number estimate"),
    "cond-global": (cmd_cond_global, "global condition number estimate"),
    "dz": (cmd_dz, "pseudodistance between two components"),
    "dstar": (cmd_dstar, "pseudodistance between two vector objectives"),
    "fixed-point": (cmd_fixed_point, "perturbed solution set by fixed-point iteration"),
    "verify-ey-local": (cmd_verify_local, "check the pointwise perturbation bound"),
    "verify-ey-global": (cmd_verify_global, "check the global perturbation bound"),
    "delta": (cmd_delta, "largest tilt radius keeping solution sets interior"),
}
NEEDS_H = {"fixed-point", "verify-ey-local", "verify-ey-global"}


def _add_common(sp: argparse.ArgumentParser):
    sp.add_argument("--tol", type=float, help=f"tolerance (membership default {MEMBERSHIP_TOL:g})")
    sp.add_argument("--seed", type=int, help="random seed (default 0)")
    sp.add_argument("--grid", type=int, help="simplex grid resolution")
    sp.add_argument("--scales", type=int, help="index of the finest scale (default 8)")
    sp.add_argument("--pairs", type=int, help="tilt pairs per scale (default 64)")
    sp.add_argument("--out", help="output file (cloud or CSV)")
    sp.add_argument("--report", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tiltcond", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("problem", help="problem JSON file")
        _add_common(sp)
        sp.add_argument("--p", help="tilt vector, comma separated (default 0)")
        sp.add_argument("--x", help="point, comma separated (default 0)")
        sp.add_argument("--h", help="perturbation: quadratic:EPS, a JSON component, or a file")
        sp.add_argument("--eta0", type=float, help="coarsest tilt radius")
        sp.add_argument("--max-iter", type=int, dest="max_iter", help="fixed-point step cap (default 200)")
        if name == "dz":
            sp.add_argument("--components", type=int, nargs=2, default=(0, 1), metavar=("I", "J"))
        if name == "dstar":
            sp.add_argument("--other", help="second problem file (default: f + h e from --h)")
    sp = sub.add_parser("catalog", help="run the built-in suite")
    _add_common(sp)
    sp.add_argument("--only", choices=list(GROUPS) + list(ALIASES), help="run one group")
    sp.add_argument("--dump-specs", dest="dump_specs", metavar="DIR", help="write catalog problem files and exit")
    return parser


def _effective_config(args, file_cfg: dict, f) -> dict:
    cfg = {"p": None, "x": None, "h": None, "grid": None, "seed": 0, "scales": 8, "pairs": 64,
           "tol": None, "eta0": None, "max_iter": 200}
    for k, v in file_cfg.items():
        if k not in CONFIG_KEYS:
            raise SpecParseError(f"unknown config field {k!r}", f"config.{k}")
        cfg[k] = v
    for k in CONFIG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["p"] = np.zeros(f.n) if cfg["p"] is None else _vector(cfg["p"], f.n, "p")
    cfg["x"] = np.zeros(f.n) if cfg["x"] is None else _vector(cfg["x"], f.n, "x")
    for k in ("grid", "scales", "pairs", "max_iter"):
        if cfg[k] is not None and (not isinstance(cfg[k], int) or cfg[k] < 1):
            raise SpecParseError("must be a positive integer", f"--{k}")
    if cfg["tol"] is not None and not cfg["tol"] > 0:
        raise SpecParseError("must be positive", "--tol")
    cfg["out"] = args.out
    if hasattr(args, "components"):
        cfg["components"] = tuple(args.components)
    cfg["other"] = getattr(args, "other", None)
    return cfg


def _run_catalog(args) -> tuple[dict, int]:
    if args.dump_specs:
        d = Path(args.dump_specs)
        d.mkdir(parents=True, exist_ok=True)
        for name, cp in problems().items():
            dump_problem(d / f"{name}.json", cp.f)
        return {"dumped": sorted(f"{n}.json" for n in problems())}, EXIT_OK
    seed = 0 if args.seed is None else args.seed
    report = run_catalog(seed, args.only)
    print(report.table(), file=sys.stderr)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        _write(d / "summary.csv", report.summary_csv())
        for name, text in sorted(report.artifacts.items()):
            _write(d / name, text)
    result = {"passed": report.passed,
              "checks": [{"criterion": c.criterion, "check": c.name, "value": c.value, "expected": c.expected,
                          "passed": c.passed, "seconds": round(c.seconds, 3)} for c in report.checks]}
    return result, EXIT_OK if report.passed else EXIT_VIOLATED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    warnings: list[str] = []
    config: dict = {}
    try:
        if args.command == "catalog":
            config = {"seed": args.seed or 0, "only": args.only, "out": args.out, "dump_specs": args.dump_specs}
            result, code = _run_catalog(args)
        else:
            f, h_file = load_problem(args.problem)
            raw = json.loads(Path(args.problem).read_text())
            file_cfg = raw.get("config") or {}
            if not isinstance(file_cfg, dict):
                raise SpecParseError("must be an object", "config")
            cfg = _effective_config(args, file_cfg, f)
            if cfg["h"] is not None:
                h = _perturbation(cfg["h"], f)
            elif h_file is not None:
                h = h_file
            elif args.command in NEEDS_H or (args.command == "dstar" and not cfg["other"]):
                raise SpecParseError("this command needs a perturbation (--h or a 'perturbation' field)", "--h")
            else:
                h = None
            if cfg["tol"] is None:
                cfg["tol"] = 1e-6 if args.command == "fixed-point" else MEMBERSHIP_TOL
            config = {k: v for k, v in cfg.items() if v is not None}
            config["problem"] = args.problem
            result, code = COMMANDS[args.command][0](f, h, cfg, warnings)
    except SpecParseError as exc:
        print(f"tiltcond: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TiltcondError as exc:
        print(f"tiltcond: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ValueError, OSError) as exc:
        print(f"tiltcond: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    report = {
        "command": args.command,
        "version": __version__,
        "config": config,
        "result": result,
        "warnings": warnings,
        "wall_time_s": round(time.perf_counter() - t0, 4),
        "exit_code": code,
    }
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if args.report:
        _write(args.report, text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
