"""Command-line entry point.

Settings are layered: built-in defaults < ``--config`` JSON file <
``TVC_<KEY>`` environment variables < command-line flags.  Exit codes:
0 success, 1 usage or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import bounds, bvapprox, covering, experiments
from . import io as tio
from .bvapprox import QuadratureError
from .grid import ParameterError
from .solver import SolverConfig, check_max_principle, solve

ENV_PREFIX = "TVC_"


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    if str(text).lower() in ("1", "true", "yes", "on"):
        return True
    if str(text).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text in (None, "", "none", "null") else float(text)


def _opt_int(text):
    return None if text in (None, "", "none", "null") else int(text)


SOLVER_OPTIONS = {
    "method": (str, "primal-dual", "primal-dual or split-bregman"),
    "max_iters": (int, 10_000, "outer iteration cap"),
    "constraint_tol": (float, 1e-6, "relative tolerance on the data constraint"),
    "change_tol": (float, 1e-9, "relative change stopping tolerance"),
    "truncate": (_bool, False, "clip the returned field to [0, M]"),
}

COMMANDS = {
    "solve": {
        "help": "solve one completion problem",
        "options": {
            "input": (str, None, "problem JSON"),
            "out": (str, None, "output field JSON"),
            "csv": (str, None, "optional CSV export of the field"),
            **SOLVER_OPTIONS,
        },
    },
    "sweep-density": {
        "help": "phantom error versus sampling density",
        "options": {
            "out": (str, "out/sweep-density", "output directory"),
            "N": (int, 64, "phantom size"),
            "rhos": (_floats, list(experiments.PAPER_RHOS), "comma-separated densities"),
            "realizations": (int, 20, "realizations per cell"),
            "seed": (int, 0, "master seed"),
            "workers": (int, 1, "worker processes"),
            "phantom": (str, "modified", "modified or classic"),
            **SOLVER_OPTIONS,
        },
    },
    "sweep-resolution": {
        "help": "phantom error versus resolution",
        "options": {
            "out": (str, "out/sweep-resolution", "output directory"),
            "Js": (_ints, [4, 5, 6], "comma-separated levels"),
            "rho": (float, 0.5, "sampling density"),
            "realizations": (int, 20, "realizations per cell"),
            "seed": (int, 0, "master seed"),
            "workers": (int, 1, "worker processes"),
            "phantom": (str, "modified", "modified or classic"),
            **SOLVER_OPTIONS,
        },
    },
    "bounds": {
        "help": "print every constant and bound for a parameter set",
        "options": {
            "M": (float, 1.0, "amplitude bound"),
            "Cf": (float, 1.0, "TV growth constant"),
            "b": (float, 0.5, "TV growth exponent"),
            "a": (_opt_float, None, "radius exponent (default max(1, 1-b))"),
            "d": (int, 2, "dimension"),
            "N": (int, 64, "grid side length"),
            "rho": (float, 0.5, "sampling density"),
            "eta": (float, 0.0, "noise level"),
            "s": (_opt_int, None, "gradient support size"),
            "out": (str, None, "optional JSON output path"),
        },
    },
    "covering": {
        "help": "counting chain and brute-force covering sandwiches",
        "options": {
            "M": (float, 1.0, "amplitude bound"),
            "Cf": (float, 1.0, "TV growth constant"),
            "b": (float, 0.5, "TV growth exponent"),
            "a": (_opt_float, None, "radius exponent"),
            "d": (int, 1, "dimension"),
            "N": (int, 4, "grid side length"),
            "radii": (_floats, [0.5, 1.0, 2.0], "comma-separated radii"),
            "tiny": (_bool, False, "also run greedy cover/packing on the enumerable class"),
            "out": (str, None, "optional JSON output path"),
        },
    },
    "bv-check": {
        "help": "spline approximation error of catalog functions",
        "options": {
            "catalog": (str, None, "JSON object name -> function description"),
            "J_max": (int, 6, "finest level"),
            "out": (str, "out/bv-check", "output directory"),
        },
    },
    "step-example": {
        "help": "non-uniqueness of the 1-D step example",
        "options": {
            "N": (int, 10, "signal length (even)"),
            "m": (int, 3, "number of samples"),
            "trials": (int, 100_000, "Monte Carlo trials"),
            "seed": (int, 0, "seed"),
            "out": (str, None, "optional JSON output path"),
        },
    },
    "thm4-pipeline": {
        "help": "sample a BV function, complete it and compare with the bounds",
        "options": {
            "function": (str, "two-rectangles", "catalog name"),
            "catalog": (str, None, "optional catalog JSON"),
            "J": (int, 4, "level"),
            "rho": (float, 0.5, "sampling density"),
            "eta": (float, 0.0, "noise level"),
            "trials": (int, 20, "trials"),
            "seed": (int, 0, "seed"),
            "out": (str, "out/thm4-pipeline", "output directory"),
            **SOLVER_OPTIONS,
        },
    },
}

ALL_KEYS = {k for spec in COMMANDS.values() for k in spec["options"]}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tvcomplete", description="TV-minimization data completion toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"])
        p.add_argument("--config", help="JSON file with option values")
        for key, (conv, default, text) in spec["options"].items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, type=conv, default=argparse.SUPPRESS,
                           help=f"{text} (default: {default})")
    return parser


def resolve_config(command: str, flags: dict, environ=None) -> dict:
    """Merge defaults, the config file, environment and flags for ``command``."""
    environ = os.environ if environ is None else environ
    options = COMMANDS[command]["options"]
    cfg = {k: v[1] for k, v in options.items()}

    def convert(key, value, source):
        try:
            return options[key][0](value) if value is not None else None
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key!r} from {source}: {exc}") from None

    path = flags.pop("config", None)
    if path:
        data = tio.read_json(path)
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(options))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        cfg.update({k: convert(k, v, path) for k, v in data.items()})

    lowered = {k.lower(): k for k in ALL_KEYS}
    for var, value in environ.items():
        if not var.startswith(ENV_PREFIX):
            continue
        key = lowered.get(var[len(ENV_PREFIX):].lower())
        if key is None:
            raise UsageError(f"unknown environment override {var}")
        if key in options:
            cfg[key] = convert(key, value, var)

    cfg.update(flags)
    return cfg


def _solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(
        method=cfg["method"],
        max_outer_iters=cfg["max_iters"],
        constraint_tolerance=cfg["constraint_tol"],
        change_tolerance=cfg["change_tol"],
        truncate=cfg["truncate"],
    )


def _require(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k for k in missing))


def _emit(obj, out: str | None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    print(text)
    if out:
        tio.write_json(out, obj)


def _catalog(path: str | None) -> dict:
    specs = dict(bvapprox.DEFAULT_CATALOG)
    if path:
        data = tio.read_json(path)
        if not isinstance(data, dict):
            raise UsageError("catalog must be a JSON object")
        specs = data
    return {name: bvapprox.function_from_spec(s) for name, s in specs.items()}


# ---------------------------------------------------------------- commands


def cmd_solve(cfg, argv):
    _require(cfg, "input", "out")
    problem = tio.problem_from_json(tio.read_json(cfg["input"]))
    result = solve(problem, _solver_config(cfg))
    obj = tio.field_to_json(result.u, problem.M) | {"result": result.to_json()}
    tio.write_json(cfg["out"], obj)
    if cfg["csv"]:
        tio.write_field_csv(cfg["csv"], result.u)
    tio.write_manifest(Path(cfg["out"]).parent, "solve", cfg, argv)
    if not result.converged:
        raise NumericalFailure("solver did not converge", result.to_json() | {"history": None})
    if not check_max_principle(result, problem.M, 1e-6):
        raise NumericalFailure("solution leaves the box [0, M]", {"min": float(result.u.min()),
                                                                  "max": float(result.u.max())})
    print(json.dumps({"tv_value": result.tv_value, "iterations": result.iterations,
                      "constraint_residual": result.constraint_residual}))


def _sweep(cfg, argv, mode):
    sweep_cfg = experiments.SweepConfig(
        mode=mode,
        N=cfg.get("N", 64),
        rhos=tuple(cfg.get("rhos", experiments.PAPER_RHOS)),
        Js=tuple(cfg.get("Js", (4, 5, 6))),
        rho=cfg.get("rho", 0.5),
        realizations=cfg["realizations"],
        seed=cfg["seed"],
        workers=cfg["workers"],
        phantom=cfg["phantom"],
        solver=_solver_config(cfg),
    )
    report = experiments.run_sweep(sweep_cfg)
    out = Path(cfg["out"])
    tio.write_json(out / "report.json", report.to_json())
    tio.write_csv(out / "summary.csv", report.summary_rows())
    tio.plot_sweep_svg(report, out / "plot.svg")
    tio.write_manifest(out, f"sweep-{mode}", cfg, argv, {"sweep_config": sweep_cfg.to_json()})
    print(json.dumps({"violations": report.violations, "nonconverged": report.nonconverged,
                      "constant": report.constant, "out": str(out)}))


def cmd_bounds(cfg, argv):
    p = bounds.BoundParams(M=cfg["M"], C_f=cfg["Cf"], b=cfg["b"], d=cfg["d"], N=cfg["N"],
                           rho=cfg["rho"], eta=cfg["eta"], a=cfg["a"], s=cfg["s"])
    _emit(bounds.bounds_report(p), cfg["out"])


def cmd_covering(cfg, argv):
    p = bounds.BoundParams(M=cfg["M"], C_f=cfg["Cf"], b=cfg["b"], d=cfg["d"], N=cfg["N"], a=cfg["a"])
    rows = []
    for r in cfg["radii"]:
        row = {"r": r} | covering.quantized_class_log_size(p, r, exact=True)
        if cfg["tiny"]:
            shape = (p.N,) * p.d
            T = p.C_f * p.card**p.b
            lo, hi = covering.brute_force_covering_sandwich(covering.TinyClass(shape, p.M, T), r)
            row |= {"packing_lower": lo, "greedy_upper": hi, "log_greedy_upper": math.log(hi)}
        rows.append(row)
    _emit({"params": {"M": p.M, "C_f": p.C_f, "b": p.b, "a": p.a, "d": p.d, "N": p.N},
           "rows": rows}, cfg["out"])


def cmd_bv_check(cfg, argv):
    rows = []
    for name, f in _catalog(cfg["catalog"]).items():
        for J in range(1, cfg["J_max"] + 1):
            err = bvapprox.l2_error(bvapprox.SplineSurface(bvapprox.local_average_samples(f, J), J), f)
            bound = bvapprox.thm5_bound(f, J)
            rows.append({"function": name, "J": J, "error2": err, "bound": bound,
                         "ratio": err / bound if bound else math.nan})
    out = Path(cfg["out"])
    tio.write_csv(out / "bv_check.csv", rows)
    tio.plot_bv_svg(rows, out / "bv_check.svg")
    tio.write_manifest(out, "bv-check", cfg, argv)
    print(json.dumps({"violations": sum(r["error2"] > r["bound"] for r in rows), "out": str(out)}))


def cmd_step_example(cfg, argv):
    _emit(experiments.step_signal_example(cfg["N"], cfg["m"], cfg["trials"], cfg["seed"]), cfg["out"])


def cmd_thm4(cfg, argv):
    cat = _catalog(cfg["catalog"])
    if cfg["function"] not in cat:
        raise UsageError(f"unknown function {cfg['function']!r}; choose from {sorted(cat)}")
    rep = experiments.full_pipeline_thm4(cat[cfg["function"]], cfg["J"], cfg["rho"], cfg["eta"],
                                         cfg["trials"], cfg["seed"], _solver_config(cfg))
    out = Path(cfg["out"])
    tio.write_json(out / "report.json", rep.to_json())
    tio.write_csv(out / "summary.csv", [
        {"trial": i, "discrete_error": d, "continuum_error": c}
        for i, (d, c) in enumerate(zip(rep.discrete_errors, rep.continuum_errors))
    ])
    tio.write_manifest(out, "thm4-pipeline", cfg, argv)
    print(json.dumps({"discrete_violations": rep.discrete_violations,
                      "continuum_violations": rep.continuum_violations, "out": str(out)}))


HANDLERS = {
    "solve": cmd_solve,
    "sweep-density": lambda cfg, argv: _sweep(cfg, argv, "density"),
    "sweep-resolution": lambda cfg, argv: _sweep(cfg, argv, "resolution"),
    "bounds": cmd_bounds,
    "covering": cmd_covering,
    "bv-check": cmd_bv_check,
    "step-example": cmd_step_example,
    "thm4-pipeline": cmd_thm4,
}


def main(argv=None, environ=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        logging.basicConfig(level=logging.INFO if ns.pop("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        command = ns.pop("command")
        cfg = resolve_config(command, ns, environ)
        HANDLERS[command](cfg, argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, QuadratureError, FloatingPointError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        diag |= getattr(exc, "diagnostics", {})
        print(json.dumps(diag, default=str), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
