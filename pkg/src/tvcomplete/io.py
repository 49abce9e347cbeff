"""JSON, CSV and SVG input/output."""
from __future__ import annotations

import csv
import json
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from .grid import ParameterError, SampleSet
from .solver import TVProblem


def field_to_json(u, M: float | None = None) -> dict:
    u = np.asarray(u, dtype=np.float64)
    return {"dim": u.ndim, "shape": list(u.shape), "M": M, "values": u.reshape(-1).tolist()}


def field_from_json(obj: dict) -> np.ndarray:
    try:
        shape = tuple(int(n) for n in obj["shape"])
        values = np.asarray(obj["values"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed field: {exc}") from None
    if values.size != int(np.prod(shape)):
        raise ParameterError("field values do not match its shape")
    if "dim" in obj and obj["dim"] != len(shape):
        raise ParameterError("field dim does not match its shape")
    return values.reshape(shape)


def problem_to_json(problem: TVProblem) -> dict:
    return {
        "shape": list(problem.shape),
        "samples": problem.samples.to_json(),
        "g": problem.g.tolist(),
        "eta": problem.eta,
        "M": problem.M,
    }


def problem_from_json(obj: dict) -> TVProblem:
    """Build a problem from ``{shape, samples, g, eta, M}``.

    Instead of ``g`` and ``shape`` a full ``field`` may be given, in which
    case ``g`` is read off at the sampled indices.
    """
    try:
        samples = SampleSet.from_json(obj["samples"])
        eta, M = float(obj.get("eta", 0.0)), float(obj.get("M", 1.0))
        if "field" in obj:
            return TVProblem.from_field(field_from_json(obj["field"]), samples, eta, M)
        return TVProblem(np.asarray(obj["g"], dtype=np.float64), samples, tuple(obj["shape"]), eta, M)
    except KeyError as exc:
        raise ParameterError(f"problem file is missing {exc}") from None


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from None


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def write_field_csv(path, u) -> None:
    u = np.asarray(u)
    if u.ndim not in (1, 2):
        raise ParameterError("CSV export supports 1-D and 2-D fields only")
    np.savetxt(path, np.atleast_2d(u), delimiter=",", fmt="%.17g")


def versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "artifact": own}


def write_manifest(directory, command: str, config: dict, argv: list[str], extra: dict | None = None) -> Path:
    """Record everything needed to rerun a command beside its outputs."""
    path = Path(directory) / "manifest.json"
    write_json(path, {
        "command": command,
        "config": config,
        "argv": list(argv),
        "versions": versions(),
        "executable": sys.executable,
    } | (extra or {}))
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_sweep_svg(report, path) -> None:
    """Empirical max error and calibrated theory curve against the sweep variable."""
    plt = _pyplot()
    x = [c.label for c in report.cells]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, [c.max_error for c in report.cells], "o-", label="empirical max")
    ax.plot(x, [c.mean_error for c in report.cells], ".:", label="empirical mean")
    ax.plot(x, [c.theory for c in report.cells], "s--", label="calibrated theory")
    ax.set_xlabel("sample density" if report.mode == "density" else "resolution J")
    ax.set_ylabel("mean squared error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_bv_svg(rows: list[dict], path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in dict.fromkeys(r["function"] for r in rows):
        sub = [r for r in rows if r["function"] == name]
        ax.semilogy([r["J"] for r in sub], [r["error2"] for r in sub], "o-", label=f"{name} error")
        ax.semilogy([r["J"] for r in sub], [r["bound"] for r in sub], "--", label=f"{name} bound")
    ax.set_xlabel("J")
    ax.set_ylabel("squared L2 error")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
