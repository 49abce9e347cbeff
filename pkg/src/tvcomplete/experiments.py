"""Simulation harness: phantom sweeps, the step-signal example and the BV pipeline.

Every realization draws its sample set from an independent substream
``SeedSequence([seed, cell, realization])``, so results do not depend on
scheduling or on how many workers run the sweep.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bvapprox
from .bounds import theorem4_bounds
from .grid import (ParameterError, SampleSet, clamp_box, masked_mse, partial_fisher_yates,
                   partial_fisher_yates_batch, tv_aniso)
from .phantom import shepp_logan
from .solver import SolverConfig, TVProblem, solve

__all__ = [
    "SweepConfig",
    "CellResult",
    "Report",
    "shepp_logan",
    "run_density_sweep",
    "run_resolution_sweep",
    "step_signal_example",
    "full_pipeline_thm4",
    "PipelineReport",
]

PAPER_RHOS = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
PAPER_JS = (5, 6, 7, 8, 9, 10)


@dataclass
class SweepConfig:
    """Settings for a density or resolution sweep.

    Desk-scale defaults: ``N = 64`` and 20 realizations for the density
    sweep, ``J in {4, 5, 6}`` at ``rho = 0.5`` for the resolution sweep.
    The paper-scale run uses ``N = 512``, ``Js = (5, ..., 10)`` and 100
    realizations.
    """

    mode: str = "density"
    N: int = 64
    rhos: tuple[float, ...] = PAPER_RHOS
    Js: tuple[int, ...] = (4, 5, 6)
    rho: float = 0.5
    realizations: int = 20
    eta: float = 0.0
    seed: int = 0
    phantom: str = "modified"
    calibration: str = "worst"
    workers: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.mode not in ("density", "resolution"):
            raise ParameterError(f"unknown sweep mode {self.mode!r}")
        if self.realizations < 1:
            raise ParameterError("realizations must be >= 1")
        self.rhos = tuple(float(r) for r in self.rhos)
        self.Js = tuple(int(j) for j in self.Js)
        for r in self.rhos + (self.rho,):
            if not 0 < r <= 1:
                raise ParameterError("every rho must lie in (0, 1]")
        if any(j < 3 for j in self.Js):
            raise ParameterError("resolution levels must be >= 3 (phantom needs n >= 8)")
        if self.phantom not in ("modified", "classic"):
            raise ParameterError(f"unknown phantom {self.phantom!r}")
        if self.calibration != "worst":
            raise ParameterError("only the worst-case calibration rule is supported")
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)

    def to_json(self) -> dict:
        out = asdict(self)
        out["rhos"], out["Js"] = list(self.rhos), list(self.Js)
        return out


@dataclass
class CellResult:
    label: float
    errors: list[float]
    converged: list[bool]
    theory: float = math.nan
    wall_time: float = 0.0

    @property
    def max_error(self) -> float:
        return max(self.errors)

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors))

    def to_json(self, timing: bool = True) -> dict:
        out = {
            "label": self.label,
            "errors": self.errors,
            "converged": self.converged,
            "max_error": self.max_error,
            "mean_error": self.mean_error,
            "theory": self.theory,
            "violation": self.max_error > self.theory,
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class Report:
    mode: str
    cells: list[CellResult]
    calibration_index: int
    constant: float
    config: dict

    @property
    def violations(self) -> int:
        return sum(c.max_error > c.theory for c in self.cells)

    @property
    def nonconverged(self) -> int:
        return sum(not ok for c in self.cells for ok in c.converged)

    def to_json(self, timing: bool = True) -> dict:
        return {
            "mode": self.mode,
            "calibration_index": self.calibration_index,
            "constant": self.constant,
            "violations": self.violations,
            "nonconverged": self.nonconverged,
            "config": self.config,
            "cells": [c.to_json(timing) for c in self.cells],
        }

    def summary_rows(self) -> list[dict]:
        return [
            {
                "cell": c.label,
                "max_err": c.max_error,
                "mean_err": c.mean_error,
                "theory": c.theory,
                "violations": int(c.max_error > c.theory),
            }
            for c in self.cells
        ]


def _substream(seed: int, cell: int, realization: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, cell, realization]))


def _one_realization(args) -> tuple[float, bool]:
    f, rho, eta, seed, cell, r, solver_cfg = args
    rng = _substream(seed, cell, r)
    total = f.size
    m = max(1, round(rho * total))
    samples = SampleSet(total, partial_fisher_yates(rng, total, m))
    problem = TVProblem.from_field(f, samples, eta=eta, M=1.0)
    result = solve(problem, solver_cfg)
    err = float(np.mean((result.u - f) ** 2))
    return err, bool(result.converged)


def _run_cells(cfg: SweepConfig, cells: list[tuple[float, np.ndarray, float]]) -> list[CellResult]:
    out = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for ci, (label, f, rho) in enumerate(cells):
            t0 = time.perf_counter()
            jobs = [(f, rho, cfg.eta, cfg.seed, ci, r, cfg.solver) for r in range(cfg.realizations)]
            results = list(pool.map(_one_realization, jobs)) if pool else [_one_realization(j) for j in jobs]
            out.append(CellResult(
                label=label,
                errors=[e for e, _ in results],
                converged=[ok for _, ok in results],
                wall_time=time.perf_counter() - t0,
            ))
    finally:
        if pool:
            pool.shutdown()
    return out


def _calibrate(cells: list[CellResult], shape: list[float], index: int) -> float:
    """Fix the constant so the curve meets the worst cell's max error exactly."""
    c = cells[index].max_error / shape[index]
    for cell, s in zip(cells, shape):
        cell.theory = c * s
    cells[index].theory = cells[index].max_error
    return c


def run_density_sweep(cfg: SweepConfig) -> Report:
    """Error versus sampling density at fixed ``N``; theory curve ``c rho^-1/2``."""
    f = shepp_logan(cfg.N, modified=cfg.phantom == "modified")
    rhos = sorted(cfg.rhos)
    cells = _run_cells(cfg, [(rho, f, rho) for rho in rhos])
    constant = _calibrate(cells, [rho**-0.5 for rho in rhos], 0)
    return Report("density", cells, 0, constant, cfg.to_json())


def resolution_shape(J: int) -> float:
    return J**1.5 * 2.0 ** (-J / 2)


def run_resolution_sweep(cfg: SweepConfig) -> Report:
    """Error versus resolution ``J`` at fixed ``rho``; theory curve ``c J^{3/2} 2^{-J/2}``."""
    Js = sorted(cfg.Js)
    modified = cfg.phantom == "modified"
    cells = _run_cells(cfg, [(J, shepp_logan(2**J, modified), cfg.rho) for J in Js])
    constant = _calibrate(cells, [resolution_shape(J) for J in Js], 0)
    return Report("resolution", cells, 0, constant, cfg.to_json())


def run_sweep(cfg: SweepConfig) -> Report:
    return run_density_sweep(cfg) if cfg.mode == "density" else run_resolution_sweep(cfg)


# ---------------------------------------------------------------- step example


def step_candidates(N: int, samples: np.ndarray) -> list[np.ndarray]:
    """Minimal-TV interpolants of the unit step built from a sample set that misses ``N/2``.

    With samples on both sides, the step location ``L`` can be anything in
    ``k1 + 1 .. k2`` (each candidate has TV 1).  With samples on one side
    only, the constant through them is the unique minimizer.
    """
    N0 = N // 2
    low = samples[samples < N0]
    high = samples[samples > N0]
    if low.size == 0 or high.size == 0:
        return [np.full(N, 0.0 if high.size == 0 else 1.0)]
    k1, k2 = int(low.max()), int(high.min())
    k = np.arange(N)
    return [(k >= L).astype(np.float64) for L in range(k1 + 1, k2 + 1)]


def step_signal_example(N: int, m: int, trials: int, seed: int = 0) -> dict:
    """Monte Carlo check of the non-uniqueness example for the 1-D unit step."""
    if N < 2 or N % 2:
        raise ParameterError("N must be even and >= 2")
    if not 1 <= m <= N:
        raise ParameterError("need 1 <= m <= N")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    N0 = N // 2
    f = (np.arange(N) >= N0).astype(np.float64)
    rng = np.random.default_rng(seed)
    misses = one_sided = 0
    interpolation_ok = tv_ok = error_ok = True
    worst = math.inf
    draws = partial_fisher_yates_batch(rng, N, m, trials)
    for idx in draws[~np.any(draws == N0, axis=1)]:
        misses += 1
        cands = step_candidates(N, idx)
        two_sided = len(cands) > 1 or tv_aniso(cands[0]) > 0
        one_sided += not two_sided
        errs = []
        for u in cands:
            interpolation_ok &= bool(np.array_equal(u[idx], f[idx]))
            if two_sided:
                tv_ok &= tv_aniso(u) == 1.0
            errs.append(float(np.mean((u - f) ** 2)))
        worst = min(worst, max(errs))
        error_ok &= max(errs) >= 1 / N - 1e-15
    return {
        "N": N,
        "m": m,
        "trials": trials,
        "seed": seed,
        "exact_rate": 1 - m / N,
        "empirical_miss_rate": misses / trials,
        "misses": misses,
        "one_sided_misses": one_sided,
        "worst_solution_error": None if misses == 0 else worst,
        "all_interpolate": interpolation_ok,
        "all_tv_one": tv_ok,
        "all_error_at_least_1_over_N": error_ok,
    }


# ---------------------------------------------------------------- BV pipeline


@dataclass
class PipelineReport:
    J: int
    rho: float
    eta: float
    discrete_errors: list[float]
    continuum_errors: list[float]
    converged: list[bool]
    bounds: dict
    thm5_bound: float

    @property
    def discrete_violations(self) -> int:
        return sum(e > self.bounds["discrete_bound"] for e in self.discrete_errors)

    @property
    def continuum_violations(self) -> int:
        b = self.bounds["continuum_bound"]
        if self.bounds.get("continuum_bound_reduced") is not None:
            b = min(b, self.bounds["continuum_bound_reduced"])
        return sum(e > b for e in self.continuum_errors)

    def to_json(self) -> dict:
        return asdict(self) | {
            "discrete_violations": self.discrete_violations,
            "continuum_violations": self.continuum_violations,
        }


def noisy_observations(clean: np.ndarray, eta: float, M: float, rng: np.random.Generator) -> np.ndarray:
    """Clean samples plus noise scaled to mean square ``eta^2``, then clipped to ``[0, M]``.

    Clipping only moves values toward the clean ones (which lie in the box),
    so the mean squared residual stays at most ``eta^2``.
    """
    if eta == 0:
        return clean.copy()
    z = rng.standard_normal(clean.size)
    z *= eta / math.sqrt(np.mean(z**2))
    return np.clip(clean + z, 0.0, M)


def full_pipeline_thm4(
    f: bvapprox.AnalyticFunction2D,
    J: int,
    rho: float,
    eta: float,
    trials: int,
    seed: int = 0,
    solver: SolverConfig | None = None,
    M: float | None = None,
) -> PipelineReport:
    """Sample ``f`` at level ``J``, complete from a random subset and measure both errors."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    M = f.sup_norm() if M is None else M
    fJ = bvapprox.local_average_samples(f, J)
    if fJ.min() < -1e-12 or fJ.max() > M + 1e-12:
        raise ParameterError("function values must lie in [0, M]")
    fJ = clamp_box(fJ, M)
    total = fJ.size
    m = max(1, round(rho * total))
    disc, cont, conv = [], [], []
    for t in range(trials):
        rng = _substream(seed, J, t)
        samples = SampleSet(total, partial_fisher_yates(rng, total, m))
        clean = samples.take(fJ)
        g = noisy_observations(clean, eta, M, rng)
        assert masked_mse(fJ, g, samples) <= eta**2 * (1 + 1e-12) + 1e-300
        result = solve(TVProblem(g, samples, fJ.shape, eta=eta, M=M), solver)
        u = clamp_box(result.u, M)
        disc.append(float(np.mean((u - fJ) ** 2)))
        cont.append(bvapprox.l2_error(bvapprox.SplineSurface(u, J), f))
        conv.append(bool(result.converged))
    bounds = theorem4_bounds(J, rho, eta, M, f.total_variation())
    return PipelineReport(J, rho, eta, disc, cont, conv, bounds.to_json(), bvapprox.thm5_bound(f, J))
