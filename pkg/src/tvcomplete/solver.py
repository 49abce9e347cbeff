"""Constrained anisotropic-TV completion from sampled entries.

Solves::

    min_u ||grad u||_1   subject to   (1/m) sum_{k in samples} |u[k] - g[k]|^2 <= eta^2

with two independent schemes: a primal-dual (Chambolle-Pock) iteration
that projects exactly onto the data ball, and split Bregman with
red-black Gauss-Seidel sweeps for the quadratic subproblem.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .grid import (
    ParameterError,
    SampleSet,
    forward_diff,
    forward_diff_adjoint,
    masked_mse,
    tv_aniso,
    variance_on,
)

log = logging.getLogger(__name__)

# absolute slack on the data constraint, in units of g^2
RESIDUAL_FLOOR = 1e-10


@dataclass
class TVProblem:
    g: np.ndarray
    samples: SampleSet
    shape: tuple[int, ...]
    eta: float = 0.0
    M: float = 1.0

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        self.g = np.asarray(self.g, dtype=np.float64).reshape(-1)
        if int(np.prod(self.shape)) != self.samples.total:
            raise ParameterError("grid shape does not match the sample set")
        if self.g.size != self.samples.m:
            raise ParameterError(f"expected {self.samples.m} observed values, got {self.g.size}")
        if not np.all(np.isfinite(self.g)):
            raise ParameterError("observations must be finite")
        if self.M <= 0:
            raise ParameterError("M must be positive")
        if self.eta < 0:
            raise ParameterError("eta must be non-negative")
        if self.g.min() < 0 or self.g.max() > self.M:
            raise ParameterError("observations must lie in [0, M]")
        var = variance_on(self.g)
        if self.eta**2 > var * (1 + 1e-12) + 1e-15:
            raise ParameterError(
                f"eta^2 = {self.eta**2:.6g} exceeds the sample variance {var:.6g}"
            )

    @classmethod
    def from_field(cls, f, samples: SampleSet, eta: float = 0.0, M: float = 1.0) -> "TVProblem":
        f = np.asarray(f, dtype=np.float64)
        return cls(samples.take(f), samples, f.shape, eta, M)

    @property
    def eta2(self) -> float:
        return float(self.eta) ** 2


@dataclass
class SolverConfig:
    method: Literal["primal-dual", "split-bregman"] = "primal-dual"
    max_outer_iters: int = 10_000
    constraint_tolerance: float = 1e-6
    change_tolerance: float = 1e-9
    mu: float = 4.0
    lam: float = 40.0
    sweeps: int = 1
    step_ratio: float = 0.01
    bisection_steps: int = 40
    noisy_strategy: Literal["ball", "bisection"] = "ball"
    truncate: bool = False
    history_every: int = 10

    def __post_init__(self):
        if self.method not in ("primal-dual", "split-bregman"):
            raise ParameterError(f"unknown method {self.method!r}")
        if self.noisy_strategy not in ("ball", "bisection"):
            raise ParameterError(f"unknown noisy strategy {self.noisy_strategy!r}")
        if self.max_outer_iters < 1 or self.sweeps < 1 or self.bisection_steps < 1:
            raise ParameterError("iteration counts must be >= 1")
        for name in ("constraint_tolerance", "change_tolerance", "mu", "lam", "step_ratio"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")


@dataclass
class SolveResult:
    u: np.ndarray
    tv_value: float
    constraint_residual: float
    iterations: int
    converged: bool
    method: str = ""
    history: list[tuple[int, float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "tv_value": self.tv_value,
            "constraint_residual": self.constraint_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method,
            "history": [list(h) for h in self.history],
        }


def _initial_guess(problem: TVProblem) -> np.ndarray:
    u = np.full(problem.samples.total, problem.g.mean())
    u[problem.samples.indices] = problem.g
    return u.reshape(problem.shape)


def _project_data_ball(u: np.ndarray, problem: TVProblem) -> np.ndarray:
    """Project ``u`` onto ``{(1/m)||u_S - g||^2 <= eta^2}`` (in place)."""
    flat = u.reshape(-1)
    idx = problem.samples.indices
    if problem.eta == 0:
        flat[idx] = problem.g
        return u
    r = flat[idx] - problem.g
    radius = math.sqrt(problem.samples.m) * problem.eta
    norm = float(np.linalg.norm(r))
    if norm > radius:
        flat[idx] = problem.g + r * (radius / norm)
    return u


def _feasible(residual: float, problem: TVProblem, cfg: SolverConfig) -> bool:
    return residual <= problem.eta2 * (1 + cfg.constraint_tolerance) + RESIDUAL_FLOOR


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(old), 1e-12))


def _finish(u, problem, cfg, it, converged, history, method) -> SolveResult:
    if cfg.truncate:
        u = np.clip(u, 0.0, problem.M)
    residual = masked_mse(u, problem.g, problem.samples)
    if converged and not _feasible(residual, problem, cfg):
        converged = False
    if not converged:
        log.warning("%s stopped after %d iterations without converging", method, it)
    return SolveResult(
        u=u,
        tv_value=tv_aniso(u),
        constraint_residual=residual - problem.eta2,
        iterations=it,
        converged=converged,
        method=method,
        history=history,
    )


def _constant_solution(problem: TVProblem, method: str) -> SolveResult:
    # eta^2 == Var(g): the sample mean is feasible with zero TV
    u = np.full(problem.shape, problem.g.mean())
    residual = masked_mse(u, problem.g, problem.samples)
    return SolveResult(u, 0.0, residual - problem.eta2, 0, True, method, [])


def _primal_dual(problem: TVProblem, cfg: SolverConfig) -> SolveResult:
    d = len(problem.shape)
    # ||grad||^2 <= 4d, so tau * sigma * 4d < 1; step_ratio = tau / sigma
    norm = math.sqrt(4 * d)
    tau = 0.99 / norm * math.sqrt(cfg.step_ratio)
    sigma = 0.99 / norm / math.sqrt(cfg.step_ratio)
    u = _project_data_ball(_initial_guess(problem), problem)
    ubar = u.copy()
    p = [np.zeros_like(c) for c in forward_diff(u)]
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        for pj, gj in zip(p, forward_diff(ubar)):
            pj += sigma * gj
            np.clip(pj, -1.0, 1.0, out=pj)
        u_new = _project_data_ball(u - tau * forward_diff_adjoint(p, problem.shape), problem)
        change = _rel_change(u_new, u)
        np.subtract(2 * u_new, u, out=ubar)
        u = u_new
        if it % cfg.history_every == 0:
            history.append((it, tv_aniso(u), masked_mse(u, problem.g, problem.samples) - problem.eta2))
        if change < cfg.change_tolerance:
            converged = True
            break
    return _finish(u, problem, cfg, it, converged, history, "primal-dual")


def _color_masks(shape) -> tuple[np.ndarray, np.ndarray]:
    parity = sum(np.indices(shape)) % 2
    return parity == 0, parity == 1


def _neighbor_sum(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    for j in range(u.ndim):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[j] = slice(0, -1)
        hi[j] = slice(1, None)
        out[tuple(lo)] += u[tuple(hi)]
        out[tuple(hi)] += u[tuple(lo)]
    return out


def _degree(shape) -> np.ndarray:
    return _neighbor_sum(np.ones(shape))


def _shrink(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _split_bregman_run(problem, cfg, lam, bregman, u0, max_iters):
    """Split Bregman for ``||grad u||_1 + lam/2 ||u_S - gk||^2``.

    With ``bregman=True`` the data term is updated by Bregman iteration, which
    drives ``u_S`` to ``g`` (the equality-constrained problem).
    """
    shape = problem.shape
    mu = cfg.mu
    mask = problem.samples.mask(shape).astype(np.float64)
    gfull = np.zeros(problem.samples.total)
    gfull[problem.samples.indices] = problem.g
    gfull = gfull.reshape(shape)
    gk = gfull.copy()
    diag = lam * mask + mu * _degree(shape)
    colors = _color_masks(shape)
    u = u0.copy()
    dvec = list(forward_diff(u))
    b = [np.zeros_like(c) for c in dvec]
    history = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        u_old = u.copy()
        rhs = lam * mask * gk + mu * forward_diff_adjoint([dj - bj for dj, bj in zip(dvec, b)], shape)
        for _ in range(cfg.sweeps):
            for c in colors:
                upd = (rhs + mu * _neighbor_sum(u)) / diag
                u[c] = upd[c]
        grads = forward_diff(u)
        for j, gj in enumerate(grads):
            dvec[j] = _shrink(gj + b[j], 1.0 / mu)
            b[j] += gj - dvec[j]
        if bregman:
            gk += mask * (gfull - u)
        change = _rel_change(u, u_old)
        split_gap = math.sqrt(sum(float(np.sum((gj - dj) ** 2)) for gj, dj in zip(grads, dvec)))
        change = max(change, split_gap / max(math.sqrt(sum(float(np.sum(gj * gj)) for gj in grads)), 1e-12))
        if it % cfg.history_every == 0:
            history.append((it, tv_aniso(u), masked_mse(u, problem.g, problem.samples) - problem.eta2))
        if change < cfg.change_tolerance:
            converged = True
            break
    return u, it, converged, history


def _split_bregman_ball(problem: TVProblem, cfg: SolverConfig) -> SolveResult:
    """Split Bregman with a second split ``z = u_S`` kept inside the data ball.

    ``||grad u||_1 + indicator(z in ball)`` subject to ``d = grad u`` and
    ``z = u_S``; both constraints get Bregman variables, ``z`` is updated by
    exact projection, and ``lam`` is the penalty on ``z = u_S``.
    """
    shape = problem.shape
    mu, nu = cfg.mu, cfg.lam
    idx = problem.samples.indices
    mask = problem.samples.mask(shape).astype(np.float64)
    diag = nu * mask + mu * _degree(shape)
    colors = _color_masks(shape)
    radius = math.sqrt(problem.samples.m) * problem.eta
    u = _initial_guess(problem)
    z = np.zeros(problem.samples.total)
    z[idx] = problem.g
    z = z.reshape(shape)
    c = np.zeros(shape)
    dvec = list(forward_diff(u))
    b = [np.zeros_like(x) for x in dvec]
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        u_old = u.copy()
        rhs = nu * mask * (z - c) + mu * forward_diff_adjoint([dj - bj for dj, bj in zip(dvec, b)], shape)
        for _ in range(cfg.sweeps):
            for col in colors:
                upd = (rhs + mu * _neighbor_sum(u)) / diag
                u[col] = upd[col]
        grads = forward_diff(u)
        for j, gj in enumerate(grads):
            dvec[j] = _shrink(gj + b[j], 1.0 / mu)
            b[j] += gj - dvec[j]
        w = (u + c).reshape(-1)[idx] - problem.g
        nw = float(np.linalg.norm(w))
        z.reshape(-1)[idx] = problem.g + (w if nw <= radius else w * (radius / nw))
        c += mask * (u - z)
        grad_norm = max(math.sqrt(sum(float(np.sum(gj * gj)) for gj in grads)), 1e-12)
        split_gap = math.sqrt(sum(float(np.sum((gj - dj) ** 2)) for gj, dj in zip(grads, dvec)))
        data_gap = float(np.linalg.norm((u - z) * mask)) / max(float(np.linalg.norm(z * mask)), 1e-12)
        change = max(_rel_change(u, u_old), split_gap / grad_norm, data_gap)
        if it % cfg.history_every == 0:
            history.append((it, tv_aniso(u), masked_mse(u, problem.g, problem.samples) - problem.eta2))
        if change < cfg.change_tolerance:
            converged = True
            break
    return _finish(u, problem, cfg, it, converged, history, "split-bregman")


def _split_bregman(problem: TVProblem, cfg: SolverConfig) -> SolveResult:
    u0 = _initial_guess(problem)
    if problem.eta == 0:
        u, it, converged, history = _split_bregman_run(
            problem, cfg, cfg.lam, True, u0, cfg.max_outer_iters
        )
        # remaining sample mismatch is below the Bregman tolerance; snap to data
        u = _project_data_ball(u, problem)
        return _finish(u, problem, cfg, it, converged, history, "split-bregman")

    if cfg.noisy_strategy == "ball":
        return _split_bregman_ball(problem, cfg)

    # eta > 0: bisection on the fidelity weight so the residual meets eta^2
    target = problem.eta2
    lo, hi = None, None
    lam = cfg.lam
    best = None
    total_it = 0
    history = []
    u = u0
    for _ in range(cfg.bisection_steps):
        u, it, ok, hist = _split_bregman_run(problem, cfg, lam, False, u, cfg.max_outer_iters)
        total_it += it
        history.extend((total_it - it + h[0], h[1], h[2]) for h in hist)
        res = masked_mse(u, problem.g, problem.samples)
        if res > target:
            lo = lam
        else:
            hi = lam
            best = (u.copy(), ok)
            if abs(res - target) <= cfg.constraint_tolerance * target:
                break
        if hi is None:
            lam *= 4.0
        elif lo is None:
            lam /= 4.0
        else:
            lam = math.sqrt(lo * hi)
    if best is None:
        u = _project_data_ball(u, problem)
        return _finish(u, problem, cfg, total_it, False, history, "split-bregman")
    u, ok = best
    return _finish(u, problem, cfg, total_it, ok, history, "split-bregman")


def solve(problem: TVProblem, config: SolverConfig | None = None) -> SolveResult:
    """Approximate a TV minimizer subject to the data constraint.

    The returned result is flagged ``converged=False`` when the iteration
    budget runs out or the data constraint is not met.
    """
    cfg = config or SolverConfig()
    if problem.eta > 0 and problem.eta2 >= variance_on(problem.g) * (1 - 1e-12):
        return _constant_solution(problem, cfg.method)
    if problem.samples.m == problem.samples.total and problem.eta == 0:
        u = _initial_guess(problem)
        return _finish(u, problem, cfg, 0, True, [], cfg.method)
    if cfg.method == "primal-dual":
        return _primal_dual(problem, cfg)
    return _split_bregman(problem, cfg)


def solve_equality(problem: TVProblem, config: SolverConfig | None = None) -> SolveResult:
    """Noise-free variant: minimal TV among fields that interpolate the samples."""
    if problem.eta != 0:
        raise ParameterError("solve_equality needs eta = 0")
    return solve(problem, config)


def check_max_principle(result_or_field, M: float, tol: float) -> bool:
    u = result_or_field.u if isinstance(result_or_field, SolveResult) else np.asarray(result_or_field)
    return bool(np.all(u >= -tol) and np.all(u <= M + tol))


def brute_force_min_tv(problem: TVProblem, levels: int, budget: int = 2_000_000):
    """Exhaustive minimum TV over fields with values on ``levels`` points of [0, M].

    Returns ``(min_tv, field)``; ``(inf, None)`` when no quantized candidate is
    feasible.  For ``eta = 0`` the sampled entries are fixed to ``g`` and only
    the free entries are enumerated.
    """
    total = problem.samples.total
    if total > 12 or levels > 9 or levels < 2:
        raise ParameterError("brute force needs |grid| <= 12 and 2 <= levels <= 9")
    grid = np.linspace(0.0, problem.M, levels)
    idx = problem.samples.indices
    free = np.setdiff1d(np.arange(total), idx) if problem.eta == 0 else np.arange(total)
    if levels ** free.size > budget:
        raise ParameterError(f"search space {levels}^{free.size} exceeds budget {budget}")

    best_tv, best = math.inf, None
    combos = itertools.product(range(levels), repeat=free.size)
    chunk = 65536
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0 and free.size > 0:
            break
        cand = np.empty((max(len(block), 1), total))
        if problem.eta == 0:
            cand[:, idx] = problem.g
        if free.size:
            cand[:, free] = grid[block]
        if problem.eta > 0:
            r = cand[:, idx] - problem.g
            ok = np.mean(r * r, axis=1) <= problem.eta2 * (1 + 1e-12) + RESIDUAL_FLOOR
            cand = cand[ok]
        if len(cand):
            fields = cand.reshape((len(cand),) + problem.shape)
            tvs = sum(np.abs(np.diff(fields, axis=j + 1)).reshape(len(cand), -1).sum(axis=1)
                      for j in range(len(problem.shape)))
            i = int(np.argmin(tvs))
            if tvs[i] < best_tv:
                best_tv, best = float(tvs[i]), fields[i].copy()
        if free.size == 0:
            break
    return best_tv, best
