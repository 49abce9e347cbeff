"""Quantization grids, l1-lattice counting and brute-force covering numbers.

These pieces make the covering-number estimate for the TV-bounded class
concrete: a TV-nonincreasing quantizer onto a grid of spacing ``r/2``,
exact lattice-point counts next to their binomial upper bounds, and
greedy cover/packing sandwiches on classes small enough to enumerate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bounds import BoundParams, covering_log_bound
from .grid import ParameterError, as_field, tv_aniso


@dataclass(frozen=True)
class QuantGrid:
    r: float
    M: float

    @property
    def kappa(self) -> int:
        return math.ceil(2 * self.M / self.r)

    @property
    def spacing(self) -> float:
        return self.r / 2

    @property
    def levels(self) -> np.ndarray:
        return np.arange(-self.kappa, self.kappa + 1) * self.spacing


def quant_grid(M: float, r: float) -> QuantGrid:
    if r <= 0 or M <= 0:
        raise ParameterError("need r > 0 and M > 0")
    return QuantGrid(float(r), float(M))


def _shift_candidates(x: np.ndarray) -> np.ndarray:
    """Representative shifts, one per interval on which ``floor(x + theta)`` is constant."""
    breaks = np.mod(-x.reshape(-1), 1.0)
    breaks[breaks >= 1.0] = 0.0  # mod can round tiny negatives up to 1.0
    breaks = np.unique(breaks)
    if breaks.size == 0:
        return np.array([0.5])
    nxt = np.append(breaks[1:], breaks[0] + 1.0)
    return np.mod((breaks + nxt) / 2, 1.0)


def quantize_tv(u, grid: QuantGrid) -> np.ndarray:
    """Quantize ``u`` onto ``grid.levels`` without increasing anisotropic TV.

    Uses a shifted floor ``q = s * floor(u/s + theta)`` (``s = r/2``) with the
    shift ``theta`` minimising TV(q).  Averaged over a uniform shift, the
    expected TV of the shifted floor equals TV(u), so the minimiser never
    exceeds it; every entry moves by less than ``s``.  Works in any dimension.
    """
    u = as_field(u)
    if np.max(np.abs(u)) > grid.M * (1 + 1e-12):
        raise ParameterError("quantizer input must satisfy |u| <= M")
    s = grid.spacing
    x = u / s
    best, best_tv = None, math.inf
    for theta in _shift_candidates(x):
        k = np.clip(np.floor(x + theta), -grid.kappa, grid.kappa)
        tv = tv_aniso(k)
        if tv < best_tv:
            best, best_tv = k, tv
    return best * s


def quantize_tv_1d(u, grid: QuantGrid) -> np.ndarray:
    u = as_field(u)
    if u.ndim != 1:
        raise ParameterError("quantize_tv_1d expects a 1-D signal")
    return quantize_tv(u, grid)


def hysteresis_quantize_1d(u, grid: QuantGrid) -> np.ndarray:
    """Lazy-tracking quantizer: keep the previous level while it stays within r/2.

    Sup error is at most r/2 but TV can *increase* (e.g. ``[0.24, 0.51]`` at
    ``r = 1``), so this is kept only as a diagnostic baseline.
    """
    u = as_field(u)
    levels = grid.levels
    q = np.empty_like(u)
    q[0] = levels[np.argmin(np.abs(levels - u[0]))]
    half = grid.r / 2
    for k in range(1, u.size):
        allowed = levels[np.abs(levels - u[k]) <= half + 1e-12]
        q[k] = allowed[np.argmin(np.abs(allowed - q[k - 1]))]
    return q


def exists_tv_quantization(u, grid: QuantGrid, tol: float = 1e-12) -> bool:
    """Exhaustively look for ``q`` on the grid with ``|u - q| <= r/2`` and TV(q) <= TV(u)."""
    u = as_field(u)
    half = grid.r / 2
    levels = grid.levels
    choices = [levels[np.abs(levels - v) <= half + 1e-12] for v in u.reshape(-1)]
    if math.prod(len(c) for c in choices) > 2_000_000:
        raise ParameterError("too many candidate quantizations to enumerate")
    target = tv_aniso(u) + tol
    for combo in itertools.product(*choices):
        if tv_aniso(np.reshape(combo, u.shape)) <= target:
            return True
    return False


def count_l1_ball(R: int, K: int) -> int:
    """Number of integer vectors in ``Z^R`` with ``|x_1| + ... + |x_R| <= K``.

    Dynamic programming over (entries, budget); exact big integers.
    """
    if R < 0 or K < 0:
        raise ParameterError("R and K must be non-negative")
    # ways[k] = vectors so far with l1 norm exactly k
    ways = [1] + [0] * K
    for _ in range(R):
        new = [0] * (K + 1)
        for k, w in enumerate(ways):
            if not w:
                continue
            new[k] += w
            for step in range(1, K - k + 1):
                new[k + step] += 2 * w
        ways = new
    return sum(ways)


def count_l1_ball_closed_form(R: int, K: int) -> int:
    return sum(2**i * math.comb(R, i) * math.comb(K, i) for i in range(min(R, K) + 1))


def l1_ball_paper_bound(R: int, K: int) -> int:
    """``2 [2 (R + K - 1)]^K``, the final step of the binomial chain."""
    return 2 * (2 * (R + K - 1)) ** K


@dataclass(frozen=True)
class LatticeCount:
    R: int
    K: int
    count: int


def lattice_parameters(p: BoundParams, r: float) -> tuple[int, int, int]:
    """``(kappa, R, K)`` for the quantized class at radius ``r``."""
    kappa = math.ceil(2 * p.M / r)
    R = p.d * (p.card - p.N ** (p.d - 1))
    K = math.ceil(2 * p.C_f * p.card**p.b / r * (1 - 1e-12))
    return kappa, R, K


def lattice_count(p: BoundParams, r: float) -> LatticeCount:
    _, R, K = lattice_parameters(p, r)
    return LatticeCount(R, K, count_l1_ball(R, K))


def quantized_class_log_size(p: BoundParams, r: float, exact: bool = True) -> dict:
    """Log sizes along the counting chain at radius ``r``.

    ``paper`` is ``ln((4 kappa + 2) [2(R + K - 1)]^K)``; ``exact`` (when
    requested) is ``ln((2 kappa + 1) * #l1-ball)``; ``thm1`` is the final
    covering bound.  ``exact <= paper`` is asserted.
    """
    kappa, R, K = lattice_parameters(p, r)
    out = {"kappa": kappa, "R": R, "K": K}
    out["paper"] = math.log(4 * kappa + 2) + (K * math.log(2 * (R + K - 1)) if K else 0.0)
    if exact:
        size = (2 * kappa + 1) * count_l1_ball(R, K)
        out["exact"] = _bigint_log(size)
        assert out["exact"] <= out["paper"] + 1e-12
    try:
        out["thm1"] = covering_log_bound(p, r)
    except ParameterError:
        out["thm1"] = None
    return out


def _bigint_log(n: int) -> float:
    if n.bit_length() < 1000:
        return math.log(n)
    shift = n.bit_length() - 64
    return math.log(n >> shift) + shift * math.log(2)


@dataclass(frozen=True)
class TinyClass:
    """The box-and-TV class ``{u : TV(u) <= T, |u| <= M}`` on a coarse value grid."""

    shape: tuple[int, ...]
    M: float
    T: float
    points: int = 6

    def enumerate(self, budget: int = 100_000) -> np.ndarray:
        n = math.prod(self.shape)
        if n > 4 or self.points > 6 or self.points ** n > budget:
            raise ParameterError("tiny class too large to enumerate")
        values = np.linspace(-self.M, self.M, self.points)
        grid = np.array(list(itertools.product(values, repeat=n)))
        fields = grid.reshape((-1,) + tuple(self.shape))
        tvs = sum(np.abs(np.diff(fields, axis=j + 1)).reshape(len(grid), -1).sum(axis=1)
                  for j in range(len(self.shape)))
        return grid[tvs <= self.T + 1e-12]


def _sup_dist(points: np.ndarray) -> np.ndarray:
    return np.max(np.abs(points[:, None, :] - points[None, :, :]), axis=2)


def greedy_cover(points: np.ndarray, r: float) -> list[int]:
    """Greedy set cover with sup-norm r-balls centred at class members."""
    within = _sup_dist(points) <= r + 1e-12
    uncovered = np.ones(len(points), dtype=bool)
    centres = []
    while uncovered.any():
        gain = (within & uncovered[None, :]).sum(axis=1)
        c = int(np.argmax(gain))
        centres.append(c)
        uncovered &= ~within[c]
    return centres


def greedy_packing(points: np.ndarray, r: float) -> list[int]:
    """Maximal set with pairwise sup distance > 2r (no r-ball holds two of them)."""
    dist = _sup_dist(points)
    chosen = []
    alive = np.ones(len(points), dtype=bool)
    while alive.any():
        i = int(np.argmax(alive))
        chosen.append(i)
        alive &= dist[i] > 2 * r + 1e-12
    return chosen


def brute_force_covering_sandwich(instance: TinyClass, r: float) -> tuple[int, int]:
    """``(lower, upper)`` bracketing the covering number of the enumerated class.

    The upper bound is a greedy cover whose validity is checked by explicit
    membership of every element in some centre's ball.
    """
    if r <= 0:
        raise ParameterError("r must be positive")
    pts = instance.enumerate()
    centres = greedy_cover(pts, r)
    dist = np.max(np.abs(pts[:, None, :] - pts[centres][None, :, :]), axis=2)
    if not np.all(dist.min(axis=1) <= r + 1e-12):
        raise AssertionError("greedy cover failed membership check")
    lower = len(greedy_packing(pts, r))
    return lower, len(centres)
