"""Continuum layer on the periodic unit square.

Cell-average sampling of test functions, periodized bilinear B-spline
synthesis, exact L2 errors, and the Bessel-type frame inequalities for the
hat-function system ``phi(2^J x - k)``.

Coordinates: the first coordinate ``x1`` runs along array axis 0, so a
sample ``f[k1, k2]`` is the average of ``f`` over the cell
``2^-J [k1, k1+1) x 2^-J [k2, k2+1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ParameterError, tv_aniso


class QuadratureError(RuntimeError):
    """Raised when a quadrature refinement does not reach its tolerance."""


def hat(x):
    """The linear B-spline ``B2(x) = max(1 - |x|, 0)``."""
    return np.maximum(1.0 - np.abs(x), 0.0)


def _hat_antiderivative(t):
    t = np.clip(t, -1.0, 1.0)
    return np.where(t <= 0, 0.5 * (t + 1) ** 2, 1.0 - 0.5 * (1 - t) ** 2)


# ---------------------------------------------------------------- functions


class AnalyticFunction2D:
    """A 1-periodic function on ``[0, 1)^2`` with known anisotropic TV."""

    piecewise_constant = False

    def __call__(self, x, y):
        raise NotImplementedError

    def breakpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates in [0, 1) of the lines where the function may jump."""
        return np.array([]), np.array([])

    def total_variation(self) -> float:
        raise NotImplementedError

    def sup_norm(self) -> float:
        raise NotImplementedError


def _merged_cells(xs, ys):
    bx = np.unique(np.concatenate([[0.0, 1.0], np.mod(xs, 1.0)]))
    by = np.unique(np.concatenate([[0.0, 1.0], np.mod(ys, 1.0)]))
    return bx, by


def _piecewise_constant_tv(f: AnalyticFunction2D) -> float:
    bx, by = _merged_cells(*f.breakpoints())
    mx, my = (bx[1:] + bx[:-1]) / 2, (by[1:] + by[:-1]) / 2
    V = f(mx[:, None], my[None, :])
    jump_x = np.abs(V - np.roll(V, 1, axis=0)) * np.diff(by)[None, :]
    jump_y = np.abs(V - np.roll(V, 1, axis=1)) * np.diff(bx)[:, None]
    return float(jump_x.sum() + jump_y.sum())


@dataclass
class RectangleSum(AnalyticFunction2D):
    """``sum_l alpha_l 1_{[x0, x1) x [y0, y1)}`` with every rectangle inside [0, 1]^2."""

    rects: list[tuple[float, float, float, float, float]] = field(default_factory=list)
    piecewise_constant = True

    def __post_init__(self):
        self.rects = [tuple(float(v) for v in r) for r in self.rects]
        for x0, x1, y0, y1, _ in self.rects:
            if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
                raise ParameterError(f"rectangle {(x0, x1, y0, y1)} not inside the unit square")

    def __call__(self, x, y):
        x = np.mod(np.asarray(x, dtype=np.float64), 1.0)
        y = np.mod(np.asarray(y, dtype=np.float64), 1.0)
        out = np.zeros(np.broadcast(x, y).shape)
        for x0, x1, y0, y1, a in self.rects:
            out = out + a * ((x >= x0) & (x < x1) & (y >= y0) & (y < y1))
        return out

    def breakpoints(self):
        xs = [v for r in self.rects for v in r[:2]]
        ys = [v for r in self.rects for v in r[2:4]]
        return np.mod(np.array(xs), 1.0), np.mod(np.array(ys), 1.0)

    def total_variation(self) -> float:
        return _piecewise_constant_tv(self)

    def sup_norm(self) -> float:
        bx, by = _merged_cells(*self.breakpoints())
        mx, my = (bx[1:] + bx[:-1]) / 2, (by[1:] + by[:-1]) / 2
        return float(np.abs(self(mx[:, None], my[None, :])).max())

    def cell_integrals(self, J: int) -> np.ndarray:
        """Exact ``int_{Q_k} f`` from interval overlap lengths."""
        n = 2**J
        edges = np.arange(n + 1) / n
        out = np.zeros((n, n))
        for x0, x1, y0, y1, a in self.rects:
            ox = np.clip(np.minimum(edges[1:], x1) - np.maximum(edges[:-1], x0), 0, None)
            oy = np.clip(np.minimum(edges[1:], y1) - np.maximum(edges[:-1], y0), 0, None)
            out += a * np.outer(ox, oy)
        return out

    def hat_inner_products(self, J: int) -> np.ndarray:
        """Exact ``<f, phi(2^J . - k)>`` for the periodized hat system."""
        n = 2**J
        k = np.arange(n)
        out = np.zeros((n, n))

        def axis(lo, hi):
            total = np.zeros(n)
            for shift in (-n, 0, n):
                c = k + shift
                total += (_hat_antiderivative(n * hi - c) - _hat_antiderivative(n * lo - c)) / n
            return total

        for x0, x1, y0, y1, a in self.rects:
            out += a * np.outer(axis(x0, x1), axis(y0, y1))
        return out


def half_plane() -> RectangleSum:
    """Indicator of ``x1 < 1/2``."""
    return RectangleSum([(0.0, 0.5, 0.0, 1.0, 1.0)])


def two_rectangles() -> RectangleSum:
    return RectangleSum([(0.15, 0.55, 0.2, 0.7, 1.0), (0.6, 0.9, 0.35, 0.8, 0.6)])


@dataclass
class Tabulated(AnalyticFunction2D):
    """Piecewise-constant field on a fine ``n x n`` grid of the unit square."""

    values: np.ndarray
    piecewise_constant = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ParameterError("tabulated values must be a square array")

    def __call__(self, x, y):
        n = self.values.shape[0]
        i = np.floor(np.mod(x, 1.0) * n).astype(int) % n
        j = np.floor(np.mod(y, 1.0) * n).astype(int) % n
        return self.values[i, j]

    def breakpoints(self):
        n = self.values.shape[0]
        t = np.arange(n) / n
        return t, t

    def total_variation(self) -> float:
        return _piecewise_constant_tv(self)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())


@dataclass
class SeparableBump(AnalyticFunction2D):
    """``height * sin^2(pi x1) sin^2(pi x2)``; smooth and 1-periodic, TV = 2 * height."""

    height: float = 1.0

    def __call__(self, x, y):
        return self.height * np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2

    def total_variation(self) -> float:
        return 2.0 * abs(self.height)

    def sup_norm(self) -> float:
        return abs(self.height)


def function_from_spec(spec: dict) -> AnalyticFunction2D:
    """Build a catalog function from its config-file description."""
    kind = spec.get("kind")
    if kind == "rectangles":
        return RectangleSum([tuple(r) for r in spec["rects"]])
    if kind == "half-plane":
        return half_plane()
    if kind == "bump":
        return SeparableBump(float(spec.get("height", 1.0)))
    if kind == "tabulated":
        return Tabulated(np.asarray(spec["values"], dtype=np.float64))
    raise ParameterError(f"unknown function kind {kind!r}")


DEFAULT_CATALOG = {
    "half-plane": {"kind": "half-plane"},
    "two-rectangles": {"kind": "rectangles", "rects": [list(r) for r in two_rectangles().rects]},
    "bump": {"kind": "bump", "height": 1.0},
}


# ---------------------------------------------------------------- quadrature


def _axis_nodes(breaks: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(q)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    x = (lo + hi) / 2 + (hi - lo) / 2 * t[None, :]
    wx = (hi - lo) / 2 * w[None, :]
    return x.reshape(-1), wx.reshape(-1)


def _nodes(f: AnalyticFunction2D | None, J: int, q: int):
    n = 2**J
    knots = np.arange(n) / n
    fx, fy = f.breakpoints() if f is not None else (np.array([]), np.array([]))
    bx, by = _merged_cells(np.concatenate([knots, fx]), np.concatenate([knots, fy]))
    x, wx = _axis_nodes(bx, q)
    y, wy = _axis_nodes(by, q)
    return x, wx, y, wy


def _cell_matrix(x: np.ndarray, wx: np.ndarray, n: int) -> np.ndarray:
    cell = np.minimum(np.floor(x * n).astype(int), n - 1)
    C = np.zeros((n, x.size))
    C[cell, np.arange(x.size)] = wx
    return C


def _hat_matrix(x: np.ndarray, wx: np.ndarray, n: int) -> np.ndarray:
    t = x * n
    i = np.minimum(np.floor(t).astype(int), n - 1)
    frac = t - i
    H = np.zeros((n, x.size))
    cols = np.arange(x.size)
    np.add.at(H, (i, cols), (1 - frac) * wx)
    np.add.at(H, ((i + 1) % n, cols), frac * wx)
    return H


def _refine(compute, q0: int, tol: float, q_max: int = 128):
    q = q0
    prev = compute(q)
    while True:
        q2 = 2 * q
        cur = compute(q2)
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol:
            return cur
        if q2 >= q_max:
            raise QuadratureError(f"quadrature stalled at {err:.3g} (tolerance {tol:.3g})")
        q, prev = q2, cur


def cell_integrals_quadrature(f: AnalyticFunction2D, J: int, q: int = 16) -> np.ndarray:
    """``int_{Q_k} f`` by tensor Gauss-Legendre on breakpoint-aligned sub-cells."""
    n = 2**J
    x, wx, y, wy = _nodes(f, J, q)
    return _cell_matrix(x, wx, n) @ f(x[:, None], y[None, :]) @ _cell_matrix(y, wy, n).T


def hat_inner_products_quadrature(f: AnalyticFunction2D, J: int, q: int = 4) -> np.ndarray:
    n = 2**J
    x, wx, y, wy = _nodes(f, J, q)
    return _hat_matrix(x, wx, n) @ f(x[:, None], y[None, :]) @ _hat_matrix(y, wy, n).T


# ---------------------------------------------------------------- operations


def local_average_samples(f: AnalyticFunction2D, J: int, tol: float = 1e-9) -> np.ndarray:
    """Cell averages ``2^{2J} int_{Q_k} f`` on the ``2^J x 2^J`` grid."""
    if J < 1:
        raise ParameterError("J must be >= 1")
    n = 2**J
    if isinstance(f, RectangleSum):
        return f.cell_integrals(J) * n * n
    if f.piecewise_constant:
        return cell_integrals_quadrature(f, J, q=1) * n * n
    return _refine(lambda q: cell_integrals_quadrature(f, J, q) * n * n, 16, tol)


@dataclass
class SplineSurface:
    """``sum_k c[k] phi(2^J x - k)`` with ``phi = B2 x B2``, periodized."""

    coeffs: np.ndarray
    J: int

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        n = 2**self.J
        if self.coeffs.shape != (n, n):
            raise ParameterError(f"expected {n}x{n} coefficients, got {self.coeffs.shape}")

    def __call__(self, x, y):
        n = 2**self.J
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        tx, ty = np.mod(x, 1.0) * n, np.mod(y, 1.0) * n
        i, j = np.floor(tx).astype(int) % n, np.floor(ty).astype(int) % n
        fx, fy = tx - np.floor(tx), ty - np.floor(ty)
        c = self.coeffs
        i1, j1 = (i + 1) % n, (j + 1) % n
        return ((1 - fx) * (1 - fy) * c[i, j] + fx * (1 - fy) * c[i1, j]
                + (1 - fx) * fy * c[i, j1] + fx * fy * c[i1, j1])


def interpolate(coeffs, J: int) -> SplineSurface:
    return SplineSurface(coeffs, J)


def partition_of_unity(J: int, x, y) -> np.ndarray:
    """``sum_k phi(2^J x - k)`` evaluated term by term (periodized)."""
    n = 2**J
    x, y = np.asarray(x, float), np.asarray(y, float)
    total = np.zeros(np.broadcast(x, y).shape)
    for k1 in range(n):
        hx = sum(hat(n * x - k1 + n * s) for s in (-1, 0, 1))
        for k2 in range(n):
            hy = sum(hat(n * y - k2 + n * s) for s in (-1, 0, 1))
            total += hx * hy
    return total


def l2_error(surface: SplineSurface, f: AnalyticFunction2D, tol: float = 1e-8) -> float:
    """``||surface - f||^2`` over the unit square.

    Exact (3-point Gauss per breakpoint-aligned sub-cell) for piecewise-
    constant ``f``; otherwise refined until successive values differ by
    at most ``tol``.
    """
    def compute(q):
        x, wx, y, wy = _nodes(f, surface.J, q)
        X, Y = x[:, None], y[None, :]
        diff2 = (surface(X, Y) - f(X, Y)) ** 2
        return np.array(wx @ diff2 @ wy)

    if f.piecewise_constant:
        return float(compute(3))
    return float(_refine(compute, 4, tol))


def thm5_bound(f: AnalyticFunction2D, J: int) -> float:
    return (16 + 4 * math.sqrt(math.pi)) * 2.0**-J * f.total_variation() * f.sup_norm()


def bessel_check(u: AnalyticFunction2D, J: int) -> tuple[float, float]:
    """``(sum_k |<u, phi_k>|^2, 4 * 2^{-2J} ||u||^2)``; the first never exceeds the second."""
    if isinstance(u, RectangleSum):
        ip = u.hat_inner_products(J)
    elif u.piecewise_constant:
        ip = hat_inner_products_quadrature(u, J, q=2)
    else:
        ip = _refine(lambda q: hat_inner_products_quadrature(u, J, q), 8, 1e-12)
    lhs = float(np.sum(ip**2))
    rhs = 4.0 * 4.0**-J * l2_norm_sq(u)
    assert lhs <= rhs * (1 + 1e-12), (lhs, rhs)
    return lhs, rhs


def l2_norm_sq(u: AnalyticFunction2D) -> float:
    if u.piecewise_constant:
        bx, by = _merged_cells(*u.breakpoints())
        mx, my = (bx[1:] + bx[:-1]) / 2, (by[1:] + by[:-1]) / 2
        V = u(mx[:, None], my[None, :])
        return float(np.diff(bx) @ V**2 @ np.diff(by))
    return float(_refine(lambda q: _l2_quad(u, q), 16, 1e-13))


def _l2_quad(u, q):
    x, wx = _axis_nodes(np.linspace(0, 1, 9), q)
    return np.array(wx @ u(x[:, None], x[None, :]) ** 2 @ wx)


def spline_gram_norm_sq(coeffs, J: int) -> float:
    """``||sum_k c[k] phi(2^J . - k)||^2`` via the B2 Gram stencil (2/3, 1/6, 1/6)."""
    c = np.asarray(coeffs, dtype=np.float64)
    Gc = c
    for ax in (0, 1):
        Gc = (2 / 3) * Gc + (1 / 6) * (np.roll(Gc, 1, axis=ax) + np.roll(Gc, -1, axis=ax))
    return float(4.0**-J * np.sum(c * Gc))


def spline_norm_sq_quadrature(coeffs, J: int) -> float:
    surface = SplineSurface(coeffs, J)
    x, wx, y, wy = _nodes(None, J, 3)
    return float(wx @ surface(x[:, None], y[None, :]) ** 2 @ wy)


def adjoint_bessel_check(coeffs, J: int) -> tuple[float, float]:
    lhs = spline_gram_norm_sq(coeffs, J)
    rhs = 4.0 * 4.0**-J * float(np.sum(np.asarray(coeffs, float) ** 2))
    assert lhs <= rhs * (1 + 1e-12) + 1e-300, (lhs, rhs)
    return lhs, rhs


def discrete_tv_vs_continuum(f: AnalyticFunction2D, J: int) -> tuple[float, float]:
    discrete = tv_aniso(local_average_samples(f, J))
    bound = 2.0**J * f.total_variation()
    assert discrete <= bound * (1 + 1e-12) + 1e-12, (discrete, bound)
    return discrete, bound


def interior_cell_sets(f: AnalyticFunction2D, J: int, delta: float = 1e-9) -> tuple[set, set]:
    """Split grid cells into ``I`` (edge-free neighbourhood) and ``S`` (the rest).

    ``k`` is in ``I`` when ``k + e1`` and ``k + e2`` are on the grid and ``f`` is
    constant on an open neighbourhood (relative to the unit square) of the
    closed cells ``Q_k``, ``Q_{k+e1}`` and ``Q_{k+e2}``.  The outer boundary of
    the square is not an edge, matching the non-periodic discrete gradient.
    """
    if not f.piecewise_constant:
        raise ParameterError("interior cell sets need a piecewise-constant function")
    n = 2**J
    fx, fy = f.breakpoints()
    bx, by = _merged_cells(fx, fy)

    def probes(lo, hi, breaks):
        # midpoints of every merged sub-interval meeting (lo - delta, hi + delta) inside [0, 1]
        a, b = max(lo - delta, 0.0), min(hi + delta, 1.0)
        pts = np.unique(np.concatenate([breaks[(breaks > a) & (breaks < b)], [a, b]]))
        return (pts[1:] + pts[:-1]) / 2

    def constant_near(x0, x1, y0, y1):
        vals = f(probes(x0, x1, bx)[:, None], probes(y0, y1, by)[None, :])
        return vals.max() - vals.min() <= 1e-12, vals.flat[0]

    interior, edge = set(), set()
    for k1 in range(n):
        for k2 in range(n):
            ok = False
            if k1 + 1 < n and k2 + 1 < n:
                a_ok, a_val = constant_near(k1 / n, (k1 + 2) / n, k2 / n, (k2 + 1) / n)
                b_ok, b_val = constant_near(k1 / n, (k1 + 1) / n, k2 / n, (k2 + 2) / n)
                ok = a_ok and b_ok and abs(a_val - b_val) <= 1e-12
            (interior if ok else edge).add((k1, k2))
    return interior, edge
