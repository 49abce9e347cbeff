"""Closed-form covering-number, probability and error bounds.

Logarithm bases follow the formulas exactly: covering bounds carry a
``log2 |grid|`` factor, probabilities use natural ``exp``/``ln``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .grid import ParameterError


@dataclass(frozen=True)
class BoundParams:
    """Constants feeding the error bounds.

    ``C_f`` and ``b`` describe the TV growth ``||grad f||_1 <= C_f |grid|^b``;
    ``a`` is the radius exponent (valid radii are ``r >= |grid|^-a``).
    """

    M: float = 1.0
    C_f: float = 1.0
    b: float = 0.5
    d: int = 2
    N: int = 64
    rho: float = 0.5
    eta: float = 0.0
    a: float | None = None
    s: int | None = None

    def __post_init__(self):
        if self.a is None:
            object.__setattr__(self, "a", max(1.0, 1.0 - self.b))
        if self.M < 1:
            raise ParameterError("M must be >= 1")
        if self.C_f <= 0:
            raise ParameterError("C_f must be positive")
        if not 0 <= self.b <= 1:
            raise ParameterError("b must lie in [0, 1]")
        if self.a < 1 - self.b - 1e-15:
            raise ParameterError("a must satisfy a >= 1 - b")
        if self.d < 1 or self.N < 2:
            raise ParameterError("need d >= 1 and N >= 2")
        if not 0 < self.rho <= 1:
            raise ParameterError("rho must lie in (0, 1]")
        if self.eta < 0:
            raise ParameterError("eta must be non-negative")
        if self.s is not None and not 1 <= self.s <= self.card - 1:
            raise ParameterError("s must satisfy 1 <= s <= |grid| - 1")

    @property
    def card(self) -> int:
        return self.N**self.d

    @property
    def m(self) -> int:
        return max(1, round(self.rho * self.card))

    @property
    def growth(self) -> float:
        """``(2a + b) C_f (d + 2 C_f)``, the factor shared by every bound."""
        return (2 * self.a + self.b) * self.C_f * (self.d + 2 * self.C_f)


def covering_constant(p: BoundParams) -> float:
    return 40 * p.M * p.growth


def covering_log_bound(p: BoundParams, r: float) -> float:
    """Upper bound on ``ln N(M, r)`` for the TV-bounded hypothesis class."""
    r_min = p.card ** (-p.a)
    if r < r_min * (1 - 1e-12):
        raise ParameterError(f"radius {r:.6g} is below |grid|^-a = {r_min:.6g}")
    return covering_constant(p) * p.card**p.b * math.log2(p.card) / r


def rough_covering_log_bound(M: float, r: float, card: int) -> float:
    """``ln`` of the volumetric bound ``(2M/r)^card``."""
    if r <= 0:
        raise ParameterError("r must be positive")
    return card * math.log(2 * M / r)


def prob_success_lower_bound(p: BoundParams, eps: float) -> float:
    """Lower bound on P(mean squared error <= eps + 16/3 eta^2).

    The exact covering number is replaced by :func:`covering_log_bound`
    (a surrogate), so the value is a valid lower bound.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    r = eps / (12 * p.M)
    try:
        log_cover = covering_log_bound(p, r)
    except ParameterError as exc:
        raise ParameterError(f"{exc}; enlarge eps or a") from None
    exponent = log_cover - 3 * p.m * eps / (256 * p.M**2)
    return min(1.0, max(0.0, 1.0 - math.exp(min(exponent, 700.0))))


def epsilon_star_equation(p: BoundParams, eps: float) -> float:
    """Left side of the defining equation of eps*; equals ``-ln|grid|`` at the root."""
    A = 480 * p.M**2 * p.growth * p.card**p.b * math.log2(p.card)
    return A / eps - 3 * p.m * eps / (256 * p.M**2)


def epsilon_star(p: BoundParams) -> float:
    """Error level at which the union-bound failure probability is ``1/|grid|``."""
    ln_card = math.log(p.card)
    inner = ln_card**2 + 22.5 * p.m * p.growth * p.card**p.b * math.log2(p.card)
    return 128 * p.M**2 / (3 * p.m) * (ln_card + math.sqrt(inner))


def theorem2_constant(p: BoundParams) -> float:
    return 64 / 3 * p.M**2 * (4 + 3 * math.sqrt(10 * p.growth))


def theorem2_rate(p: BoundParams) -> float:
    """The eta-free part of :func:`theorem2_bound`."""
    if p.b >= 1:
        raise ParameterError("the rate needs b < 1")
    return (
        theorem2_constant(p)
        * p.rho**-0.5
        * p.card ** (-(1 - p.b) / 2)
        * math.log2(p.card) ** 1.5
    )


def theorem2_bound(p: BoundParams) -> float:
    """Mean squared error bound holding with probability >= 1 - 1/|grid|."""
    return theorem2_rate(p) + 16 / 3 * p.eta**2


def theorem3_constant(p: BoundParams) -> float:
    return 128 / 3 * p.M**2 * (2 + 3 * math.sqrt(5 * (2 * p.a + 1) * p.M * (p.d + 4 * p.M)))


def theorem3_bounds(p: BoundParams) -> tuple[float, float]:
    """Sparse-gradient bounds, in terms of ``rho`` and of ``m`` respectively."""
    if p.s is None:
        raise ParameterError("gradient support size s is required")
    if p.a < 1:
        raise ParameterError("sparse-gradient bounds need a >= 1")
    c = theorem3_constant(p)
    logs = math.log2(p.card) ** 1.5
    noise = 16 / 3 * p.eta**2
    by_rho = c * p.rho**-0.5 * logs * math.sqrt(p.s / p.card) + noise
    by_m = c * logs * math.sqrt(p.s / p.m) + noise
    return by_rho, by_m


@dataclass(frozen=True)
class Theorem4Bounds:
    discrete_bound: float
    continuum_bound: float
    continuum_bound_reduced: float | None
    C1: float
    C2: float
    C3: float
    c_tilde: float

    def to_json(self) -> dict:
        return asdict(self)


def theorem4_bounds(J: int, rho: float, eta: float, M: float, TVf: float, a: float = 0.5) -> Theorem4Bounds:
    """Discrete and continuum bounds for a BV function sampled at level ``J``.

    ``continuum_bound_reduced`` folds the ``2^-J`` term into ``eta^2`` and is
    only reported when ``J >= -2 log2(eta)``.
    """
    if J < 1:
        raise ParameterError("J must be >= 1")
    if a < 0.5:
        raise ParameterError("a must be >= 1/2")
    c = 128 / 3 * M**2 * (4 + 3 * math.sqrt(5 * (4 * a + 1) * TVf * (1 + TVf))) * math.sqrt(2)
    C1, C2, C3 = 8 * c, 128 / 3, (32 + 8 * math.sqrt(math.pi)) * TVf * M
    rate = rho**-0.5 * J**1.5 * 2.0 ** (-J / 2)
    reduced = None
    if eta > 0 and J >= -2 * math.log2(eta):
        reduced = C1 * rate + (C2 + C3) * eta**2
    return Theorem4Bounds(
        discrete_bound=c * rate + 16 / 3 * eta**2,
        continuum_bound=C1 * rate + C2 * eta**2 + C3 * 2.0**-J,
        continuum_bound_reduced=reduced,
        C1=C1,
        C2=C2,
        C3=C3,
        c_tilde=c,
    )


def sparse_piecewise_bounds(J: int, rho: float, eta: float, S_count: int, constants: Theorem4Bounds) -> tuple[float, float]:
    """Discrete/continuum bounds for piecewise-constant data with ``|S|`` edge cells."""
    if S_count < 1:
        raise ParameterError("S_count must be >= 1")
    rate = rho**-0.5 * J**1.5 * 2.0**-J * math.sqrt(S_count)
    return (
        constants.c_tilde * rate + 16 / 3 * eta**2,
        constants.C1 * rate + constants.C2 * eta**2 + constants.C3 * 2.0**-J,
    )


def bounds_report(p: BoundParams) -> dict:
    """Every constant and bound for ``p`` as a JSON-ready dict."""
    out = {"params": asdict(p) | {"card": p.card, "m": p.m}}
    eps = epsilon_star(p)
    out["covering_constant"] = covering_constant(p)
    out["covering_log_bound_at_min_radius"] = covering_log_bound(p, p.card ** (-p.a))
    out["epsilon_star"] = eps
    out["prob_success_at_epsilon_star"] = prob_success_lower_bound(p, eps)
    out["probability_kind"] = "surrogate"
    if p.b < 1:
        out["c_tilde"] = theorem2_constant(p)
        out["theorem2_rate"] = theorem2_rate(p)
        out["theorem2_bound"] = theorem2_bound(p)
    if p.s is not None and p.a >= 1:
        c3 = theorem3_bounds(p)
        out["theorem3_c_tilde"] = theorem3_constant(p)
        out["theorem3_bound_rho"], out["theorem3_bound_m"] = c3
    return out
