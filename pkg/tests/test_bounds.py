import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from tvcomplete.bounds import (
    BoundParams,
    bounds_report,
    covering_constant,
    covering_log_bound,
    epsilon_star,
    epsilon_star_equation,
    prob_success_lower_bound,
    rough_covering_log_bound,
    sparse_piecewise_bounds,
    theorem2_bound,
    theorem2_constant,
    theorem2_rate,
    theorem3_bounds,
    theorem3_constant,
    theorem4_bounds,
)
from tvcomplete.grid import ParameterError

REF = BoundParams(M=1, C_f=1, b=0.5, d=2, N=512, rho=0.5, a=1)


def test_default_a():
    assert BoundParams(b=0.5).a == 1.0
    assert BoundParams(b=0.0).a == 1.0
    with pytest.raises(ParameterError):
        BoundParams(b=0.0, a=0.5)
    with pytest.raises(ParameterError):
        BoundParams(M=0.5)
    with pytest.raises(ParameterError):
        BoundParams(rho=0)


def test_theorem2_constant_exact():
    # growth = (2 + 1/2) * 1 * (2 + 2) = 10, sqrt(10 * 10) = 10
    exact = Fraction(64, 3) * (4 + 3 * 10)
    assert exact == Fraction(2176, 3)
    assert theorem2_constant(REF) == pytest.approx(2176 / 3, rel=1e-12)


def test_theorem3_constant_symbolic():
    M, a, d = sp.Integer(1), sp.Integer(1), sp.Integer(1)
    c = sp.Rational(128, 3) * M**2 * (2 + 3 * sp.sqrt(5 * (2 * a + 1) * M * (d + 4 * M)))
    assert sp.simplify(c - sp.Rational(128, 3) * (2 + 3 * sp.sqrt(75))) == 0
    p = BoundParams(M=1, C_f=1, b=0.5, d=1, N=64, a=1)
    assert theorem3_constant(p) == pytest.approx(float(c), rel=1e-12)
    assert float(c) == pytest.approx(1193.846, abs=1e-3)


def test_covering_constant_and_scaling():
    assert covering_constant(REF) == pytest.approx(40 * 10)
    lb = covering_log_bound(REF, 1.0)
    assert covering_log_bound(REF, 0.5) == pytest.approx(2 * lb)
    assert lb == pytest.approx(400 * 512 * 18)
    with pytest.raises(ParameterError):
        covering_log_bound(REF, 1e-7)


def test_covering_bound_small_example():
    p = BoundParams(M=1, C_f=1, b=0.0, d=1, N=4, a=1)
    # growth = 2 * 1 * 3 = 6; C = 240; |grid|^0 log2 4 = 2
    assert covering_log_bound(p, 1.0) == pytest.approx(480.0)
    assert rough_covering_log_bound(1, 0.5, 4) == pytest.approx(4 * math.log(4))


def test_epsilon_star_root_and_probability():
    p = BoundParams(M=1, C_f=1, b=0.5, d=2, N=256, rho=0.5)
    eps = epsilon_star(p)
    assert epsilon_star_equation(p, eps) == pytest.approx(-math.log(p.card), rel=1e-10)
    assert prob_success_lower_bound(p, eps) == pytest.approx(1 - 1 / p.card, abs=1e-9)
    assert prob_success_lower_bound(p, eps * 2) > prob_success_lower_bound(p, eps)


def test_epsilon_star_solves_quadratic():
    p = BoundParams(M=2, C_f=0.5, b=0.25, d=1, N=1000, rho=0.3)
    A = 480 * p.M**2 * p.growth * p.card**p.b * math.log2(p.card)
    B = 3 * p.m / (256 * p.M**2)
    # A/e - B e = -ln|grid|  <=>  B e^2 - ln|grid| e - A = 0
    roots = np.roots([B, -math.log(p.card), -A])
    assert epsilon_star(p) == pytest.approx(max(roots.real), rel=1e-12)


def test_probability_clamped():
    p = BoundParams(N=16, rho=0.1)
    eps = 12 * p.card ** (-p.a) * 1.01
    assert prob_success_lower_bound(p, eps) == 0.0


def test_theorem2_rate_shape():
    p = BoundParams(N=64, rho=0.5, eta=0.1)
    expected = theorem2_constant(p) * 0.5**-0.5 * 4096**-0.25 * 12**1.5
    assert theorem2_rate(p) == pytest.approx(expected)
    assert theorem2_bound(p) == pytest.approx(expected + 16 / 3 * 0.01)
    with pytest.raises(ParameterError):
        theorem2_rate(BoundParams(b=1.0))


def test_theorem3_forms_consistent():
    p = BoundParams(N=64, rho=0.25, s=100)
    by_rho, by_m = theorem3_bounds(p)
    # m = rho |grid| exactly here, so the two forms coincide
    assert by_rho == pytest.approx(by_m, rel=1e-12)
    with pytest.raises(ParameterError):
        theorem3_bounds(BoundParams())


def test_theorem4_constants():
    b = theorem4_bounds(J=6, rho=0.5, eta=0.0, M=1.0, TVf=2.0, a=0.5)
    assert b.C2 == pytest.approx(128 / 3, rel=1e-15)
    assert b.C3 == pytest.approx((32 + 8 * math.sqrt(math.pi)) * 2.0, rel=1e-15)
    c = 128 / 3 * (4 + 3 * math.sqrt(5 * 3 * 2 * 3)) * math.sqrt(2)
    assert b.c_tilde == pytest.approx(c, rel=1e-12)
    assert b.C1 == pytest.approx(8 * c)
    assert b.continuum_bound_reduced is None


def test_theorem4_reduced_form():
    b = theorem4_bounds(J=8, rho=0.5, eta=0.1, M=1.0, TVf=1.0)
    assert 8 >= -2 * math.log2(0.1)
    rate = 0.5**-0.5 * 8**1.5 * 2.0**-4
    assert b.continuum_bound_reduced == pytest.approx(b.C1 * rate + (b.C2 + b.C3) * 0.01)
    assert theorem4_bounds(J=6, rho=0.5, eta=0.1, M=1, TVf=1).continuum_bound_reduced is None


def test_sparse_piecewise_bounds():
    c = theorem4_bounds(J=5, rho=0.5, eta=0.0, M=1, TVf=2)
    d, cont = sparse_piecewise_bounds(5, 0.5, 0.0, 40, c)
    assert d == pytest.approx(c.c_tilde * 0.5**-0.5 * 5**1.5 * 2.0**-5 * math.sqrt(40))
    assert cont > 0
    with pytest.raises(ParameterError):
        sparse_piecewise_bounds(5, 0.5, 0.0, 0, c)


def test_report_is_json_ready():
    import json

    rep = bounds_report(BoundParams(N=32, s=10))
    json.dumps(rep)
    assert rep["probability_kind"] == "surrogate"
    assert "theorem3_bound_m" in rep
