import math

import numpy as np
import pytest
from scipy import integrate

from tvcomplete import bvapprox as bv
from tvcomplete.grid import ParameterError, grad_support


def random_rects(rng, count=3):
    rects = []
    for _ in range(count):
        x0, x1 = np.sort(rng.uniform(0, 1, 2))
        y0, y1 = np.sort(rng.uniform(0, 1, 2))
        rects.append((x0, x1, y0, y1, rng.uniform(0.1, 0.4)))
    return bv.RectangleSum(rects)


def test_rectangle_tv_closed_form():
    f = bv.RectangleSum([(0.2, 0.5, 0.1, 0.7, 0.8)])
    assert f.total_variation() == pytest.approx(2 * 0.8 * (0.3 + 0.6))
    assert bv.half_plane().total_variation() == pytest.approx(2.0)
    assert f.sup_norm() == pytest.approx(0.8)
    with pytest.raises(ParameterError):
        bv.RectangleSum([(0.5, 0.2, 0, 1, 1)])


def test_bump_tv_by_quadrature():
    f = bv.SeparableBump(0.7)
    dx = lambda y, x: abs(0.7 * math.pi * math.sin(2 * math.pi * x) * math.sin(math.pi * y) ** 2)
    val, _ = integrate.dblquad(dx, 0, 1, 0, 1, epsabs=1e-10)
    assert f.total_variation() == pytest.approx(2 * val, rel=1e-7)


def test_local_averages_half_plane():
    s = bv.local_average_samples(bv.half_plane(), 1)
    assert s.tolist() == [[1.0, 1.0], [0.0, 0.0]]


def test_local_averages_constant():
    s = bv.local_average_samples(bv.RectangleSum([(0, 1, 0, 1, 0.3)]), 3)
    assert np.allclose(s, 0.3)


def test_local_average_fractional_area():
    f = bv.RectangleSum([(0.1, 0.4, 0.0, 0.5, 2.0)])
    s = bv.local_average_samples(f, 1)
    # cell [0, .5)^2 sees area 0.3 * 0.5 out of 0.25
    assert s[0, 0] == pytest.approx(2.0 * 0.15 / 0.25)
    assert s[1, 0] == 0 and s[0, 1] == 0


def test_local_averages_rect_match_quadrature(rng):
    for _ in range(5):
        f = random_rects(rng)
        J = int(rng.integers(1, 5))
        n = 2**J
        quad = bv.cell_integrals_quadrature(f, J, q=2) * n * n
        assert np.allclose(bv.local_average_samples(f, J), quad, atol=1e-13)


def test_local_averages_bump_against_scipy():
    f = bv.SeparableBump(1.0)
    s = bv.local_average_samples(f, 2)
    val, _ = integrate.dblquad(lambda y, x: f(x, y), 0.25, 0.5, 0.5, 0.75, epsabs=1e-13)
    assert s[1, 2] == pytest.approx(16 * val, abs=1e-10)


def test_spline_constant_and_nodes(rng):
    J = 3
    s = bv.SplineSurface(np.full((8, 8), 0.4), J)
    x, y = rng.random(100), rng.random(100)
    assert np.allclose(s(x, y), 0.4)
    c = rng.random((8, 8))
    s = bv.SplineSurface(c, J)
    k1, k2 = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
    assert np.allclose(s(k1 / 8, k2 / 8), c)
    vals = s(rng.random(10_000), rng.random(10_000))
    assert vals.min() >= c.min() - 1e-15 and vals.max() <= c.max() + 1e-15


def test_spline_periodic(rng):
    c = rng.random((4, 4))
    s = bv.SplineSurface(c, 2)
    x, y = rng.random(50), rng.random(50)
    assert np.allclose(s(x, y), s(x + 1, y - 1))
    # between the last knot and the wrapped first one
    assert s(7 / 8, 0.0) == pytest.approx((c[3, 0] + c[0, 0]) / 2)


def test_partition_of_unity(rng):
    x, y = rng.random(10_000), rng.random(10_000)
    assert np.max(np.abs(bv.partition_of_unity(3, x, y) - 1)) <= 1e-12


def test_l2_error_zero_for_constant():
    f = bv.RectangleSum([(0, 1, 0, 1, 0.5)])
    s = bv.SplineSurface(bv.local_average_samples(f, 2), 2)
    assert bv.l2_error(s, f) == pytest.approx(0, abs=1e-15)


def test_l2_error_half_plane_closed_form():
    # the error does not depend on x2, so one 1-D line integral gives the area integral
    J = 2
    f = bv.half_plane()
    s = bv.SplineSurface(bv.local_average_samples(f, J), J)
    err1d, _ = integrate.quad(lambda x: (s(x, 0.3) - f(x, 0.3)) ** 2, 0, 1,
                              points=[k / 8 for k in range(9)], epsabs=1e-13)
    assert bv.l2_error(s, f) == pytest.approx(err1d, rel=1e-10)


@pytest.mark.parametrize("name", ["half-plane", "two-rectangles", "bump"])
def test_thm5_bound_and_decay(name):
    f = bv.function_from_spec(bv.DEFAULT_CATALOG[name])
    errs = []
    for J in range(1, 7):
        e = bv.l2_error(bv.SplineSurface(bv.local_average_samples(f, J), J), f)
        assert e <= bv.thm5_bound(f, J)
        errs.append(e)
    drops = sum(b > a for a, b in zip(errs, errs[1:]))
    assert drops <= 1


def test_bessel_constant_function():
    for J in (1, 3):
        lhs, rhs = bv.bessel_check(bv.RectangleSum([(0, 1, 0, 1, 1.0)]), J)
        assert lhs == pytest.approx(2.0 ** (-2 * J), rel=1e-12)
        assert rhs == pytest.approx(4 * 2.0 ** (-2 * J))
    assert bv.bessel_check(bv.RectangleSum([]), 2) == (0.0, 0.0)


def test_bessel_exact_matches_quadrature(rng):
    for _ in range(5):
        f = random_rects(rng)
        ip = f.hat_inner_products(3)
        assert np.allclose(ip, bv.hat_inner_products_quadrature(f, 3, q=2), atol=1e-14)


def test_adjoint_bessel_examples(rng):
    c = np.zeros((8, 8))
    c[2, 5] = 1
    lhs, rhs = bv.adjoint_bessel_check(c, 3)
    assert lhs == pytest.approx(4 / 9 * 2.0**-6, rel=1e-14)
    assert bv.adjoint_bessel_check(np.zeros((4, 4)), 2) == (0.0, 0.0)
    c = rng.standard_normal((8, 8))
    assert bv.spline_gram_norm_sq(c, 3) == pytest.approx(bv.spline_norm_sq_quadrature(c, 3), abs=1e-8)


def test_discrete_tv_vs_continuum(rng):
    assert bv.discrete_tv_vs_continuum(bv.half_plane(), 3) == (8.0, 16.0)
    d, b = bv.discrete_tv_vs_continuum(bv.RectangleSum([(0, 1, 0, 1, 0.7)]), 3)
    assert d == pytest.approx(0, abs=1e-12) and b == pytest.approx(0, abs=1e-12)
    for _ in range(10):
        f = random_rects(rng)
        for J in range(1, 6):
            d, b = bv.discrete_tv_vs_continuum(f, J)
            assert d <= b + 1e-12


def test_interior_sets_constant():
    I, S = bv.interior_cell_sets(bv.RectangleSum([(0, 1, 0, 1, 0.5)]), 3)
    assert S == {(k1, k2) for k1 in range(8) for k2 in range(8) if k1 == 7 or k2 == 7}


def test_interior_sets_half_plane():
    I, S = bv.interior_cell_sets(bv.half_plane(), 3)
    frame = {(k1, k2) for k1 in range(8) for k2 in range(8) if k1 == 7 or k2 == 7}
    touching = {(k1, k2) for k1 in (2, 3, 4) for k2 in range(8)}
    assert S == frame | touching
    _, S2 = bv.interior_cell_sets(bv.half_plane(), 2)
    assert len(S2) == 16


def test_interior_sets_grow_linearly():
    f = bv.RectangleSum([(0.3, 0.6, 0.2, 0.7, 1.0)])
    sizes = [len(bv.interior_cell_sets(f, J)[1]) for J in range(3, 7)]
    ratios = [b / a for a, b in zip(sizes, sizes[1:])]
    assert all(1.8 < r < 2.3 for r in ratios)
    for J in range(2, 6):
        assert grad_support(bv.local_average_samples(f, J)) <= len(bv.interior_cell_sets(f, J)[1])


def test_tabulated_matches_rectangles():
    vals = np.zeros((4, 4))
    vals[1:3, 0:2] = 1.0
    t = bv.Tabulated(vals)
    r = bv.RectangleSum([(0.25, 0.75, 0.0, 0.5, 1.0)])
    assert t.total_variation() == pytest.approx(r.total_variation())
    assert np.allclose(bv.local_average_samples(t, 3), bv.local_average_samples(r, 3))


def test_quadrature_failure_reported():
    class Rough(bv.AnalyticFunction2D):
        def __call__(self, x, y):
            return np.sin(1e4 * x * y)

    with pytest.raises(bv.QuadratureError):
        bv.local_average_samples(Rough(), 1, tol=1e-14)
