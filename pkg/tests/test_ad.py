import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scotraj import ad
from scotraj.ad import Dual


def fd(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


safe_floats = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


class TestScalarArithmetic:
    def test_add_sub(self):
        x = Dual(3.0, 1.0)
        y = x + 2.0
        assert y.val == 5.0 and y.dot == 1.0
        y = 2.0 - x
        assert y.val == -1.0 and y.dot == -1.0

    def test_mul_chain(self):
        x = Dual(2.0, 1.0)
        y = (x * x + 3.0 * x) * x  # x^3 + 3x^2, d/dx = 3x^2 + 6x = 24
        assert y.val == pytest.approx(8.0 + 12.0)
        assert y.dot == pytest.approx(24.0)

    def test_div(self):
        x = Dual(4.0, 1.0)
        y = 1.0 / x
        assert y.val == pytest.approx(0.25)
        assert y.dot == pytest.approx(-1.0 / 16.0)
        z = x / (x + 1.0)  # d/dx = 1/(x+1)^2 = 1/25
        assert z.dot == pytest.approx(1.0 / 25.0)

    def test_pow(self):
        x = Dual(3.0, 1.0)
        assert (x ** 2).dot == pytest.approx(6.0)
        assert (x ** 3).dot == pytest.approx(27.0)
        assert (x ** 0.5).dot == pytest.approx(0.5 / math.sqrt(3.0))

    def test_neg_abs(self):
        x = Dual(-2.0, 1.0)
        assert abs(x).val == 2.0
        assert abs(x).dot == -1.0

    @given(safe_floats, safe_floats)
    def test_product_rule(self, a, b):
        x = Dual(a, 1.0)
        y = (x + b) * (x - b)  # x^2 - b^2, d/dx = 2a
        assert y.dot == pytest.approx(2 * a, abs=1e-9)

    @given(st.floats(min_value=0.5, max_value=8.0))
    def test_transcendental_vs_fd(self, a):
        for f, fp in [
            (ad.sin, math.cos(a)),
            (ad.cos, -math.sin(a)),
            (ad.exp, math.exp(a)),
            (ad.log, 1.0 / a),
            (ad.sqrt, 0.5 / math.sqrt(a)),
            (ad.atan, 1.0 / (1.0 + a * a)),
        ]:
            y = f(Dual(a, 1.0))
            assert y.dot == pytest.approx(fp, rel=1e-12)

    def test_tan(self):
        x = Dual(0.7, 1.0)
        y = ad.tan(x)
        assert y.val == pytest.approx(math.tan(0.7))
        assert y.dot == pytest.approx(1.0 / math.cos(0.7) ** 2)

    def test_atan2(self):
        for yv, xv in [(1.0, 2.0), (-0.5, 0.3), (2.0, -1.0)]:
            g = ad.atan2(Dual(yv, 1.0), xv)
            assert g.val == pytest.approx(math.atan2(yv, xv))
            assert g.dot == pytest.approx(fd(lambda t: math.atan2(t, xv), yv), rel=1e-5)
            g = ad.atan2(yv, Dual(xv, 1.0))
            assert g.dot == pytest.approx(fd(lambda t: math.atan2(yv, t), xv), rel=1e-5)

    def test_composite_vs_fd(self):
        def f(x):
            return ad.exp(ad.sin(x) * x) / (1.0 + x * x)

        a = 0.9
        y = f(Dual(a, 1.0))
        assert y.dot == pytest.approx(fd(lambda t: ad.exp(math.sin(t) * t) / (1 + t * t), a), rel=1e-6)


class TestVectorized:
    def test_array_values_broadcast(self):
        v = np.array([0.1, 0.5, 2.0])
        x = Dual(v, 1.0)
        y = ad.sin(x) * x
        np.testing.assert_allclose(ad.value(y), np.sin(v) * v)
        np.testing.assert_allclose(y.dot, np.cos(v) * v + np.sin(v))

    def test_seed_columns_shapes(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        b = np.array([0.5, 0.5, 0.5, 0.5])
        xa, xb = ad.seed_columns([a, b])
        y = xa * xb + ad.sin(xa)
        J = ad.dot_rows(y, 2, 4)
        assert J.shape == (2, 4)
        np.testing.assert_allclose(J[0], b + np.cos(a))
        np.testing.assert_allclose(J[1], a)

    def test_dot_rows_on_constant(self):
        a = np.array([1.0, 2.0])
        (xa,) = ad.seed_columns([a])
        y = xa * 0.0 + 3.0
        J = ad.dot_rows(y, 1, 2)
        np.testing.assert_allclose(J, np.zeros((1, 2)))

    def test_where_selects_value_and_dot(self):
        a = np.array([-1.0, 2.0])
        (x,) = ad.seed_columns([a])
        y = ad.where(a < 0.0, x * x, x * 3.0)
        np.testing.assert_allclose(ad.value(y), [1.0, 6.0])
        J = ad.dot_rows(y, 1, 2)
        np.testing.assert_allclose(J[0], [-2.0, 3.0])

    def test_clip_zero_slope_outside(self):
        a = np.array([-2.0, 0.3, 5.0])
        (x,) = ad.seed_columns([a])
        y = ad.clip(x, -1.0, 1.0)
        np.testing.assert_allclose(ad.value(y), [-1.0, 0.3, 1.0])
        J = ad.dot_rows(y, 1, 3)
        np.testing.assert_allclose(J[0], [0.0, 1.0, 0.0])

    def test_ndarray_left_operand(self):
        # plain ndarray on the left must defer to the dual's reflected op
        a = np.array([1.0, 2.0])
        x = Dual(a, 1.0)
        y = np.array([10.0, 20.0]) - x
        assert isinstance(y, Dual)
        np.testing.assert_allclose(y.val, [9.0, 18.0])
        np.testing.assert_allclose(ad.value(y.dot * np.ones(2)), [-1.0, -1.0])


class TestNested:
    def test_second_derivative_sin_of_square(self):
        # f = sin(x^2); f'' = 2 cos(x^2) - 4 x^2 sin(x^2)
        a = 0.8

        def fprime(x):
            inner = Dual(x, 1.0, level=ad._next_level([x]))
            return ad.sin(inner * inner).dot

        outer = Dual(a, 1.0, level=1)
        inner = Dual(outer, 1.0, level=2)
        y = ad.sin(inner * inner)
        f2 = y.dot  # df/dx as a level-1 dual
        expect = 2 * math.cos(a * a) - 4 * a * a * math.sin(a * a)
        assert ad.value(f2) == pytest.approx(2 * a * math.cos(a * a))
        assert f2.dot == pytest.approx(expect, rel=1e-12)

    def test_outer_dual_passive_in_inner_pass(self):
        # c is an outer dual used as a constant inside an inner pass; the
        # inner derivative must not pick up c's dot.
        c = Dual(3.0, 1.0, level=1)
        x = Dual(2.0, 1.0, level=2)
        y = c * x  # d/dx = c
        assert ad.value(y) == 6.0
        assert ad.value(y.dot) == 3.0
        assert y.dot.dot == 1.0  # and d/dc of that inner derivative is 1

    def test_jvp_plain(self):
        vals, dots = ad.jvp(lambda a: [a[0] * a[1], ad.sin(a[0])], [2.0, 5.0], [1.0, 0.5])
        assert vals[0] == pytest.approx(10.0)
        assert dots[0] == pytest.approx(5.0 * 1.0 + 2.0 * 0.5)
        assert dots[1] == pytest.approx(math.cos(2.0))

    def test_jvp_at_dual_point(self):
        # directional derivative of x*y along (4, 0), evaluated at dual x:
        # the value stays dual, the dot (= 4y) is constant in x
        x = Dual(2.0, 1.0)
        vals, dots = ad.jvp(lambda a: [a[0] * a[1]], [x, 4.0], [4.0, 0.0])
        assert ad.value(vals[0]) == 8.0
        assert isinstance(vals[0], Dual) and vals[0].level == 1
        assert ad.value(dots[0]) == 16.0

    def test_jvp_at_dual_point_dual_direction(self):
        # d/dq (q^2) along direction qdot, with qdot itself an outer dual:
        # dot = 2 q qdot, whose derivative w.r.t. qdot is 2q
        qd = Dual(5.0, 1.0)
        vals, dots = ad.jvp(lambda a: [a[0] * a[0]], [3.0], [qd])
        assert ad.value(dots[0]) == 30.0
        assert dots[0].dot == pytest.approx(6.0)

    def test_jacobian_helper(self):
        vals, cols = ad.jacobian(lambda a: [a[0] * a[1] + ad.sin(a[2]), a[2] * a[2]], [1.0, 2.0, 0.5])
        assert vals[0] == pytest.approx(2.0 + math.sin(0.5))
        assert cols[0][0] == pytest.approx(2.0)
        assert cols[1][0] == pytest.approx(1.0)
        assert cols[2][0] == pytest.approx(math.cos(0.5))
        assert cols[2][1] == pytest.approx(1.0)
        assert cols[0][1] == 0.0

    def test_grad_helper(self):
        val, g = ad.grad(lambda a: a[0] * a[0] * a[1], [3.0, 2.0])
        assert val == pytest.approx(18.0)
        assert g[0] == pytest.approx(12.0)
        assert g[1] == pytest.approx(9.0)

    @given(st.floats(min_value=-2.0, max_value=2.0))
    def test_nested_vs_fd_second_derivative(self, a):
        def f(x):
            return ad.exp(ad.cos(x)) + x * x * x

        outer = Dual(a, 1.0, level=1)
        inner = Dual(outer, 1.0, level=2)
        d2 = f(inner).dot.dot
        h = 1e-4
        fd2 = (ad.value(f(a + h)) - 2 * ad.value(f(a)) + ad.value(f(a - h))) / h ** 2
        assert d2 == pytest.approx(fd2, rel=1e-4, abs=1e-4)


class TestGuards:
    def test_dual_exponent_rejected(self):
        with pytest.raises(TypeError):
            Dual(2.0, 1.0) ** Dual(3.0, 1.0)

    def test_comparisons_use_values(self):
        assert Dual(1.0, 99.0) < Dual(2.0, -99.0)
        assert Dual(2.0, 0.0) >= 2.0

    def test_value_strips_all_layers(self):
        x = Dual(Dual(5.0, 1.0, 1), 0.0, 2)
        assert ad.value(x) == 5.0
