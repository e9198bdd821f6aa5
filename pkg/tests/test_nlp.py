import numpy as np
import pytest

from helpers import assert_derivatives_match, dense_jacobian
from scotraj import ad
from scotraj.nlp import EvalError, NlpBuilder


def one_var_problem():
    b = NlpBuilder()
    b.add_block("x", 1, lb=-10.0, ub=10.0, x0=2.0)
    b.add_objective("sq", lambda a: a[0] * a[0], idx=[[0]])
    b.add_group("lower", lambda a: [a[0]], idx=[[0]], lb=1.0, ub=np.inf)
    return b.build()


class TestEval:
    def test_min_x_squared_with_bound(self):
        p = one_var_problem()
        f, c = p.eval(np.array([2.0]))
        assert f == pytest.approx(4.0)
        np.testing.assert_allclose(c, [2.0])

    def test_empty_constraints(self):
        b = NlpBuilder()
        b.add_block("x", 2, x0=[1.0, 2.0])
        b.add_objective("sum", lambda a: a[0] + a[1], idx=[[0, 1]])
        p = b.build()
        f, c = p.eval(np.array([1.0, 3.0]))
        assert f == pytest.approx(4.0)
        assert c.shape == (0,)

    def test_deterministic_bit_identical(self):
        p = one_var_problem()
        x = np.array([1.7])
        c1 = p.eval_constraints(x)
        c2 = p.eval_constraints(x)
        assert c1.tobytes() == c2.tobytes()
        assert p.eval_objective(x) == p.eval_objective(x)

    def test_nan_reported_with_group_name(self):
        b = NlpBuilder()
        b.add_block("x", 1)
        b.add_group("badlog", lambda a: [ad.log(a[0])], idx=[[0]], lb=0.0, ub=0.0)
        p = b.build()
        with np.errstate(invalid="ignore"), pytest.raises(EvalError, match="badlog"):
            p.eval_constraints(np.array([-1.0]))

    def test_x0_projected_into_bounds(self):
        b = NlpBuilder()
        b.add_block("x", 2, lb=0.0, ub=1.0, x0=[-5.0, 0.5])
        p = b.build()
        np.testing.assert_allclose(p.x0, [0.0, 0.5])

    def test_bound_order_enforced(self):
        b = NlpBuilder()
        with pytest.raises(ValueError):
            b.add_block("x", 1, lb=2.0, ub=1.0)

    def test_index_out_of_range_rejected(self):
        b = NlpBuilder()
        b.add_block("x", 2)
        with pytest.raises(ValueError):
            b.add_group("g", lambda a: [a[0]], idx=[[5]], lb=0.0, ub=0.0)

    def test_row_source_mapping(self):
        b = NlpBuilder()
        b.add_block("x", 3)
        b.add_group("a", lambda a: [a[0], a[0] * 2.0], idx=[[0], [1]], lb=0.0, ub=0.0, n_out=2)
        b.add_group("b", lambda a: [a[0]], idx=[[2]], lb=0.0, ub=0.0)
        p = b.build()
        assert p.row_source(0) == ("a", 0, 0)
        assert p.row_source(3) == ("a", 1, 1)
        assert p.row_source(4) == ("b", 0, 0)


class TestDerivatives:
    def test_gradient_of_square(self):
        p = one_var_problem()
        grad, _ = p.eval_derivatives(np.array([3.0]))
        np.testing.assert_allclose(grad, [6.0])

    def test_matches_finite_difference_multigroup(self):
        rng = np.random.default_rng(42)
        b = NlpBuilder()
        b.add_block("q", 4)
        b.add_block("v", 3)

        def dyn(a):
            return [ad.sin(a[0]) * a[1] + a[2], a[0] * a[2] - 1.0]

        idx = np.array([[0, 4, 5], [1, 5, 6], [2, 4, 6]])
        b.add_group("dyn", dyn, idx=idx, lb=0.0, ub=0.0, n_out=2)
        b.add_group("gap", lambda a: [ad.exp(a[0]) - a[1] * a[1]],
                    idx=[[3, 0], [2, 1]], lb=0.0, ub=np.inf)
        b.add_objective("effort", lambda a: a[0] * a[0] + ad.cos(a[1]), idx=[[4, 0], [5, 1], [6, 2]])
        p = b.build()
        for _ in range(5):
            assert_derivatives_match(p, rng.uniform(-1, 1, p.n_x))

    def test_repeated_variable_slots_sum(self):
        # same variable in two argument slots: d/dx (x*x) = 2x via summed triplets
        b = NlpBuilder()
        b.add_block("x", 1)
        b.add_group("sq", lambda a: [a[0] * a[1]], idx=[[0, 0]], lb=0.0, ub=0.0)
        p = b.build()
        J = dense_jacobian(p, np.array([3.0]))
        np.testing.assert_allclose(J, [[6.0]])

    def test_sparsity_pattern_fixed(self):
        rng = np.random.default_rng(7)
        b = NlpBuilder()
        b.add_block("x", 6)
        b.add_group("g1", lambda a: [a[0] * a[1]], idx=[[0, 3], [1, 4]], lb=0.0, ub=0.0)
        b.add_group("g2", lambda a: [ad.sin(a[0])], idx=[[5]], lb=0.0, ub=0.0)
        p = b.build()
        allowed = np.zeros((p.n_c, p.n_x), dtype=bool)
        allowed[0, [0, 3]] = True
        allowed[1, [1, 4]] = True
        allowed[2, 5] = True
        for _ in range(100):
            J = dense_jacobian(p, rng.normal(size=6))
            assert np.all(J[~allowed] == 0.0)

    def test_constant_output_zero_jacobian(self):
        b = NlpBuilder()
        b.add_block("x", 1)
        b.add_group("const", lambda a: [a[0] * 0.0 + 5.0], idx=[[0]], lb=5.0, ub=5.0)
        p = b.build()
        np.testing.assert_allclose(dense_jacobian(p, np.array([2.0])), [[0.0]])
        np.testing.assert_allclose(p.eval_constraints(np.array([2.0])), [5.0])


class TestBoundsAndCensus:
    def test_constraint_bounds_layout(self):
        b = NlpBuilder()
        b.add_block("x", 2)
        b.add_group("g", lambda a: [a[0], a[0] + 1.0],
                    idx=[[0], [1]], lb=[0.0, -1.0], ub=[0.0, 2.0], n_out=2)
        p = b.build()
        # output-major: rows 0-1 are output 0 over instances, rows 2-3 output 1
        np.testing.assert_allclose(p.c_lb, [0.0, 0.0, -1.0, -1.0])
        np.testing.assert_allclose(p.c_ub, [0.0, 0.0, 2.0, 2.0])

    def test_violation(self):
        p = one_var_problem()
        v = p.constraint_violation(np.array([0.25]))
        np.testing.assert_allclose(v, [0.75])
        v = p.constraint_violation(np.array([1.5]))
        np.testing.assert_allclose(v, [0.0])

    def test_census_counts(self):
        p = one_var_problem()
        text = p.census()
        assert "variables 1" in text and "constraints 1" in text
        assert "con lower" in text and "obj sq" in text

    def test_scale_vector(self):
        b = NlpBuilder()
        b.add_block("q", 2, scale=2.0)
        b.add_block("f", 1, scale=98.1)
        p = b.build()
        np.testing.assert_allclose(p.x_scale, [2.0, 2.0, 98.1])
