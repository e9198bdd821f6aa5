"""Shared test utilities: finite-difference oracles for NLP derivatives."""

import numpy as np
import scipy.sparse as sp


def fd_constraint_jacobian(problem, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    J = np.zeros((problem.n_c, problem.n_x))
    for k in range(problem.n_x):
        e = np.zeros_like(x)
        e[k] = h
        J[:, k] = (problem.eval_constraints(x + e) - problem.eval_constraints(x - e)) / (2 * h)
    return J


def fd_gradient(problem, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(problem.n_x):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (problem.eval_objective(x + e) - problem.eval_objective(x - e)) / (2 * h)
    return g


def dense_jacobian(problem, x):
    _, (r, c, v) = problem.eval_derivatives(x)
    return sp.coo_matrix((v, (r, c)), shape=(problem.n_c, problem.n_x)).toarray()


def assert_derivatives_match(problem, x, rtol=1e-6, atol=1e-7, h=1e-6):
    """Check AD gradient and Jacobian against central differences."""
    grad, _ = problem.eval_derivatives(x)
    np.testing.assert_allclose(grad, fd_gradient(problem, x, h), rtol=rtol, atol=atol)
    np.testing.assert_allclose(
        dense_jacobian(problem, x), fd_constraint_jacobian(problem, x, h), rtol=rtol, atol=atol)
