"""Collocation schemes: backward Euler and third-order Radau IIA.

The Radau scheme places points at tau = {(4-sqrt(6))/10, (4+sqrt(6))/10, 1}
on the unit element.  Gamma[p][i] integrates the i-th Lagrange basis from 0
to tau_p, so within an element z(tau_p) = z_start + h * sum_i Gamma[p][i] *
z_dot(tau_i).  The last row doubles as the quadrature weights (integral of
the basis over the whole element).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CollocationScheme:
    order: str                 # "first" or "third"
    tau: np.ndarray            # abscissae on (0, 1]
    gamma: np.ndarray          # integration matrix (third order), else None

    @property
    def n_points(self) -> int:
        return len(self.tau)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for integrals over one element."""
        if self.order == "first":
            return np.array([1.0])
        return self.gamma[-1].copy()


def first_order_scheme() -> CollocationScheme:
    return CollocationScheme(order="first", tau=np.array([1.0]), gamma=None)


def radau_coefficients() -> CollocationScheme:
    """Third-order Radau IIA points and their Lagrange-basis integrals."""
    s6 = np.sqrt(6.0)
    tau = np.array([(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0])
    gamma = np.zeros((3, 3))
    for i in range(3):
        # Lagrange basis l_i through the three points, then its antiderivative
        others = np.delete(tau, i)
        num = np.poly(others)
        li = num / np.prod(tau[i] - others)
        anti = np.polyint(li)
        for p in range(3):
            gamma[p, i] = np.polyval(anti, tau[p]) - np.polyval(anti, 0.0)
    return CollocationScheme(order="third", tau=tau, gamma=gamma)


def scheme_for(order: str) -> CollocationScheme:
    if order == "first":
        return first_order_scheme()
    if order == "third":
        return radau_coefficients()
    raise ValueError(f"unknown collocation order: {order!r}")


def euler_defect(z_prev, z_n, z_dot_n, h):
    """Backward-Euler residual z_n - z_prev - h*z_dot_n."""
    return z_n - z_prev - h * z_dot_n


def radau_defect(z_start, z_pts, z_dot_pts, eta_pts, h, scheme: CollocationScheme):
    """Equality residuals of one Radau element with explicit eta slacks.

    Returns [eta_p - h*sum_i Gamma[p,i]*zdot_i for p] followed by
    [z_p - z_start - eta_p for p].
    """
    G = scheme.gamma
    res = []
    for p in range(3):
        acc = 0.0
        for i in range(3):
            acc = acc + G[p, i] * z_dot_pts[i]
        res.append(eta_pts[p] - h * acc)
    for p in range(3):
        res.append(z_pts[p] - z_start - eta_pts[p])
    return res
