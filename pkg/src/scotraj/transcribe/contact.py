"""Terrain-frame contact expressions and complementarity constraint groups.

Reaction forces are decision variables in a surface-aligned frame: a normal
component and two one-sided tangential components, all nonnegative.  The
world force is lam_N*n_hat + (lam_T+ - lam_T-)*t_hat where n_hat/t_hat come
from the local surface slope.  Sliding speed is bounded by a slack gamma,
and products force*gap and tangential*gamma are relaxed to <= eps.
"""

from __future__ import annotations

import numpy as np

from .. import ad, terrain
from .layout import mesh


def surface_frame(tmap, ax):
    """Unit normal and tangent of the terrain below x-position `ax`."""
    ang = terrain.slope_angle(tmap, ax)
    ca, sa = ad.cos(ang), ad.sin(ang)
    return (-sa, ca), (ca, sa)


def rotated_gap(tmap, ax, az):
    """Surface-normal distance of a point above the terrain."""
    ang = terrain.slope_angle(tmap, ax)
    return ad.cos(ang) * (az - terrain.height(tmap, ax))


def world_force(tmap, ax, lam_n, lam_tp, lam_tm):
    """World (x, z) force from surface-frame components at x-position `ax`."""
    (nx, nz), (tx, tz) = surface_frame(tmap, ax)
    ft = lam_tp - lam_tm
    return lam_n * nx + ft * tx, lam_n * nz + ft * tz


def tangential_velocity(tmap, ax, adx, adz):
    (_, _), (tx, tz) = surface_frame(tmap, ax)
    return adx * tx + adz * tz


def add_complementarity(b, *, a, ad_grid, lam, gam, tmap, mu, eps, n_fe,
                        scheme, prefix=""):
    """Contact feasibility and relaxed complementarity for one stage.

    a/ad_grid: (n_fe, P, c, 2) position and velocity grids; lam: (n_fe, P,
    c, 3) surface-frame forces; gam: (n_fe, P, c) sliding-speed slacks.
    Adds gap, friction-cone, slack-link, and product groups; products are
    per finite element (summed over collocation points at third order) and
    only their upper bound depends on eps.
    """
    P = scheme.n_points
    c = a.shape[2]
    n_idx, p_idx, k_idx = mesh(n_fe, P, c)

    def col(grid, last):
        return grid.idx(n_idx, p_idx, k_idx, last)

    # gap >= 0 at every collocation point
    gap_idx = np.column_stack([col(a, 0), col(a, 1)])
    b.add_group(prefix + "gap",
                lambda v: [rotated_gap(tmap, v[0], v[1])],
                gap_idx, lb=0.0, ub=np.inf)

    # friction cone mu*lam_N - lam_T+ - lam_T- >= 0
    cone_idx = np.column_stack([col(lam, 0), col(lam, 1), col(lam, 2)])
    b.add_group(prefix + "cone",
                lambda v: [mu * v[0] - v[1] - v[2]],
                cone_idx, lb=0.0, ub=np.inf)

    # gamma bounds the sliding speed from both sides
    slip_idx = np.column_stack([gam.idx(n_idx, p_idx, k_idx),
                                col(a, 0), col(ad_grid, 0), col(ad_grid, 1)])

    def slip(sign):
        def fn(v):
            return [v[0] + sign * tangential_velocity(tmap, v[1], v[2], v[3])]
        return fn

    b.add_group(prefix + "slip_lo", slip(-1.0), slip_idx, lb=0.0, ub=np.inf)
    b.add_group(prefix + "slip_hi", slip(+1.0), slip_idx, lb=0.0, ub=np.inf)

    # per-element products, pushed to zero by the eps ladder
    ne_idx, ke_idx = mesh(n_fe, c)
    pts = range(P)

    def ecol(grid, p, last):
        return grid.idx(ne_idx, np.full_like(ne_idx, p), ke_idx, last)

    normal_idx = np.column_stack(
        [ecol(lam, p, 0) for p in pts]
        + [ecol(a, p, 0) for p in pts] + [ecol(a, p, 1) for p in pts])

    def normal_product(v):
        force = sum(v[p] for p in pts)
        dist = sum(rotated_gap(tmap, v[P + p], v[2 * P + p]) for p in pts)
        return [force * dist]

    b.add_group(prefix + "compl_n", normal_product, normal_idx,
                lb=-np.inf, ub=eps, meta={"eps": True})

    for comp, tag in ((1, "tp"), (2, "tm")):
        t_idx = np.column_stack(
            [ecol(lam, p, comp) for p in pts]
            + [gam.idx(ne_idx, np.full_like(ne_idx, p), ke_idx) for p in pts])

        def t_product(v):
            return [sum(v[p] for p in pts) * sum(v[P + p] for p in pts)]

        b.add_group(prefix + "compl_" + tag, t_product, t_idx,
                    lb=-np.inf, ub=eps, meta={"eps": True})
