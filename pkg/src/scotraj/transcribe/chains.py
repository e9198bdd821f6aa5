"""Wiring of integration chains (z, z_dot) into collocation groups."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layout import VarGrid, mesh


@dataclass
class Chain:
    """One integrated state: grid of values, derivatives, element-0 start."""

    name: str
    z: VarGrid           # (n_fe, P, *coord)
    zd: VarGrid          # (n_fe, P, *coord)
    z0: VarGrid          # (*coord,)
    eta: VarGrid = None  # (n_fe, P, *coord), third order only

    def __post_init__(self):
        if self.z.shape != self.zd.shape:
            raise ValueError(f"chain {self.name}: z and zd shapes differ")
        if self.z.shape[2:] != self.z0.shape:
            raise ValueError(f"chain {self.name}: start shape mismatch")
        if self.eta is not None and self.eta.shape != self.z.shape:
            raise ValueError(f"chain {self.name}: eta shape mismatch")


def _enumerate(chain, n_fe):
    coord = chain.z.shape[2:]
    arrs = mesh(n_fe, *coord)
    return arrs[0], arrs[1:]


def _prev_idx(chain, n_arr, co_arrs, P):
    """Element-start value: previous element's last point, or the z0 block."""
    inner = chain.z.idx(np.maximum(n_arr - 1, 0), np.full_like(n_arr, P - 1),
                        *co_arrs)
    start = chain.z0.idx(*co_arrs)
    return np.where(n_arr == 0, start, inner)


def add_collocation(b, chains, scheme, n_fe, h=None, t_idx=None, fe_div=None,
                    prefix=""):
    """Add the defect groups tying every chain together.

    Either `h` (fixed element length) or `t_idx`/`fe_div` (flat index of a
    duration variable divided by the element count) must be given.
    """
    if (h is None) == (t_idx is None):
        raise ValueError("give exactly one of h or t_idx")
    P = scheme.n_points

    def with_time(cols, n_inst):
        if t_idx is None:
            return cols
        return cols + [np.full(n_inst, t_idx, dtype=np.int64)]

    if scheme.order == "first":
        rows = []
        for ch in chains:
            n_arr, co = _enumerate(ch, n_fe)
            p0 = np.zeros_like(n_arr)
            cols = [ch.z.idx(n_arr, p0, *co), _prev_idx(ch, n_arr, co, P),
                    ch.zd.idx(n_arr, p0, *co)]
            rows.append(np.column_stack(with_time(cols, len(n_arr))))
        idx = np.vstack(rows)

        if h is not None:
            def fn(v):
                return [v[0] - v[1] - h * v[2]]
        else:
            def fn(v):
                return [v[0] - v[1] - (v[3] / fe_div) * v[2]]
        b.add_group(prefix + "colloc", fn, idx, lb=0.0, ub=0.0)
        return

    G = scheme.gamma
    for p in range(P):
        eta_rows, link_rows = [], []
        for ch in chains:
            if ch.eta is None:
                raise ValueError(f"chain {ch.name}: third order needs eta")
            n_arr, co = _enumerate(ch, n_fe)
            pf = np.full_like(n_arr, p)
            eta_cols = [ch.eta.idx(n_arr, pf, *co)] + [
                ch.zd.idx(n_arr, np.full_like(n_arr, i), *co) for i in range(P)]
            eta_rows.append(np.column_stack(with_time(eta_cols, len(n_arr))))
            link_cols = [ch.z.idx(n_arr, pf, *co), _prev_idx(ch, n_arr, co, P),
                         ch.eta.idx(n_arr, pf, *co)]
            link_rows.append(np.column_stack(link_cols))

        g0, g1, g2 = G[p, 0], G[p, 1], G[p, 2]
        if h is not None:
            def eta_fn(v, a=g0, bb=g1, cc=g2):
                return [v[0] - h * (a * v[1] + bb * v[2] + cc * v[3])]
        else:
            def eta_fn(v, a=g0, bb=g1, cc=g2):
                return [v[0] - (v[4] / fe_div) * (a * v[1] + bb * v[2] + cc * v[3])]
        b.add_group(prefix + f"eta_{p}", eta_fn, np.vstack(eta_rows),
                    lb=0.0, ub=0.0)
        b.add_group(prefix + f"link_{p}",
                    lambda v: [v[0] - v[1] - v[2]],
                    np.vstack(link_rows), lb=0.0, ub=0.0)


def interior_times(scheme, n_fe, h) -> np.ndarray:
    """Global times of all collocation points, shape (n_fe, P)."""
    n = np.arange(n_fe)[:, None]
    return (n + scheme.tau[None, :]) * h
