"""Full-order contact-implicit transcription.

Same contact model as the centroidal stage, but the dynamics are the
complete rigid-body equations in generalized coordinates, so reaction
forces, joint torques, and whole-body motion are resolved together in one
(larger) program over a fixed horizon.
"""

from __future__ import annotations

import numpy as np

from ..nlp import NlpBuilder
from .chains import Chain, add_collocation, interior_times
from .collocation import scheme_for
from .common import Transcription
from .contact import add_complementarity, world_force
from .layout import add_grid, mesh, pin
from .task import TaskSpec


def build_full_cio(model, task: TaskSpec, tmap, n_fe: int, eps: float,
                   order: str) -> Transcription:
    scheme = scheme_for(order)
    P = scheme.n_points
    par = model.params()
    c, nj, nq = model.n_contacts, model.n_j, model.n_q
    m, gmag, mu = par.m, par.g_mag, par.mu
    f_scale = m * gmag

    t_f = task.t_nominal()
    h = t_f / n_fe
    q_start = task.start_pose(model)
    q_end = task.end_pose(model)
    feet_s = np.array(model.fk_contacts(list(q_start)), dtype=float)
    feet_e = np.array(model.fk_contacts(list(q_end)), dtype=float)

    frac = (interior_times(scheme, n_fe, h) / t_f)[..., None]

    q_lb = np.concatenate([model.theta_lower, [-np.inf, -np.inf, -np.inf]])
    q_ub = np.concatenate([model.theta_upper, [np.inf, np.inf, np.inf]])

    b = NlpBuilder()
    g = {}
    g["q"] = add_grid(b, "q", (n_fe, P, nq),
                      lb=np.tile(q_lb, n_fe * P), ub=np.tile(q_ub, n_fe * P),
                      x0=(q_start + (q_end - q_start) * frac).ravel())
    g["qd"] = add_grid(b, "qd", (n_fe, P, nq),
                       x0=np.tile((q_end - q_start) / t_f, n_fe * P))
    g["qdd"] = add_grid(b, "qdd", (n_fe, P, nq), scale=gmag)

    a0_ = np.empty((n_fe, P, c, 2))
    for k in range(c):
        a0_[:, :, k, :] = feet_s[k] + (feet_e[k] - feet_s[k]) * frac
    g["a"] = add_grid(b, "a", (n_fe, P, c, 2), x0=a0_.ravel())
    g["ad"] = add_grid(b, "ad", (n_fe, P, c, 2),
                       x0=np.tile(((feet_e - feet_s) / t_f).ravel(), n_fe * P))

    g["tau"] = add_grid(b, "tau", (n_fe, nj),
                        lb=-np.tile(par.torque_limits, n_fe),
                        ub=np.tile(par.torque_limits, n_fe),
                        scale=np.tile(par.torque_limits, n_fe))
    lam0 = np.zeros((n_fe, P, c, 3))
    lam0[:, :, :, 0] = f_scale / c
    g["lam"] = add_grid(b, "lam", (n_fe, P, c, 3), lb=0.0, x0=lam0.ravel(),
                        scale=f_scale)
    g["gam"] = add_grid(b, "gam", (n_fe, P, c), lb=0.0,
                        x0=abs(task.displacement) / t_f + 0.1)

    g["q0"] = add_grid(b, "q0", (nq,), x0=q_start)
    g["qd0"] = add_grid(b, "qd0", (nq,))
    g["a0"] = add_grid(b, "a0", (c, 2), x0=feet_s.ravel())

    chains = [Chain("q", g["q"], g["qd"], g["q0"]),
              Chain("qd", g["qd"], g["qdd"], g["qd0"]),
              Chain("a", g["a"], g["ad"], g["a0"])]
    if order == "third":
        for ch in chains:
            ch.eta = add_grid(b, "eta_" + ch.name, ch.z.shape, scale=h)
            g["eta_" + ch.name] = ch.eta

    pin(g["q0"], (np.arange(nq),), q_start)
    pin(g["a0"], mesh(c, 2), feet_s.ravel())
    if task.start_at_rest:
        pin(g["qd0"], (np.arange(nq),), 0.0)
    lastq = (np.full(nq, n_fe - 1), np.full(nq, P - 1), np.arange(nq))
    pin(g["q"], lastq, q_end)
    if task.end_at_rest:
        pin(g["qd"], lastq, 0.0)

    add_collocation(b, chains, scheme, n_fe, h=h)

    na, pa = mesh(n_fe, P)

    # foot positions follow the joint state at every collocation point
    fk_cols = [g["q"].idx(na, pa, i) for i in range(nq)]
    for k in range(c):
        fk_cols += [g["a"].idx(na, pa, k, 0), g["a"].idx(na, pa, k, 1)]

    def fk_tie(v):
        feet = model.fk_contacts_flat(list(v[:nq]))
        return [v[nq + i] - feet[i] for i in range(2 * c)]

    b.add_group("fk_tie", fk_tie, np.column_stack(fk_cols),
                lb=0.0, ub=0.0, n_out=2 * c)

    # rigid-body dynamics at every collocation point (element-wise torques)
    dyn_cols = ([g["q"].idx(na, pa, i) for i in range(nq)]
                + [g["qd"].idx(na, pa, i) for i in range(nq)]
                + [g["qdd"].idx(na, pa, i) for i in range(nq)]
                + [g["tau"].idx(na, j) for j in range(nj)])
    for k in range(c):
        dyn_cols += [g["a"].idx(na, pa, k, 0), g["lam"].idx(na, pa, k, 0),
                     g["lam"].idx(na, pa, k, 1), g["lam"].idx(na, pa, k, 2)]

    def dynamics(v):
        q = list(v[:nq])
        qd = list(v[nq:2 * nq])
        qdd = list(v[2 * nq:3 * nq])
        tau = list(v[3 * nq:3 * nq + nj])
        base = 3 * nq + nj
        lam_flat = []
        for k in range(c):
            wx, wz = world_force(tmap, v[base + 4 * k], v[base + 4 * k + 1],
                                 v[base + 4 * k + 2], v[base + 4 * k + 3])
            lam_flat += [wx, wz]
        res = model.dynamics_residual(q, qd, qdd, tau, lam_flat)
        return [r / f_scale for r in res]

    b.add_group("dynamics", dynamics, np.column_stack(dyn_cols),
                lb=0.0, ub=0.0, n_out=nq)

    add_complementarity(b, a=g["a"], ad_grid=g["ad"], lam=g["lam"],
                        gam=g["gam"], tmap=tmap, mu=mu, eps=eps,
                        n_fe=n_fe, scheme=scheme)

    ntj = mesh(n_fe, nj)
    b.add_objective("cost_tau", lambda v: v[0] * v[0],
                    g["tau"].idx(*ntj)[:, None],
                    weight=h * task.weights.torque)

    return Transcription(problem=b.build(), grids=g, scheme=scheme,
                         model=model, terrain=tmap, task=task,
                         kind="full_cio", eps=eps, n_fe=n_fe, h=h, t_f=t_f)
