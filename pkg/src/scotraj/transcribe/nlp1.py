"""Centroidal contact-implicit transcription.

Decision variables are the robot's center of mass and pitch (with their
first two derivatives), free contact-point trajectories with accelerations,
surface-frame reaction forces, and a coarse joint-angle path.  Dynamics are
the Newton-Euler equations of the lumped body; joints enter only through a
kinematic tie at each element end and a static torque estimate, keeping the
problem small while ruling out unreachable contact placements.
"""

from __future__ import annotations

import numpy as np

from .. import ad
from ..nlp import NlpBuilder
from .chains import Chain, add_collocation, interior_times
from .collocation import scheme_for
from .common import Transcription
from .contact import add_complementarity, world_force
from .layout import add_grid, mesh, pin
from .task import TaskSpec


def _body_to_world(phi, vx, vz):
    cw, sw = ad.cos(phi), ad.sin(phi)
    return cw * vx + sw * vz, -sw * vx + cw * vz


def build_centroidal(model, task: TaskSpec, tmap, n_fe: int, eps: float,
                     order: str) -> Transcription:
    scheme = scheme_for(order)
    P = scheme.n_points
    par = model.params()
    c, nj = model.n_contacts, model.n_j
    m, gmag, mu = par.m, par.g_mag, par.mu
    gx, gz = par.g[0], par.g[1]
    inertia = float(par.inertia)
    f_scale = m * gmag

    t_f = task.t_nominal()
    h = t_f / n_fe
    q_start = task.start_pose(model)
    q_end = task.end_pose(model)
    # body-frame offset from base origin to the mass center at the start
    # posture; the kinematic tie is exact there and approximate elsewhere
    off = model.com(list(np.concatenate([q_start[:nj], [0.0, 0.0, 0.0]])))
    off_x, off_z = float(off[0]), float(off[1])
    com_s = np.array([float(v) for v in model.com(list(q_start))])
    com_e = np.array([float(v) for v in model.com(list(q_end))])
    feet_s = np.array(model.fk_contacts(list(q_start)), dtype=float)
    feet_e = np.array(model.fk_contacts(list(q_end)), dtype=float)
    theta_ref = task.posture_reference(model)

    frac = (interior_times(scheme, n_fe, h) / t_f)[..., None]   # (n, P, 1)

    def lerp(a, b):
        return a + (b - a) * frac

    b = NlpBuilder()
    g = {}
    g["r"] = add_grid(b, "r", (n_fe, P, 2), x0=lerp(com_s, com_e).ravel())
    g["rd"] = add_grid(b, "rd", (n_fe, P, 2),
                       x0=np.tile((com_e - com_s) / t_f, n_fe * P))
    g["rdd"] = add_grid(b, "rdd", (n_fe, P, 2), scale=gmag)
    g["phi"] = add_grid(b, "phi", (n_fe, P),
                        x0=lerp(q_start[-1], q_end[-1])[..., 0].ravel())
    g["phid"] = add_grid(b, "phid", (n_fe, P),
                         x0=(q_end[-1] - q_start[-1]) / t_f)
    g["phidd"] = add_grid(b, "phidd", (n_fe, P), scale=gmag)

    a0_ = np.empty((n_fe, P, c, 2))
    for k in range(c):
        a0_[:, :, k, :] = lerp(feet_s[k], feet_e[k])
    g["a"] = add_grid(b, "a", (n_fe, P, c, 2), x0=a0_.ravel())
    g["ad"] = add_grid(b, "ad", (n_fe, P, c, 2),
                       x0=np.tile(((feet_e - feet_s) / t_f).ravel(), n_fe * P))
    g["add"] = add_grid(b, "add", (n_fe, P, c, 2), scale=gmag)

    g["th"] = add_grid(b, "th", (n_fe, nj),
                       lb=np.tile(model.theta_lower, n_fe),
                       ub=np.tile(model.theta_upper, n_fe),
                       x0=np.tile(q_start[:nj], n_fe))
    g["thd"] = add_grid(b, "thd", (n_fe, nj))
    g["tau"] = add_grid(b, "tau", (n_fe, nj),
                        lb=-np.tile(par.torque_limits, n_fe),
                        ub=np.tile(par.torque_limits, n_fe),
                        scale=np.tile(par.torque_limits, n_fe))

    lam0 = np.zeros((n_fe, P, c, 3))
    lam0[:, :, :, 0] = f_scale / c
    g["lam"] = add_grid(b, "lam", (n_fe, P, c, 3), lb=0.0, x0=lam0.ravel(),
                        scale=f_scale)
    speed = abs(task.displacement) / t_f
    g["gam"] = add_grid(b, "gam", (n_fe, P, c), lb=0.0, x0=speed + 0.1)

    g["r0"] = add_grid(b, "r0", (2,), x0=com_s)
    g["rd0"] = add_grid(b, "rd0", (2,))
    g["phi0"] = add_grid(b, "phi0", (), x0=q_start[-1])
    g["phid0"] = add_grid(b, "phid0", ())
    g["a0"] = add_grid(b, "a0", (c, 2), x0=feet_s.ravel())
    g["ad0"] = add_grid(b, "ad0", (c, 2))
    g["th0"] = add_grid(b, "th0", (nj,), x0=q_start[:nj])

    chains = [Chain("r", g["r"], g["rd"], g["r0"]),
              Chain("rd", g["rd"], g["rdd"], g["rd0"]),
              Chain("phi", g["phi"], g["phid"], g["phi0"]),
              Chain("phid", g["phid"], g["phidd"], g["phid0"]),
              Chain("a", g["a"], g["ad"], g["a0"]),
              Chain("ad", g["ad"], g["add"], g["ad0"])]
    if order == "third":
        for ch in chains:
            shape = ch.z.shape
            ch.eta = add_grid(b, "eta_" + ch.name, shape, scale=h)
            g["eta_" + ch.name] = ch.eta

    # boundary conditions as variable bounds
    pin(g["r0"], (np.arange(2),), com_s)
    pin(g["phi0"], (), q_start[-1])
    pin(g["th0"], (np.arange(nj),), q_start[:nj])
    pin(g["a0"], mesh(c, 2), feet_s.ravel())
    if task.start_at_rest:
        pin(g["rd0"], (np.arange(2),), 0.0)
        pin(g["phid0"], (), 0.0)
        pin(g["ad0"], mesh(c, 2), 0.0)
    last = (np.full(2, n_fe - 1), np.full(2, P - 1), np.arange(2))
    pin(g["r"], last, com_e)
    pin(g["phi"], (n_fe - 1, P - 1), q_end[-1])
    pin(g["th"], (np.full(nj, n_fe - 1), np.arange(nj)), q_end[:nj])
    if task.end_at_rest:
        pin(g["rd"], last, 0.0)
        pin(g["phid"], (n_fe - 1, P - 1), 0.0)
        kk, co = mesh(c, 2)
        pin(g["ad"], (np.full_like(kk, n_fe - 1), np.full_like(kk, P - 1),
                      kk, co), 0.0)
        pin(g["thd"], (np.full(nj, n_fe - 1), np.arange(nj)), 0.0)

    add_collocation(b, chains, scheme, n_fe, h=h)

    # joint path advances once per element
    nth, jth = mesh(n_fe, nj)
    th_prev = np.where(nth == 0, g["th0"].idx(jth),
                       g["th"].idx(np.maximum(nth - 1, 0), jth))
    b.add_group("theta_chain",
                lambda v: [v[0] - v[1] - h * v[2]],
                np.column_stack([g["th"].idx(nth, jth), th_prev,
                                 g["thd"].idx(nth, jth)]),
                lb=0.0, ub=0.0)

    # lumped-body force and moment balance at every collocation point
    na, pa = mesh(n_fe, P)

    def pcol(grid, *parts):
        return grid.idx(na, pa, *parts)

    lin_cols = [pcol(g["rdd"], 0), pcol(g["rdd"], 1)]
    for k in range(c):
        lin_cols += [pcol(g["a"], k, 0), pcol(g["lam"], k, 0),
                     pcol(g["lam"], k, 1), pcol(g["lam"], k, 2)]

    def dyn_lin(v):
        fx, fz = 0.0, 0.0
        for k in range(c):
            wx, wz = world_force(tmap, v[2 + 4 * k], v[3 + 4 * k],
                                 v[4 + 4 * k], v[5 + 4 * k])
            fx, fz = fx + wx, fz + wz
        return [(m * v[0] - fx - m * gx) / f_scale,
                (m * v[1] - fz - m * gz) / f_scale]

    b.add_group("dyn_lin", dyn_lin, np.column_stack(lin_cols),
                lb=0.0, ub=0.0, n_out=2)

    ang_cols = [pcol(g["phidd"]), pcol(g["r"], 0), pcol(g["r"], 1)]
    for k in range(c):
        ang_cols += [pcol(g["a"], k, 0), pcol(g["a"], k, 1),
                     pcol(g["lam"], k, 0), pcol(g["lam"], k, 1),
                     pcol(g["lam"], k, 2)]

    def dyn_ang(v):
        mom = inertia * v[0]
        for k in range(c):
            ax, az = v[3 + 5 * k], v[4 + 5 * k]
            wx, wz = world_force(tmap, ax, v[5 + 5 * k], v[6 + 5 * k],
                                 v[7 + 5 * k])
            mom = mom - ((az - v[2]) * wx - (ax - v[1]) * wz)
        return [mom / f_scale]

    b.add_group("dyn_ang", dyn_ang, np.column_stack(ang_cols), lb=0.0, ub=0.0)

    # contact points must be reachable at each element end
    ne = np.arange(n_fe)
    pe = np.full(n_fe, P - 1)
    fk_cols = [g["th"].idx(ne, j) for j in range(nj)]
    fk_cols += [g["r"].idx(ne, pe, 0), g["r"].idx(ne, pe, 1),
                g["phi"].idx(ne, pe)]
    for k in range(c):
        fk_cols += [g["a"].idx(ne, pe, k, 0), g["a"].idx(ne, pe, k, 1)]

    def fk_tie(v):
        ox, oz = _body_to_world(v[nj + 2], off_x, off_z)
        q = list(v[:nj]) + [v[nj] - ox, v[nj + 1] - oz, v[nj + 2]]
        feet = model.fk_contacts_flat(q)
        return [v[nj + 3 + i] - feet[i] for i in range(2 * c)]

    b.add_group("fk_tie", fk_tie, np.column_stack(fk_cols),
                lb=0.0, ub=0.0, n_out=2 * c)

    # torques consistent with a static force map at the element end
    tq_cols = [g["tau"].idx(ne, j) for j in range(nj)]
    tq_cols += [g["th"].idx(ne, j) for j in range(nj)]
    tq_cols += [g["r"].idx(ne, pe, 0), g["r"].idx(ne, pe, 1),
                g["phi"].idx(ne, pe)]
    for k in range(c):
        tq_cols += [g["a"].idx(ne, pe, k, 0), g["lam"].idx(ne, pe, k, 0),
                    g["lam"].idx(ne, pe, k, 1), g["lam"].idx(ne, pe, k, 2)]

    def tau_tie(v):
        ox, oz = _body_to_world(v[2 * nj + 2], off_x, off_z)
        q = (list(v[nj:2 * nj])
             + [v[2 * nj] - ox, v[2 * nj + 1] - oz, v[2 * nj + 2]])
        lam_flat = []
        base = 2 * nj + 3
        for k in range(c):
            wx, wz = world_force(tmap, v[base + 4 * k], v[base + 4 * k + 1],
                                 v[base + 4 * k + 2], v[base + 4 * k + 3])
            lam_flat += [wx, wz]
        fc = model.contact_force_generalized(q, lam_flat)
        return [(v[j] - fc[j]) / par.torque_limits[j] for j in range(nj)]

    b.add_group("tau_tie", tau_tie, np.column_stack(tq_cols),
                lb=0.0, ub=0.0, n_out=nj)

    add_complementarity(b, a=g["a"], ad_grid=g["ad"], lam=g["lam"],
                        gam=g["gam"], tmap=tmap, mu=mu, eps=eps,
                        n_fe=n_fe, scheme=scheme)

    w = task.weights
    ntj = mesh(n_fe, nj)
    b.add_objective("cost_tau", lambda v: v[0] * v[0],
                    g["tau"].idx(*ntj)[:, None], weight=h * w.torque)
    for j in range(nj):
        ref = float(theta_ref[j])
        b.add_objective(f"cost_posture_{j}",
                        lambda v, r=ref: (v[0] - r) * (v[0] - r),
                        g["th"].idx(np.arange(n_fe), np.full(n_fe, j))[:, None],
                        weight=h * w.posture)
    wq = scheme.weights
    for p in range(P):
        nk, kk, co = mesh(n_fe, c, 2)
        b.add_objective(f"cost_foot_acc_{p}", lambda v: v[0] * v[0],
                        g["add"].idx(nk, np.full_like(nk, p), kk, co)[:, None],
                        weight=h * wq[p] * w.foot_accel)
        nr, co2 = mesh(n_fe, 2)
        cols = np.concatenate([
            g["rdd"].idx(nr, np.full_like(nr, p), co2),
            g["phidd"].idx(np.arange(n_fe), np.full(n_fe, p))])
        b.add_objective(f"cost_base_acc_{p}", lambda v: v[0] * v[0],
                        cols[:, None], weight=h * wq[p] * w.base_accel)

    return Transcription(problem=b.build(), grids=g, scheme=scheme,
                         model=model, terrain=tmap, task=task,
                         kind="centroidal", eps=eps, n_fe=n_fe, h=h, t_f=t_f)
