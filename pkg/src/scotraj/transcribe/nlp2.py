"""Multi-phase full-order transcription with a fixed contact sequence.

Each phase owns its state, force, and duration variables; contacts listed
active are pinned to the ground through zero-velocity rows while inactive
ones carry zero force and a nonnegative gap.  Phase boundaries tie states
together, enforce touchdown height for contacts about to land, and apply a
momentum-conserving velocity reset with impulse variables for the incoming
active set.
"""

from __future__ import annotations

import numpy as np

from ..nlp import NlpBuilder
from .chains import Chain, add_collocation
from .collocation import scheme_for
from .common import Transcription
from .contact import rotated_gap, world_force
from .layout import add_grid, mesh, pin
from .task import ContactSequence, TaskSpec


def build_hto(model, task: TaskSpec, tmap, sequence: ContactSequence,
              order: str) -> Transcription:
    scheme = scheme_for(order)
    P = scheme.n_points
    par = model.params()
    c, nj, nq = model.n_contacts, model.n_j, model.n_q
    m, gmag, mu = par.m, par.g_mag, par.mu
    f_scale = m * gmag

    phases = sequence.phases
    S = len(phases)
    for ph in phases:
        if any(k < 0 or k >= c for k in ph.active):
            raise ValueError("phase active set references unknown contact")

    q_start = task.start_pose(model)
    q_end = task.end_pose(model)
    feet_s = np.array(model.fk_contacts(list(q_start)), dtype=float)

    q_lb = np.concatenate([model.theta_lower, [-np.inf] * 3])
    q_ub = np.concatenate([model.theta_upper, [np.inf] * 3])

    total_guess = sequence.total_duration_guess()
    t_cursor = 0.0

    b = NlpBuilder()
    g = {}
    extras = {"phases": phases, "rho": [None] * S}

    for s, ph in enumerate(phases):
        fe = ph.fe
        frac0 = t_cursor / total_guess
        frac1 = (t_cursor + ph.duration) / total_guess
        t_cursor += ph.duration
        tau_grid = np.arange(1, fe * P + 1).reshape(fe, P) / (fe * P)
        if P > 1:
            n_i = np.arange(fe)[:, None]
            tau_grid = (n_i + scheme.tau[None, :]) / fe
        loc = (frac0 + (frac1 - frac0) * tau_grid)[..., None]
        q_guess = q_start + (q_end - q_start) * loc   # (fe, P, nq)

        g[f"q{s}"] = add_grid(b, f"q{s}", (fe, P, nq),
                              lb=np.tile(q_lb, fe * P), ub=np.tile(q_ub, fe * P),
                              x0=q_guess.ravel())
        g[f"qd{s}"] = add_grid(b, f"qd{s}", (fe, P, nq),
                               x0=np.tile((q_end - q_start) / total_guess,
                                          fe * P))
        g[f"qdd{s}"] = add_grid(b, f"qdd{s}", (fe, P, nq), scale=gmag)

        a_guess = np.empty((fe, P, c, 2))
        for n in range(fe):
            for p in range(P):
                feet = model.fk_contacts(list(q_guess[n, p]))
                a_guess[n, p] = np.array([[float(x) for x in pt] for pt in feet])
        g[f"a{s}"] = add_grid(b, f"a{s}", (fe, P, c, 2), x0=a_guess.ravel())
        g[f"ad{s}"] = add_grid(b, f"ad{s}", (fe, P, c, 2))

        g[f"tau{s}"] = add_grid(b, f"tau{s}", (fe, nj),
                                lb=-np.tile(par.torque_limits, fe),
                                ub=np.tile(par.torque_limits, fe),
                                scale=np.tile(par.torque_limits, fe))

        lam_lb = np.zeros((fe, P, c, 3))
        lam_ub = np.zeros((fe, P, c, 3))
        lam_x0 = np.zeros((fe, P, c, 3))
        for k in ph.active:
            lam_ub[:, :, k, :] = np.inf
            lam_x0[:, :, k, 0] = f_scale / max(len(ph.active), 1)
        g[f"lam{s}"] = add_grid(b, f"lam{s}", (fe, P, c, 3),
                                lb=lam_lb.ravel(), ub=lam_ub.ravel(),
                                x0=lam_x0.ravel(), scale=f_scale)

        lo, hi = sequence.duration_bounds
        g[f"t{s}"] = add_grid(b, f"t{s}", (), lb=lo, ub=hi,
                              x0=min(max(ph.duration, lo), hi))

        g[f"q0_{s}"] = add_grid(b, f"q0_{s}", (nq,), x0=q_guess[0, 0])
        g[f"qd0_{s}"] = add_grid(b, f"qd0_{s}", (nq,))
        g[f"a0_{s}"] = add_grid(b, f"a0_{s}", (c, 2), x0=a_guess[0, 0].ravel())

        if s > 0 and ph.active:
            rho_lb = np.zeros((len(ph.active), 3))
            g[f"rho{s}"] = add_grid(b, f"rho{s}", (len(ph.active), 3),
                                    lb=rho_lb.ravel(), scale=0.1 * f_scale)
            extras["rho"][s] = tuple(ph.active)

    # boundary conditions on the first and last phase
    pin(g["q0_0"], (np.arange(nq),), q_start)
    pin(g["a0_0"], mesh(c, 2), feet_s.ravel())
    if task.start_at_rest:
        pin(g["qd0_0"], (np.arange(nq),), 0.0)
    fe_last = phases[-1].fe
    lastq = (np.full(nq, fe_last - 1), np.full(nq, P - 1), np.arange(nq))
    pin(g[f"q{S - 1}"], lastq, q_end)
    if task.end_at_rest:
        pin(g[f"qd{S - 1}"], lastq, 0.0)

    # per-phase groups
    for s, ph in enumerate(phases):
        fe = ph.fe
        chains = [Chain(f"q{s}", g[f"q{s}"], g[f"qd{s}"], g[f"q0_{s}"]),
                  Chain(f"qd{s}", g[f"qd{s}"], g[f"qdd{s}"], g[f"qd0_{s}"]),
                  Chain(f"a{s}", g[f"a{s}"], g[f"ad{s}"], g[f"a0_{s}"])]
        if order == "third":
            for ch in chains:
                ch.eta = add_grid(b, "eta_" + ch.name, ch.z.shape,
                                  scale=max(ph.duration / fe, 1e-2))
                g["eta_" + ch.name] = ch.eta
        add_collocation(b, chains, scheme, fe, t_idx=int(g[f"t{s}"].idx()),
                        fe_div=fe, prefix=f"p{s}_")

        na, pa = mesh(fe, P)
        fk_cols = [g[f"q{s}"].idx(na, pa, i) for i in range(nq)]
        for k in range(c):
            fk_cols += [g[f"a{s}"].idx(na, pa, k, 0),
                        g[f"a{s}"].idx(na, pa, k, 1)]

        def fk_tie(v):
            feet = model.fk_contacts_flat(list(v[:nq]))
            return [v[nq + i] - feet[i] for i in range(2 * c)]

        b.add_group(f"p{s}_fk", fk_tie, np.column_stack(fk_cols),
                    lb=0.0, ub=0.0, n_out=2 * c)

        dyn_cols = ([g[f"q{s}"].idx(na, pa, i) for i in range(nq)]
                    + [g[f"qd{s}"].idx(na, pa, i) for i in range(nq)]
                    + [g[f"qdd{s}"].idx(na, pa, i) for i in range(nq)]
                    + [g[f"tau{s}"].idx(na, j) for j in range(nj)])
        for k in range(c):
            dyn_cols += [g[f"a{s}"].idx(na, pa, k, 0),
                         g[f"lam{s}"].idx(na, pa, k, 0),
                         g[f"lam{s}"].idx(na, pa, k, 1),
                         g[f"lam{s}"].idx(na, pa, k, 2)]

        def dynamics(v):
            q = list(v[:nq])
            qd = list(v[nq:2 * nq])
            qdd = list(v[2 * nq:3 * nq])
            tau = list(v[3 * nq:3 * nq + nj])
            base = 3 * nq + nj
            lam_flat = []
            for k in range(c):
                wx, wz = world_force(tmap, v[base + 4 * k],
                                     v[base + 4 * k + 1],
                                     v[base + 4 * k + 2],
                                     v[base + 4 * k + 3])
                lam_flat += [wx, wz]
            res = model.dynamics_residual(q, qd, qdd, tau, lam_flat)
            return [r / f_scale for r in res]

        b.add_group(f"p{s}_dyn", dynamics, np.column_stack(dyn_cols),
                    lb=0.0, ub=0.0, n_out=nq)

        if ph.active:
            mv_cols = ([g[f"q{s}"].idx(na, pa, i) for i in range(nq)]
                       + [g[f"qd{s}"].idx(na, pa, i) for i in range(nq)])
            act = tuple(ph.active)

            def no_motion(v, act=act):
                dots = model.contact_velocities(list(v[:nq]), list(v[nq:2 * nq]))
                out = []
                for k in act:
                    out += [dots[2 * k], dots[2 * k + 1]]
                return out

            b.add_group(f"p{s}_pinfoot", no_motion, np.column_stack(mv_cols),
                        lb=0.0, ub=0.0, n_out=2 * len(act))

            cone_n, cone_p, cone_k = mesh(fe, P, len(act))
            act_arr = np.asarray(act)[cone_k]
            cone_idx = np.column_stack(
                [g[f"lam{s}"].idx(cone_n, cone_p, act_arr, i)
                 for i in range(3)])
            b.add_group(f"p{s}_cone",
                        lambda v: [mu * v[0] - v[1] - v[2]],
                        cone_idx, lb=0.0, ub=np.inf)

        inactive = [k for k in range(c) if k not in ph.active]
        if inactive:
            gi_n, gi_p, gi_k = mesh(fe, P, len(inactive))
            in_arr = np.asarray(inactive)[gi_k]
            gap_idx = np.column_stack([g[f"a{s}"].idx(gi_n, gi_p, in_arr, 0),
                                       g[f"a{s}"].idx(gi_n, gi_p, in_arr, 1)])
            b.add_group(f"p{s}_gap",
                        lambda v: [rotated_gap(tmap, v[0], v[1])],
                        gap_idx, lb=0.0, ub=np.inf)

    # phase boundaries: continuity, touchdown, reset, impulse cones
    for s in range(1, S):
        prev, cur = phases[s - 1], phases[s]
        fe_p = prev.fe
        le = np.full(nq, fe_p - 1)
        lp = np.full(nq, P - 1)
        cont_idx = np.column_stack([g[f"q0_{s}"].idx(np.arange(nq)),
                                    g[f"q{s - 1}"].idx(le, lp, np.arange(nq))])
        b.add_group(f"b{s}_cont_q", lambda v: [v[0] - v[1]], cont_idx,
                    lb=0.0, ub=0.0)
        ka, co = mesh(c, 2)
        cont_a = np.column_stack(
            [g[f"a0_{s}"].idx(ka, co),
             g[f"a{s - 1}"].idx(np.full_like(ka, fe_p - 1),
                                np.full_like(ka, P - 1), ka, co)])
        b.add_group(f"b{s}_cont_a", lambda v: [v[0] - v[1]], cont_a,
                    lb=0.0, ub=0.0)

        landing = [k for k in cur.active if k not in prev.active]
        if landing:
            kl = np.asarray(landing)
            td_idx = np.column_stack(
                [g[f"a{s - 1}"].idx(np.full_like(kl, fe_p - 1),
                                    np.full_like(kl, P - 1), kl, 0),
                 g[f"a{s - 1}"].idx(np.full_like(kl, fe_p - 1),
                                    np.full_like(kl, P - 1), kl, 1)])
            b.add_group(f"b{s}_touchdown",
                        lambda v: [rotated_gap(tmap, v[0], v[1])],
                        td_idx, lb=0.0, ub=0.0)

        act = tuple(cur.active)
        n_act = len(act)
        reset_cols = ([g[f"q0_{s}"].idx(i) for i in range(nq)]
                      + [g[f"qd0_{s}"].idx(i) for i in range(nq)]
                      + [g[f"q{s - 1}"].idx(fe_p - 1, P - 1, i)
                         for i in range(nq)])
        for j, k in enumerate(act):
            reset_cols += [g[f"rho{s}"].idx(j, 0), g[f"rho{s}"].idx(j, 1),
                           g[f"rho{s}"].idx(j, 2), g[f"a0_{s}"].idx(k, 0)]

        def reset(v, n_act=n_act, act=act):
            q0 = list(v[:nq])
            dqd = [v[nq + i] - v[2 * nq + i] for i in range(nq)]
            mdv = model._mass_matrix_times(q0, dqd)
            rho_flat = []
            base = 3 * nq
            for j in range(n_act):
                wx, wz = world_force(tmap, v[base + 4 * j + 3],
                                     v[base + 4 * j], v[base + 4 * j + 1],
                                     v[base + 4 * j + 2])
                rho_flat += [wx, wz]
            imp = _selected_impulse(model, q0, rho_flat, act)
            return [(mdv[i] - imp[i]) / m for i in range(nq)]

        b.add_group(f"b{s}_reset", reset, np.column_stack(reset_cols),
                    lb=0.0, ub=0.0, n_out=nq)

        if act:
            anchor_cols = ([g[f"q0_{s}"].idx(i) for i in range(nq)]
                           + [g[f"qd0_{s}"].idx(i) for i in range(nq)])

            def anchor(v, act=act):
                dots = model.contact_velocities(list(v[:nq]),
                                                list(v[nq:2 * nq]))
                out = []
                for k in act:
                    out += [dots[2 * k], dots[2 * k + 1]]
                return out

            b.add_group(f"b{s}_anchor", anchor, np.column_stack(anchor_cols),
                        lb=0.0, ub=0.0, n_out=2 * n_act)

            rho_cone = np.column_stack(
                [g[f"rho{s}"].idx(np.arange(n_act), np.full(n_act, i))
                 for i in range(3)])
            b.add_group(f"b{s}_rho_cone",
                        lambda v: [mu * v[0] - v[1] - v[2]],
                        rho_cone, lb=0.0, ub=np.inf)

    # total duration stays inside the task window
    t_cols = np.array([[int(g[f"t{s}"].idx()) for s in range(S)]])
    b.add_group("total_time", lambda v: [sum(v)], t_cols,
                lb=task.t_bounds[0], ub=task.t_bounds[1])

    for s, ph in enumerate(phases):
        ntj = mesh(ph.fe, nj)
        cols = np.column_stack([g[f"tau{s}"].idx(*ntj),
                                np.full(ph.fe * nj, int(g[f"t{s}"].idx()))])
        b.add_objective(f"cost_tau{s}",
                        lambda v, fe=ph.fe: (v[1] / fe) * v[0] * v[0],
                        cols, weight=task.weights.torque)

    return Transcription(problem=b.build(), grids=g, scheme=scheme,
                         model=model, terrain=tmap, task=task, kind="hto",
                         n_fe=tuple(ph.fe for ph in phases),
                         sequence=sequence, extras=extras)


def _selected_impulse(model, q, rho_world_flat, active):
    """A(q)' rho for impulses acting only on `active` contacts."""
    full = [0.0] * (2 * model.n_contacts)
    for j, k in enumerate(active):
        full[2 * k] = rho_world_flat[2 * j]
        full[2 * k + 1] = rho_world_flat[2 * j + 1]
    return model.contact_force_generalized(q, full)
