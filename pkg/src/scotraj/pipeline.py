"""Staged solve pipelines and the warm-start plumbing between stages.

Each pipeline is a ladder of solves over one or more problem kinds, with
every rung warm-started from the previous solution: mesh refinement when the
element count grows, forward collocation initialization when the order
switches from backward Euler to Radau, and plain value transfer otherwise.
The staged pipeline discovers a contact sequence with the centroidal stage,
extracts it, seeds the full-order multi-phase problem by interpolation and
inverse kinematics, and solves that once at third order.
"""

from __future__ import annotations

import copy
import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from . import terrain
from .solver import SolverOptions, SolveResult, solve
from .trajectory import PhaseData, Trajectory, from_solution
from .transcribe import (ContactSequence, Phase, build_centroidal,
                         build_full_cio, build_hto, scheme_for)
from .transcribe.chains import interior_times
from .transcribe.contact import tangential_velocity

# contact treated active when its normal force exceeds this fraction of body
# weight somewhere in the element
FORCE_THRESHOLD_SCALE = 1e-4

_LINEAR_KEYS = ("r", "rd", "rdd", "phi", "phid", "phidd",
                "q", "qd", "qdd", "a", "ad", "add")
_ZOH_KEYS = ("lam",)
_ANCHOR_OF = {"r": "r0", "rd": "rd0", "phi": "phi0", "phid": "phid0",
              "a": "a0", "ad": "ad0", "q": "q0", "qd": "qd0"}

# integration hierarchy per kind: (value, derivative, start anchor), ordered
# so each derivative is already rebuilt before it is integrated
_CHAINS = {"centroidal": (("rd", "rdd", "rd0"), ("r", "rd", "r0"),
                          ("phid", "phidd", "phid0"), ("phi", "phid", "phi0"),
                          ("ad", "add", "ad0"), ("a", "ad", "a0")),
           "full_cio": (("qd", "qdd", "qd0"), ("q", "qd", "q0"),
                        ("a", "ad", "a0")),
           "hto": (("qd", "qdd", "qd0"), ("q", "qd", "q0"),
                   ("a", "ad", "a0"))}


class PipelineError(RuntimeError):
    """A stage failed hard (solver error or divergence)."""

    def __init__(self, stage_index, label, result, stages=()):
        super().__init__(
            f"stage {stage_index} ({label or 'unnamed'}) failed with "
            f"status {result.status!r}: {result.message or 'no detail'}")
        self.stage_index = stage_index
        self.label = label
        self.result = result
        self.stages = list(stages)


@dataclass(frozen=True)
class StageCall:
    """One rung of a schedule: what to build and how hard to push it."""

    kind: str                  # centroidal | full_cio | hto
    order: str                 # first | third
    fe: object                 # int, or tuple of per-phase counts
    eps: float | None          # None for mode-fixed problems
    terrain_on: bool = False
    iter_cap: int | None = None
    label: str = ""


def _fe_size(fe) -> int:
    return fe if isinstance(fe, int) else sum(fe)


@dataclass(frozen=True)
class StageSchedule:
    """Validated ladder: ε never rises, mesh never coarsens, one order switch."""

    calls: tuple

    def __post_init__(self):
        if not self.calls:
            raise ValueError("schedule needs at least one call")
        eps = [c.eps for c in self.calls if c.eps is not None]
        if any(b > a for a, b in zip(eps, eps[1:])):
            raise ValueError("relaxation values must be nonincreasing")
        fes = [_fe_size(c.fe) for c in self.calls]
        if any(b < a for a, b in zip(fes, fes[1:])):
            raise ValueError("element counts must be nondecreasing")
        orders = [c.order for c in self.calls]
        switches = sum(1 for a, b in zip(orders, orders[1:]) if a != b)
        if switches > 1 or (switches == 1 and orders[-1] != "third"):
            raise ValueError("order may switch first->third at most once")


@dataclass
class StageReport:
    label: str
    kind: str
    order: str
    fe: object
    eps: float | None
    terrain_on: bool
    status: str
    iterations: int
    objective: float
    max_violation: float
    wall_time: float

    def to_dict(self, timing=True) -> dict:
        d = {"label": self.label, "kind": self.kind, "order": self.order,
             "fe": list(self.fe) if isinstance(self.fe, tuple) else self.fe,
             "eps": self.eps, "terrain_on": self.terrain_on,
             "status": self.status, "iterations": int(self.iterations),
             "objective": float(self.objective),
             "max_violation": float(self.max_violation)}
        if timing:
            d["wall_time"] = float(self.wall_time)
        return d


@dataclass
class RunReport:
    pipeline: str
    stages: list
    sequence: ContactSequence | None = None
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.stages) and self.stages[-1].status == "converged"

    @property
    def total_wall_time(self) -> float:
        return float(sum(s.wall_time for s in self.stages))

    @property
    def total_iterations(self) -> int:
        return int(sum(s.iterations for s in self.stages))

    def to_dict(self, timing=True) -> dict:
        seq = None
        if self.sequence is not None:
            seq = [{"active": list(ph.active), "fe": ph.fe,
                    "duration": float(ph.duration)}
                   for ph in self.sequence.phases]
        d = {"pipeline": self.pipeline,
             "stages": [s.to_dict(timing=timing) for s in self.stages],
             "sequence": seq, "warnings": list(self.warnings),
             "converged": self.converged}
        d.update(self.extra)
        if timing:
            d["total_wall_time"] = self.total_wall_time
        return d


# -- interpolation helpers ----------------------------------------------------


def _interp_linear(tq, ts, vs):
    vs = np.asarray(vs, dtype=float)
    tail = vs.shape[1:]
    flat = vs.reshape(len(ts), -1)
    out = np.empty((len(tq), flat.shape[1]))
    for j in range(flat.shape[1]):
        out[:, j] = np.interp(tq, ts, flat[:, j])
    return out.reshape((len(tq),) + tail)


def _interp_hold(tq, ts, vs):
    vs = np.asarray(vs, dtype=float)
    idx = np.clip(np.searchsorted(ts, tq, side="left"), 0, len(ts) - 1)
    return vs[idx]


def _point_series(ph: PhaseData, key: str, t_start: float):
    """Flattened (times, values) for one state, with its start anchor."""
    ts = ph.times.reshape(-1)
    vs = ph.states[key].reshape((ts.size,) + ph.states[key].shape[2:])
    anchor = _ANCHOR_OF.get(key)
    if anchor is not None and anchor in ph.starts:
        ts = np.concatenate([[t_start], ts])
        vs = np.concatenate([ph.starts[anchor][None], vs])
    return ts, vs


def _recomputed_slip_slack(tmap, a, ad):
    """|tangential contact velocity| on the current terrain, pointwise."""
    fe, P, c, _ = a.shape
    gam = np.zeros((fe, P, c))
    for n in range(fe):
        for p in range(P):
            for k in range(c):
                vt = tangential_velocity(tmap, a[n, p, k, 0],
                                         ad[n, p, k, 0], ad[n, p, k, 1])
                gam[n, p, k] = abs(float(vt))
    return gam


def mesh_refine(traj: Trajectory, new_fe: int, tmap=None) -> Trajectory:
    """Move a solution to a finer mesh: states linear, forces held, slip
    slacks recomputed from the interpolated values."""
    if tmap is None:
        tmap = terrain.flat()
    scheme = scheme_for(traj.order)
    phases = []
    t_start = 0.0
    for ph in traj.phases:
        if new_fe < ph.fe:
            raise ValueError("mesh refinement cannot reduce element count")
        if new_fe == ph.fe:
            phases.append(copy.deepcopy(ph))
            t_start += ph.duration
            continue
        h = ph.duration / new_fe
        times = t_start + interior_times(scheme, new_fe, h)
        tq = times.reshape(-1)
        states = {}
        for key in ph.states:
            if key in _LINEAR_KEYS:
                ts, vs = _point_series(ph, key, t_start)
                vals = _interp_linear(tq, ts, vs)
                states[key] = vals.reshape(times.shape + vals.shape[1:])
            elif key in _ZOH_KEYS:
                ts, vs = _point_series(ph, key, t_start)
                vals = _interp_hold(tq, ts, vs)
                states[key] = vals.reshape(times.shape + vals.shape[1:])
        # element-resolution values live at element end times
        ends_src = ph.times[:, -1]
        ends_new = times[:, -1]
        if "th" in ph.states:
            ts = np.concatenate([[t_start], ends_src])
            vs = np.concatenate([ph.starts["th0"][None], ph.states["th"]])
            states["th"] = _interp_linear(ends_new, ts, vs)
        if "thd" in ph.states:
            states["thd"] = _interp_linear(ends_new, ends_src,
                                           ph.states["thd"])
        if "tau" in ph.states:
            states["tau"] = _interp_hold(ends_new, ends_src,
                                         ph.states["tau"])
        if "gam" in ph.states:
            states["gam"] = _recomputed_slip_slack(tmap, states["a"],
                                                   states["ad"])
        phases.append(PhaseData(active=ph.active, duration=ph.duration,
                                times=times, states=states,
                                impulse=None if ph.impulse is None
                                else ph.impulse.copy(),
                                starts=copy.deepcopy(ph.starts)))
        t_start += ph.duration
    return Trajectory(kind=traj.kind, order=traj.order,
                      n_joints=traj.n_joints, n_contacts=traj.n_contacts,
                      phases=phases, meta=dict(traj.meta))


def forward_init_collocation(traj: Trajectory, scheme=None,
                             tmap=None) -> Trajectory:
    """Lift a backward-Euler solution onto the Radau grid of the same mesh.

    Top-level derivatives are interpolated; every chained value below them
    is forward-integrated element by element, so all stage and linking
    equalities hold exactly at the result.
    """
    if traj.order != "first":
        raise ValueError("forward initialization expects a first-order input")
    scheme = scheme or scheme_for("third")
    if tmap is None:
        tmap = terrain.flat()
    P = scheme.n_points
    chains = _CHAINS[traj.kind]
    integrated = {z for z, _, _ in chains}
    phases = []
    t_start = 0.0
    for ph in traj.phases:
        fe = ph.fe
        h = ph.duration / fe
        times = t_start + interior_times(scheme, fe, h)
        tq = times.reshape(-1)
        states = {}
        for key in ph.states:
            if key in _LINEAR_KEYS and key not in integrated:
                ts, vs = _point_series(ph, key, t_start)
                vals = _interp_linear(tq, ts, vs)
                states[key] = vals.reshape(times.shape + vals.shape[1:])
            elif key in _ZOH_KEYS:
                states[key] = np.repeat(ph.states[key], P, axis=1)
            elif key in ("th", "thd", "tau"):
                states[key] = ph.states[key].copy()
        for z_key, zd_key, anchor in chains:
            if z_key not in ph.states:
                continue
            zd = states[zd_key]
            z_prev = ph.starts[anchor].astype(float)
            out = np.empty_like(zd)
            for n in range(fe):
                stage = h * np.einsum("pi,i...->p...", scheme.gamma, zd[n])
                out[n] = z_prev + stage
                z_prev = out[n, -1]
            states[z_key] = out
        if "gam" in ph.states:
            states["gam"] = _recomputed_slip_slack(tmap, states["a"],
                                                   states["ad"])
        phases.append(PhaseData(active=ph.active, duration=ph.duration,
                                times=times, states=states,
                                impulse=None if ph.impulse is None
                                else ph.impulse.copy(),
                                starts=copy.deepcopy(ph.starts)))
        t_start += ph.duration
    return Trajectory(kind=traj.kind, order="third",
                      n_joints=traj.n_joints, n_contacts=traj.n_contacts,
                      phases=phases, meta=dict(traj.meta))


# -- writing guesses into built problems --------------------------------------


def _write_grid(x, grid, values):
    block = grid.block
    vals = np.asarray(values, dtype=float).ravel()
    x[block.offset: block.offset + block.count] = \
        np.clip(vals, block.lb, block.ub)


def _fill_stage_increments(tr, x):
    """Make every stage-increment guess consistent with the written states."""
    for name, grid in tr.grids.items():
        if not name.startswith("eta_"):
            continue
        chain_key = name[4:]
        z = tr.grids[chain_key].decode(x).copy()
        base = chain_key.rstrip("0123456789")
        if tr.kind == "hto":
            suffix = chain_key[len(base):]
            anchor = tr.grids[f"{base}0_{suffix}"]
        else:
            anchor = tr.grids[base + "0"]
        z0 = anchor.decode(x)
        prev = np.concatenate([z0[None], z[:-1, -1]])
        eta = z - prev[:, None]
        _write_grid(x, grid, eta)


def guess_from_trajectory(tr, traj: Trajectory) -> np.ndarray:
    """Initial point for a built problem, copied from a same-shape solution."""
    x = tr.problem.x0.copy()
    if tr.kind in ("centroidal", "full_cio"):
        ph = traj.phases[0]
        for key, arr in ph.states.items():
            if key in tr.grids and tr.grids[key].shape == arr.shape:
                _write_grid(x, tr.grids[key], arr)
        for key, arr in ph.starts.items():
            if key in tr.grids:
                _write_grid(x, tr.grids[key], arr)
    else:
        for s, ph in enumerate(traj.phases):
            for key, arr in ph.states.items():
                name = f"{key}{s}"
                if name in tr.grids and tr.grids[name].shape == arr.shape:
                    _write_grid(x, tr.grids[name], arr)
            for key, arr in ph.starts.items():
                name = f"{key}_{s}"
                if name in tr.grids:
                    _write_grid(x, tr.grids[name], arr)
            if f"t{s}" in tr.grids:
                _write_grid(x, tr.grids[f"t{s}"], ph.duration)
            if f"rho{s}" in tr.grids and ph.impulse is not None:
                rows = tr.extras["rho"][s]
                _write_grid(x, tr.grids[f"rho{s}"],
                            ph.impulse[list(rows)])
    _fill_stage_increments(tr, x)
    return x


def apply_seed(tr, seed: dict) -> np.ndarray:
    """Initial point from a name->values seed dict (underscore keys skipped)."""
    x = tr.problem.x0.copy()
    for name, values in seed.items():
        if name.startswith("_"):
            continue
        if name in tr.grids:
            _write_grid(x, tr.grids[name], values)
    _fill_stage_increments(tr, x)
    return x


# -- contact sequence extraction ----------------------------------------------


def extract_contact_sequence(traj: Trajectory, force_threshold: float,
                             fe_per_phase: int = 25,
                             duration_bounds=(0.02, 3.0)) -> ContactSequence:
    """Active sets per element, merged into phases.

    A contact is active in an element when its normal force exceeds the
    threshold at any collocation point of that element.
    """
    elements = []
    for ph in traj.phases:
        lam = ph.states["lam"]
        h = ph.duration / ph.fe
        for n in range(ph.fe):
            active = tuple(k for k in range(traj.n_contacts)
                           if float(np.max(np.abs(lam[n, :, k, 0])))
                           > force_threshold)
            elements.append((active, h))
    if not elements:
        raise ValueError("trajectory has no elements to extract from")
    merged = []
    for active, h in elements:
        if merged and merged[-1][0] == active:
            merged[-1][1] += h
        else:
            merged.append([active, h])
    phases = tuple(Phase(active=act, fe=fe_per_phase, duration=dur)
                   for act, dur in merged)
    return ContactSequence(phases=phases, duration_bounds=duration_bounds)


# -- seeding the full-order stages from a centroidal solution ------------------


def _rot(w, vx, vz):
    cw, sw = np.cos(w), np.sin(w)
    return cw * vx + sw * vz, -sw * vx + cw * vz


def _centroidal_samplers(centroidal: Trajectory):
    ph = centroidal.phases[0]
    series = {}
    for key in ("r", "rd", "phi", "phid", "a", "ad", "lam"):
        series[key] = _point_series(ph, key, 0.0)
    ends = ph.times[:, -1]
    th_ts = np.concatenate([[0.0], ends])
    th_vs = np.concatenate([ph.starts["th0"][None], ph.states["th"]])
    tau_vs = ph.states["tau"]

    def sample(key, tq):
        ts, vs = series[key]
        if key == "lam":
            return _interp_hold(tq, ts, vs)
        return _interp_linear(tq, ts, vs)

    def sample_theta(tq):
        return _interp_linear(tq, th_ts, th_vs)

    def sample_tau(tq):
        return _interp_hold(tq, ends, tau_vs)

    return sample, sample_theta, sample_tau


def _ik_track(model, base_xy, phi, feet, theta_guess, rng, restarts=3):
    """Joint angles along a track of poses, each solve seeded by the last."""
    n_pts = len(phi)
    thetas = np.empty((n_pts, model.n_j))
    failures = 0
    prev = None
    for i in range(n_pts):
        seed = prev if prev is not None else theta_guess[i]
        res = model.inverse_kinematics((base_xy[i, 0], base_xy[i, 1]),
                                       phi[i], feet[i], seed)
        if not res.converged and rng is not None:
            best = res
            for _ in range(restarts):
                jitter = seed + rng.normal(scale=0.1, size=model.n_j)
                trial = model.inverse_kinematics(
                    (base_xy[i, 0], base_xy[i, 1]), phi[i], feet[i], jitter)
                if trial.residual < best.residual:
                    best = trial
                if trial.converged:
                    break
            res = best
        if not res.converged:
            failures += 1
        thetas[i] = res.theta
        prev = res.theta
    return thetas, failures


def _full_order_points(model, centroidal, tq, rng):
    """q, qd, a, ad, lam, tau rows at the query times, via IK on the body path."""
    sample, sample_theta, sample_tau = _centroidal_samplers(centroidal)
    th0 = centroidal.phases[0].starts["th0"]
    off = model.com(np.concatenate([th0, [0.0, 0.0, 0.0]]))
    off = (float(off[0]), float(off[1]))

    r = sample("r", tq)
    rd = sample("rd", tq)
    phi = sample("phi", tq)
    phid = sample("phid", tq)
    a = sample("a", tq)
    ad = sample("ad", tq)
    lam = sample("lam", tq)
    tau = sample_tau(tq)
    th_guess = sample_theta(tq)

    ox, oz = _rot(phi, off[0], off[1])
    base = np.column_stack([r[:, 0] - ox, r[:, 1] - oz])
    based = np.column_stack([rd[:, 0] - phid * oz, rd[:, 1] + phid * ox])

    theta, failures = _ik_track(model, base, phi,
                                a.reshape(len(tq), -1), th_guess, rng)
    thetad = np.gradient(theta, tq, axis=0)
    q = np.column_stack([theta, base, phi])
    qd = np.column_stack([thetad, based, phid])
    return {"q": q, "qd": qd, "a": a, "ad": ad, "lam": lam, "tau": tau,
            "_ik_failures": failures}


def seed_hto(centroidal: Trajectory, sequence: ContactSequence, model,
             rng=None, order: str = "third") -> dict:
    """Initial values for the multi-phase problem, keyed by grid name."""
    scheme = scheme_for(order)
    seed = {}
    failures = 0
    points = 0
    t_start = 0.0
    for s, ph in enumerate(sequence.phases):
        fe = ph.fe
        times = t_start + interior_times(scheme, fe, ph.duration / fe)
        tq = np.concatenate([[t_start], times.reshape(-1)])
        vals = _full_order_points(model, centroidal, tq, rng)
        failures += vals["_ik_failures"]
        points += len(tq)
        shape = times.shape
        seed[f"q{s}"] = vals["q"][1:].reshape(shape + (-1,))
        seed[f"qd{s}"] = vals["qd"][1:].reshape(shape + (-1,))
        seed[f"a{s}"] = vals["a"][1:].reshape(shape + vals["a"].shape[1:])
        seed[f"ad{s}"] = vals["ad"][1:].reshape(shape + vals["ad"].shape[1:])
        seed[f"lam{s}"] = vals["lam"][1:].reshape(shape
                                                  + vals["lam"].shape[1:])
        seed[f"tau{s}"] = vals["tau"][1:][::scheme.n_points]
        seed[f"t{s}"] = ph.duration
        seed[f"q0_{s}"] = vals["q"][0]
        seed[f"qd0_{s}"] = vals["qd"][0]
        seed[f"a0_{s}"] = vals["a"][0]
        t_start += ph.duration
    seed["_ik_failures"] = failures
    seed["_ik_points"] = points
    return seed


def seed_full_order(centroidal: Trajectory, model, fe: int, t_f: float,
                    rng=None, order: str = "first", tmap=None) -> dict:
    """Initial values for the single-phase full-order problem."""
    if tmap is None:
        tmap = terrain.flat()
    scheme = scheme_for(order)
    times = interior_times(scheme, fe, t_f / fe)
    tq = np.concatenate([[0.0], times.reshape(-1)])
    vals = _full_order_points(model, centroidal, tq, rng)
    shape = times.shape
    seed = {"q": vals["q"][1:].reshape(shape + (-1,)),
            "qd": vals["qd"][1:].reshape(shape + (-1,)),
            "a": vals["a"][1:].reshape(shape + vals["a"].shape[1:]),
            "ad": vals["ad"][1:].reshape(shape + vals["ad"].shape[1:]),
            "lam": vals["lam"][1:].reshape(shape + vals["lam"].shape[1:]),
            "tau": vals["tau"][1:][::scheme.n_points],
            "q0": vals["q"][0], "qd0": vals["qd"][0], "a0": vals["a"][0],
            "_ik_failures": vals["_ik_failures"], "_ik_points": len(tq)}
    seed["gam"] = _recomputed_slip_slack(tmap, seed["a"], seed["ad"])
    return seed


# -- schedules -----------------------------------------------------------------


def ladder_schedule(kind: str, task) -> StageSchedule:
    """The relaxation ladder: loose coarse, loose fine, optional terrain
    activation, then tightening at the target order."""
    loose, moderate, tight = task.eps_ladder
    calls = [StageCall(kind, "first", task.fe_coarse, loose, False,
                       label="loose coarse"),
             StageCall(kind, "first", task.fe_fine, loose, False,
                       label="loose fine")]
    if task.use_terrain:
        calls.append(StageCall(kind, "first", task.fe_fine, loose, True,
                               label="terrain activation"))
    ton = task.use_terrain
    if task.order == "first":
        calls += [StageCall(kind, "first", task.fe_fine, moderate, ton,
                            label="moderate"),
                  StageCall(kind, "first", task.fe_fine, tight, ton,
                            label="tight")]
    else:
        calls += [StageCall(kind, "third", task.fe_fine, loose, ton,
                            label="third loose"),
                  StageCall(kind, "third", task.fe_fine, moderate, ton,
                            label="third moderate"),
                  StageCall(kind, "third", task.fe_fine, tight, ton,
                            label="third tight")]
    return StageSchedule(tuple(calls))


def seeded_ladder_schedule(kind: str, task) -> StageSchedule:
    """Ladder starting at the fine mesh (for solves warm-started by a seed),
    with the terrain active from the outset when the task asks for it."""
    loose, moderate, tight = task.eps_ladder
    ton = task.use_terrain
    calls = [StageCall(kind, "first", task.fe_fine, loose, ton,
                       label="loose fine")]
    if task.order == "first":
        calls += [StageCall(kind, "first", task.fe_fine, moderate, ton,
                            label="moderate"),
                  StageCall(kind, "first", task.fe_fine, tight, ton,
                            label="tight")]
    else:
        calls += [StageCall(kind, "third", task.fe_fine, loose, ton,
                            label="third loose"),
                  StageCall(kind, "third", task.fe_fine, moderate, ton,
                            label="third moderate"),
                  StageCall(kind, "third", task.fe_fine, tight, ton,
                            label="third tight")]
    return StageSchedule(tuple(calls))


def fixed_gait_schedule(task, sequence: ContactSequence,
                        iter_cap: int = 500) -> StageSchedule:
    fes = tuple(ph.fe for ph in sequence.phases)
    calls = [StageCall("hto", "first", fes, None, False, iter_cap,
                       label="first order capped"),
             StageCall("hto", "third", fes, None, False,
                       label="third order")]
    if task.use_terrain:
        calls.append(StageCall("hto", "third", fes, None, True,
                               label="terrain final"))
    return StageSchedule(tuple(calls))


# -- the schedule runner -------------------------------------------------------


def _build_call(call: StageCall, model, task, tmap, sequence):
    if call.kind == "centroidal":
        return build_centroidal(model, task, tmap, call.fe, call.eps,
                                call.order)
    if call.kind == "full_cio":
        return build_full_cio(model, task, tmap, call.fe, call.eps,
                              call.order)
    if call.kind == "hto":
        if sequence is None:
            raise ValueError("fixed-gait calls need a contact sequence")
        return build_hto(model, task, tmap, sequence, call.order)
    raise ValueError(f"unknown problem kind {call.kind!r}")


def _options_for(options: SolverOptions, call: StageCall) -> SolverOptions:
    if call.iter_cap is None:
        return options
    return dataclasses.replace(options, max_iter=call.iter_cap)


def run_schedule(model, task, tmap, schedule: StageSchedule,
                 options: SolverOptions = None, sequence=None, seed=None,
                 warm: Trajectory = None):
    """Execute a ladder, warm-starting each rung from the previous solution.

    Returns (trajectory, stage reports, warnings, last transcription, last
    solver result).  Error or divergence aborts; iteration or time exhaustion
    is recorded as a warning and the ladder continues.
    """
    options = options or SolverOptions()
    stages = []
    warnings = []
    traj = warm
    tr = None
    result = None
    for i, call in enumerate(schedule.calls):
        t_eff = tmap if call.terrain_on else terrain.flat()
        tr = _build_call(call, model, task, t_eff, sequence)
        if traj is not None:
            work = traj
            if isinstance(call.fe, int) and work.phases[0].fe != call.fe:
                work = mesh_refine(work, call.fe, t_eff)
            if work.order == "first" and call.order == "third":
                work = forward_init_collocation(work, tr.scheme, t_eff)
            x0 = guess_from_trajectory(tr, work)
        elif seed is not None:
            x0 = apply_seed(tr, seed)
            seed = None
        else:
            x0 = None
        t0 = time.monotonic()
        result = solve(tr.problem, _options_for(options, call), x0=x0)
        wall = time.monotonic() - t0
        stages.append(StageReport(
            label=call.label, kind=call.kind, order=call.order, fe=call.fe,
            eps=call.eps, terrain_on=call.terrain_on, status=result.status,
            iterations=result.iterations, objective=float(result.objective),
            max_violation=float(result.max_violation), wall_time=wall))
        if result.status in ("error", "diverged"):
            raise PipelineError(i, call.label, result, stages)
        if result.status != "converged":
            warnings.append(f"stage {i} ({call.label}): {result.status}")
        traj = from_solution(tr, result.x)
    return traj, stages, warnings, tr, result


# -- pipelines -----------------------------------------------------------------


def stage1_centroidal_cio(model, task, tmap, options=None):
    """Contact-discovery stage: the centroidal ladder."""
    schedule = ladder_schedule("centroidal", task)
    traj, stages, warnings, _, _ = run_schedule(model, task, tmap, schedule,
                                                options)
    return traj, stages, warnings


def stage2_hto(model, task, tmap, sequence: ContactSequence, seed: dict,
               options=None):
    """Single third-order multi-phase solve from the interpolated seed."""
    fes = tuple(ph.fe for ph in sequence.phases)
    call = StageCall("hto", "third", fes, None, task.use_terrain,
                     label="staged fixed-gait solve")
    schedule = StageSchedule((call,))
    traj, stages, warnings, _, result = run_schedule(
        model, task, tmap, schedule, options, sequence=sequence, seed=seed)
    return traj, stages[0], warnings, result


def default_force_threshold(model) -> float:
    par = model.params()
    return FORCE_THRESHOLD_SCALE * par.m * par.g_mag


def run_sco(model, task, tmap, options=None, rng=None):
    """Full staged run: centroidal discovery, extraction, seeding, one
    third-order fixed-gait solve."""
    if rng is None:
        rng = np.random.default_rng(0)
    traj1, stages1, warn1 = stage1_centroidal_cio(model, task, tmap, options)
    sequence = extract_contact_sequence(
        traj1, default_force_threshold(model),
        fe_per_phase=task.fe_per_phase,
        duration_bounds=task.phase_duration_bounds)
    seed = seed_hto(traj1, sequence, model, rng=rng)
    traj2, stage2, warn2, _ = stage2_hto(model, task, tmap, sequence, seed,
                                         options)
    report = RunReport(pipeline="sco", stages=stages1 + [stage2],
                       sequence=sequence, warnings=warn1 + warn2,
                       extra={"ik_failures": int(seed["_ik_failures"]),
                              "ik_points": int(seed["_ik_points"])})
    return traj2, report


def run_standard_hto(model, task, tmap, sequence: ContactSequence,
                     options=None, iter_cap: int = 500):
    """Fixed-gait baseline: capped first-order solve, then third order."""
    schedule = fixed_gait_schedule(task, sequence, iter_cap)
    traj, stages, warnings, _, _ = run_schedule(model, task, tmap, schedule,
                                                options, sequence=sequence)
    return traj, RunReport(pipeline="hto", stages=stages, sequence=sequence,
                           warnings=warnings)


def run_full_cio(model, task, tmap, options=None):
    """Contact-implicit solve of the full-order model over the whole ladder."""
    schedule = ladder_schedule("full_cio", task)
    traj, stages, warnings, _, _ = run_schedule(model, task, tmap, schedule,
                                                options)
    return traj, RunReport(pipeline="cio", stages=stages, warnings=warnings)


def run_hcio(model, task, tmap, options=None, rng=None):
    """Centroidal discovery reused as a seed for the full-order
    contact-implicit ladder (no fixed gait anywhere)."""
    if rng is None:
        rng = np.random.default_rng(0)
    traj1, stages1, warn1 = stage1_centroidal_cio(model, task, tmap, options)
    seed = seed_full_order(traj1, model, task.fe_fine, task.t_nominal(),
                           rng=rng, order="first",
                           tmap=tmap if task.use_terrain else None)
    schedule = seeded_ladder_schedule("full_cio", task)
    traj, stages, warnings, _, _ = run_schedule(model, task, tmap, schedule,
                                                options, seed=seed)
    report = RunReport(pipeline="hcio", stages=stages1 + stages,
                       warnings=warn1 + warnings,
                       extra={"ik_failures": int(seed["_ik_failures"]),
                              "ik_points": int(seed["_ik_points"])})
    return traj, report
