"""Solution container and its delimited-text serialization.

A trajectory is a list of phases, each carrying a collocation time grid,
state and force arrays, and the landing impulse applied at its start (if
any).  Contact-implicit solutions use a single phase whose active set is
`None`, meaning contact activity is governed by forces rather than a fixed
mode.  Files are plain delimited text with one row per collocation point so
solutions can be diffed, inspected, and replayed through the validator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transcribe.chains import interior_times

FORMAT_VERSION = 1

# states stored once per finite element rather than per collocation point
_PER_ELEMENT = ("th", "thd", "tau")

_CENTROIDAL_KEYS = ("r", "rd", "rdd", "phi", "phid", "phidd",
                    "th", "thd", "tau", "a", "ad", "add", "lam", "gam")
_FULL_KEYS = ("q", "qd", "qdd", "tau", "a", "ad", "lam", "gam")
_CENTROIDAL_STARTS = ("r0", "rd0", "phi0", "phid0", "a0", "ad0", "th0")
_FULL_STARTS = ("q0", "qd0", "a0")


@dataclass
class PhaseData:
    """One phase: a collocation grid plus the values living on it.

    `starts` holds each chain's value at the phase start time (the grid
    itself only covers the collocation points, which begin after it).
    """

    active: tuple | None
    duration: float
    times: np.ndarray                 # (fe, P)
    states: dict                      # name -> (fe, P, ...) or (fe, ...) array
    impulse: np.ndarray | None = None  # (c, 3), zero rows for idle contacts
    starts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 2:
            raise ValueError("times must have shape (fe, points)")
        flat = self.times.ravel()
        if flat.size > 1 and not np.all(np.diff(flat) > 0):
            raise ValueError("times must be strictly increasing")
        if self.duration <= 0:
            raise ValueError("phase duration must be positive")
        fe, P = self.times.shape
        self.states = {k: np.asarray(v, dtype=float)
                       for k, v in self.states.items()}
        for name, arr in self.states.items():
            want = (fe,) if name in _PER_ELEMENT else (fe, P)
            if arr.shape[:len(want)] != want:
                raise ValueError(
                    f"state {name!r} has shape {arr.shape}, grid is {fe}x{P}")
        if self.active is not None:
            self.active = tuple(int(k) for k in self.active)
        if self.impulse is not None:
            self.impulse = np.asarray(self.impulse, dtype=float)
        self.starts = {k: np.asarray(v, dtype=float)
                       for k, v in self.starts.items()}

    @property
    def fe(self) -> int:
        return self.times.shape[0]

    @property
    def n_points(self) -> int:
        return self.times.shape[1]


@dataclass
class Trajectory:
    """A solved motion: phases plus enough metadata to replay or audit it."""

    kind: str                          # centroidal | full_cio | hto
    order: str                         # first | third
    n_joints: int
    n_contacts: int
    phases: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("centroidal", "full_cio", "hto"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.order not in ("first", "third"):
            raise ValueError(f"unknown collocation order {self.order!r}")
        if not self.phases:
            raise ValueError("trajectory needs at least one phase")
        all_t = np.concatenate([ph.times.ravel() for ph in self.phases])
        if all_t.size > 1 and not np.all(np.diff(all_t) > 0):
            raise ValueError("phase time grids must be strictly increasing")

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def total_duration(self) -> float:
        return float(sum(ph.duration for ph in self.phases))

    def state(self, name: str) -> np.ndarray:
        """Concatenate one state over all phases along the element axis."""
        return np.concatenate([ph.states[name] for ph in self.phases])

    def times(self) -> np.ndarray:
        return np.concatenate([ph.times for ph in self.phases])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(dumps(self))

    @classmethod
    def load(cls, path) -> "Trajectory":
        with open(path) as fh:
            return loads(fh.read())


def from_solution(transcription, x) -> Trajectory:
    """Package a solution vector of a transcribed problem as a Trajectory."""
    tr = transcription
    g = tr.grids
    scheme = tr.scheme
    order = scheme.order
    nj = tr.model.n_j
    c = tr.model.n_contacts
    x = np.asarray(x, dtype=float)

    if tr.kind in ("centroidal", "full_cio"):
        keys = _CENTROIDAL_KEYS if tr.kind == "centroidal" else _FULL_KEYS
        anchors = (_CENTROIDAL_STARTS if tr.kind == "centroidal"
                   else _FULL_STARTS)
        states = {k: g[k].decode(x) for k in keys if k in g}
        starts = {k: g[k].decode(x) for k in anchors if k in g}
        times = interior_times(scheme, tr.n_fe, tr.t_f / tr.n_fe)
        phase = PhaseData(active=None, duration=tr.t_f, times=times,
                          states=states, starts=starts)
        return Trajectory(kind=tr.kind, order=order, n_joints=nj,
                          n_contacts=c, phases=[phase])

    phases = []
    t_cursor = 0.0
    for s, ph in enumerate(tr.extras["phases"]):
        t_s = float(g[f"t{s}"].decode(x))
        states = {base: g[f"{base}{s}"].decode(x)
                  for base in ("q", "qd", "qdd", "a", "ad", "tau", "lam")}
        starts = {base: g[f"{base}_{s}"].decode(x)
                  for base in ("q0", "qd0", "a0")}
        impulse = None
        if f"rho{s}" in g:
            rho = g[f"rho{s}"].decode(x)
            impulse = np.zeros((c, 3))
            for j, k in enumerate(tr.extras["rho"][s]):
                impulse[k] = rho[j]
        times = t_cursor + interior_times(scheme, ph.fe, t_s / ph.fe)
        phases.append(PhaseData(active=tuple(ph.active), duration=t_s,
                                times=times, states=states, impulse=impulse,
                                starts=starts))
        t_cursor += t_s
    return Trajectory(kind="hto", order=order, n_joints=nj, n_contacts=c,
                      phases=phases)


def _columns(kind, nj, c, present):
    """Ordered column spec: (state key, index tuple, column name, unit)."""
    cols = []
    if kind == "centroidal":
        for key, suf, unit in (("r", "", "m"), ("rd", "_d", "m/s"),
                               ("rdd", "_dd", "m/s^2")):
            for i, ax in enumerate("xz"):
                cols.append((key, (i,), f"r_{ax}{suf}", unit))
        for key, suf, unit in (("phi", "", "rad"), ("phid", "_d", "rad/s"),
                               ("phidd", "_dd", "rad/s^2")):
            cols.append((key, (), f"phi{suf}", unit))
        for key, suf, unit in (("th", "", "rad"), ("thd", "_d", "rad/s")):
            for j in range(nj):
                cols.append((key, (j,), f"th{j}{suf}", unit))
    else:
        names = [f"th{j}" for j in range(nj)] + ["base_x", "base_z", "base_w"]
        units = ["rad"] * nj + ["m", "m", "rad"]
        for key, suf, per in (("q", "", ""), ("qd", "_d", "/s"),
                              ("qdd", "_dd", "/s^2")):
            for i, nm in enumerate(names):
                cols.append((key, (i,), nm + suf, units[i] + per))
    for j in range(nj):
        cols.append(("tau", (j,), f"tau{j}", "N*m"))
    for key, suf, unit in (("a", "", "m"), ("ad", "_d", "m/s"),
                           ("add", "_dd", "m/s^2")):
        if key not in present:
            continue
        for k in range(c):
            cols.append((key, (k, 0), f"a{k}_x{suf}", unit))
            cols.append((key, (k, 1), f"a{k}_z{suf}", unit))
    for k in range(c):
        for i, nm in enumerate(("n", "tp", "tm")):
            cols.append(("lam", (k, i), f"lam{k}_{nm}", "N"))
    if "gam" in present:
        for k in range(c):
            cols.append(("gam", (k,), f"gam{k}", "m/s"))
    return cols


def _fmt(v) -> str:
    return repr(float(v))


def _active_str(active) -> str:
    if active is None:
        return "-"
    return ";".join(str(k) for k in active)


def _parse_active(text):
    if text == "-":
        return None
    if not text:
        return ()
    return tuple(int(k) for k in text.split(";"))


def dumps(traj: Trajectory) -> str:
    """Render a trajectory as delimited text, deterministically."""
    present = set(traj.phases[0].states)
    cols = _columns(traj.kind, traj.n_joints, traj.n_contacts, present)
    lines = [f"# trajectory-format {FORMAT_VERSION}",
             f"# kind {traj.kind}",
             f"# order {traj.order}",
             f"# joints {traj.n_joints}",
             f"# contacts {traj.n_contacts}"]
    for key in sorted(traj.meta):
        lines.append(f"# meta {key} {traj.meta[key]}")
    for s, ph in enumerate(traj.phases):
        lines.append(f"# phase {s} fe={ph.fe} duration={_fmt(ph.duration)} "
                     f"active={_active_str(ph.active)}")
    for s, ph in enumerate(traj.phases):
        if ph.impulse is None:
            continue
        for k in range(traj.n_contacts):
            vals = " ".join(_fmt(v) for v in ph.impulse[k])
            lines.append(f"# impulse {s} {k} {vals}")
    for s, ph in enumerate(traj.phases):
        for name in sorted(ph.starts):
            vals = " ".join(_fmt(v) for v in np.ravel(ph.starts[name]))
            lines.append(f"# start {s} {name} {vals}")
    header = ["phase", "element", "point", "time[s]"]
    header += [f"{name}[{unit}]" for _, _, name, unit in cols]
    lines.append(",".join(header))
    for s, ph in enumerate(traj.phases):
        for n in range(ph.fe):
            for p in range(ph.n_points):
                row = [str(s), str(n), str(p), _fmt(ph.times[n, p])]
                for key, idx, _, _ in cols:
                    arr = ph.states[key]
                    where = (n,) + idx if key in _PER_ELEMENT \
                        else (n, p) + idx
                    row.append(_fmt(arr[where]))
                lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Trajectory:
    """Parse text produced by `dumps` back into a Trajectory."""
    head = {}
    meta = {}
    phase_desc = {}
    impulses = {}
    starts_raw = {}
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "meta":
                meta[parts[1]] = " ".join(parts[2:])
            elif tag == "phase":
                s = int(parts[1])
                fields = dict(p.split("=", 1) for p in parts[2:])
                phase_desc[s] = fields
            elif tag == "impulse":
                s, k = int(parts[1]), int(parts[2])
                impulses.setdefault(s, {})[k] = [float(v) for v in parts[3:]]
            elif tag == "start":
                s, name = int(parts[1]), parts[2]
                starts_raw.setdefault(s, {})[name] = \
                    [float(v) for v in parts[3:]]
            else:
                head[tag] = " ".join(parts[1:])
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(line.split(","))
    if header is None:
        raise ValueError("trajectory file has no header row")
    for key in ("kind", "order", "joints", "contacts"):
        if key not in head:
            raise ValueError(f"trajectory file missing '# {key}' line")

    kind = head["kind"]
    order = head["order"]
    nj = int(head["joints"])
    c = int(head["contacts"])
    P = 1 if order == "first" else 3

    names = [h.split("[")[0] for h in header[4:]]
    by_phase = {}
    for cells in rows:
        by_phase.setdefault(int(cells[0]), []).append(cells)

    state_shapes = {"r": (2,), "rd": (2,), "rdd": (2,), "phi": (), "phid": (),
                    "phidd": (), "th": (nj,), "thd": (nj,), "tau": (nj,),
                    "q": (nj + 3,), "qd": (nj + 3,), "qdd": (nj + 3,),
                    "a": (c, 2), "ad": (c, 2), "add": (c, 2),
                    "lam": (c, 3), "gam": (c,)}
    start_shapes = {"r0": (2,), "rd0": (2,), "phi0": (), "phid0": (),
                    "a0": (c, 2), "ad0": (c, 2), "th0": (nj,),
                    "q0": (nj + 3,), "qd0": (nj + 3,)}

    phases = []
    for s in sorted(by_phase):
        desc = phase_desc.get(s, {})
        fe = int(desc.get("fe", len(by_phase[s]) // P))
        cells = by_phase[s]
        if len(cells) != fe * P:
            raise ValueError(
                f"phase {s}: {len(cells)} rows, expected {fe}x{P}")
        data = np.array([[float(v) for v in row[3:]] for row in cells])
        data = data.reshape(fe, P, -1)
        times = data[:, :, 0]
        spec = _columns(kind, nj, c, set(state_shapes))
        present = {key for key, _, name, _ in spec if name in names}
        states = {}
        for key in present:
            tail = state_shapes[key]
            if key in _PER_ELEMENT:
                states[key] = np.zeros((fe,) + tail)
            else:
                states[key] = np.zeros((fe, P) + tail)
        col_of = {name: i for i, name in enumerate(names)}
        for key, idx, name, _ in spec:
            if name not in col_of:
                continue
            vals = data[:, :, 1 + col_of[name]]
            if key in _PER_ELEMENT:
                states[key][(slice(None),) + idx] = vals[:, 0]
            else:
                states[key][(slice(None), slice(None)) + idx] = vals
        impulse = None
        if s in impulses:
            impulse = np.zeros((c, 3))
            for k, vals in impulses[s].items():
                impulse[k] = vals
        starts = {}
        for name, vals in starts_raw.get(s, {}).items():
            if name not in start_shapes:
                raise ValueError(f"unknown start anchor {name!r}")
            starts[name] = np.array(vals).reshape(start_shapes[name])
        duration = float(desc.get("duration", times[-1, -1] - times[0, 0]))
        phases.append(PhaseData(active=_parse_active(desc.get("active", "-")),
                                duration=duration, times=times,
                                states=states, impulse=impulse,
                                starts=starts))
    return Trajectory(kind=kind, order=order, n_joints=nj, n_contacts=c,
                      phases=phases, meta=meta)
