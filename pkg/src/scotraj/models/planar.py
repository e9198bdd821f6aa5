"""Planar articulated models: kinematics, dynamics, impacts, IK.

Convention: the robot lives in the x-z plane and rotates about the +y axis,
so a positive angle appears clockwise when x points right and z up.  The
in-plane rotation is Q(w)·v = (cos w·vx + sin w·vz, -sin w·vx + cos w·vz)
and the planar cross product (the y-component of the 3-D one) is
cross2(u, v) = u_z·v_x - u_x·v_z.

Generalized coordinates: q = [theta_0..theta_{nj-1}, r_x, r_z, phi].  All
kinematic/dynamic evaluators accept q as a sequence of generic scalars
(floats, arrays vectorized over instances, or dual numbers), so one code
path serves values, Jacobians, and the nested passes behind the Coriolis
term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import ad
from .types import (DegenerateContactError, FullDynamicsTerms, IkResult, ImpactResult,
                    ModelParams)

GRAVITY = 9.81


def cross2(ux, uz, vx, vz):
    return uz * vx - ux * vz


def rot_cw(vx, vz):
    """Derivative of a point rigid to a frame w.r.t. the frame angle."""
    return vz, -vx


def _rot(w, vx, vz):
    cw, sw = ad.cos(w), ad.sin(w)
    return cw * vx + sw * vz, -sw * vx + cw * vz


@dataclass
class LinkSpec:
    name: str
    parent: int                 # link index, or -1 for the base
    attach: tuple               # joint anchor in the parent frame [m]
    mount_angle: float          # frame offset so theta=0 is the home direction
    joint: str                  # "revolute" or "prismatic"
    mass: float
    inertia: float              # about the link COM
    length: float
    com: float                  # COM distance along the link x-axis
    limits: tuple = (-2.0 * np.pi, 2.0 * np.pi)
    torque_limit: float = 200.0


@dataclass
class ContactSpec:
    name: str
    link: int
    point: tuple                # position in the link frame


@dataclass
class PlanarModel:
    name: str
    base_mass: float
    base_inertia: float
    base_com: tuple
    links: list = field(default_factory=list)
    contacts: list = field(default_factory=list)
    mu: float = 0.8
    gravity: float = GRAVITY
    home_theta: tuple = ()

    planar: bool = True

    def __post_init__(self):
        self.n_j = len(self.links)
        self.n_q = self.n_j + 3
        self.irx, self.irz, self.iphi = self.n_j, self.n_j + 1, self.n_j + 2
        for k, ln in enumerate(self.links):
            if ln.parent >= k:
                raise ValueError(f"link {ln.name}: parent must precede it")
            if ln.joint not in ("revolute", "prismatic"):
                raise ValueError(f"link {ln.name}: unknown joint type {ln.joint}")
        # root-to-leaf joint paths, used for Jacobian columns
        self._path = []
        for k, ln in enumerate(self.links):
            p = [] if ln.parent < 0 else list(self._path[ln.parent])
            self._path.append(p + [k])
        if not self.home_theta:
            self.home_theta = tuple(0.0 for _ in self.links)

    # -- aggregate parameters -------------------------------------------------

    @property
    def contact_names(self):
        return [c.name for c in self.contacts]

    @property
    def n_contacts(self):
        return len(self.contacts)

    def params(self) -> ModelParams:
        m = self.base_mass + sum(l.mass for l in self.links)
        # centroidal inertia about the home-pose COM
        q0 = self.home_q(0.0, 0.0, 0.0)
        coms = self._body_coms(list(q0))
        masses = [self.base_mass] + [l.mass for l in self.links]
        inert = [self.base_inertia] + [l.inertia for l in self.links]
        cx = sum(mi * c[0] for mi, c in zip(masses, coms)) / m
        cz = sum(mi * c[1] for mi, c in zip(masses, coms)) / m
        itot = sum(ii + mi * ((c[0] - cx) ** 2 + (c[1] - cz) ** 2)
                   for mi, ii, c in zip(masses, inert, coms))
        return ModelParams(
            m=m, inertia=itot, g=np.array([0.0, -self.gravity]), mu=self.mu,
            torque_limits=np.array([l.torque_limit for l in self.links]),
            link_masses=np.array([l.mass for l in self.links]),
            link_lengths=np.array([l.length for l in self.links]),
            link_coms=np.array([l.com for l in self.links]))

    @property
    def theta_lower(self):
        return np.array([l.limits[0] for l in self.links])

    @property
    def theta_upper(self):
        return np.array([l.limits[1] for l in self.links])

    def home_q(self, rx, rz, phi) -> np.ndarray:
        return np.array(list(self.home_theta) + [rx, rz, phi], dtype=float)

    def standing_height(self) -> float:
        """Base height that puts the first contact on z=0 in the home pose."""
        q = self.home_q(0.0, 0.0, 0.0)
        a = self.fk_contacts(list(q))
        return -min(ad.value(az) for _, az in a)

    # -- kinematics ------------------------------------------------------------

    def _chain(self, q):
        """World angle and origin of every body (index 0 = base, k+1 = link k)."""
        phi = q[self.iphi]
        w = [phi]
        o = [(q[self.irx], q[self.irz])]
        for k, ln in enumerate(self.links):
            pb = ln.parent + 1
            ax, az = _rot(w[pb], ln.attach[0], ln.attach[1])
            ox, oz = o[pb][0] + ax, o[pb][1] + az
            if ln.joint == "revolute":
                wk = w[pb] + ln.mount_angle + q[k]
            else:
                wk = w[pb] + ln.mount_angle
                dx, dz = ad.cos(wk), -ad.sin(wk)
                ox, oz = ox + q[k] * dx, oz + q[k] * dz
            w.append(wk)
            o.append((ox, oz))
        return w, o

    def _body_coms(self, q):
        w, o = self._chain(q)
        cx, cz = _rot(w[0], self.base_com[0], self.base_com[1])
        coms = [(o[0][0] + cx, o[0][1] + cz)]
        for k, ln in enumerate(self.links):
            coms.append((o[k + 1][0] + ln.com * ad.cos(w[k + 1]),
                         o[k + 1][1] - ln.com * ad.sin(w[k + 1])))
        return coms

    def fk_contacts(self, q):
        """World contact positions, one (x, z) pair per contact point."""
        w, o = self._chain(q)
        out = []
        for c in self.contacts:
            b = c.link + 1
            px, pz = _rot(w[b], c.point[0], c.point[1])
            out.append((o[b][0] + px, o[b][1] + pz))
        return out

    def fk_contacts_flat(self, q):
        return [s for pair in self.fk_contacts(q) for s in pair]

    def contact_velocities(self, q, qd):
        """Time derivative of every contact position: A(q)·q_dot."""
        _, dots = ad.jvp(lambda qq: self.fk_contacts_flat(qq), q, qd)
        return dots

    def com(self, q):
        coms = self._body_coms(q)
        masses = [self.base_mass] + [l.mass for l in self.links]
        m = sum(masses)
        return (sum(mi * c[0] for mi, c in zip(masses, coms)) / m,
                sum(mi * c[1] for mi, c in zip(masses, coms)) / m)

    def _point_jac_cols(self, x, z, body, q, w, o):
        """Nonzero Jacobian columns of a world point rigid to a body."""
        cols = {self.irx: (1.0, 0.0), self.irz: (0.0, 1.0),
                self.iphi: rot_cw(x - q[self.irx], z - q[self.irz])}
        if body > 0:
            for j in self._path[body - 1]:
                if self.links[j].joint == "revolute":
                    cols[j] = rot_cw(x - o[j + 1][0], z - o[j + 1][1])
                else:
                    cols[j] = (ad.cos(w[j + 1]), -ad.sin(w[j + 1]))
        return cols

    def contact_jacobian_cols(self, q):
        """Per contact, the dict of nonzero (dx/dq, dz/dq) columns."""
        w, o = self._chain(q)
        out = []
        for c in self.contacts:
            b = c.link + 1
            px, pz = _rot(w[b], c.point[0], c.point[1])
            out.append(self._point_jac_cols(o[b][0] + px, o[b][1] + pz, b, q, w, o))
        return out

    def contact_jacobian(self, q) -> np.ndarray:
        """Dense A = d(contact positions)/dq, rows (x0, z0, x1, z1, ...)."""
        cols = self.contact_jacobian_cols([float(v) for v in q])
        A = np.zeros((2 * self.n_contacts, self.n_q))
        for i, cmap in enumerate(cols):
            for a, (jx, jz) in cmap.items():
                A[2 * i, a] = ad.value(jx)
                A[2 * i + 1, a] = ad.value(jz)
        return A

    # -- dynamics ----------------------------------------------------------------

    def _body_jacobians(self, q):
        """COM Jacobian columns and angular rows for every body."""
        w, o = self._chain(q)
        coms = self._body_coms(q)
        out = []
        for b in range(len(coms)):
            cols = self._point_jac_cols(coms[b][0], coms[b][1], b, q, w, o)
            ang = {self.iphi: 1.0}
            if b > 0:
                for j in self._path[b - 1]:
                    if self.links[j].joint == "revolute":
                        ang[j] = 1.0
            out.append((cols, ang))
        return out

    def mass_matrix(self, q):
        """Mass matrix as a dense list-of-lists of generic scalars."""
        masses = [self.base_mass] + [l.mass for l in self.links]
        inert = [self.base_inertia] + [l.inertia for l in self.links]
        M = [[0.0 for _ in range(self.n_q)] for _ in range(self.n_q)]
        for (cols, ang), mb, ib in zip(self._body_jacobians(q), masses, inert):
            keys = sorted(cols)
            for ii, a in enumerate(keys):
                jxa, jza = cols[a]
                for bb in keys[ii:]:
                    jxb, jzb = cols[bb]
                    M[a][bb] = M[a][bb] + mb * (jxa * jxb + jza * jzb)
            akeys = sorted(ang)
            for ii, a in enumerate(akeys):
                for bb in akeys[ii:]:
                    M[a][bb] = M[a][bb] + ib * ang[a] * ang[bb]
        for a in range(self.n_q):
            for bb in range(a):
                M[a][bb] = M[bb][a]
        return M

    def mass_matrix_np(self, q) -> np.ndarray:
        M = self.mass_matrix([float(v) for v in q])
        return np.array([[ad.value(e) for e in row] for row in M])

    def gravity_vector(self, q):
        """N = dV/dq where V is gravitational potential (closed form)."""
        masses = [self.base_mass] + [l.mass for l in self.links]
        N = [0.0 for _ in range(self.n_q)]
        for (cols, _), mb in zip(self._body_jacobians(q), masses):
            for a, (_, jz) in cols.items():
                N[a] = N[a] + mb * self.gravity * jz
        return N

    def potential(self, q):
        masses = [self.base_mass] + [l.mass for l in self.links]
        return sum(mb * self.gravity * c[1] for mb, c in zip(masses, self._body_coms(q)))

    def kinetic_energy(self, q, qd):
        M = self.mass_matrix(q)
        return 0.5 * sum(M[a][b] * qd[a] * qd[b]
                         for a in range(self.n_q) for b in range(self.n_q))

    def _mass_matrix_times(self, q, v):
        M = self.mass_matrix(q)
        return [sum(M[a][b] * v[b] for b in range(self.n_q) if not _zero(M[a][b]))
                for a in range(self.n_q)]

    def coriolis_vector(self, q, qd):
        """C(q, qd)·qd = dM/dt·qd - 1/2 grad_q(qd' M qd), via nested passes."""
        _, mdot_qd = ad.jvp(lambda qq: self._mass_matrix_times(qq, qd), q, qd)
        _, ke_cols = ad.grad(
            lambda qq: sum(x * v for x, v in zip(self._mass_matrix_times(qq, qd), qd)), q)
        return [m - 0.5 * g for m, g in zip(mdot_qd, ke_cols)]

    def contact_force_generalized(self, q, lam_world):
        """A(q)' lambda for world-frame forces, lam flat (fx0, fz0, fx1, ...)."""
        cols = self.contact_jacobian_cols(q)
        out = [0.0 for _ in range(self.n_q)]
        for i, cmap in enumerate(cols):
            fx, fz = lam_world[2 * i], lam_world[2 * i + 1]
            for a, (jx, jz) in cmap.items():
                out[a] = out[a] + jx * fx + jz * fz
        return out

    def dynamics_residual(self, q, qd, qdd, tau, lam_world):
        """M q_ddot + C q_dot + N - A' lambda - Upsilon tau, one scalar per row.

        lam_world holds world-frame force components per contact; the force
        is the ground reaction acting on the robot, so A' lambda enters with
        a minus sign for the residual to vanish at static stance with
        upward-positive normal forces.
        """
        mqdd = self._mass_matrix_times(q, qdd)
        cqd = self.coriolis_vector(q, qd)
        N = self.gravity_vector(q)
        fc = self.contact_force_generalized(q, lam_world)
        res = [mqdd[a] + cqd[a] + N[a] - fc[a] for a in range(self.n_q)]
        for j in range(self.n_j):
            res[j] = res[j] - tau[j]
        return res

    def coriolis_matrix(self, q, qd) -> np.ndarray:
        """Christoffel-form C(q, qd), plain numeric."""
        q = [float(v) for v in q]
        qd = np.asarray(qd, dtype=float)
        n = self.n_q
        _, cols = ad.jacobian(
            lambda qq: [e for row in self.mass_matrix(qq) for e in row], q)
        dM = np.array([np.reshape([ad.value(e) for e in cols[i]], (n, n))
                       for i in range(n)])  # dM[i] = dM/dq_i
        C = np.zeros((n, n))
        for k in range(n):
            for j in range(n):
                C[k, j] = 0.5 * np.sum((dM[:, k, j] + dM[j, k, :] - dM[k, :, j]) * qd)
        return C

    def upsilon(self) -> np.ndarray:
        U = np.zeros((self.n_q, self.n_j))
        U[:self.n_j, :] = np.eye(self.n_j)
        return U

    def full_dynamics_terms(self, q, qd) -> FullDynamicsTerms:
        q = [float(v) for v in q]
        return FullDynamicsTerms(
            M=self.mass_matrix_np(q),
            C=self.coriolis_matrix(q, qd),
            N=np.array([ad.value(v) for v in self.gravity_vector(q)]),
            A=self.contact_jacobian(q),
            Upsilon=self.upsilon())

    # -- impacts ----------------------------------------------------------------

    def impact_reset(self, q, qd_minus, active) -> ImpactResult:
        """Plastic impact: KKT solve of [M, -A'; A, 0]·[qd+, rho] = [M qd-; 0]."""
        active = list(active)
        if not active:
            raise ValueError("impact requires a nonempty active contact set")
        q = [float(v) for v in q]
        qd_minus = np.asarray(qd_minus, dtype=float)
        M = self.mass_matrix_np(q)
        Afull = self.contact_jacobian(q)
        rows = [r for i in active for r in (2 * i, 2 * i + 1)]
        A = Afull[rows]
        na = A.shape[0]
        K = np.block([[M, -A.T], [A, np.zeros((na, na))]])
        if np.linalg.cond(K) > 1e12:
            raise DegenerateContactError(
                f"{self.name}: redundant active contacts {active}")
        rhs = np.concatenate([M @ qd_minus, np.zeros(na)])
        sol = np.linalg.solve(K, rhs)
        qd_plus, rho = sol[:self.n_q], sol[self.n_q:]
        return ImpactResult(q_dot_plus=qd_plus, rho_hat=rho,
                            rho_normal=rho[1::2].copy(), rho_tangential=rho[0::2].copy())

    # -- inverse kinematics -------------------------------------------------------

    def inverse_kinematics(self, r, phi, foot_targets, theta_seed,
                           damping=1e-3, max_iter=200, tol=1e-8) -> IkResult:
        """Damped-least-squares joint solve with the base pose held fixed."""
        theta = np.clip(np.asarray(theta_seed, dtype=float).copy(),
                        self.theta_lower, self.theta_upper)
        targets = np.asarray(foot_targets, dtype=float).ravel()
        resid = np.inf
        for _ in range(max_iter):
            q = np.concatenate([theta, [r[0], r[1], phi]])
            feet = np.array([ad.value(s) for s in self.fk_contacts_flat(list(q))])
            e = targets - feet
            resid = float(np.linalg.norm(e))
            if resid <= tol:
                break
            J = self.contact_jacobian(q)[:, :self.n_j]
            step = np.linalg.solve(J.T @ J + damping ** 2 * np.eye(self.n_j), J.T @ e)
            theta = np.clip(theta + step, self.theta_lower, self.theta_upper)
        clamped = bool(np.any(theta <= self.theta_lower) or np.any(theta >= self.theta_upper))
        return IkResult(theta=theta, converged=resid <= tol, residual=resid, clamped=clamped)


def _zero(x) -> bool:
    return type(x) is float and x == 0.0


def torque_estimate(A: np.ndarray, lam: np.ndarray, n_joints: int) -> np.ndarray:
    """Joint-coordinate rows of A' lambda (contact-Jacobian torque proxy)."""
    return (np.asarray(A).T @ np.asarray(lam, dtype=float))[:n_joints]


def centroidal_accel(params: ModelParams, r, contacts):
    """Rigid-body COM/angular accelerations from contact forces and gravity."""
    r = np.asarray(r, dtype=float)
    dim = r.shape[0]
    fsum = np.zeros(dim)
    for c in contacts:
        fsum += c.lam
    r_ddot = fsum / params.m + params.g
    if dim == 2:
        tq = 0.0
        for c in contacts:
            ux, uz = c.a[0] - r[0], c.a[1] - r[1]
            tq += cross2(ux, uz, c.lam[0], c.lam[1])
        phi_ddot = np.array([tq / float(params.inertia)])
    else:
        tq = np.zeros(3)
        for c in contacts:
            tq += np.cross(c.a - r, c.lam)
        phi_ddot = tq / np.asarray(params.inertia, dtype=float)
    return r_ddot, phi_ddot
