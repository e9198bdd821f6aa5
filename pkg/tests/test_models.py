import math

import numpy as np
import pytest
import scipy.linalg

from scotraj import ad
from scotraj.models import (ContactPoint, ContactSpec, DegenerateContactError, LinkSpec,
                            ModelFileError, ModelParams, PlanarModel, centroidal_accel,
                            load_model, torque_estimate)


@pytest.fixture(scope="module")
def hopper():
    return load_model("hopper")


@pytest.fixture(scope="module")
def biped():
    return load_model("biped")


def point_mass_model(m=1.0):
    return PlanarModel(name="pm", base_mass=m, base_inertia=0.1, base_com=(0.0, 0.0),
                       links=[], contacts=[ContactSpec("p", -1, (0.0, 0.0))])


def random_q(model, rng, spread=1.0):
    th = rng.uniform(model.theta_lower, model.theta_upper) * 0.6
    base = rng.uniform([-1, 0.2, -0.5], [1, 1.5, 0.5]) * spread
    return np.concatenate([th, base])


# -- independent FK oracle built from homogeneous transforms -------------------


def rotm(a):
    return np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])


def homog(a, t):
    H = np.eye(3)
    H[:2, :2] = rotm(a)
    H[:2, 2] = t
    return H


def fk_oracle(model, q):
    T = [homog(q[model.iphi], [q[model.irx], q[model.irz]])]
    for k, ln in enumerate(model.links):
        Tp = T[ln.parent + 1]
        if ln.joint == "revolute":
            Tk = Tp @ homog(0.0, ln.attach) @ homog(ln.mount_angle + q[k], [0, 0])
        else:
            Tk = Tp @ homog(0.0, ln.attach) @ homog(ln.mount_angle, [0, 0]) @ homog(0.0, [q[k], 0])
        T.append(Tk)
    out = []
    for c in model.contacts:
        p = T[c.link + 1] @ np.array([c.point[0], c.point[1], 1.0])
        out.append(p[:2])
    return np.concatenate(out)


class TestForwardKinematics:
    def test_biped_zero_pose_feet_at_origin(self, biped):
        q = biped.home_q(0.0, 1.0, 0.0)
        feet = biped.fk_contacts(list(q))
        for fx, fz in feet:
            assert fx == pytest.approx(0.0, abs=1e-12)
            assert fz == pytest.approx(0.0, abs=1e-12)
        assert biped.standing_height() == pytest.approx(1.0)

    def test_hip_right_angle_moves_foot_horizontally(self, biped):
        q = biped.home_q(0.0, 1.0, 0.0)
        q[0] = math.pi / 2  # left hip
        feet = biped.fk_contacts(list(q))
        lx, lz = feet[0]
        assert abs(lx) == pytest.approx(1.0, abs=1e-12)  # displaced by leg length
        assert lz == pytest.approx(1.0, abs=1e-12)       # at hip height

    def test_matches_transform_oracle(self, biped, hopper):
        rng = np.random.default_rng(3)
        for model in (biped, hopper):
            for _ in range(20):
                q = random_q(model, rng)
                mine = np.array([ad.value(s) for s in model.fk_contacts_flat(list(q))])
                np.testing.assert_allclose(mine, fk_oracle(model, q), atol=1e-12)

    def test_base_translation_equivariance(self, biped):
        rng = np.random.default_rng(4)
        q = random_q(biped, rng)
        d = np.array([0.3, -0.2])
        q2 = q.copy()
        q2[biped.irx] += d[0]
        q2[biped.irz] += d[1]
        f1 = np.array([ad.value(s) for s in biped.fk_contacts_flat(list(q))])
        f2 = np.array([ad.value(s) for s in biped.fk_contacts_flat(list(q2))])
        np.testing.assert_allclose(f2 - f1, np.tile(d, biped.n_contacts), atol=1e-12)


class TestContactJacobian:
    def test_matches_finite_difference(self, biped, hopper):
        rng = np.random.default_rng(5)
        h = 1e-6
        for model in (biped, hopper):
            for _ in range(20):
                q = random_q(model, rng)
                A = model.contact_jacobian(q)
                for k in range(model.n_q):
                    e = np.zeros(model.n_q)
                    e[k] = h
                    fd = (fk_oracle(model, q + e) - fk_oracle(model, q - e)) / (2 * h)
                    np.testing.assert_allclose(A[:, k], fd, rtol=1e-6, atol=1e-7)

    def test_translation_rows_identity(self, biped):
        rng = np.random.default_rng(6)
        for _ in range(5):
            A = biped.contact_jacobian(random_q(biped, rng))
            for i in range(biped.n_contacts):
                np.testing.assert_allclose(A[2 * i:2 * i + 2, biped.irx:biped.irx + 2], np.eye(2))

    def test_straight_leg_singularity(self, hopper):
        q = hopper.home_q(0.0, 0.8, 0.0)  # straight leg
        J = hopper.contact_jacobian(q)[:, :hopper.n_j]
        s = np.linalg.svd(J, compute_uv=False)
        assert s[-1] < 1e-10  # rank loss along the leg axis
        q[1] = 0.6            # bend the knee
        s = np.linalg.svd(hopper.contact_jacobian(q)[:, :hopper.n_j], compute_uv=False)
        assert s[-1] > 1e-2

    def test_contact_velocity_consistency(self, biped):
        rng = np.random.default_rng(7)
        q = random_q(biped, rng)
        qd = rng.normal(size=biped.n_q)
        v = np.array([ad.value(s) for s in biped.contact_velocities(list(q), list(qd))])
        np.testing.assert_allclose(v, biped.contact_jacobian(q) @ qd, atol=1e-12)


class TestMassMatrix:
    def test_symmetric_positive_definite(self, biped):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            M = biped.mass_matrix_np(random_q(biped, rng))
            np.testing.assert_allclose(M, M.T, atol=1e-12)
            assert np.linalg.eigvalsh(M).min() > 0

    def test_point_mass_diagonal(self):
        pm = point_mass_model(2.5)
        M = pm.mass_matrix_np([0.0, 0.0, 0.3])
        np.testing.assert_allclose(M, np.diag([2.5, 2.5, 0.1]), atol=1e-14)

    def test_kinetic_energy_oracle(self, hopper):
        # independent KE: sum over bodies of point + rotational energy with
        # per-body COM velocities from differentiated positions
        rng = np.random.default_rng(9)
        q = random_q(hopper, rng)
        qd = rng.normal(size=hopper.n_q)
        _, dots = ad.jvp(lambda qq: [s for c in hopper._body_coms(qq) for s in c],
                         list(q), list(qd))
        vels = np.array(dots).reshape(-1, 2)
        wvel = [qd[hopper.iphi], qd[hopper.iphi] + qd[0], qd[hopper.iphi] + qd[0] + qd[1]]
        masses = [hopper.base_mass] + [l.mass for l in hopper.links]
        inert = [hopper.base_inertia] + [l.inertia for l in hopper.links]
        ke = sum(0.5 * m * v @ v for m, v in zip(masses, vels))
        ke += sum(0.5 * i * w ** 2 for i, w in zip(inert, wvel))
        assert hopper.kinetic_energy(list(q), list(qd)) == pytest.approx(ke, rel=1e-12)


class TestCoriolis:
    def test_vector_matches_matrix(self, biped):
        rng = np.random.default_rng(10)
        for _ in range(10):
            q = random_q(biped, rng)
            qd = rng.normal(size=biped.n_q)
            vec = np.array([ad.value(v) for v in biped.coriolis_vector(list(q), list(qd))])
            C = biped.coriolis_matrix(q, qd)
            np.testing.assert_allclose(vec, C @ qd, rtol=1e-9, atol=1e-10)

    def test_mdot_minus_2c_skew(self, biped):
        rng = np.random.default_rng(11)
        q = random_q(biped, rng)
        qd = rng.normal(size=biped.n_q)
        h = 1e-7
        Mdot = (biped.mass_matrix_np(q + h * qd) - biped.mass_matrix_np(q - h * qd)) / (2 * h)
        S = Mdot - 2 * biped.coriolis_matrix(q, qd)
        np.testing.assert_allclose(S, -S.T, atol=1e-6)


class TestFullDynamics:
    def test_free_fall(self, biped):
        q = biped.home_q(0.0, 1.0, 0.0)
        qdd = np.zeros(biped.n_q)
        qdd[biped.irz] = -9.81
        res = biped.dynamics_residual(list(q), [0.0] * biped.n_q, list(qdd),
                                      [0.0] * biped.n_j, [0.0] * (2 * biped.n_contacts))
        np.testing.assert_allclose([ad.value(r) for r in res], np.zeros(biped.n_q), atol=1e-10)

    def test_static_stand_linear_solve(self, biped):
        q = biped.home_q(0.0, 1.0, 0.0)
        q[[0, 1, 2, 3]] = [0.15, 0.3, -0.15, 0.3]  # slight crouch, both feet loaded
        N = np.array([ad.value(v) for v in biped.gravity_vector(list(q))])
        A = biped.contact_jacobian(q)
        U = biped.upsilon()
        # N = A' lam + Upsilon tau at rest; solve for (tau, lam) jointly
        B = np.hstack([U, A.T])
        sol, *_ = np.linalg.lstsq(B, N, rcond=None)
        tau, lam = sol[:biped.n_j], sol[biped.n_j:]
        res = biped.dynamics_residual(list(q), [0.0] * biped.n_q, [0.0] * biped.n_q,
                                      list(tau), list(lam))
        np.testing.assert_allclose([ad.value(r) for r in res], np.zeros(biped.n_q), atol=1e-9)

    def test_energy_conserved_on_ballistic_rollout(self, hopper):
        # unactuated, contact-free swing under gravity
        q = hopper.home_q(0.0, 2.0, 0.1)
        q[:2] = [0.4, 0.7]
        qd = np.array([1.0, -0.5, 0.3, 0.2, 0.8])

        def accel(q, qd):
            M = hopper.mass_matrix_np(q)
            c = np.array([ad.value(v) for v in hopper.coriolis_vector(list(q), list(qd))])
            N = np.array([ad.value(v) for v in hopper.gravity_vector(list(q))])
            return np.linalg.solve(M, -c - N)

        e0 = hopper.kinetic_energy(list(q), list(qd)) + ad.value(hopper.potential(list(q)))
        h = 1e-3
        for _ in range(500):
            k1v = accel(q, qd)
            k2v = accel(q + 0.5 * h * qd, qd + 0.5 * h * k1v)
            k3v = accel(q + 0.5 * h * (qd + 0.5 * h * k1v), qd + 0.5 * h * k2v)
            k4v = accel(q + h * (qd + 0.5 * h * k2v), qd + h * k3v)
            qnew = q + h * (qd + (h / 6) * (k1v + k2v + k3v))
            qd = qd + (h / 6) * (k1v + 2 * k2v + 2 * k3v + k4v)
            q = qnew
        e1 = hopper.kinetic_energy(list(q), list(qd)) + ad.value(hopper.potential(list(q)))
        assert e1 == pytest.approx(e0, rel=1e-5)

    def test_residual_vectorized_matches_scalar(self, hopper):
        rng = np.random.default_rng(12)
        n = 4
        qs = [random_q(hopper, rng) for _ in range(n)]
        qds = rng.normal(size=(n, hopper.n_q))
        qdds = rng.normal(size=(n, hopper.n_q))
        taus = rng.normal(size=(n, hopper.n_j))
        lams = rng.normal(size=(n, 2 * hopper.n_contacts))
        vec = hopper.dynamics_residual(
            list(np.array(qs).T), list(qds.T), list(qdds.T), list(taus.T), list(lams.T))
        vec = np.array([np.broadcast_to(ad.value(v), n) for v in vec])
        for k in range(n):
            one = hopper.dynamics_residual(list(qs[k]), list(qds[k]), list(qdds[k]),
                                           list(taus[k]), list(lams[k]))
            np.testing.assert_allclose(vec[:, k], [ad.value(v) for v in one], atol=1e-12)


class TestImpact:
    def test_point_mass_vertical_stop(self):
        pm = point_mass_model(1.0)
        res = pm.impact_reset([0.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0])
        np.testing.assert_allclose(res.q_dot_plus[:2], [0.0, 0.0], atol=1e-12)
        assert res.rho_normal[0] == pytest.approx(2.0)

    def test_noop_when_already_stationary(self, biped):
        q = biped.home_q(0.0, 1.0, 0.0)
        q[[0, 1, 2, 3]] = [0.2, 0.4, -0.2, 0.4]
        qd = np.zeros(biped.n_q)
        res = biped.impact_reset(q, qd, [0, 1])
        np.testing.assert_allclose(res.q_dot_plus, qd, atol=1e-12)
        np.testing.assert_allclose(res.rho_hat, 0.0, atol=1e-12)

    def test_matches_nullspace_qp_oracle(self, biped):
        rng = np.random.default_rng(13)
        for _ in range(100):
            q = random_q(biped, rng)
            qd = rng.normal(size=biped.n_q)
            active = [int(rng.integers(0, 2))]
            res = biped.impact_reset(q, qd, active)
            M = biped.mass_matrix_np(q)
            rows = [r for i in active for r in (2 * i, 2 * i + 1)]
            A = biped.contact_jacobian(q)[rows]
            Z = scipy.linalg.null_space(A)
            w = np.linalg.solve(Z.T @ M @ Z, Z.T @ M @ qd)
            v_star = Z @ w
            np.testing.assert_allclose(res.q_dot_plus, v_star, atol=1e-8)
            np.testing.assert_allclose(A @ res.q_dot_plus, 0.0, atol=1e-10)
            ke_m = 0.5 * qd @ M @ qd
            ke_p = 0.5 * res.q_dot_plus @ M @ res.q_dot_plus
            assert ke_p <= ke_m + 1e-12

    def test_momentum_balance(self, biped):
        rng = np.random.default_rng(14)
        q = random_q(biped, rng)
        qd = rng.normal(size=biped.n_q)
        res = biped.impact_reset(q, qd, [0, 1])
        M = biped.mass_matrix_np(q)
        A = biped.contact_jacobian(q)
        np.testing.assert_allclose(M @ (res.q_dot_plus - qd), A.T @ res.rho_hat, atol=1e-9)

    def test_degenerate_contacts_rejected(self):
        # two coincident contact points on the same body are redundant
        pm = PlanarModel(name="pm2", base_mass=1.0, base_inertia=0.1, base_com=(0.0, 0.0),
                         links=[], contacts=[ContactSpec("a", -1, (0.0, 0.0)),
                                             ContactSpec("b", -1, (0.0, 0.0))])
        with pytest.raises(DegenerateContactError):
            pm.impact_reset([0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0, 1])


class TestInverseKinematics:
    def test_round_trip(self, biped):
        rng = np.random.default_rng(15)
        theta0 = np.array([0.3, 0.5, -0.2, 0.7])
        q = np.concatenate([theta0, [0.1, 0.9, 0.05]])
        targets = np.array([ad.value(s) for s in biped.fk_contacts_flat(list(q))])
        res = biped.inverse_kinematics([0.1, 0.9], 0.05, targets, theta0 + rng.normal(0, 0.05, 4))
        assert res.converged
        assert res.residual <= 1e-8
        np.testing.assert_allclose(res.theta, theta0, atol=1e-5)

    def test_unreachable_flagged_with_overshoot(self, biped):
        # feet 1.3 m below a hip with 1.0 m legs: 0.3 m short
        targets = np.array([0.0, -1.3, 0.0, -1.3])
        res = biped.inverse_kinematics([0.0, 0.0], 0.0, targets, np.zeros(4))
        assert not res.converged
        assert res.residual == pytest.approx(0.3 * math.sqrt(2), abs=0.02)

    def test_knee_branch_follows_seed(self, biped):
        q = biped.home_q(0.0, 1.0, 0.0)
        q[[0, 1]] = [-0.4, 0.8]
        targets = np.array([ad.value(s) for s in biped.fk_contacts_flat(list(q))])
        res = biped.inverse_kinematics([0.0, 1.0], 0.0, targets, np.array([-0.3, 0.6, 0.0, 0.0]))
        assert res.converged
        assert res.theta[1] > 0  # bent-knee branch kept

    def test_limit_clamp_flagged(self, hopper):
        # target requires knee angle beyond its upper limit
        q = hopper.home_q(0.0, 0.8, 0.0)
        targets = np.array([0.35, 0.75])
        res = hopper.inverse_kinematics([0.0, 0.8], 0.0, targets, np.array([0.0, 2.3]))
        assert res.clamped or not res.converged


class TestCentroidal:
    def test_free_fall(self):
        p = ModelParams(m=10.0, inertia=1.0, g=np.array([0.0, -9.81]))
        rdd, pdd = centroidal_accel(p, [0.0, 1.0], [])
        np.testing.assert_allclose(rdd, [0.0, -9.81])
        np.testing.assert_allclose(pdd, [0.0])

    def test_support_through_com(self):
        p = ModelParams(m=10.0, inertia=1.0, g=np.array([0.0, -9.81]))
        c = ContactPoint("f", a=[0.0, 0.0], lam=[0.0, 98.1])
        rdd, pdd = centroidal_accel(p, [0.0, 1.0], [c])
        np.testing.assert_allclose(rdd, [0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(pdd, [0.0], atol=1e-12)

    def test_offset_contact_torque(self):
        p = ModelParams(m=10.0, inertia=1.0, g=np.array([0.0, -9.81]))
        c = ContactPoint("f", a=[0.5, 0.0], lam=[0.0, 98.1])
        rdd, pdd = centroidal_accel(p, [0.0, 1.0], [c])
        np.testing.assert_allclose(rdd, [0.0, 0.0], atol=1e-12)
        assert pdd[0] == pytest.approx(-0.5 * 98.1 / 1.0)

    def test_linearity_in_forces(self):
        rng = np.random.default_rng(16)
        p = ModelParams(m=7.0, inertia=0.8, g=np.array([0.0, -9.81]))
        r = rng.normal(size=2)
        a1, a2 = rng.normal(size=2), rng.normal(size=2)
        l1, l2 = rng.normal(size=2), rng.normal(size=2)
        base = centroidal_accel(p, r, [])
        both = centroidal_accel(p, r, [ContactPoint("1", a=a1, lam=l1),
                                       ContactPoint("2", a=a2, lam=l2)])
        one = centroidal_accel(p, r, [ContactPoint("1", a=a1, lam=l1)])
        two = centroidal_accel(p, r, [ContactPoint("2", a=a2, lam=l2)])
        for k in range(2):
            np.testing.assert_allclose(both[k] - base[k],
                                       (one[k] - base[k]) + (two[k] - base[k]), atol=1e-12)


class TestTorqueEstimate:
    def test_zero_forces(self, biped):
        A = biped.contact_jacobian(biped.home_q(0.0, 1.0, 0.0))
        np.testing.assert_allclose(torque_estimate(A, np.zeros(4), biped.n_j), np.zeros(4))

    def test_prismatic_identity_row(self):
        leg = PlanarModel(
            name="pogo", base_mass=5.0, base_inertia=0.2, base_com=(0.0, 0.0),
            links=[LinkSpec("rod", -1, (0.0, 0.0), -math.pi / 2, "prismatic",
                            0.1, 0.001, 0.5, 0.25)],
            contacts=[ContactSpec("tip", 0, (0.0, 0.0))])
        A = leg.contact_jacobian(np.array([0.4, 0.0, 1.0, 0.0]))
        assert A[1, 0] == pytest.approx(1.0)
        tau = torque_estimate(A, np.array([0.0, 50.0]), 1)
        assert tau[0] == pytest.approx(50.0)

    def test_standing_biped_matches_static_solve_joint_rows(self, biped):
        q = biped.home_q(0.0, 1.0, 0.0)
        q[[0, 1, 2, 3]] = [0.15, 0.3, -0.15, 0.3]
        N = np.array([ad.value(v) for v in biped.gravity_vector(list(q))])
        A = biped.contact_jacobian(q)
        B = np.hstack([biped.upsilon(), A.T])
        sol, *_ = np.linalg.lstsq(B, N, rcond=None)
        tau_full, lam = sol[:biped.n_j], sol[biped.n_j:]
        tau_est = torque_estimate(A, lam, biped.n_j)
        # massless-leg approximation: report the gap, assert only rough scale
        gap = np.abs(tau_est - (-tau_full))
        assert np.all(np.abs(tau_est) < 200.0)
        print(f"static torque proxy gap: {gap}")


class TestModelFiles:
    def test_bundled_models_load(self):
        h = load_model("hopper")
        assert h.n_q == 5 and h.n_contacts == 1
        assert h.params().m == pytest.approx(10.0)
        b = load_model("biped")
        assert b.n_q == 7 and b.n_contacts == 2
        assert b.params().m == pytest.approx(20.0)

    def test_missing_field_named(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("schema: sco-model/1\nname: x\ntype: planar\n"
                     "base: {inertia: 1.0, com: [0, 0]}\ncontacts: []\n")
        with pytest.raises(ModelFileError, match="base.mass"):
            load_model(p)

    def test_wrong_schema_rejected(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("schema: sco-model/999\nname: x\n")
        with pytest.raises(ModelFileError, match="schema"):
            load_model(p)

    def test_unknown_parent_named(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text(
            "schema: sco-model/1\nname: x\ntype: planar\n"
            "base: {mass: 1.0, inertia: 1.0, com: [0, 0]}\n"
            "links:\n"
            "  - {name: a, parent: nope, attach: [0, 0], mount_angle: 0.0,\n"
            "     mass: 1.0, inertia: 0.1, length: 0.5, com: 0.25}\n"
            "contacts:\n  - {name: c, link: a, point: [0.5, 0]}\n")
        with pytest.raises(ModelFileError, match=r"links\[0\].parent"):
            load_model(p)


class TestQuadrupedStub:
    def test_params(self):
        qd = load_model("quadruped")
        p = qd.params()
        assert p.m == pytest.approx(40.0)
        assert len(p.inertia) == 3 and p.torque_limits.shape == (12,)
        assert not qd.planar and qd.n_contacts == 4

    def test_gimbal_lock_rejected(self):
        qd = load_model("quadruped")
        with pytest.raises(ValueError, match="gimbal"):
            qd.validate_pose([0.0, math.pi / 2, 0.0])
        qd.validate_pose([0.3, 0.2, -0.1])

    def test_rotation_orthonormal(self):
        qd = load_model("quadruped")
        R = qd.base_rotation([0.4, 0.3, -0.2])
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0)

    def test_full_order_unavailable(self):
        qd = load_model("quadruped")
        with pytest.raises(NotImplementedError, match="centroidal"):
            qd.mass_matrix([0.0] * 18)

    def test_nominal_feet_below_hips(self):
        qd = load_model("quadruped")
        feet = qd.nominal_feet([0.0, 0.0, 0.5], [0.0, 0.0, 0.0])
        assert feet.shape == (4, 3)
        np.testing.assert_allclose(feet[:, 2], 0.5 - 0.05 - 0.45, atol=1e-12)
