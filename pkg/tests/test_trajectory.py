import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scotraj import terrain
from scotraj.models import load_model
from scotraj.trajectory import (PhaseData, Trajectory, dumps, from_solution,
                                loads)
from scotraj.transcribe import (ContactSequence, Phase, TaskSpec,
                                build_centroidal, build_hto)


@pytest.fixture(scope="module")
def hopper():
    return load_model("hopper")


def tiny_full_phase(fe=2, P=1, t0=0.0, active=(0,), nj=2, c=1):
    nq = nj + 3
    times = t0 + (np.arange(fe)[:, None] + np.linspace(1 / P, 1, P)) * 0.1
    rng = np.random.default_rng(7 + fe)
    states = {"q": rng.normal(size=(fe, P, nq)),
              "qd": rng.normal(size=(fe, P, nq)),
              "qdd": rng.normal(size=(fe, P, nq)),
              "tau": rng.normal(size=(fe, nj)),
              "a": rng.normal(size=(fe, P, c, 2)),
              "ad": rng.normal(size=(fe, P, c, 2)),
              "lam": rng.uniform(0, 5, size=(fe, P, c, 3))}
    starts = {"q0": rng.normal(size=nq), "qd0": rng.normal(size=nq),
              "a0": rng.normal(size=(c, 2))}
    return PhaseData(active=active, duration=fe * 0.1, times=times,
                     states=states, starts=starts)


def two_phase_traj():
    p0 = tiny_full_phase(fe=2, active=(0,))
    p1 = tiny_full_phase(fe=3, t0=0.2, active=())
    p1.impulse = np.array([[1.5, 0.25, 0.0]])
    return Trajectory(kind="hto", order="first", n_joints=2, n_contacts=1,
                      phases=[p0, p1], meta={"pipeline": "hto",
                                             "note": "unit test case"})


class TestInvariants:
    def test_times_must_increase(self):
        ph = tiny_full_phase()
        ph.times[1, 0] = ph.times[0, 0]
        with pytest.raises(ValueError):
            PhaseData(active=(0,), duration=0.2, times=ph.times,
                      states=ph.states)

    def test_phase_grids_must_be_ordered(self):
        p0 = tiny_full_phase(t0=1.0)
        p1 = tiny_full_phase(fe=3, t0=0.0)
        with pytest.raises(ValueError):
            Trajectory(kind="hto", order="first", n_joints=2, n_contacts=1,
                       phases=[p0, p1])

    def test_state_shape_checked(self):
        ph = tiny_full_phase()
        ph.states["q"] = ph.states["q"][:1]
        with pytest.raises(ValueError):
            PhaseData(active=(0,), duration=0.2, times=ph.times,
                      states=ph.states)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            Trajectory(kind="mystery", order="first", n_joints=2,
                       n_contacts=1, phases=[tiny_full_phase()])

    def test_accessors(self):
        tr = two_phase_traj()
        assert tr.n_phases == 2
        assert tr.total_duration == pytest.approx(0.5)
        assert tr.state("q").shape == (5, 1, 5)
        assert tr.times().shape == (5, 1)


class TestRoundTrip:
    def test_full_kind_exact(self):
        tr = two_phase_traj()
        back = loads(dumps(tr))
        assert back.kind == tr.kind and back.order == tr.order
        assert back.meta == tr.meta
        assert back.n_phases == 2
        for a, b in zip(tr.phases, back.phases):
            assert a.active == b.active
            assert a.duration == b.duration
            assert np.array_equal(a.times, b.times)
            assert set(a.states) == set(b.states)
            for k in a.states:
                assert np.array_equal(a.states[k], b.states[k]), k
            assert set(a.starts) == set(b.starts)
            for k in a.starts:
                assert np.array_equal(a.starts[k], b.starts[k]), k
        assert np.array_equal(tr.phases[1].impulse, back.phases[1].impulse)
        assert back.phases[0].impulse is None

    def test_centroidal_kind_exact(self, hopper):
        task = TaskSpec(name="hop", displacement=0.5)
        tr = build_centroidal(hopper, task, terrain.flat(), 3, 10.0, "third")
        traj = from_solution(tr, tr.problem.x0)
        back = loads(dumps(traj))
        for k, arr in traj.phases[0].states.items():
            assert np.array_equal(arr, back.phases[0].states[k]), k
        for k, arr in traj.phases[0].starts.items():
            assert np.array_equal(arr, back.phases[0].starts[k]), k
        assert set(traj.phases[0].starts) == {"r0", "rd0", "phi0", "phid0",
                                              "a0", "ad0", "th0"}
        assert back.phases[0].active is None

    def test_save_load_file(self, tmp_path):
        tr = two_phase_traj()
        path = tmp_path / "traj.csv"
        tr.save(path)
        back = Trajectory.load(path)
        assert np.array_equal(back.state("lam"), tr.state("lam"))

    def test_dumps_deterministic(self):
        assert dumps(two_phase_traj()) == dumps(two_phase_traj())

    def test_header_carries_units(self):
        text = dumps(two_phase_traj())
        header = [ln for ln in text.splitlines()
                  if not ln.startswith("#")][0]
        assert "time[s]" in header
        assert "base_x[m]" in header
        assert "lam0_n[N]" in header
        assert "tau0[N*m]" in header

    def test_row_count_matches_grid(self):
        text = dumps(two_phase_traj())
        rows = [ln for ln in text.splitlines() if not ln.startswith("#")]
        assert len(rows) - 1 == 2 + 3

    def test_missing_header_rejected(self):
        with pytest.raises(ValueError):
            loads("# kind hto\n")

    def test_missing_kind_rejected(self):
        text = dumps(two_phase_traj())
        stripped = "\n".join(ln for ln in text.splitlines()
                             if not ln.startswith("# kind"))
        with pytest.raises(ValueError):
            loads(stripped)

    @given(st.integers(1, 4), st.integers(1, 3))
    @settings(max_examples=20, deadline=None)
    def test_any_grid_round_trips(self, fe, reps):
        ph = tiny_full_phase(fe=fe)
        tr = Trajectory(kind="hto", order="first", n_joints=2, n_contacts=1,
                        phases=[ph], meta={"reps": str(reps)})
        back = loads(dumps(tr))
        assert np.array_equal(back.phases[0].states["qdd"],
                              ph.states["qdd"])


class TestFromSolution:
    def test_centroidal_structure(self, hopper):
        task = TaskSpec(name="hop", displacement=0.5)
        tr = build_centroidal(hopper, task, terrain.flat(), 4, 10.0, "first")
        traj = from_solution(tr, tr.problem.x0)
        assert traj.kind == "centroidal" and traj.order == "first"
        ph = traj.phases[0]
        assert ph.times.shape == (4, 1)
        assert ph.duration == pytest.approx(task.t_nominal())
        assert ph.states["r"].shape == (4, 1, 2)
        assert ph.states["lam"].shape == (4, 1, 1, 3)
        assert ph.states["tau"].shape == (4, 2)
        assert ph.impulse is None

    def test_hto_structure(self, hopper):
        task = TaskSpec(name="hop", displacement=0.5)
        seq = ContactSequence(phases=(Phase(active=(0,), fe=2, duration=0.4),
                                      Phase(active=(), fe=2, duration=0.3),
                                      Phase(active=(0,), fe=2, duration=0.4)))
        tr = build_hto(hopper, task, terrain.flat(), seq, "third")
        traj = from_solution(tr, tr.problem.x0)
        assert traj.kind == "hto" and traj.n_phases == 3
        assert traj.phases[0].impulse is None
        assert traj.phases[1].impulse is None
        assert traj.phases[2].impulse is not None
        assert traj.phases[2].impulse.shape == (1, 3)
        t = traj.times().ravel()
        assert np.all(np.diff(t) > 0)
        durs = [ph.duration for ph in traj.phases]
        assert traj.total_duration == pytest.approx(sum(durs))
        back = loads(dumps(traj))
        assert np.array_equal(back.phases[2].impulse,
                              traj.phases[2].impulse)

    def test_phase_grid_starts_after_boundary(self, hopper):
        task = TaskSpec(name="hop", displacement=0.5)
        seq = ContactSequence(phases=(Phase(active=(0,), fe=2, duration=0.5),
                                      Phase(active=(), fe=2, duration=0.5)))
        tr = build_hto(hopper, task, terrain.flat(), seq, "first")
        traj = from_solution(tr, tr.problem.x0)
        end0 = traj.phases[0].times[-1, -1]
        assert end0 == pytest.approx(traj.phases[0].duration)
        assert traj.phases[1].times[0, 0] > end0
