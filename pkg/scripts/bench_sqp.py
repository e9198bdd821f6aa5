"""Benchmark the SQP backend on centroidal problems at two resolutions."""

import time

import numpy as np

import scotraj.pipeline as pl
from scotraj import terrain
from scotraj.models import load_model
from scotraj.solver import SolverOptions, solve
from scotraj.transcribe.task import TaskSpec
from scotraj.trajectory import from_solution
from scotraj.transcribe.nlp1 import build_centroidal


def main():
    model = load_model("hopper")
    tmap = terrain.flat()
    task = TaskSpec(displacement=0.5, t_bounds=(0.8, 1.6))

    tr12 = build_centroidal(model, task, tmap, n_fe=12, eps=10.0,
                            order="first")
    opts = SolverOptions(max_outer=200, time_limit=240.0)
    t0 = time.monotonic()
    res12 = solve(tr12.problem, opts, tr12.problem.x0)
    print(f"coarse fe=12: {res12.status} obj={res12.objective:.4f} "
          f"viol={res12.max_violation:.2e} outer={res12.outer_iterations} "
          f"t={time.monotonic() - t0:.1f}s")
    if res12.status not in ("converged",):
        print(res12.message)
        for row in res12.log[-5:]:
            print(row)
        return

    traj12 = from_solution(tr12, res12.x)
    traj100 = pl.mesh_refine(traj12, 100)

    tr100 = build_centroidal(model, task, tmap, n_fe=100, eps=10.0,
                             order="first")
    x_warm = pl.guess_from_trajectory(tr100, traj100)
    t0 = time.monotonic()
    res_w = solve(tr100.problem, opts, x_warm)
    print(f"fine fe=100 warm: {res_w.status} obj={res_w.objective:.4f} "
          f"viol={res_w.max_violation:.2e} outer={res_w.outer_iterations} "
          f"t={time.monotonic() - t0:.1f}s")
    if res_w.status != "converged":
        for row in res_w.log[-8:]:
            print(row)

    t0 = time.monotonic()
    res_c = solve(tr100.problem, opts, tr100.problem.x0)
    print(f"fine fe=100 cold: {res_c.status} obj={res_c.objective:.4f} "
          f"viol={res_c.max_violation:.2e} outer={res_c.outer_iterations} "
          f"t={time.monotonic() - t0:.1f}s")


if __name__ == "__main__":
    main()
