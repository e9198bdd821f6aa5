"""Bundled augmented-Lagrangian solver with a swappable backend interface.

Inequality rows get bounded slack variables so the inner problem is a bound
constrained minimization of the augmented Lagrangian over scaled variables
and equilibrated rows.  The default inner solver is a projected
Levenberg/Gauss-Newton iteration: the model Hessian is mu J'J plus the exact
objective curvature, damped Marquardt style, factorized sparse, with a
backtracking projected line search.  L-BFGS-B is available as an alternative
inner method.  Multiplier updates follow the classic safeguarded scheme:
penalties grow only when feasibility stalls, multipliers stay inside a box,
and the inner tolerance tightens as the outer loop progresses.

External solvers can be plugged in through `SolverBackend`; `dump_problem`
writes the numeric problem data (bounds, scales, start point, constraint
group catalog) as JSON for out-of-process solvers, which then exchange
iterates through their own evaluation hook.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from .nlp import EvalError, NlpProblem

_BIG = 1.0e30


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1.0e-6
    opt_tol: float = 1.0e-4
    max_iter: int = 3000            # total inner-iteration budget
    max_outer: int = 60
    inner_iter: int = 200           # per outer solve
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1.0e8
    multiplier_bound: float = 1.0e8
    method: str = "sqp"             # "sqp" | "al"
    inner_method: str = "newton"    # "newton" | "lbfgsb" (al backend)
    time_limit: float = float("inf")  # seconds

    def __post_init__(self):
        if self.feas_tol <= 0 or self.opt_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.penalty_init <= 0 or self.penalty_growth <= 1:
            raise ValueError("penalty schedule must grow")
        if self.method not in ("sqp", "al"):
            raise ValueError("method must be 'sqp' or 'al'")
        if self.inner_method not in ("newton", "lbfgsb"):
            raise ValueError("inner_method must be 'newton' or 'lbfgsb'")


@dataclass
class SolveResult:
    status: str                     # converged | max_iter | time_limit | error | diverged
    x: np.ndarray
    objective: float
    max_violation: float
    iterations: int                 # cumulative inner iterations
    outer_iterations: int
    stationarity: float
    penalty: float
    wall_time: float
    message: str = ""
    log: list = field(default_factory=list)
    multipliers: np.ndarray = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> dict:
        return {"status": self.status, "objective": float(self.objective),
                "max_violation": float(self.max_violation),
                "iterations": int(self.iterations),
                "outer_iterations": int(self.outer_iterations),
                "stationarity": float(self.stationarity),
                "penalty": float(self.penalty),
                "wall_time": float(self.wall_time),
                "message": self.message}

    def format_log(self) -> str:
        lines = ["outer    objective   violation     penalty   step_norm  inner"]
        for e in self.log:
            lines.append(f"{e['outer']:5d} {e['objective']:12.5e} "
                         f"{e['violation']:11.4e} {e['penalty']:11.4e} "
                         f"{e['step_norm']:11.4e} {e['inner']:6d}")
        return "\n".join(lines)


class SolverBackend:
    """Interface for NLP solving; implement `solve` to plug in another solver."""

    def solve(self, problem: NlpProblem, options: SolverOptions,
              x0: np.ndarray) -> SolveResult:
        raise NotImplementedError


def warm_start(problem: NlpProblem, previous) -> np.ndarray:
    """Initial point from an earlier result, projected onto the bounds."""
    x = previous.x if hasattr(previous, "x") else np.asarray(previous, float)
    if x.shape != (problem.n_x,):
        raise ValueError(
            f"warm start has {x.shape} values, problem needs ({problem.n_x},)")
    return np.clip(x, problem.x_lb, problem.x_ub)


def dump_problem(problem: NlpProblem, path, x=None):
    """Write the numeric problem description as JSON for external backends."""
    data = {
        "n_x": problem.n_x, "n_c": problem.n_c,
        "x_lb": problem.x_lb.tolist(), "x_ub": problem.x_ub.tolist(),
        "x_scale": problem.x_scale.tolist(),
        "x0": (problem.x0 if x is None else np.asarray(x)).tolist(),
        "c_lb": problem.c_lb.tolist(), "c_ub": problem.c_ub.tolist(),
        "blocks": [{"name": b.name, "offset": b.offset, "count": b.count}
                   for b in problem.blocks],
        "groups": [{"name": g.name, "row0": g.row0, "rows": g.n_rows,
                    "instances": g.n_inst, "outputs": g.n_out,
                    "args": int(g.idx.shape[1])}
                   for g in problem.groups],
    }
    with open(path, "w") as fh:
        json.dump(data, fh)
    return data


def _cauchy_point(value_at, y, g, H, lo, hi, val):
    """Backtracking search along the projected gradient path.

    Allows bound activation and release in bulk, which a Newton step
    restricted to the current free set cannot do.  Returns the new point,
    its value, and whether any progress was made.
    """
    gHg = float(g @ (H @ g))
    gg = float(g @ g)
    if gg == 0.0:
        return y, val, False
    t = gg / gHg if gHg > 0 else 1.0 / np.sqrt(gg)
    t *= 2.0
    for _ in range(30):
        y_t = np.clip(y - t * g, lo, hi)
        d = y_t - y
        gd = float(g @ d)
        if gd < 0:
            val_t = value_at(y_t)
            if val_t <= val + 1e-4 * gd:
                return y_t, val_t, True
        t *= 0.5
    return y, val, False


def _newton_bound_solve(parts, value_at, lo, hi, y, omega, max_it, mu):
    """Two-phase projected Levenberg/Gauss-Newton for the bound-constrained
    inner problem.  `parts` returns (value, gradient, row Jacobian,
    objective curvature); the model Hessian is mu J'J plus that curvature.
    Each iteration takes a projected-gradient Cauchy step to settle the
    active set, then refines on the free set with a damped Newton solve."""
    fixed = lo == hi
    delta = 1.0e-3
    nit = 0
    while nit < max_it:
        val, g, J, H_obj = parts(y)
        step = np.clip(y - g, lo, hi) - y
        if (float(np.max(np.abs(step))) if step.size else 0.0) <= omega:
            break
        nit += 1
        H = (mu * (J.T @ J) + H_obj).tocsr()
        y_c, val_c, moved = _cauchy_point(value_at, y, g, H, lo, hi, val)
        d_c = y_c - y
        g_c = g + H @ d_c
        free = ~(((y_c <= lo + 1e-12) & (g_c > 0))
                 | ((y_c >= hi - 1e-12) & (g_c < 0)) | fixed)
        fidx = np.flatnonzero(free)
        if len(fidx) == 0:
            if not moved:
                break
            y = y_c
            continue
        Hf = H[fidx][:, fidx].tocsc()
        d_h = np.maximum(Hf.diagonal(), 1e-8)
        accepted = False
        for _ in range(12):
            try:
                p = spla.splu(Hf + sp.diags(delta * d_h + 1e-12)) \
                    .solve(-g_c[fidx])
            except RuntimeError:
                delta *= 10.0
                continue
            if not np.all(np.isfinite(p)):
                delta *= 10.0
                continue
            alpha = 1.0
            for _ in range(10):
                y_t = y_c.copy()
                y_t[fidx] = y_c[fidx] + alpha * p
                np.clip(y_t, lo, hi, out=y_t)
                gd = float(g_c @ (y_t - y_c))
                if gd < 0 and value_at(y_t) <= val_c + 1e-4 * gd:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                y_new = y_t
                delta = max(delta * (0.33 if alpha == 1.0 else 2.0), 1e-10)
                break
            delta *= 10.0
        if not accepted:
            if not moved:
                break
            y_new = y_c
        step_size = float(np.max(np.abs(y_new - y)))
        y = y_new
        if step_size <= 1e-14 * (1.0 + float(np.max(np.abs(y)))):
            break
    return y, nit


class AugmentedLagrangian(SolverBackend):
    def solve(self, problem, options, x0):
        t_start = time.monotonic()
        opt = options
        n_x, n_c = problem.n_x, problem.n_c

        scale = np.where(problem.x_scale > 0, problem.x_scale, 1.0)
        xs_lb = problem.x_lb / scale
        xs_ub = problem.x_ub / scale

        eq = np.isclose(problem.c_lb, problem.c_ub)
        ineq = ~eq
        n_s = int(np.sum(ineq))
        s_lb = problem.c_lb[ineq]
        s_ub = problem.c_ub[ineq]
        rhs = np.where(eq, problem.c_lb, 0.0)

        y = np.empty(n_x + n_s)
        y[:n_x] = np.clip(x0, problem.x_lb, problem.x_ub) / scale
        lam = np.zeros(n_c)
        mu = opt.penalty_init

        # equilibrate rows so the penalty treats them uniformly
        _, (jr, jc, jv) = problem.eval_derivatives(y[:n_x] * scale)
        row_norm = np.ones(n_c)
        np.maximum.at(row_norm, jr, np.abs(jv) * scale[jc])
        d_row = np.maximum(row_norm, 1.0)

        idx_ineq = np.flatnonzero(ineq)
        slack_col = np.full(n_c, -1, dtype=np.int64)
        slack_col[idx_ineq] = n_x + np.arange(n_s)
        lo_y = np.concatenate([xs_lb, s_lb])
        hi_y = np.concatenate([xs_ub, s_ub])
        bounds = [(lo if np.isfinite(lo) else None,
                   hi if np.isfinite(hi) else None)
                  for lo, hi in zip(lo_y, hi_y)]

        def residual(c, s):
            e = c - rhs
            e[ineq] = c[ineq] - s
            return e

        def initial_slacks(x):
            c = problem.eval_constraints(x)
            return np.clip(c[ineq], s_lb, s_ub)

        def al_value_grad(yv):
            x = yv[:n_x] * scale
            s = yv[n_x:]
            f = problem.eval_objective(x)
            grad_f, (rows, cols, vals) = problem.eval_derivatives(x)
            c = problem.eval_constraints(x)
            e = residual(c, s) / d_row
            w = (lam + mu * e) / d_row
            gx = grad_f.copy()
            np.add.at(gx, cols, vals * w[rows])
            g = np.empty_like(yv)
            g[:n_x] = gx * scale
            g[n_x:] = -w[ineq]
            val = f + lam @ e + 0.5 * mu * (e @ e)
            return val, g

        def al_value(yv):
            x = yv[:n_x] * scale
            f = problem.eval_objective(x)
            c = problem.eval_constraints(x)
            e = residual(c, yv[n_x:]) / d_row
            return f + lam @ e + 0.5 * mu * (e @ e)

        def al_parts(yv):
            """Value, gradient, scaled row Jacobian, objective curvature."""
            x = yv[:n_x] * scale
            s = yv[n_x:]
            f = problem.eval_objective(x)
            grad_f, (rows, cols, vals) = problem.eval_derivatives(x)
            c = problem.eval_constraints(x)
            e = residual(c, s) / d_row
            w = (lam + mu * e) / d_row
            gx = grad_f.copy()
            np.add.at(gx, cols, vals * w[rows])
            g = np.empty_like(yv)
            g[:n_x] = gx * scale
            g[n_x:] = -w[ineq]
            val = f + lam @ e + 0.5 * mu * (e @ e)
            n_y = n_x + n_s
            r_all = np.concatenate([rows, idx_ineq])
            c_all = np.concatenate([cols, slack_col[idx_ineq]])
            v_all = np.concatenate([vals * scale[cols] / d_row[rows],
                                    -1.0 / d_row[idx_ineq]])
            J = sp.csr_matrix((v_all, (r_all, c_all)), shape=(n_c, n_y))
            hr, hc, hv = problem.eval_objective_curvature(x)
            H_obj = sp.coo_matrix((hv * scale[hr] * scale[hc], (hr, hc)),
                                  shape=(n_y, n_y)).tocsr()
            H_obj = (H_obj + H_obj.T) * 0.5
            return val, g, J, H_obj

        y[n_x:] = initial_slacks(y[:n_x] * scale)

        def violation_at(yv):
            c = problem.eval_constraints(yv[:n_x] * scale)
            e = residual(c, yv[n_x:])
            viol = float(np.max(np.abs(e))) if n_c else 0.0
            return c, e / d_row, viol

        def proj_grad_norm(yv, g):
            lo = np.concatenate([xs_lb, s_lb])
            hi = np.concatenate([xs_ub, s_ub])
            step = np.clip(yv - g, lo, hi) - yv
            return float(np.max(np.abs(step))) if step.size else 0.0

        log = []
        total_inner = 0
        status, message = "max_iter", ""
        omega = 1.0e-3
        stationarity = np.inf
        viol = np.inf
        best_viol = np.inf
        outer = 0

        try:
            _, _, viol = violation_at(y)
            _, g = al_value_grad(y)
            stationarity = proj_grad_norm(y, g)
            log.append({"outer": 0,
                        "objective": problem.eval_objective(y[:n_x] * scale),
                        "violation": viol, "penalty": mu,
                        "step_norm": 0.0, "inner": 0})
            if viol <= opt.feas_tol and stationarity <= opt.opt_tol:
                status = "converged"
            n_outer = 0 if status == "converged" else opt.max_outer
            for outer in range(1, n_outer + 1):
                if time.monotonic() - t_start > opt.time_limit:
                    status = "time_limit"
                    break
                remaining = opt.max_iter - total_inner
                if remaining <= 0:
                    status = "max_iter"
                    break
                y_prev = y.copy()
                inner_cap = min(opt.inner_iter, remaining)
                if opt.inner_method == "newton":
                    y, nit = _newton_bound_solve(
                        al_parts, al_value, lo_y, hi_y, y, omega,
                        inner_cap, mu)
                else:
                    res = minimize(al_value_grad, y, jac=True,
                                   method="L-BFGS-B", bounds=bounds,
                                   options={"maxiter": inner_cap,
                                            "gtol": omega, "ftol": 0.0,
                                            "maxcor": 25})
                    y, nit = res.x, int(res.nit)
                total_inner += nit
                _, e, viol = violation_at(y)
                _, g = al_value_grad(y)
                stationarity = proj_grad_norm(y, g)
                obj = problem.eval_objective(y[:n_x] * scale)
                log.append({"outer": outer, "objective": obj,
                            "violation": viol, "penalty": mu,
                            "step_norm": float(np.max(np.abs(y - y_prev)))
                            if y.size else 0.0,
                            "inner": nit})
                if not np.all(np.isfinite(y)):
                    status, message = "diverged", "iterate is not finite"
                    break
                if float(np.max(np.abs(y))) > 1.0e9 or obj < -1.0e12:
                    status, message = "diverged", "iterate diverged"
                    break
                if viol <= opt.feas_tol and stationarity <= opt.opt_tol:
                    status = "converged"
                    break
                # refresh multipliers with the penalty that produced the
                # residual, then grow the penalty only when the subproblem
                # failed to improve feasibility; the inner tolerance tracks
                # the remaining infeasibility
                lam = np.clip(lam + mu * e, -opt.multiplier_bound,
                              opt.multiplier_bound)
                if viol > 0.5 * best_viol and viol > opt.feas_tol:
                    mu = min(mu * opt.penalty_growth, opt.penalty_max)
                best_viol = min(best_viol, viol)
                omega = max(0.05 * opt.opt_tol, min(0.3 * omega, 0.1 * viol))
        except EvalError as err:
            status, message = "error", str(err)

        x_final = y[:n_x] * scale
        try:
            obj_final = problem.eval_objective(x_final)
            _, _, viol = violation_at(y)
        except EvalError as err:
            obj_final = np.nan
            message = message or str(err)
        return SolveResult(status=status, x=x_final, objective=obj_final,
                           max_violation=viol, iterations=total_inner,
                           outer_iterations=outer,
                           stationarity=stationarity, penalty=mu,
                           wall_time=time.monotonic() - t_start,
                           message=message, log=log, multipliers=lam)


class SequentialQp(SolverBackend):
    """Gauss-Newton sequential quadratic programming with interior-point
    subproblems.

    Each iteration solves one sparse convex QP assembled from the objective
    curvature and the linearized constraint rows, which yields the step and
    a fresh multiplier estimate together, so feasibility and stationarity
    converge without a penalty ladder.  Steps pass through a backtracking
    line search on an l1 merit function whose weight only grows.  Infeasible
    subproblems are retried with the violated rows asked to close only part
    of their gap.
    """

    def solve(self, problem, options, x0):
        t_start = time.monotonic()
        opt = options
        n_x, n_c = problem.n_x, problem.n_c
        lb, ub = problem.x_lb, problem.x_ub
        c_lb, c_ub = problem.c_lb, problem.c_ub
        x = np.clip(np.asarray(x0, dtype=float), lb, ub)
        lam = np.zeros(n_c)
        nu = 1.0
        sigma0 = 1.0e-8
        sigma = sigma0
        log = []
        status, message = "max_iter", ""
        stationarity, viol = np.inf, np.inf
        f = np.nan
        nit = 0
        step_prev, inner_prev = 0.0, 0
        fails = 0

        eq = np.isclose(c_lb, c_ub)
        idx_eq = np.flatnonzero(eq)
        idx_up = np.flatnonzero(~eq & np.isfinite(c_ub))
        idx_lo = np.flatnonzero(~eq & np.isfinite(c_lb))
        fin_ub = np.flatnonzero(np.isfinite(ub))
        fin_lb = np.flatnonzero(np.isfinite(lb))
        eye = sp.eye(n_x, format="csr")
        n_cone = (len(idx_up) + len(fin_ub) + len(idx_lo) + len(fin_lb))
        cones = []
        if len(idx_eq):
            cones.append(clarabel.ZeroConeT(len(idx_eq)))
        if n_cone:
            cones.append(clarabel.NonnegativeConeT(n_cone))

        def viol_vec(c):
            if n_c == 0:
                return np.zeros(0)
            return np.maximum(np.maximum(c_lb - c, c - c_ub), 0.0)

        def merit(xv):
            return (problem.eval_objective(xv)
                    + nu * float(np.sum(viol_vec(
                        problem.eval_constraints(xv)))))

        def solve_qp(H, grad, J, c, tau):
            reg = sigma * max(1.0, float(np.max(np.abs(H.diagonal())))
                              if H.nnz else 1.0)
            P = sp.triu(H + reg * sp.eye(n_x), format="csc")
            if not cones:
                return -spla.spsolve(P.T + sp.triu(P, k=1), grad), \
                    np.zeros(0), 0, True
            # partial closure keeps the linearization inside the box when
            # the current violation is too large to remove in one step
            gap_eq = (c_lb[idx_eq] - c[idx_eq]) * (1.0 - tau)
            hi_gap = c_ub[idx_up] - c[idx_up]
            lo_gap = c_lb[idx_lo] - c[idx_lo]
            b = np.concatenate([
                gap_eq,
                np.where(hi_gap < 0, hi_gap * (1.0 - tau), hi_gap),
                ub[fin_ub] - x[fin_ub],
                -np.where(lo_gap > 0, lo_gap * (1.0 - tau), lo_gap),
                x[fin_lb] - lb[fin_lb],
            ])
            A = sp.vstack([J[idx_eq], J[idx_up], eye[fin_ub],
                           -J[idx_lo], -eye[fin_lb]], format="csc")
            settings = clarabel.DefaultSettings()
            settings.verbose = False
            sol = clarabel.DefaultSolver(P, grad, A, b, cones,
                                         settings).solve()
            ok = sol.status in (clarabel.SolverStatus.Solved,
                                clarabel.SolverStatus.AlmostSolved)
            p = np.asarray(sol.x)
            z = np.asarray(sol.z)
            y = np.zeros(n_c)
            if ok:
                o = len(idx_eq)
                y[idx_eq] = z[:o]
                y[idx_up] += z[o:o + len(idx_up)]
                o += len(idx_up) + len(fin_ub)
                y[idx_lo] -= z[o:o + len(idx_lo)]
            return p, y, int(sol.iterations), ok and np.all(np.isfinite(p))

        try:
            for nit in range(opt.max_outer + 1):
                f = problem.eval_objective(x)
                grad, (jr, jc, jv) = problem.eval_derivatives(x)
                c = problem.eval_constraints(x)
                vv = viol_vec(c)
                viol = float(np.max(vv)) if n_c else 0.0
                gl = grad.copy()
                if n_c:
                    np.add.at(gl, jc, jv * lam[jr])
                stationarity = float(np.max(np.abs(
                    np.clip(x - gl, lb, ub) - x))) if n_x else 0.0
                log.append({"outer": nit, "objective": f, "violation": viol,
                            "penalty": nu, "step_norm": step_prev,
                            "inner": inner_prev})
                if not np.all(np.isfinite(x)) or not np.isfinite(f):
                    status, message = "diverged", "iterate is not finite"
                    break
                if float(np.max(np.abs(x)) if n_x else 0.0) > 1.0e9 \
                        or f < -1.0e12:
                    status, message = "diverged", "iterate diverged"
                    break
                if viol <= opt.feas_tol and stationarity <= opt.opt_tol:
                    status = "converged"
                    break
                if nit == opt.max_outer:
                    status = "max_iter"
                    break
                if time.monotonic() - t_start > opt.time_limit:
                    status = "time_limit"
                    break

                hr, hc, hv = problem.eval_objective_curvature(x)
                H = sp.coo_matrix((hv, (hr, hc)), shape=(n_x, n_x)).tocsr()
                H = (H + H.T) * 0.5
                J = sp.csr_matrix((jv, (jr, jc)), shape=(n_c, n_x))
                ok = False
                for tau in (0.0, 0.5, 0.9, 0.99):
                    p, y_rows, inner_prev, ok = solve_qp(H, grad, J, c, tau)
                    if ok:
                        break
                    sigma = min(sigma * 10.0, 1.0)
                if not ok:
                    status = "error"
                    message = "quadratic subproblem failed"
                    break

                y_inf = float(np.max(np.abs(y_rows))) if n_c else 0.0
                nu = max(nu, 1.1 * y_inf)
                phi0 = f + nu * float(np.sum(vv))
                desc = float(grad @ p) - nu * float(np.sum(vv))
                desc = min(desc, -1.0e-12 * (1.0 + abs(phi0)))
                alpha, accepted = 1.0, False
                for _ in range(15):
                    x_t = np.clip(x + alpha * p, lb, ub)
                    if merit(x_t) <= phi0 + 1.0e-4 * alpha * desc:
                        accepted = True
                        break
                    alpha *= 0.5
                if accepted:
                    step_prev = alpha * float(np.max(np.abs(p))) if n_x else 0.0
                    x = x_t
                    lam = np.clip(y_rows, -opt.multiplier_bound,
                                  opt.multiplier_bound)
                    fails = 0
                    if alpha == 1.0:
                        sigma = max(sigma * 0.3, sigma0)
                else:
                    step_prev = 0.0
                    sigma = min(sigma * 10.0, 1.0e2)
                    fails += 1
                    if fails >= 3:
                        message = "line search failed"
                        break
        except EvalError as err:
            status, message = "error", str(err)

        try:
            obj_final = problem.eval_objective(x)
            vv = viol_vec(problem.eval_constraints(x))
            viol = float(np.max(vv)) if n_c else 0.0
        except EvalError as err:
            obj_final = np.nan
            message = message or str(err)
        return SolveResult(status=status, x=x, objective=obj_final,
                           max_violation=viol, iterations=nit,
                           outer_iterations=nit,
                           stationarity=stationarity, penalty=nu,
                           wall_time=time.monotonic() - t_start,
                           message=message, log=log, multipliers=lam)


def solve(problem: NlpProblem, options: SolverOptions = None, x0=None,
          backend: SolverBackend = None) -> SolveResult:
    options = options or SolverOptions()
    if backend is None:
        backend = (SequentialQp() if options.method == "sqp"
                   else AugmentedLagrangian())
    start = problem.x0 if x0 is None else np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(start)):
        raise ValueError("initial point contains non-finite values")
    return backend.solve(problem, options, start)
