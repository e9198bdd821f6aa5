"""Generic nonlinear-program container shared by all transcriptions.

A problem is a set of named variable blocks (bounds, initial values, scales),
constraint groups, and objective terms.  A constraint group is one residual
function evaluated over many instances at once: ``fn`` receives a list of
argument columns (each an array over instances, or a dual during derivative
passes) and returns a list of output columns.  The index table ``idx`` maps
each instance's argument slots to flat variable indices, which makes the
Jacobian sparsity structural and constant across x.

Rows are laid out group by group, output-major within a group: row =
group.row0 + j*n_inst + i for output j of instance i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import ad


class EvalError(RuntimeError):
    """Non-finite value produced during evaluation, with the source named."""


@dataclass
class VariableBlock:
    name: str
    offset: int
    count: int
    lb: np.ndarray
    ub: np.ndarray
    x0: np.ndarray
    scale: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.count)


@dataclass
class ConstraintGroup:
    name: str
    fn: object
    idx: np.ndarray      # (n_inst, n_args) flat variable indices
    lb: np.ndarray       # (n_inst, n_out)
    ub: np.ndarray
    row0: int
    n_out: int
    meta: dict = field(default_factory=dict)

    @property
    def n_inst(self) -> int:
        return self.idx.shape[0]

    @property
    def n_rows(self) -> int:
        return self.n_inst * self.n_out


@dataclass
class ObjectiveTerm:
    name: str
    fn: object
    idx: np.ndarray      # (n_inst, n_args)
    weight: float = 1.0


def _as_bound(v, n_inst, n_out):
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        a = np.full((n_inst, n_out), float(a))
    elif a.shape == (n_out,):
        a = np.broadcast_to(a, (n_inst, n_out)).copy()
    elif a.shape != (n_inst, n_out):
        raise ValueError(f"bound shape {a.shape} incompatible with ({n_inst}, {n_out})")
    return a


class NlpBuilder:
    def __init__(self):
        self._blocks: list[VariableBlock] = []
        self._groups: list[ConstraintGroup] = []
        self._objectives: list[ObjectiveTerm] = []
        self._n_x = 0
        self._n_rows = 0

    def add_block(self, name, count, lb=-np.inf, ub=np.inf, x0=0.0, scale=1.0, meta=None) -> VariableBlock:
        def vec(v):
            a = np.asarray(v, dtype=float)
            return np.full(count, float(a)) if a.ndim == 0 else a.astype(float).copy()

        lb_, ub_ = vec(lb), vec(ub)
        if np.any(lb_ > ub_):
            raise ValueError(f"block {name}: lb > ub")
        blk = VariableBlock(name, self._n_x, count, lb_, ub_,
                            np.clip(vec(x0), lb_, ub_), vec(scale), meta or {})
        self._blocks.append(blk)
        self._n_x += count
        return blk

    def add_group(self, name, fn, idx, lb, ub, n_out=1, meta=None):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.ndim != 2:
            raise ValueError("idx must be (n_inst, n_args)")
        if idx.size and (idx.min() < 0 or idx.max() >= self._n_x):
            raise ValueError(f"group {name}: variable index out of range")
        n_inst = idx.shape[0]
        g = ConstraintGroup(name, fn, idx,
                            _as_bound(lb, n_inst, n_out), _as_bound(ub, n_inst, n_out),
                            self._n_rows, n_out, meta or {})
        if np.any(g.lb > g.ub):
            raise ValueError(f"group {name}: lb > ub")
        self._groups.append(g)
        self._n_rows += g.n_rows
        return g

    def add_objective(self, name, fn, idx, weight=1.0):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self._n_x):
            raise ValueError(f"objective {name}: variable index out of range")
        self._objectives.append(ObjectiveTerm(name, fn, idx, float(weight)))

    def build(self) -> "NlpProblem":
        return NlpProblem(self._blocks, self._groups, self._objectives, self._n_x, self._n_rows)


class NlpProblem:
    """Immutable NLP: variables with bounds, grouped constraints, objective."""

    def __init__(self, blocks, groups, objectives, n_x, n_c):
        self.blocks = list(blocks)
        self.groups = list(groups)
        self.objectives = list(objectives)
        self.n_x = n_x
        self.n_c = n_c
        self.x_lb = np.concatenate([b.lb for b in blocks]) if blocks else np.zeros(0)
        self.x_ub = np.concatenate([b.ub for b in blocks]) if blocks else np.zeros(0)
        self.x0 = np.concatenate([b.x0 for b in blocks]) if blocks else np.zeros(0)
        self.x_scale = np.concatenate([b.scale for b in blocks]) if blocks else np.zeros(0)
        self.c_lb = np.zeros(n_c)
        self.c_ub = np.zeros(n_c)
        for g in groups:
            # output-major rows within the group
            self.c_lb[g.row0:g.row0 + g.n_rows] = g.lb.T.ravel()
            self.c_ub[g.row0:g.row0 + g.n_rows] = g.ub.T.ravel()
        self._by_name = {b.name: b for b in self.blocks}

    def block(self, name: str) -> VariableBlock:
        return self._by_name[name]

    def row_source(self, row: int):
        """Map a flat constraint row back to (group name, output j, instance i)."""
        for g in self.groups:
            if g.row0 <= row < g.row0 + g.n_rows:
                j, i = divmod(row - g.row0, g.n_inst)
                return g.name, j, i
        raise IndexError(row)

    # -- evaluation ----------------------------------------------------------

    def _gather(self, x, idx):
        return [x[idx[:, a]] for a in range(idx.shape[1])]

    def _outputs(self, g, outs):
        if not isinstance(outs, (list, tuple)):
            outs = [outs]
        if len(outs) != g.n_out:
            raise EvalError(f"group {g.name}: expected {g.n_out} outputs, got {len(outs)}")
        return outs

    def eval_constraints(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = np.zeros(self.n_c)
        for g in self.groups:
            if g.n_inst == 0:
                continue
            outs = self._outputs(g, g.fn(self._gather(x, g.idx)))
            for j, y in enumerate(outs):
                v = np.broadcast_to(np.asarray(ad.value(y), dtype=float), (g.n_inst,))
                if not np.all(np.isfinite(v)):
                    i = int(np.flatnonzero(~np.isfinite(v))[0])
                    raise EvalError(f"non-finite residual in group '{g.name}' output {j} instance {i}")
                c[g.row0 + j * g.n_inst: g.row0 + (j + 1) * g.n_inst] = v
        return c

    def eval_objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        total = 0.0
        for t in self.objectives:
            if t.idx.shape[0] == 0:
                continue
            y = t.fn(self._gather(x, t.idx))
            v = np.asarray(ad.value(y), dtype=float)
            if not np.all(np.isfinite(v)):
                raise EvalError(f"non-finite objective term '{t.name}'")
            total += t.weight * float(np.sum(v))
        return total

    def eval(self, x):
        return self.eval_objective(x), self.eval_constraints(x)

    def eval_derivatives(self, x):
        """Objective gradient and constraint Jacobian in triplet form.

        Returns (grad, (rows, cols, vals)); duplicate (row, col) entries are
        to be summed by the consumer (scipy coo semantics).
        """
        x = np.asarray(x, dtype=float)
        grad = np.zeros(self.n_x)
        rows, cols, vals = [], [], []
        for t in self.objectives:
            n_inst, n_args = t.idx.shape
            if n_inst == 0:
                continue
            duals = ad.seed_columns(self._gather(x, t.idx))
            y = t.fn(duals)
            J = ad.dot_rows(y, n_args, n_inst)
            np.add.at(grad, t.idx.ravel(), (t.weight * J.T).ravel())
        for g in self.groups:
            n_inst, n_args = g.idx.shape
            if n_inst == 0:
                continue
            outs = self._outputs(g, g.fn(ad.seed_columns(self._gather(x, g.idx))))
            col_mat = g.idx.T  # (n_args, n_inst)
            for j, y in enumerate(outs):
                J = ad.dot_rows(y, n_args, n_inst)
                if not np.all(np.isfinite(J)):
                    raise EvalError(f"non-finite Jacobian in group '{g.name}' output {j}")
                row_mat = np.broadcast_to(
                    g.row0 + j * n_inst + np.arange(n_inst), (n_args, n_inst))
                rows.append(row_mat.ravel())
                cols.append(col_mat.ravel())
                vals.append(J.ravel())
        if rows:
            return grad, (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
        return grad, (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))

    def jacobian_matrix(self, x) -> sp.csr_matrix:
        _, (r, c, v) = self.eval_derivatives(x)
        return sp.coo_matrix((v, (r, c)), shape=(self.n_c, self.n_x)).tocsr()

    def eval_objective_curvature(self, x):
        """Objective Hessian in triplet form.

        Built per term by forward differences of the forward-mode gradient;
        exact (to rounding) for the quadratic running costs, a model
        otherwise.  Duplicate entries follow coo summing semantics.
        """
        x = np.asarray(x, dtype=float)
        rows, cols, vals = [], [], []
        for t in self.objectives:
            n_inst, n_args = t.idx.shape
            if n_inst == 0:
                continue
            args = self._gather(x, t.idx)
            g0 = ad.dot_rows(t.fn(ad.seed_columns(args)), n_args, n_inst)
            for a in range(n_args):
                h = 1e-6 * max(1.0, float(np.max(np.abs(args[a]))))
                pert = [np.array(v, dtype=float, copy=True) for v in args]
                pert[a] = pert[a] + h
                g1 = ad.dot_rows(t.fn(ad.seed_columns(pert)), n_args, n_inst)
                hcol = (t.weight / h) * (g1 - g0)     # (n_args, n_inst)
                rows.append(t.idx.T.ravel())
                cols.append(np.broadcast_to(t.idx[:, a],
                                            (n_args, n_inst)).ravel())
                vals.append(hcol.ravel())
        if not rows:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        return (np.concatenate(rows).astype(np.int64),
                np.concatenate(cols).astype(np.int64),
                np.concatenate(vals))

    def constraint_violation(self, c: np.ndarray) -> np.ndarray:
        return np.maximum(np.maximum(self.c_lb - c, c - self.c_ub), 0.0)

    # -- reporting ------------------------------------------------------------

    def census(self) -> str:
        lines = [f"variables {self.n_x}  constraints {self.n_c}"]
        for b in self.blocks:
            nb = int(np.sum(np.isfinite(b.lb) | np.isfinite(b.ub)))
            lines.append(f"  var {b.name}: n={b.count} bounded={nb}")
        nnz = sum(g.n_rows * g.idx.shape[1] for g in self.groups)
        for g in self.groups:
            kind = "eq" if np.array_equal(g.lb, g.ub) else "ineq"
            lines.append(
                f"  con {g.name}: inst={g.n_inst} out={g.n_out} rows={g.n_rows} "
                f"args={g.idx.shape[1]} {kind}")
        for t in self.objectives:
            lines.append(f"  obj {t.name}: inst={t.idx.shape[0]} weight={t.weight:g}")
        lines.append(f"  jacobian nnz(structural) {nnz}")
        return "\n".join(lines)
