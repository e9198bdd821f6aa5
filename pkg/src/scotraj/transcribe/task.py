"""Task descriptions and contact sequences shared by all transcriptions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CostWeights:
    torque: float = 1.0        # actuation effort
    foot_accel: float = 1.0    # foot-trajectory smoothness (centroidal stage)
    base_accel: float = 1.0    # base-acceleration smoothness (centroidal stage)
    posture: float = 1.0       # deviation from nominal joint angles


@dataclass(frozen=True)
class TaskSpec:
    """Boundary conditions, time window, and discretization knobs."""

    name: str = "task"
    t_bounds: tuple = (0.5, 3.0)       # total motion time window [s]
    displacement: float = 0.0          # target base travel along x [m]
    start_base: tuple | None = None    # (x, z, pitch); None = stand at origin
    end_base: tuple | None = None      # None = start_base shifted by displacement
    start_theta: tuple | None = None   # None = model home posture
    end_theta: tuple | None = None     # None = same as start
    start_at_rest: bool = True
    end_at_rest: bool = True
    nominal_theta: tuple | None = None  # posture-cost reference; None = start
    weights: CostWeights = field(default_factory=CostWeights)
    fe_coarse: int = 12
    fe_fine: int = 100
    eps_ladder: tuple = (10.0, 0.1, 1.0e-3)
    use_terrain: bool = False
    order: str = "first"               # final collocation order for stage one
    fe_per_phase: int = 25
    phase_duration_bounds: tuple = (0.02, 3.0)

    def __post_init__(self):
        if self.t_bounds[0] <= 0 or self.t_bounds[1] < self.t_bounds[0]:
            raise ValueError("t_bounds must satisfy 0 < lo <= hi")
        if not (0 < self.fe_coarse <= self.fe_fine):
            raise ValueError("need 0 < fe_coarse <= fe_fine")
        eps = self.eps_ladder
        if len(eps) < 1 or any(e <= 0 for e in eps):
            raise ValueError("eps_ladder entries must be positive")
        if list(eps) != sorted(eps, reverse=True) or len(set(eps)) != len(eps):
            raise ValueError("eps_ladder must be strictly decreasing")
        if self.order not in ("first", "third"):
            raise ValueError("order must be 'first' or 'third'")
        if self.fe_per_phase < 1:
            raise ValueError("fe_per_phase must be positive")
        lo, hi = self.phase_duration_bounds
        if not (0 < lo < hi):
            raise ValueError("phase_duration_bounds must satisfy 0 < lo < hi")

    # Boundary poses in generalized coordinates [theta..., x, z, pitch].

    def start_pose(self, model) -> np.ndarray:
        theta = self.start_theta if self.start_theta is not None else model.home_theta
        base = self.start_base
        if base is None:
            base = (0.0, model.standing_height(), 0.0)
        return np.concatenate([np.asarray(theta, float), np.asarray(base, float)])

    def end_pose(self, model) -> np.ndarray:
        q0 = self.start_pose(model)
        theta = self.end_theta
        if theta is None:
            theta = q0[: model.n_j]
        base = self.end_base
        if base is None:
            base = q0[model.n_j:] + np.array([self.displacement, 0.0, 0.0])
        return np.concatenate([np.asarray(theta, float), np.asarray(base, float)])

    def posture_reference(self, model) -> np.ndarray:
        if self.nominal_theta is not None:
            return np.asarray(self.nominal_theta, float)
        return self.start_pose(model)[: model.n_j]

    def t_nominal(self) -> float:
        return 0.5 * (self.t_bounds[0] + self.t_bounds[1])


@dataclass(frozen=True)
class Phase:
    """One constant-contact interval: which contacts are on the ground."""

    active: tuple              # sorted contact indices in contact with terrain
    fe: int = 25
    duration: float = 0.5      # initial guess [s], refined by the solver

    def __post_init__(self):
        n = len(self.active)
        if tuple(sorted(set(self.active))) != tuple(self.active):
            raise ValueError("active set must be sorted and duplicate-free")
        if self.fe < 1:
            raise ValueError("phase needs at least one finite element")
        if self.duration <= 0:
            raise ValueError("duration guess must be positive")
        del n


@dataclass(frozen=True)
class ContactSequence:
    """Ordered phases with the invariant that neighbours differ."""

    phases: tuple
    duration_bounds: tuple = (0.02, 3.0)

    def __post_init__(self):
        if len(self.phases) == 0:
            raise ValueError("contact sequence needs at least one phase")
        for a, b in zip(self.phases[:-1], self.phases[1:]):
            if a.active == b.active:
                raise ValueError("consecutive phases must have different active sets")
        lo, hi = self.duration_bounds
        if not (0 < lo < hi):
            raise ValueError("duration_bounds must satisfy 0 < lo < hi")

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    def total_duration_guess(self) -> float:
        return sum(p.duration for p in self.phases)

    def describe(self) -> str:
        parts = []
        for p in self.phases:
            tag = ",".join(str(i) for i in p.active) if p.active else "flight"
            parts.append(f"[{tag}]x{p.fe}")
        return " -> ".join(parts)
