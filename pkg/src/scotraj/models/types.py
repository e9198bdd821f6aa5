"""Shared model-layer dataclasses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ModelParams:
    """Aggregate physical parameters used by the centroidal stage."""

    m: float                      # total mass [kg]
    inertia: object               # planar: scalar [kg m^2]; spatial: 3-vector diagonal
    g: np.ndarray                 # gravity vector [m/s^2], e.g. (0, -9.81)
    mu: float = 0.8               # static friction coefficient
    torque_limits: np.ndarray = field(default_factory=lambda: np.zeros(0))
    link_masses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    link_lengths: np.ndarray = field(default_factory=lambda: np.zeros(0))
    link_coms: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("total mass must be positive")
        if np.any(np.asarray(self.inertia) <= 0):
            raise ValueError("inertia entries must be positive")
        if self.mu < 0:
            raise ValueError("friction coefficient must be nonnegative")
        self.g = np.asarray(self.g, dtype=float)

    @property
    def g_mag(self) -> float:
        return float(np.linalg.norm(self.g))


@dataclass
class CentroidalState:
    r: np.ndarray
    r_dot: np.ndarray
    r_ddot: np.ndarray
    phi: np.ndarray        # planar: shape (1,), spatial: (3,)
    phi_dot: np.ndarray
    phi_ddot: np.ndarray

    def __post_init__(self):
        for name in ("r", "r_dot", "r_ddot", "phi", "phi_dot", "phi_ddot"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains non-finite entries")
            setattr(self, name, v)
        if self.phi.shape[0] not in (1, 3):
            raise ValueError("orientation must have 1 (planar) or 3 (spatial) coordinates")


@dataclass
class FullState:
    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray
    theta_lower: np.ndarray
    theta_upper: np.ndarray

    def __post_init__(self):
        for name in ("q", "q_dot", "q_ddot", "theta_lower", "theta_upper"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.theta_lower > self.theta_upper):
            raise ValueError("joint limit region is empty")


@dataclass
class ContactPoint:
    name: str
    a: np.ndarray
    a_dot: np.ndarray = None
    a_ddot: np.ndarray = None
    lam: np.ndarray = None        # world-frame reaction force on the robot
    gamma: float = 0.0            # tangential-velocity slack

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        dim = self.a.shape[0]
        for nm in ("a_dot", "a_ddot", "lam"):
            v = getattr(self, nm)
            setattr(self, nm, np.zeros(dim) if v is None else np.asarray(v, dtype=float))


@dataclass
class FullDynamicsTerms:
    M: np.ndarray
    C: np.ndarray
    N: np.ndarray
    A: np.ndarray
    Upsilon: np.ndarray


@dataclass
class ImpactResult:
    q_dot_plus: np.ndarray
    rho_hat: np.ndarray           # cartesian impulse per active contact, flattened
    rho_normal: np.ndarray        # vertical components per active contact
    rho_tangential: np.ndarray    # horizontal components per active contact


@dataclass
class IkResult:
    theta: np.ndarray
    converged: bool
    residual: float
    clamped: bool = False


class DegenerateContactError(RuntimeError):
    """Active contact set with rank-deficient constraint rows."""
