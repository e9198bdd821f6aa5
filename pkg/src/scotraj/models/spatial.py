"""Spatial quadruped stub: centroidal parameters and base kinematics only.

Carries the aggregate quantities the centroidal stage needs (mass, diagonal
inertia, friction, contact count with nominal hip offsets and leg reach) and
ZYX Euler base-orientation kinematics.  Angular velocity here means the
Euler-angle rate, an approximation valid away from gimbal lock; poses near
pitch = +-pi/2 are rejected.  Full-order dynamics are intentionally not
provided for this model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import ModelParams


@dataclass
class QuadrupedStub:
    name: str
    mass: float
    inertia: tuple               # diagonal (Ixx, Iyy, Izz)
    hip_offsets: tuple           # nominal hip positions in the base frame
    leg_reach: float
    n_joints_per_leg: int = 3
    torque_limit: float = 60.0
    mu: float = 0.8
    gravity: float = 9.81

    planar: bool = False
    GIMBAL_MARGIN = 1e-6

    @property
    def n_contacts(self) -> int:
        return len(self.hip_offsets)

    @property
    def contact_names(self):
        return [f"foot{i}" for i in range(self.n_contacts)]

    @property
    def n_j(self) -> int:
        return self.n_joints_per_leg * self.n_contacts

    def params(self) -> ModelParams:
        return ModelParams(
            m=self.mass, inertia=np.asarray(self.inertia, dtype=float),
            g=np.array([0.0, 0.0, -self.gravity]), mu=self.mu,
            torque_limits=np.full(self.n_j, self.torque_limit))

    def validate_pose(self, phi) -> None:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (3,):
            raise ValueError("spatial orientation needs 3 Euler angles (ZYX)")
        if abs(abs(phi[1]) - np.pi / 2) < self.GIMBAL_MARGIN:
            raise ValueError("pose at gimbal lock (pitch = +-pi/2) rejected")

    def base_rotation(self, phi) -> np.ndarray:
        """ZYX Euler rotation matrix (yaw, pitch, roll)."""
        self.validate_pose(phi)
        y, p, r = phi
        cy, sy, cp, sp, cr, sr = np.cos(y), np.sin(y), np.cos(p), np.sin(p), np.cos(r), np.sin(r)
        return np.array([
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr]])

    def nominal_feet(self, r, phi) -> np.ndarray:
        """Feet directly below the hips at nominal reach."""
        R = self.base_rotation(phi)
        r = np.asarray(r, dtype=float)
        feet = []
        for h in self.hip_offsets:
            hip = r + R @ np.asarray(h)
            feet.append(hip - np.array([0.0, 0.0, self.leg_reach]))
        return np.array(feet)

    def _no_full_order(self, *_a, **_k):
        raise NotImplementedError(
            f"{self.name}: spatial stub provides centroidal quantities only; "
            "full-order dynamics are available for planar models")

    mass_matrix = _no_full_order
    dynamics_residual = _no_full_order
    impact_reset = _no_full_order
    inverse_kinematics = _no_full_order
