"""Smooth terrain height maps built from sums of sigmoid steps.

Height depends on x only.  All queries accept plain floats/arrays or dual
numbers, so the same expressions serve both constraint evaluation and
derivative passes.  Rotation of contact frames by the local ground angle is
the transcription's job; this module only answers height, slope, and
vertical-gap queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ad

EXP_CLAMP = 500.0


@dataclass(frozen=True)
class TerrainMap:
    """Sum of sigmoid steps: h0(x) = sum_k zeta_k / (1 + exp(-psi_k x - xi_k)).

    zeta_k is the step magnitude [m], psi_k > 0 the sharpness [1/m], and
    xi_k the offset inside the exponent (a step centered at x0 has
    xi = -psi * x0).  flat_override short-circuits everything to h0 = 0.
    """

    steps: tuple = field(default_factory=tuple)
    flat_override: bool = False

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple((float(z), float(p), float(o)) for z, p, o in self.steps))
        for _, psi, _ in self.steps:
            if psi <= 0.0:
                raise ValueError("sigmoid sharpness psi must be positive")


def flat() -> TerrainMap:
    return TerrainMap(steps=(), flat_override=True)


def single_step(zeta: float, psi: float, x0: float = 0.0) -> TerrainMap:
    return TerrainMap(steps=((zeta, psi, -psi * x0),))


def pit(depth: float, width: float, psi: float = 50.0, center: float = 0.0) -> TerrainMap:
    """Down-step then up-step forming a pit of the given depth and width."""
    x0 = center - 0.5 * width
    x1 = center + 0.5 * width
    return TerrainMap(steps=((-depth, psi, -psi * x0), (depth, psi, -psi * x1)))


def _sigmoid(arg):
    # clamp the exponent, not the argument's derivative path: the clamp only
    # zeroes the slope where the sigmoid is already saturated flat
    return 1.0 / (1.0 + ad.exp(ad.clip(-arg, -EXP_CLAMP, EXP_CLAMP)))


def height(tmap: TerrainMap, x):
    if tmap.flat_override or not tmap.steps:
        return 0.0 * x
    h = 0.0
    for zeta, psi, xi in tmap.steps:
        h = h + zeta * _sigmoid(psi * x + xi)
    return h


def slope(tmap: TerrainMap, x):
    if tmap.flat_override or not tmap.steps:
        return 0.0 * x
    s = 0.0
    for zeta, psi, xi in tmap.steps:
        sig = _sigmoid(psi * x + xi)
        s = s + zeta * psi * sig * (1.0 - sig)
    return s


def slope_angle(tmap: TerrainMap, x):
    return ad.atan(slope(tmap, x))


def gap(tmap: TerrainMap, point):
    """Signed vertical distance from a contact point to the surface.

    point is (x, z) or (x, y, z); only x and the last (vertical) coordinate
    matter.
    """
    return point[-1] - height(tmap, point[0])
