"""Shared result type and scaling conventions for the transcriptions."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..nlp import NlpProblem
from .collocation import CollocationScheme


@dataclass
class Transcription:
    """A built NLP plus everything needed to interpret its solution."""

    problem: NlpProblem
    grids: dict
    scheme: CollocationScheme
    model: object
    terrain: object
    task: object
    kind: str                  # "centroidal" | "full_cio" | "hto"
    eps: float | None = None
    n_fe: object = None        # int, or tuple per phase
    h: float | None = None     # fixed element length, None when time is free
    t_f: float | None = None
    sequence: object = None
    extras: dict = field(default_factory=dict)

    def decode(self, x) -> dict:
        return {name: g.decode(x) for name, g in self.grids.items()}


def _sq(values) -> float:
    return float(sum(v * v for v in values))


def cost_integrands(kind: str, weights):
    """Pointwise running-cost integrand for a stage's objective.

    The centroidal stage penalizes torque, foot and base accelerations, and
    posture deviation; the full-order stages penalize torque only.
    """
    w = weights
    for name in ("torque", "foot_accel", "base_accel", "posture"):
        if getattr(w, name) < 0:
            raise ValueError(f"weight {name} must be nonnegative")
    if kind == "centroidal":
        def integrand(tau=(), foot_acc=(), base_acc=(), posture_dev=()):
            return (w.torque * _sq(tau) + w.foot_accel * _sq(foot_acc)
                    + w.base_accel * _sq(base_acc) + w.posture * _sq(posture_dev))
        return integrand
    if kind == "full":
        def integrand(tau=()):
            return w.torque * _sq(tau)
        return integrand
    raise ValueError(f"unknown cost kind: {kind!r}")
