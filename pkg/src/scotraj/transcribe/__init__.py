"""Transcriptions turning trajectory tasks into sparse NLPs."""

from .collocation import (CollocationScheme, euler_defect, first_order_scheme,
                          radau_coefficients, radau_defect, scheme_for)
from .common import Transcription, cost_integrands
from .layout import VarGrid, add_grid, decode_blocks, mesh, pin, set_guess
from .nlp1 import build_centroidal
from .nlp2 import build_hto
from .nlp3 import build_full_cio
from .task import ContactSequence, CostWeights, Phase, TaskSpec

__all__ = [
    "CollocationScheme", "ContactSequence", "CostWeights", "Phase",
    "TaskSpec", "Transcription", "VarGrid", "add_grid", "build_centroidal",
    "build_full_cio", "build_hto", "cost_integrands", "decode_blocks",
    "euler_defect", "first_order_scheme", "mesh", "pin",
    "radau_coefficients", "radau_defect", "scheme_for", "set_guess",
]
