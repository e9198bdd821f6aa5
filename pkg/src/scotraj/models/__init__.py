from .files import ModelFileError, load_model
from .planar import (ContactSpec, LinkSpec, PlanarModel, centroidal_accel, cross2,
                     torque_estimate)
from .spatial import QuadrupedStub
from .types import (CentroidalState, ContactPoint, DegenerateContactError,
                    FullDynamicsTerms, FullState, IkResult, ImpactResult, ModelParams)

__all__ = [
    "CentroidalState", "ContactPoint", "ContactSpec", "DegenerateContactError",
    "FullDynamicsTerms", "FullState", "IkResult", "ImpactResult", "LinkSpec",
    "ModelFileError", "ModelParams", "PlanarModel", "QuadrupedStub",
    "centroidal_accel", "cross2", "load_model", "torque_estimate",
]
