"""Exact computations in Lipschitz-free spaces over finite pointed metric spaces."""

from lipfree.errors import (
    CertificateError,
    ConstructionError,
    DegenerateInputError,
    PreconditionError,
    StructuralInputError,
)
from lipfree.metric_core import PointedMetricSpace, ViolationReport
from lipfree.lipschitz import LipFunction
from lipfree.free_norm import FreeVector, NormCertificate

__version__ = "0.1.0"

__all__ = [
    "CertificateError",
    "ConstructionError",
    "DegenerateInputError",
    "FreeVector",
    "LipFunction",
    "NormCertificate",
    "PointedMetricSpace",
    "PreconditionError",
    "StructuralInputError",
    "ViolationReport",
]
