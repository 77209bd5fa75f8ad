"""Guided and scattered waves in z-periodic, radially layered dielectric pillars."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CertificateContradiction, ContinuationError, DomainError, InvalidIncidentError,
    MediumError, MeshError, NearSingularSystemError, NumericalError, PillarError,
    SingularityError, WindowError,
)
from .harmonics import BlochParams, HarmonicClass, IncidentWave  # noqa: E402
from .medium import MediumSpec, homogeneous, layered, tiled  # noqa: E402

__all__ = [
    "BlochParams", "CertificateContradiction", "ContinuationError", "DomainError",
    "HarmonicClass", "IncidentWave", "InvalidIncidentError", "MediumError", "MediumSpec",
    "MeshError", "NearSingularSystemError", "NumericalError", "PillarError", "SingularityError",
    "WindowError", "__version__", "homogeneous", "layered", "tiled",
]
