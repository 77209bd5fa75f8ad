"""Exception types shared across the solver modules."""


class PillarError(Exception):
    """Base class for every error raised by pillarwave."""


class DomainError(PillarError, ValueError):
    """Argument outside the domain of a special function."""


class SingularityError(PillarError, ZeroDivisionError):
    """Evaluation at a pole or a zero denominator."""


class InvalidIncidentError(PillarError, ValueError):
    """Incident plane wave attached to a non-propagating harmonic."""


class MediumError(PillarError, ValueError):
    """Inconsistent material description."""


class MeshError(PillarError, ValueError):
    """Inconsistent radial mesh."""


class NumericalError(PillarError):
    """A numerical procedure failed (singular system, no convergence)."""


class NearSingularSystemError(NumericalError):
    """The discrete scattering system is numerically singular.

    This happens at (or very close to) guided-mode frequencies, where the
    scattering problem loses uniqueness.  The suspect frequency and Bloch
    wavenumber are attached so sweeps can record them.
    """

    def __init__(self, message, omega=None, kappa=None, ell=None, rcond=None):
        super().__init__(message)
        self.omega = omega
        self.kappa = kappa
        self.ell = ell
        self.rcond = rcond


class WindowError(NumericalError):
    """The frequency window for the embedded-mode construction is empty."""


class ContinuationError(NumericalError):
    """Contrast continuation ended without reaching the target window."""


class CertificateContradiction(PillarError):
    """A verified guided mode was found where a certificate forbids one."""
