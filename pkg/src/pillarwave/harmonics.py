"""Fourier-harmonic bookkeeping outside the pillar.

Each z-harmonic ``m`` of a kappa-pseudo-periodic field has transverse
wavenumber squared ``eta_m^2 = eps0 mu0 omega^2 - (m + kappa)^2``.  Its sign
decides whether the exterior radial factor is an outgoing Hankel wave
(propagating), a power of r (algebraic) or a decaying K_l (evanescent), and
that in turn fixes the Dirichlet-to-Neumann coefficient ``gamma_{m l}``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import specfun
from .errors import InvalidIncidentError, PillarError, SingularityError

ALGEBRAIC_RTOL = 1e-12


class HarmonicClass(str, enum.Enum):
    PROPAGATING = "propagating"
    ALGEBRAIC = "algebraic"
    EVANESCENT = "evanescent"


@dataclass(frozen=True)
class BlochParams:
    """Bloch wavenumber, frequency and exterior material constants."""

    kappa: float
    omega: float
    eps0: float = 1.0
    mu0: float = 1.0

    def __post_init__(self):
        if not (-0.5 <= self.kappa < 0.5):
            raise PillarError(f"kappa={self.kappa} outside the Brillouin zone [-1/2, 1/2)")
        if not self.omega > 0:
            raise PillarError(f"omega must be positive, got {self.omega}")
        if not (self.eps0 > 0 and self.mu0 > 0):
            raise PillarError("eps0 and mu0 must be positive")

    @property
    def k0_sq(self) -> float:
        return self.eps0 * self.mu0 * self.omega**2

    def with_omega(self, omega: float) -> "BlochParams":
        return replace(self, omega=omega)

    def below_cutoff(self) -> bool:
        """Strict test eps0 mu0 omega^2 < kappa^2 (no propagating harmonics)."""
        return self.k0_sq < self.kappa**2


@dataclass(frozen=True)
class HarmonicData:
    m: int
    eta_sq: float
    cls: HarmonicClass
    ell: int | None = None
    gamma: complex | None = None

    @property
    def eta(self) -> complex:
        """eta_m on the branch used by the radiation condition."""
        if self.eta_sq >= 0:
            return complex(math.sqrt(self.eta_sq), 0.0)
        return complex(0.0, math.sqrt(-self.eta_sq))


def eta_sq(m: int, p: BlochParams) -> float:
    return p.k0_sq - (m + p.kappa) ** 2


def classify(value: float, p: BlochParams) -> HarmonicClass:
    if abs(value) <= ALGEBRAIC_RTOL * max(1.0, p.k0_sq):
        return HarmonicClass.ALGEBRAIC
    return HarmonicClass.PROPAGATING if value > 0 else HarmonicClass.EVANESCENT


def harmonic(m: int, p: BlochParams) -> HarmonicData:
    value = eta_sq(m, p)
    return HarmonicData(m=int(m), eta_sq=value, cls=classify(value, p))


def classify_harmonics(p: BlochParams, m_max: int) -> list[HarmonicData]:
    """One entry per m in [-m_max, m_max], without DtN coefficients."""
    if m_max < 0:
        raise PillarError("m_max must be >= 0")
    return [harmonic(m, p) for m in range(-m_max, m_max + 1)]


def propagating_indices(p: BlochParams, m_values) -> list[int]:
    return [m for m in m_values if harmonic(m, p).cls is HarmonicClass.PROPAGATING]


def gamma_coefficient(h: HarmonicData, ell: int, R: float) -> complex:
    """DtN coefficient gamma_{m l} at radius R.

    Evanescent harmonics use gamma = -|eta| K_l'(|eta| R) / K_l(|eta| R),
    which is exactly -eta H^1_l'(eta R) / H^1_l(eta R) for eta = i|eta| and
    is real and positive.
    """
    if not R > 0:
        raise PillarError("R must be positive")
    if h.cls is HarmonicClass.ALGEBRAIC:
        return complex(abs(ell) / R)
    if h.cls is HarmonicClass.EVANESCENT:
        a = math.sqrt(-h.eta_sq)
        k = specfun.bessel_k(ell, a * R)
        if k == 0.0:
            raise SingularityError(f"K_{ell}({a * R}) underflows")
        return complex(-a * specfun.bessel_kp(ell, a * R) / k)
    eta = math.sqrt(h.eta_sq)
    h1 = specfun.hankel1(ell, eta * R)
    if h1 == 0:
        raise SingularityError("H^1_l(eta R) = 0")
    return -eta * specfun.hankel1p(ell, eta * R) / h1


def with_gamma(h: HarmonicData, ell: int, R: float) -> HarmonicData:
    return replace(h, ell=int(ell), gamma=gamma_coefficient(h, ell, R))


def dtn_table(p: BlochParams, m_values, ell_values, R: float) -> list[HarmonicData]:
    """Classified harmonics with gamma populated for every (m, l) pair."""
    out = []
    for m in m_values:
        base = harmonic(m, p)
        for ell in ell_values:
            out.append(with_gamma(base, ell, R))
    return out


def split_dtn(table):
    """Split a DtN table into its evanescent part T_e and propagating part T_p.

    Returns two lists aligned with ``table``; each entry is the gamma used
    by that part (zero where the part does not act).  Algebraic harmonics
    with l != 0 go to T_e; algebraic l = 0 has gamma = 0 in both.
    """
    te, tp = [], []
    for h in table:
        if h.gamma is None:
            raise PillarError("split_dtn needs gamma populated")
        if h.cls is HarmonicClass.PROPAGATING:
            te.append(0j)
            tp.append(complex(h.gamma))
        else:
            te.append(complex(h.gamma))
            tp.append(0j)
    return te, tp


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave exp(i(k1 x + k2 y + (m + kappa) z)) times ``amplitude``.

    The transverse wave vector is eta_m (sin theta0, cos theta0).
    """

    m: int
    theta0: float = 0.0
    amplitude: complex = 1.0

    def wave_vector(self, p: BlochParams) -> tuple[float, float, float]:
        h = harmonic(self.m, p)
        if h.cls is not HarmonicClass.PROPAGATING:
            raise InvalidIncidentError(
                f"harmonic m={self.m} is {h.cls.value}; plane waves need eta_m^2 > 0"
            )
        eta = math.sqrt(h.eta_sq)
        return eta * math.sin(self.theta0), eta * math.cos(self.theta0), self.m + p.kappa

    def evaluate(self, p: BlochParams, x, y, z):
        k1, k2, k3 = self.wave_vector(p)
        return self.amplitude * np.exp(1j * (k1 * np.asarray(x) + k2 * np.asarray(y) + k3 * np.asarray(z)))


@dataclass(frozen=True)
class TraceExpansion:
    """Coefficients u_{m l} of sum u_{m l} e^{i l theta} e^{i (m + kappa) z} on r = R."""

    R: float
    coeffs: dict

    def get(self, m: int, ell: int) -> complex:
        return self.coeffs.get((m, ell), 0j)

    def norm(self, m_filter=None) -> float:
        total = sum(abs(v) ** 2 for (m, _), v in self.coeffs.items()
                    if m_filter is None or m_filter(m))
        return math.sqrt(total)

    def synthesize(self, kappa: float, theta, z):
        theta = np.asarray(theta, dtype=float)
        z = np.asarray(z, dtype=float)
        out = np.zeros(np.broadcast(theta, z).shape, dtype=complex)
        for (m, ell), c in self.coeffs.items():
            out += c * np.exp(1j * ell * theta) * np.exp(1j * (m + kappa) * z)
        return out


def incident_ell_max(eta_R: float, tol: float = 1e-15) -> int:
    """Smallest l_max with |J_l(eta R)| < tol for all |l| > l_max."""
    ell = int(math.ceil(eta_R))
    while abs(specfun.bessel_j(ell + 1, eta_R)) >= tol or abs(specfun.bessel_j(ell + 2, eta_R)) >= tol:
        ell += 1
    return ell


def incident_coefficients(w: IncidentWave, p: BlochParams, R: float, ell: int):
    """(u^inc_{m l}(R), d/dr u^inc_{m l}(R)) for the single harmonic of ``w``."""
    w.wave_vector(p)
    eta = math.sqrt(eta_sq(w.m, p))
    phase = w.amplitude * complex(math.cos(ell * w.theta0), math.sin(ell * w.theta0))
    return (phase * specfun.bessel_j(ell, eta * R),
            phase * eta * specfun.bessel_jp(ell, eta * R))


def incident_trace(w: IncidentWave, p: BlochParams, R: float, ell_max: int):
    """Jacobi-Anger traces of the incident wave and its normal derivative."""
    value, normal = {}, {}
    for ell in range(-ell_max, ell_max + 1):
        u, du = incident_coefficients(w, p, R, ell)
        value[(w.m, ell)] = u
        normal[(w.m, ell)] = du
    return TraceExpansion(R, value), TraceExpansion(R, normal)
