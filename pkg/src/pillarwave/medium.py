"""Axisymmetric, z-periodic material model.

A medium is piecewise constant on a tensor grid of radial cells
``[r_{k-1}, r_k]`` (``r_0 = 0``) and z cells ``[z_{j-1}, z_j]`` covering
``[-pi, pi]``.  Outside the last radial breakpoint the exterior constants
``eps0, mu0`` apply.  The material period is ``2 pi / L``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import MediumError

PERIOD_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class MediumSpec:
    r_edges: tuple
    z_edges: tuple
    eps: np.ndarray
    mu: np.ndarray
    eps0: float = 1.0
    mu0: float = 1.0
    R: float = 1.0
    L: int = 1
    label: str = field(default="", compare=False)

    def __post_init__(self):
        errors = validate_medium(self.r_edges, self.z_edges, self.eps, self.mu,
                                 self.eps0, self.mu0, self.R, self.L)
        if errors:
            raise MediumError("; ".join(errors))
        object.__setattr__(self, "r_edges", tuple(float(r) for r in self.r_edges))
        object.__setattr__(self, "z_edges", tuple(float(z) for z in self.z_edges))
        eps = np.array(self.eps, dtype=float)
        mu = np.array(self.mu, dtype=float)
        eps.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "mu", mu)

    @property
    def n_radial_cells(self) -> int:
        return len(self.r_edges)

    @property
    def material_radius(self) -> float:
        return self.r_edges[-1] if self.r_edges else 0.0

    @property
    def eps_minus(self) -> float:
        return float(min(self.eps.min(initial=self.eps0), self.eps0))

    @property
    def eps_plus(self) -> float:
        return float(max(self.eps.max(initial=self.eps0), self.eps0))

    @property
    def mu_minus(self) -> float:
        return float(min(self.mu.min(initial=self.mu0), self.mu0))

    @property
    def mu_plus(self) -> float:
        return float(max(self.mu.max(initial=self.mu0), self.mu0))

    @cached_property
    def fingerprint(self) -> str:
        payload = {
            "r_edges": [repr(r) for r in self.r_edges],
            "z_edges": [repr(z) for z in self.z_edges],
            "eps": [[repr(float(v)) for v in row] for row in self.eps],
            "mu": [[repr(float(v)) for v in row] for row in self.mu],
            "eps0": repr(self.eps0), "mu0": repr(self.mu0),
            "R": repr(self.R), "L": self.L,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def __hash__(self):
        return hash(self.fingerprint)

    def __eq__(self, other):
        return isinstance(other, MediumSpec) and self.fingerprint == other.fingerprint

    def radial_cell(self, r: float) -> int:
        """Index of the radial cell containing r, or -1 for the exterior."""
        for k, edge in enumerate(self.r_edges):
            if r < edge:
                return k
        return -1

    def value(self, which: str, r: float, z: float) -> float:
        """Pointwise eps or mu (z reduced to [-pi, pi))."""
        k = self.radial_cell(r)
        exterior = self.eps0 if which == "eps" else self.mu0
        if k < 0:
            return exterior
        zz = (z + math.pi) % (2 * math.pi) - math.pi
        j = int(np.searchsorted(self.z_edges, zz, side="right")) - 1
        j = min(max(j, 0), len(self.z_edges) - 2)
        return float((self.eps if which == "eps" else self.mu)[k, j])

    def scaled_eps(self, factor: float) -> "MediumSpec":
        """Same geometry with every interior eps cell multiplied by ``factor``."""
        return MediumSpec(self.r_edges, self.z_edges, self.eps * factor, self.mu,
                          self.eps0, self.mu0, self.R, self.L, self.label)

    def with_radius(self, R: float) -> "MediumSpec":
        return MediumSpec(self.r_edges, self.z_edges, self.eps, self.mu,
                          self.eps0, self.mu0, R, self.L, self.label)


def validate_medium(r_edges, z_edges, eps, mu, eps0, mu0, R, L) -> list[str]:
    """All invariant violations of a medium description (empty if valid)."""
    errors: list[str] = []
    r_edges = [float(r) for r in r_edges]
    z_edges = [float(z) for z in z_edges]
    if not (eps0 > 0):
        errors.append(f"eps0 must be positive, got {eps0}")
    if not (mu0 > 0):
        errors.append(f"mu0 must be positive, got {mu0}")
    if not (R > 0):
        errors.append(f"R must be positive, got {R}")
    if int(L) != L or L < 1:
        errors.append(f"L must be an integer >= 1, got {L}")
    if any(b <= a for a, b in zip([0.0] + r_edges, r_edges)):
        errors.append("r_edges must be positive and strictly increasing")
    if r_edges and r_edges[-1] > R * (1 + 1e-14):
        errors.append(f"material radius {r_edges[-1]} exceeds truncation radius R={R}")
    if len(z_edges) < 2 or abs(z_edges[0] + math.pi) > 1e-12 or abs(z_edges[-1] - math.pi) > 1e-12:
        errors.append("z_edges must start at -pi and end at pi")
    if any(b <= a for a, b in zip(z_edges, z_edges[1:])):
        errors.append("z_edges must be strictly increasing")
    shape = (len(r_edges), max(len(z_edges) - 1, 0))
    for name, arr in (("eps", eps), ("mu", mu)):
        arr = np.asarray(arr, dtype=float)
        if arr.shape != shape:
            errors.append(f"{name} has shape {arr.shape}, expected {shape}")
            continue
        if not np.all(np.isfinite(arr)):
            errors.append(f"{name} has non-finite entries")
        elif np.any(arr <= 0):
            bad = tuple(int(i) for i in np.argwhere(arr <= 0)[0])
            errors.append(f"{name}{list(bad)} must be positive, got {arr[bad]}")
    if not errors and L > 1:
        for name, arr in (("eps", eps), ("mu", mu)):
            if not _is_periodic(z_edges, np.asarray(arr, dtype=float), int(L)):
                errors.append(
                    f"{name} profile is not periodic with period 2*pi/{int(L)} (L={int(L)})")
    return errors


def _is_periodic(z_edges, values, L) -> bool:
    shift = 2 * math.pi / L
    pts = np.array(z_edges, dtype=float)
    probe = np.concatenate([pts, ((pts + math.pi - shift) % (2 * math.pi)) - math.pi])
    probe = np.unique(np.concatenate([probe, [math.pi]]))
    mids = 0.5 * (probe[:-1] + probe[1:])
    mids = mids[np.diff(probe) > 1e-12]
    shifted = (mids + shift + math.pi) % (2 * math.pi) - math.pi
    j0 = np.clip(np.searchsorted(z_edges, mids, side="right") - 1, 0, len(z_edges) - 2)
    j1 = np.clip(np.searchsorted(z_edges, shifted, side="right") - 1, 0, len(z_edges) - 2)
    return bool(np.all(np.abs(values[:, j0] - values[:, j1]) <= PERIOD_ATOL * np.abs(values[:, j0])))


def homogeneous(eps0=1.0, mu0=1.0, R=1.0) -> MediumSpec:
    return MediumSpec((), (-math.pi, math.pi), np.zeros((0, 1)), np.zeros((0, 1)),
                      eps0, mu0, R, 1, "homogeneous")


def layered(r_edges, eps_values, mu_values=None, eps0=1.0, mu0=1.0, R=1.0) -> MediumSpec:
    """z-invariant medium with one value per radial cell."""
    eps = np.asarray(eps_values, dtype=float).reshape(-1, 1)
    mu = (np.full_like(eps, mu0) if mu_values is None
          else np.asarray(mu_values, dtype=float).reshape(-1, 1))
    return MediumSpec(tuple(r_edges), (-math.pi, math.pi), eps, mu, eps0, mu0, R, 1, "layered")


def tiled(r_edges, period_edges, eps_cells, mu_cells=None, L=1, eps0=1.0, mu0=1.0, R=1.0):
    """Medium of period 2 pi / L from a single-period pattern.

    ``period_edges`` are z breakpoints in [0, 1] as fractions of one period
    measured from z = -pi; ``eps_cells`` has shape (n_radial, n_period_cells).
    """
    frac = np.asarray(period_edges, dtype=float)
    if frac[0] != 0.0 or frac[-1] != 1.0:
        raise MediumError("period_edges must run from 0 to 1")
    eps_cells = np.atleast_2d(np.asarray(eps_cells, dtype=float))
    mu_cells = (np.full_like(eps_cells, mu0) if mu_cells is None
                else np.atleast_2d(np.asarray(mu_cells, dtype=float)))
    period = 2 * math.pi / L
    z_edges = [-math.pi]
    for t in range(L):
        for f in frac[1:]:
            z_edges.append(-math.pi + t * period + f * period)
    z_edges[-1] = math.pi
    eps = np.tile(eps_cells, (1, L))
    mu = np.tile(mu_cells, (1, L))
    return MediumSpec(tuple(r_edges), tuple(z_edges), eps, mu, eps0, mu0, R, L, "tiled")


@dataclass(frozen=True)
class ZFourierTable:
    """z-Fourier coefficients per radial cell.

    ``eps[k, q + q_max]`` is (eps)_q on radial cell k, likewise ``inv_mu``.
    Entries with q not a multiple of L are exactly zero.
    """

    q_max: int
    L: int
    eps: np.ndarray
    inv_mu: np.ndarray

    def eps_q(self, q: int) -> np.ndarray:
        return self._get(self.eps, q)

    def inv_mu_q(self, q: int) -> np.ndarray:
        return self._get(self.inv_mu, q)

    def _get(self, arr, q):
        if abs(q) > self.q_max:
            raise IndexError(f"|q|={abs(q)} exceeds q_max={self.q_max}")
        return arr[:, q + self.q_max]


def _sinpi(x):
    """sin(pi x), exactly zero at integers."""
    r = np.remainder(np.asarray(x, dtype=float), 2.0)
    return np.where(r == np.floor(r), 0.0, np.sin(np.pi * r))


def cell_fourier(z_edges, values, q_values) -> np.ndarray:
    """(1/2pi) int_{-pi}^{pi} f(z) e^{-iqz} dz for cellwise-constant f.

    ``values`` has shape (n_rows, n_cells); returns (n_rows, len(q_values)).
    Each cell contributes (h/2pi) e^{-iqc} sinc(qh/2) with c its midpoint.
    """
    z = np.asarray(z_edges, dtype=float)
    h = np.diff(z)
    c = 0.5 * (z[1:] + z[:-1])
    q = np.asarray(q_values, dtype=float)
    out = np.empty((values.shape[0], q.size), dtype=complex)
    for i, qq in enumerate(q):
        if qq == 0:
            weights = h / (2 * math.pi)
        else:
            weights = _sinpi(qq * h / (2 * math.pi)) / (math.pi * qq) * np.exp(-1j * qq * c)
        out[:, i] = values @ weights
    return out


def z_fourier(spec: MediumSpec, q_max: int) -> ZFourierTable:
    """Exact z-Fourier coefficients of eps and 1/mu on each radial cell.

    Coefficients are integrated over one material period, so every q that
    is not a multiple of L is identically zero.
    """
    if q_max < 0:
        raise MediumError("q_max must be >= 0")
    L = spec.L
    q_all = np.arange(-q_max, q_max + 1)
    eps = np.zeros((spec.n_radial_cells, q_all.size), dtype=complex)
    inv_mu = np.zeros_like(eps)
    if spec.n_radial_cells:
        # periodicity is validated on construction; the off-lattice q are
        # zero analytically and are left exactly zero here
        sel = q_all % L == 0
        eps[:, sel] = cell_fourier(spec.z_edges, spec.eps, q_all[sel])
        inv_mu[:, sel] = cell_fourier(spec.z_edges, 1.0 / spec.mu, q_all[sel])
    return ZFourierTable(q_max=q_max, L=L, eps=eps, inv_mu=inv_mu)


def is_inverse_structure(spec: MediumSpec) -> bool:
    """True iff eps <= eps0 and mu <= mu0 on every cell."""
    return bool(np.all(spec.eps <= spec.eps0) and np.all(spec.mu <= spec.mu0))


def is_radially_monotone(spec: MediumSpec) -> bool:
    """True iff, for every z cell, eps and mu are nondecreasing outward to eps0, mu0."""
    if spec.n_radial_cells == 0:
        return True
    for arr, ext in ((spec.eps, spec.eps0), (spec.mu, spec.mu0)):
        col = np.vstack([arr, np.full((1, arr.shape[1]), ext)])
        if np.any(np.diff(col, axis=0) < 0):
            return False
    return True
