"""Nonexistence certificates for guided modes.

Two sufficient conditions are implemented.

* Radius bound for inverse structures (eps <= eps0, mu <= mu0): if
  ``R < 1 / sqrt(eps0 mu0 omega^2 - kappa^2)``, every eigenvalue ``alpha`` of
  the homogeneous reference problem on the subspace with vanishing
  propagating traces exceeds 1, so omega^2 is not an eigenvalue.
* Radial monotonicity (eps nondecreasing, mu nondecreasing in r): every term
  on the volume side of a Rellich identity is nonnegative.

Certificates only ever say ``NoGuidedModes`` or ``Inconclusive``.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import interpolate, optimize, special

from . import harmonics, specfun
from .errors import CertificateContradiction
from .harmonics import BlochParams, HarmonicClass
from .medium import MediumSpec, is_inverse_structure, is_radially_monotone

ALPHA_TOL = 1e-9


class CertificateKind(str, enum.Enum):
    RADIUS_BOUND = "RadiusBound"
    ALPHA_CASES = "AlphaCases"
    RELLICH_RESIDUAL = "RellichResidual"


class Verdict(str, enum.Enum):
    NO_GUIDED_MODES = "NoGuidedModes"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    verdict: Verdict
    evidence: dict
    failed_premise: str | None = None
    tolerances: dict = field(default_factory=dict)
    inputs_hash: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["verdict"] = self.verdict.value
        return d


def radius_bound(p: BlochParams) -> float | None:
    """1 / sqrt(eps0 mu0 omega^2 - kappa^2) above the cutoff, None otherwise."""
    d = p.k0_sq - p.kappa**2
    if d <= 0:
        return None
    return 1.0 / math.sqrt(d)


@dataclass(frozen=True)
class AlphaCase:
    """One admissible (or excluded) eigenvalue of the reference problem.

    ``case`` is I (propagating m), II (evanescent), III (algebraic, l != 0)
    or IV (algebraic, l = 0).  ``alpha`` is None when the branch admits no
    eigenvalue; ``reason`` then says why.
    """

    m: int
    ell: int
    case: str
    k: int | None
    zeta_sq: float | None
    alpha: float | None
    reason: str = ""


@dataclass(frozen=True)
class AlphaAnalysis:
    cases: list
    min_alpha: float | None
    witness: AlphaCase | None


def _robin_roots(ell: int, gamma: float, R: float, count: int) -> list:
    """First ``count`` positive zeta with zeta J_l'(zeta R) + gamma J_l(zeta R) = 0."""
    def f(z):
        return z * specfun.bessel_jp(ell, z * R) + gamma * specfun.bessel_j(ell, z * R)

    roots = []
    step = 0.05 / R
    a = step * 1e-3
    fa = f(a)
    while len(roots) < count:
        b = a + step
        fb = f(b)
        if fa == 0:
            roots.append(a)
        elif np.sign(fa) != np.sign(fb):
            roots.append(optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        a, fa = b, fb
    return roots[:count]


def _case_tag(cls: HarmonicClass, ell: int) -> str:
    if cls is HarmonicClass.PROPAGATING:
        return "I"
    if cls is HarmonicClass.EVANESCENT:
        return "II"
    return "III" if ell != 0 else "IV"


def alpha_cases(p: BlochParams, R: float, ell_max: int, m_max: int,
                roots_per_branch: int = 3) -> AlphaAnalysis:
    """Eigenvalues alpha of the homogeneous reference problem, by harmonic class.

    With zeta_m^2 = alpha eps0 mu0 omega^2 - (m + kappa)^2 the radial factor
    is J_l(zeta r) when zeta^2 > 0, and the boundary condition at R fixes zeta:

    * I   (propagating): J_l(zeta R) = 0, so zeta R is a Bessel zero;
    * II  (evanescent):  zeta J_l'(zeta R) + gamma J_l(zeta R) = 0 (Robin);
    * III (algebraic, l != 0): the Robin condition with gamma = |l| / R, whose
      roots are the zeros of J_{|l|-1}(zeta R);
    * IV  (algebraic, l = 0): J_0(zeta R) = 0.

    Branches with zeta^2 <= 0 admit no eigenvalue (I_l has no positive zero
    and the Robin expression with I_l is positive); they are listed with
    alpha = None and a reason.
    """
    k0_sq = p.k0_sq
    out = []
    for m in range(-m_max, m_max + 1):
        h = harmonics.harmonic(m, p)
        for ell in range(-ell_max, ell_max + 1):
            tag = _case_tag(h.cls, ell)
            if tag in ("I", "IV"):
                zetas = [z / R for z in specfun.j_zeros(abs(ell), roots_per_branch).zeros]
            elif tag == "III":
                zetas = [z / R for z in specfun.j_zeros(abs(ell) - 1, roots_per_branch).zeros]
            else:
                gamma = harmonics.gamma_coefficient(h, ell, R).real
                zetas = _robin_roots(ell, gamma, R, roots_per_branch)
            for k, z in enumerate(zetas, start=1):
                alpha = (z * z + (m + p.kappa) ** 2) / k0_sq
                out.append(AlphaCase(m, ell, tag, k, z * z, alpha))
            out.append(AlphaCase(m, ell, tag, None, None, None,
                                 "zeta^2 <= 0: no positive zero of I_l and no nontrivial "
                                 "power solution satisfies the boundary condition"))
    admissible = [c for c in out if c.alpha is not None]
    witness = min(admissible, key=lambda c: c.alpha) if admissible else None
    return AlphaAnalysis(out, None if witness is None else witness.alpha, witness)


def modified_robin_positive(ell: int, gamma: float, R: float, grid) -> bool:
    """|zeta| I_l'(|zeta| R) + gamma I_l(|zeta| R) > 0 on ``grid`` of |zeta| values."""
    z = np.asarray(grid, dtype=float)
    vals = z * 0.5 * (special.iv(abs(ell) - 1, z * R) + special.iv(abs(ell) + 1, z * R)) \
        + gamma * special.iv(abs(ell), z * R)
    return bool(np.all(vals > 0))


def _inputs_hash(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=repr).encode()).hexdigest()


def certify_radius(spec: MediumSpec, p: BlochParams, ell_max: int = 4,
                   m_max: int | None = None) -> Certificate:
    """Radius-bound certificate for inverse structures.

    Below the cutoff the radius premise is vacuous (there are no propagating
    harmonics to suppress) and is treated as satisfied.
    """
    if m_max is None:
        m_max = int(math.ceil(abs(p.kappa) + math.sqrt(p.k0_sq))) + 2
    bound = radius_bound(p)
    tol = {"alpha_margin": ALPHA_TOL}
    key = _inputs_hash(spec.fingerprint, p.kappa, p.omega, ell_max, m_max)
    evidence = {"R": spec.R, "R_max": bound}
    if not is_inverse_structure(spec):
        return Certificate(CertificateKind.RADIUS_BOUND, Verdict.INCONCLUSIVE, evidence,
                           "inverse-structure", tol, key)
    if bound is not None and not spec.R < bound:
        return Certificate(CertificateKind.RADIUS_BOUND, Verdict.INCONCLUSIVE, evidence,
                           "radius", tol, key)
    analysis = alpha_cases(p, spec.R, ell_max, m_max)
    w = analysis.witness
    evidence["min_alpha"] = analysis.min_alpha
    evidence["witness"] = None if w is None else {"m": w.m, "ell": w.ell, "case": w.case, "k": w.k}
    if analysis.min_alpha is not None and not analysis.min_alpha > 1 + ALPHA_TOL:
        return Certificate(CertificateKind.ALPHA_CASES, Verdict.INCONCLUSIVE, evidence,
                           "alpha", tol, key)
    return Certificate(CertificateKind.RADIUS_BOUND, Verdict.NO_GUIDED_MODES, evidence, None, tol, key)


# ---------------------------------------------------------------------------
# Rellich identity
# ---------------------------------------------------------------------------

_GX, _GW = np.polynomial.legendre.leggauss(8)


def z_gram(z_edges, ks) -> list:
    """Per z cell c the matrix G_c[i, j] = int_cell exp(i (k_j - k_i) z) dz."""
    ks = np.asarray(ks, dtype=float)
    d = ks[None, :] - ks[:, None]
    out = []
    for a, b in zip(z_edges[:-1], z_edges[1:]):
        with np.errstate(invalid="ignore", divide="ignore"):
            g = (np.exp(1j * d * b) - np.exp(1j * d * a)) / (1j * d)
        g[d == 0] = b - a
        out.append(g)
    return out


def _quad_form(vec_a, gram, vec_b=None) -> float:
    vec_b = vec_a if vec_b is None else vec_b
    return float(np.real(np.conj(vec_a) @ gram @ vec_b))


@dataclass(frozen=True)
class RellichTerms:
    eps_interfaces: float
    mu_interfaces: float
    transverse: float
    boundary_dtn: float
    rhs: float

    @property
    def lhs(self) -> float:
        return self.eps_interfaces + self.mu_interfaces + self.transverse + self.boundary_dtn

    @property
    def residual(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), 1e-12)
        return abs(self.lhs - self.rhs) / scale


class _RadialField:
    """Piecewise cubic reconstruction of nodal values u_m(r_i), split at breakpoints."""

    def __init__(self, nodes, nodal, breakpoints):
        self.pieces = []
        cuts = sorted({0.0, float(nodes[-1])} | {float(b) for b in breakpoints})
        for a, b in zip(cuts[:-1], cuts[1:]):
            sel = np.nonzero((nodes >= a - 1e-14) & (nodes <= b + 1e-14))[0]
            x = nodes[sel]
            y = nodal[:, sel].T
            k = min(3, len(x) - 1)
            self.pieces.append((a, b, x, interpolate.make_interp_spline(x, y, k=k)))

    def piece(self, r, side):
        for a, b, x, s in self.pieces:
            if (side < 0 and a < r <= b) or (side >= 0 and a <= r < b):
                return s
        return self.pieces[-1][3]


def rellich_terms(spec: MediumSpec, omega: float, kappa: float, ell: int, m_list, nodes,
                  nodal, gammas) -> RellichTerms:
    """Both sides of the Rellich identity for u = sum_m u_m(r) e^{i l theta} e^{i (m+kappa) z}.

    With a = 1/mu and X = r d/dr, pairing the equation with X conj(u) gives

        omega^2 int r eps_r |u|^2 - int r a_r |grad u|^2 + 2 int a |grad_t u|^2
            + (2/mu0) Re int_Gamma conj(u) T u
          = R int_Gamma [2 a0 |u_r|^2 - a0 |grad u|^2 + eps0 omega^2 |u|^2]

    where grad_t is the transverse (r, theta) gradient.  For cellwise media
    the r-derivatives of eps and a are interface measures.  An interface at
    r_i contributes r_i int ([mu] |sigma|^2 - [a] |t|^2 + omega^2 [eps] |u|^2) dS,
    with flux sigma = a u_r (the mean of the one-sided values) and tangential
    gradient t.  Each term is nonnegative when eps and mu do not decrease
    outward.  Radial integrals use 8-point Gauss rules per element on a
    cubic reconstruction of the nodal values; z integrals are exact.
    """
    nodes = np.asarray(nodes, dtype=float)
    nodal = np.asarray(nodal, dtype=complex)
    m_arr = np.asarray(m_list)
    ks = m_arr + kappa
    R = float(nodes[-1])
    a0 = 1.0 / spec.mu0
    two_pi = 2 * math.pi
    if not np.any(nodal):
        return RellichTerms(0.0, 0.0, 0.0, 0.0, 0.0)
    field = _RadialField(nodes, nodal, spec.r_edges)
    grams = z_gram(spec.z_edges, ks)
    full = np.diag(np.full(len(ks), two_pi)).astype(complex)
    n_cells = spec.n_radial_cells

    def material(k):
        """(eps, a) per z cell for radial cell k (k = n_cells means the exterior)."""
        if k >= n_cells:
            nz = len(spec.z_edges) - 1
            return np.full(nz, spec.eps0), np.full(nz, a0)
        return spec.eps[k], 1.0 / spec.mu[k]

    # interfaces
    eps_term = 0.0
    mu_term = 0.0
    for k, r in enumerate(spec.r_edges):
        if r >= R:
            continue
        e_in, a_in = material(k)
        e_out, a_out = material(k + 1)
        u = field.piece(r, -1)(r)
        du_in = field.piece(r, -1).derivative()(r)
        du_out = field.piece(r, +1).derivative()(r)
        u_out = field.piece(r, +1)(r)
        u = 0.5 * (u + u_out)
        for c, G in enumerate(grams):
            sigma = 0.5 * (a_in[c] * du_in + a_out[c] * du_out)
            t_sq = (ell**2 / r**2) * _quad_form(u, G) + _quad_form(ks * u, G)
            jump_mu = 1.0 / a_out[c] - 1.0 / a_in[c]
            jump_a = a_out[c] - a_in[c]
            eps_term += omega**2 * r * r * two_pi * (e_out[c] - e_in[c]) * _quad_form(u, G)
            mu_term += r * r * two_pi * (jump_mu * _quad_form(sigma, G) - jump_a * t_sq)

    # 2 int a |grad_t u|^2
    transverse = 0.0
    for e in range(nodes.size - 1):
        lo, hi = nodes[e], nodes[e + 1]
        mid = 0.5 * (lo + hi)
        rr = mid + 0.5 * (hi - lo) * _GX
        ww = 0.5 * (hi - lo) * _GW
        spl = field.piece(mid, +1)
        u = spl(rr)
        du = spl.derivative()(rr)
        k = spec.radial_cell(mid)
        k = n_cells if k < 0 else k
        _, a = material(k)
        gl = grams if k < n_cells else [full]
        al = a if k < n_cells else [a0]
        for G, ac in zip(gl, al):
            for q in range(rr.size):
                val = _quad_form(du[q], G) + (ell**2 / rr[q] ** 2) * _quad_form(u[q], G)
                transverse += 2 * ac * two_pi * ww[q] * rr[q] * val

    uR = nodal[:, -1]
    gam = np.asarray(gammas, dtype=complex)
    area = R * two_pi * two_pi
    boundary = 2 * a0 * area * float(np.sum(gam.real * np.abs(uR) ** 2))
    ur = -gam * uR
    grad_sq = np.abs(ur) ** 2 + (ell**2 / R**2 + ks**2) * np.abs(uR) ** 2
    rhs = R * area * float(np.sum(2 * a0 * np.abs(ur) ** 2 - a0 * grad_sq
                                  + spec.eps0 * omega**2 * np.abs(uR) ** 2))
    return RellichTerms(eps_term, mu_term, transverse, boundary, rhs)


def rellich_residual(mode, spec: MediumSpec) -> tuple[float, float]:
    """(lhs, rhs) of the Rellich identity for a computed mode."""
    sys = mode.system
    t = rellich_terms(spec, mode.omega, mode.kappa, mode.ell, sys.m_list, sys.mesh.nodes,
                      sys.expand(mode.vector), sys.gammas)
    return t.lhs, t.rhs


def certify_monotone(spec: MediumSpec, kappas=(0.1, 0.25, 0.4), *, ell_values=(0, 1),
                     omega_max: float | None = None, n: int = 80, search: bool = True,
                     tol: float = 1e-8) -> Certificate:
    """Monotonicity certificate with a falsification sweep.

    The verdict depends only on the hypothesis.  The sweep (see
    ``modes.search_verified_modes``) looks for verified guided modes anyway;
    finding one for a certified medium raises CertificateContradiction.
    """
    from . import modes  # local import keeps certify importable on its own

    monotone = is_radially_monotone(spec)
    key = _inputs_hash(spec.fingerprint, list(kappas), list(ell_values), omega_max, n)
    evidence: dict = {"radially_monotone": monotone}
    found = []
    if search:
        found = modes.search_verified_modes(spec, kappas, ell_values=ell_values, n=n, tol=tol,
                                            omega_max=omega_max)
        evidence["search"] = {
            "kappas": list(kappas), "ell_values": list(ell_values), "omega_max": omega_max,
            "verified_modes": [{"kappa": r.kappa, "omega": r.omega, "ell": r.ell} for r, _ in found],
        }
    tols = {"verification": tol}
    if monotone:
        if found:
            r = found[0][0]
            raise CertificateContradiction(
                f"verified guided mode at omega={r.omega!r}, kappa={r.kappa!r} in a radially "
                "monotone medium"
            )
        return Certificate(CertificateKind.RELLICH_RESIDUAL, Verdict.NO_GUIDED_MODES, evidence,
                           None, tols, key)
    return Certificate(CertificateKind.RELLICH_RESIDUAL, Verdict.INCONCLUSIVE, evidence,
                       "radial-monotonicity", tols, key)


# ---------------------------------------------------------------------------
# exact step-index mode (used as a manufactured solution)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepIndexMode:
    """Exact l-th azimuthal guided mode of a z-invariant core of radius a.

    u = J_l(k1 r) inside, C K_l(beta r) outside, with single harmonic m.
    """

    omega: float
    kappa: float
    m: int
    ell: int
    a: float
    k1: float
    beta: float
    C: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = special.jv(self.ell, self.k1 * r)
        outside = self.C * special.kv(abs(self.ell), self.beta * np.where(r > 0, r, 1.0))
        return np.where(r <= self.a, inside, outside)


def step_index_mode(eps1: float, mu1: float, a: float, kappa: float, ell: int = 0, m: int = 0,
                    eps0: float = 1.0, mu0: float = 1.0) -> StepIndexMode:
    """Lowest guided mode of the step-index core below the cutoff, by Brent's method."""
    q = m + kappa
    lo = abs(q) / math.sqrt(eps1 * mu1) * (1 + 1e-12)
    hi = abs(q) / math.sqrt(eps0 * mu0) * (1 - 1e-12)

    def parts(w):
        k1 = math.sqrt(max(eps1 * mu1 * w * w - q * q, 0.0))
        beta = math.sqrt(max(q * q - eps0 * mu0 * w * w, 0.0))
        return k1, beta

    def f(w):
        k1, beta = parts(w)
        lhs = k1 * specfun.bessel_jp(ell, k1 * a) * specfun.bessel_k(ell, beta * a) / mu1
        rhs = beta * specfun.bessel_kp(ell, beta * a) * specfun.bessel_j(ell, k1 * a) / mu0
        return lhs - rhs

    grid = np.linspace(lo, hi, 400)
    vals = [f(w) for w in grid]
    for i in range(len(grid) - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]):
            w = optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            k1, beta = parts(w)
            C = specfun.bessel_j(ell, k1 * a) / specfun.bessel_k(ell, beta * a)
            return StepIndexMode(w, kappa, m, ell, a, k1, beta, C)
    raise ValueError("no step-index mode below the cutoff for these parameters")
