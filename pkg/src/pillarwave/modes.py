"""Guided modes as fixed points omega^2 = lambda_j(omega).

For real omega the evanescent form a_e is Hermitian and nonnegative, so the
generalized eigenvalues of (A_e(omega), B) are real and ordered.  A guided
mode at (omega, kappa) is an eigenvector with ``lambda_j(omega) = omega^2``
whose trace has no propagating content.  Below the cutoff every harmonic is
evanescent and the second condition is empty.  Above it, the invariant
subspace construction removes the propagating harmonics altogether.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.sparse import linalg as spla

from .assembly import AssembledSystem, RadialMesh, assemble, build_mesh, symmetric_m_set
from .errors import ContinuationError, MediumError, PillarError, WindowError
from .harmonics import BlochParams, HarmonicClass
from .medium import MediumSpec

DENSE_LIMIT = 300
ROOT_TOL = 1e-10
MAX_BISECTIONS = 80
OVERLAP_MATCH = 0.7


def generalized_eigs(A, B, count: int, vectors: bool = False):
    """Smallest ``count`` eigenpairs of the Hermitian pencil (A, B), B positive definite.

    Small systems use LAPACK directly, with Rayleigh-quotient refinement of
    the eigenvalues; larger ones use shift-invert Lanczos
    around a negative shift (all eigenvalues here are nonnegative) with a
    fixed starting vector so results are reproducible.
    """
    n = A.shape[0]
    count = min(count, n)
    if n <= DENSE_LIMIT or count >= n - 1:
        Ad = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
        Bd = B.toarray() if hasattr(B, "toarray") else np.asarray(B)
        w, v = linalg.eigh(Ad, Bd, subset_by_index=[0, count - 1])
        # the Cholesky reduction leaves errors of order eps * lambda_max in w;
        # Rayleigh quotients of the computed vectors are accurate to eps * |A| |x|^2
        w = np.real(np.einsum("ij,ij->j", v.conj(), Ad @ v) / np.einsum("ij,ij->j", v.conj(), Bd @ v))
        order = np.argsort(w, kind="stable")
        w, v = w[order], v[:, order]
        return (w, v) if vectors else w
    v0 = np.ones(n, dtype=complex)
    w, v = spla.eigsh(A.tocsc(), k=count, M=B.tocsc(), sigma=-1.0, which="LM", v0=v0, tol=0)
    order = np.argsort(w)
    w = w[order]
    return (w, v[:, order]) if vectors else w


def _normalise(x, B):
    x = np.asarray(x, dtype=complex)
    x = x / math.sqrt(abs(np.vdot(x, B @ x)))
    k = int(np.argmax(np.abs(x)))
    return x * (abs(x[k]) / x[k])


def eigen_sequence(spec: MediumSpec, p: BlochParams, ell: int, m_set, mesh: RadialMesh,
                   count: int, boundary: str = "dtn") -> np.ndarray:
    """The ``count`` smallest eigenvalues lambda_j of (A_e(omega), B), nondecreasing."""
    if count < 1:
        raise PillarError("count must be >= 1")
    sys = assemble(spec, p, ell, m_set, mesh, boundary)
    return np.asarray(generalized_eigs(sys.A_e, sys.B, count), dtype=float)


@dataclass(frozen=True)
class SubspaceSpec:
    """Harmonics m with |m - jL| <= M for some j are removed; L = 2M + N + 2."""

    M: int
    N: int

    def __post_init__(self):
        if self.M < 0 or self.N < 0:
            raise PillarError("M and N must be >= 0")

    @property
    def L(self) -> int:
        return 2 * self.M + self.N + 2

    def banned(self, m: int) -> bool:
        return (m + self.M) % self.L <= 2 * self.M

    def window(self, kappa: float, eps0: float = 1.0, mu0: float = 1.0) -> tuple[float, float]:
        """Open omega interval with every propagating harmonic banned and some propagating.

        (M + |kappa|)^2 < eps0 mu0 omega^2 < (M + 1 - |kappa|)^2.
        """
        c = math.sqrt(eps0 * mu0)
        lo = (self.M + abs(kappa)) / c
        hi = (self.M + 1 - abs(kappa)) / c
        if not lo < hi:
            raise WindowError(
                f"empty window: (M + |kappa|)^2 = {(self.M + abs(kappa)) ** 2:.6g} is not below "
                f"(M + 1 - |kappa|)^2 = {(self.M + 1 - abs(kappa)) ** 2:.6g}"
            )
        return lo, hi


@dataclass(frozen=True, eq=False)
class ModeResult:
    omega: float
    kappa: float
    ell: int
    branch: int | None
    system: AssembledSystem
    vector: np.ndarray
    lam: float
    classification: str

    @property
    def m_list(self) -> tuple:
        return self.system.m_list

    @property
    def nodal(self) -> np.ndarray:
        return self.system.expand(self.vector)

    @property
    def trace(self) -> dict:
        return self.system.trace(self.vector)

    @property
    def propagating_trace_norm(self) -> float:
        """(sum over propagating m of |u_{m l}(R)|^2)^{1/2}."""
        t = self.trace
        return math.sqrt(sum(abs(t[m]) ** 2 for m in self.system.propagating_ms()))

    @property
    def relative_propagating_trace_norm(self) -> float:
        t = self.trace
        total = math.sqrt(sum(abs(v) ** 2 for v in t.values()))
        return 0.0 if total == 0 else self.propagating_trace_norm / total

    @property
    def fixed_point_residual(self) -> float:
        return abs(self.lam - self.omega**2) / self.omega**2

    @classmethod
    def from_vector(cls, system: AssembledSystem, x, branch=None) -> "ModeResult":
        x = np.asarray(x, dtype=complex)
        p = system.params
        bx = np.vdot(x, system.B @ x).real
        lam = np.vdot(x, system.A_e @ x).real / bx if bx > 0 else math.nan
        kind = "below-cutoff" if p.below_cutoff() else "embedded"
        return cls(p.omega, p.kappa, system.ell, branch, system, x, float(lam), kind)


def _g(spec, p, ell, m_set, mesh, j, vectors=False):
    sys = assemble(spec, p, ell, m_set, mesh)
    if vectors:
        w, v = generalized_eigs(sys.A_e, sys.B, j, vectors=True)
        return w[j - 1] - p.omega**2, sys, w[j - 1], v[:, j - 1]
    w = generalized_eigs(sys.A_e, sys.B, j)
    return w[j - 1] - p.omega**2


def solve_dispersion(spec: MediumSpec, kappa: float, ell: int, j: int, bracket, m_set,
                     mesh: RadialMesh, tol: float = ROOT_TOL,
                     max_iter: int = MAX_BISECTIONS) -> ModeResult | None:
    """Bisection for omega^2 = lambda_j(omega) inside ``bracket``.

    Returns None when g_j = lambda_j - omega^2 has no sign change, when
    the sign change is a jump of g_j (at class breakpoints for l != 0)
    rather than a root, or when it converges onto a light line.
    """
    if j < 1:
        raise PillarError("branch index j starts at 1")
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise PillarError(f"invalid bracket {bracket!r}")
    base = BlochParams(kappa, lo, spec.eps0, spec.mu0)
    g_lo = _g(spec, base, ell, m_set, mesh, j)
    g_hi = _g(spec, base.with_omega(hi), ell, m_set, mesh, j)
    if g_lo == 0:
        hi = lo
    elif g_hi == 0:
        lo = hi
    elif np.sign(g_lo) == np.sign(g_hi):
        return None
    for _ in range(max_iter):
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        mid = 0.5 * (lo + hi)
        g_mid = _g(spec, base.with_omega(mid), ell, m_set, mesh, j)
        if g_mid == 0:
            lo = hi = mid
            break
        if np.sign(g_mid) == np.sign(g_lo):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    best = None
    for omega in ((lo,) if lo == hi else (lo, hi)):
        g, sys, lam, vec = _g(spec, base.with_omega(omega), ell, m_set, mesh, j, vectors=True)
        if best is None or abs(g) < abs(best[0]):
            best = (g, sys, lam, vec)
    g, sys, lam, vec = best
    if abs(g) / sys.params.omega**2 >= tol:
        return None
    # eta = 0 on the light line: the limit field does not decay, so this is a
    # threshold solution and not a guided mode
    if any(c is HarmonicClass.ALGEBRAIC for c in sys.classes):
        return None
    x = _normalise(vec, sys.B)
    return ModeResult.from_vector(sys, x, branch=j)


def class_breakpoints(kappa: float, eps0: float, mu0: float, lo: float, hi: float, m_set) -> list:
    """Frequencies in (lo, hi) at which some harmonic of ``m_set`` changes class."""
    c = math.sqrt(eps0 * mu0)
    pts = sorted({abs(m + kappa) / c for m in m_set})
    return [w for w in pts if lo < w < hi]


def find_roots(spec, kappa, ell, j, bracket, m_set, mesh, samples: int = 24, tol=ROOT_TOL) -> list:
    """All roots of g_j on ``bracket`` found by a sign scan split at class breakpoints."""
    lo, hi = bracket
    cuts = [lo] + class_breakpoints(kappa, spec.eps0, spec.mu0, lo, hi, m_set) + [hi]
    roots = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        # stay off the breakpoints themselves, where l != 0 makes g_j jump
        pad = 1e-9 * (b - a)
        grid = np.linspace(a + pad, b - pad, samples)
        p = BlochParams(kappa, grid[0], spec.eps0, spec.mu0)
        vals = [_g(spec, p.with_omega(w), ell, m_set, mesh, j) for w in grid]
        for k in range(len(grid) - 1):
            if np.sign(vals[k]) != np.sign(vals[k + 1]):
                r = solve_dispersion(spec, kappa, ell, j, (grid[k], grid[k + 1]), m_set, mesh, tol)
                if r is not None:
                    roots.append(r)
    return roots


def below_cutoff_bracket(spec: MediumSpec, kappa: float) -> tuple[float, float]:
    """[|kappa| / sqrt(eps+ mu+), |kappa| / sqrt(eps0 mu0)), the only place trapped modes live."""
    if kappa == 0:
        raise PillarError("kappa = 0 has no frequencies below the cutoff")
    lo = abs(kappa) / math.sqrt(spec.eps_plus * spec.mu_plus)
    hi = abs(kappa) / math.sqrt(spec.eps0 * spec.mu0)
    return lo, hi * (1 - 1e-12)


def below_cutoff_spectrum(spec: MediumSpec, kappa: float, *, ell_values=(0,), m_set=None,
                          mesh: RadialMesh | None = None, n: int = 120, max_branches: int = 20,
                          tol: float = ROOT_TOL) -> list:
    """Every dispersion root with eps0 mu0 omega^2 < kappa^2, sorted by (l, branch).

    Below the cutoff g_j is strictly decreasing in omega and nonnegative at
    the lower end of the bracket, so each branch has at most one root and
    the search stops at the first branch without one.
    """
    lo, hi = below_cutoff_bracket(spec, kappa)
    if m_set is None:
        m_set = symmetric_m_set(2)
    if mesh is None:
        mesh = build_mesh(spec.R, n, "uniform", spec.r_edges)
    out = []
    for ell in ell_values:
        if lo >= hi:
            break
        for j in range(1, max_branches + 1):
            r = solve_dispersion(spec, kappa, ell, j, (lo, hi), m_set, mesh, tol)
            if r is None:
                break
            out.append(r)
    return out


def scan_eigenvalues(spec: MediumSpec, kappa: float, ell: int, m_set, mesh: RadialMesh,
                     omegas, count: int, track: bool = True) -> np.ndarray:
    """lambda_j(omega) on a grid, shape (len(omegas), count).

    With ``track`` the columns follow eigenvectors from one sample to the
    next by B-overlap above 0.7 instead of by sorted position, so branches
    keep their identity through crossings.  Unmatched columns fall back to
    the remaining eigenvalues in order.
    """
    omegas = np.asarray(omegas, dtype=float)
    out = np.empty((omegas.size, count))
    prev = None
    extra = count + 2
    for i, w in enumerate(omegas):
        sys = assemble(spec, BlochParams(kappa, w, spec.eps0, spec.mu0), ell, m_set, mesh)
        lam, vec = generalized_eigs(sys.A_e, sys.B, extra, vectors=True)
        vec = np.column_stack([_normalise(vec[:, k], sys.B) for k in range(vec.shape[1])])
        if not track or prev is None:
            out[i] = lam[:count]
            prev = vec[:, :count]
            continue
        overlap = np.abs(prev.conj().T @ (sys.B @ vec))
        chosen = [-1] * count
        used = set()
        pairs = sorted(((overlap[c, k], c, k) for c in range(count) for k in range(lam.size)),
                       reverse=True)
        for val, c, k in pairs:
            if val <= OVERLAP_MATCH:
                break
            if chosen[c] < 0 and k not in used:
                chosen[c] = k
                used.add(k)
        free = [k for k in range(lam.size) if k not in used]
        for c in range(count):
            if chosen[c] < 0:
                chosen[c] = free.pop(0)
        out[i] = lam[chosen]
        prev = vec[:, chosen]
    return out


@dataclass(frozen=True)
class GuidedReport:
    propagating_trace_norm: float
    relative_propagating_trace_norm: float
    weak_residual: float
    fixed_point_residual: float
    decay_slope: float | None
    passed: bool


def weak_residual(system: AssembledSystem, x) -> float:
    """||(A_e + A_p - omega^2 B) x|| / (||A_e x|| + omega^2 ||B x||)."""
    x = np.asarray(x, dtype=complex)
    w2 = system.params.omega**2
    num = np.linalg.norm(system.A_e @ x + system.A_p @ x - w2 * (system.B @ x))
    den = np.linalg.norm(system.A_e @ x) + w2 * np.linalg.norm(system.B @ x)
    return float(num / den) if den > 0 else 0.0


def verify_guided(mode: ModeResult, full: AssembledSystem | None = None,
                  tol: float = 1e-8) -> GuidedReport:
    """Check a candidate mode on ``full`` (default: the mode's own system).

    Passing requires a relative propagating-trace norm and a weak-form
    residual both below ``tol``.  The decay slope is the least-squares slope
    of log |u_m(R)| against |m| over evanescent harmonics with nonzero trace.
    """
    x = mode.vector if full is None else mode.system.embed(mode.vector, full)
    target = mode.system if full is None else full
    probe = ModeResult.from_vector(target, x, mode.branch)
    res = weak_residual(target, x)
    t = probe.trace
    pts = [(abs(m), math.log(abs(t[m])))
           for m, c in zip(target.m_list, target.classes)
           if c is HarmonicClass.EVANESCENT and abs(t[m]) > 0]
    slope = None
    if len(pts) >= 2 and len({a for a, _ in pts}) >= 2:
        a = np.array(pts)
        slope = float(np.polyfit(a[:, 0], a[:, 1], 1)[0])
    rel = probe.relative_propagating_trace_norm
    return GuidedReport(
        propagating_trace_norm=probe.propagating_trace_norm,
        relative_propagating_trace_norm=rel,
        weak_residual=res,
        fixed_point_residual=probe.fixed_point_residual,
        decay_slope=slope,
        passed=bool(rel < tol and res < tol),
    )


@dataclass(frozen=True)
class EmbeddedResult:
    mode: ModeResult
    report: GuidedReport
    scale: float
    medium: MediumSpec
    window: tuple
    full_system: AssembledSystem
    steps: list = field(default_factory=list)

    @property
    def omega(self) -> float:
        return self.mode.omega

    def off_lattice_content(self) -> float:
        """max |u_m| over m not in L Z, relative to the max over all m (nodal sup norms)."""
        nodal = self.full_system.expand(self.report_vector)
        mags = np.abs(nodal).max(axis=1)
        L = self.medium.L
        off = [mags[i] for i, m in enumerate(self.full_system.m_list) if m % L != 0]
        top = mags.max()
        return 0.0 if top == 0 or not off else float(max(off) / top)

    @property
    def report_vector(self) -> np.ndarray:
        return self.mode.system.embed(self.mode.vector, self.full_system)


def embedded_mode_search(sub: SubspaceSpec, spec: MediumSpec, kappa: float, *, ell: int = 0,
                         n: int = 100, m_max: int | None = None,
                         make_medium: Callable[[float], MediumSpec] | None = None,
                         scale_range=(1e-3, 1e4), growth: float = 1.25,
                         tol: float = 1e-8, root_tol: float = ROOT_TOL) -> EmbeddedResult:
    """Guided mode above the cutoff from the invariant subspace construction.

    On the subspace without the banned harmonics the problem sits below its
    own cutoff ``(M + 1 - |kappa|) / sqrt(eps0 mu0)``, so g_1 is decreasing
    there.  The contrast parameter ``s`` (default: interior eps scaled by s)
    is walked geometrically until g_1 at the window centre changes sign,
    then bisected so that the root lands at the centre.  The mode is finally
    verified on the unrestricted harmonic set.
    """
    if spec.L != sub.L:
        raise MediumError(f"medium period divisor L={spec.L} differs from 2M+N+2={sub.L}")
    lo, hi = sub.window(kappa, spec.eps0, spec.mu0)
    centre = 0.5 * (lo + hi)
    if make_medium is None:
        make_medium = spec.scaled_eps
    if m_max is None:
        m_max = sub.M + 1 + 2 * sub.L
    full_set = symmetric_m_set(m_max)
    v_set = [m for m in full_set if not sub.banned(m)]
    if not v_set:
        raise PillarError("the restricted harmonic set is empty; raise m_max")
    mesh = build_mesh(spec.R, n, "uniform", spec.r_edges)
    p_c = BlochParams(kappa, centre, spec.eps0, spec.mu0)

    def g_at(s):
        return _g(make_medium(s), p_c, ell, v_set, mesh, 1)

    steps = []
    s = 1.0
    g0 = g_at(s)
    steps.append((s, g0))
    # g_1 decreases with contrast: walk up if positive, down if negative
    direction = growth if g0 > 0 else 1.0 / growth
    s_prev, g_prev = s, g0
    while True:
        s_next = s_prev * direction
        if not scale_range[0] <= s_next <= scale_range[1]:
            raise ContinuationError(
                f"contrast continuation left [{scale_range[0]}, {scale_range[1]}] without "
                f"placing a root in the window ({lo:.6g}, {hi:.6g})"
            )
        g_next = g_at(s_next)
        steps.append((s_next, g_next))
        if np.sign(g_next) != np.sign(g_prev):
            break
        s_prev, g_prev = s_next, g_next
    a, b = sorted((s_prev, s_next))
    g_a = g_at(a)
    for _ in range(60):
        mid = 0.5 * (a + b)
        g_mid = g_at(mid)
        if np.sign(g_mid) == np.sign(g_a):
            a, g_a = mid, g_mid
        else:
            b = mid
        if b - a <= 1e-13 * b:
            break
    scale = 0.5 * (a + b)
    medium = make_medium(scale)
    pad = 1e-9 * (hi - lo)
    mode = solve_dispersion(medium, kappa, ell, 1, (lo + pad, hi - pad), v_set, mesh, root_tol)
    if mode is None:
        raise ContinuationError("no dispersion root inside the window after continuation")
    full = assemble(medium, BlochParams(kappa, mode.omega, spec.eps0, spec.mu0), ell, full_set, mesh)
    report = verify_guided(mode, full, tol)
    return EmbeddedResult(mode, report, scale, medium, (lo, hi), full, steps)


def embedded_root(sub: SubspaceSpec, medium: MediumSpec, kappa: float, *, ell: int = 0,
                  n: int = 100, m_max: int | None = None, tol: float = 1e-8) -> EmbeddedResult | None:
    """Embedded mode of a fixed medium inside the window for ``kappa`` (no continuation)."""
    lo, hi = sub.window(kappa, medium.eps0, medium.mu0)
    if m_max is None:
        m_max = sub.M + 1 + 2 * sub.L
    full_set = symmetric_m_set(m_max)
    v_set = [m for m in full_set if not sub.banned(m)]
    mesh = build_mesh(medium.R, n, "uniform", medium.r_edges)
    pad = 1e-9 * (hi - lo)
    mode = solve_dispersion(medium, kappa, ell, 1, (lo + pad, hi - pad), v_set, mesh)
    if mode is None:
        return None
    full = assemble(medium, BlochParams(kappa, mode.omega, medium.eps0, medium.mu0), ell, full_set, mesh)
    return EmbeddedResult(mode, verify_guided(mode, full, tol), 1.0, medium, (lo, hi), full)


@dataclass(frozen=True)
class DispersionCurve:
    branch: int
    ell: int
    samples: list
    medium_hash: str
    truncation: dict

    def omegas(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


def dispersion_curve(spec: MediumSpec, kappas, *, ell: int = 0, branch: int = 1, m_set=None,
                     n: int = 120, bracket_fn=None, threads: int = 1) -> DispersionCurve:
    """omega_j(kappa) below the cutoff (or in ``bracket_fn(kappa)``) for each kappa.

    Samples without a root are omitted; the rest are returned sorted by kappa.
    """
    if m_set is None:
        m_set = symmetric_m_set(2)
    mesh = build_mesh(spec.R, n, "uniform", spec.r_edges)
    bracket_fn = bracket_fn or (lambda k: below_cutoff_bracket(spec, k))

    def job(k):
        r = solve_dispersion(spec, k, ell, branch, bracket_fn(k), m_set, mesh)
        if r is None:
            return None
        return (float(k), r.omega, r.propagating_trace_norm)

    ks = sorted(float(k) for k in kappas)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, ks))
    else:
        rows = [job(k) for k in ks]
    samples = [r for r in rows if r is not None]
    return DispersionCurve(branch, ell, samples, spec.fingerprint,
                           {"m_set": list(m_set), "n": n})


def search_verified_modes(spec: MediumSpec, kappas, *, ell_values=(0, 1), m_set=None, n: int = 80,
                          tol: float = 1e-8, omega_max: float | None = None) -> list:
    """Falsification sweep: every root found on the (kappa, omega) grid that passes verification.

    Below the cutoff the bracket is the full trapped-mode interval.  Above
    it, roots of g_j are located by a sign scan up to ``omega_max`` and kept
    only if their propagating trace vanishes.
    """
    if m_set is None:
        m_set = symmetric_m_set(2)
    mesh = build_mesh(spec.R, n, "uniform", spec.r_edges)
    found = []
    for k in kappas:
        for ell in ell_values:
            if k != 0:
                for r in below_cutoff_spectrum(spec, k, ell_values=(ell,), m_set=m_set, mesh=mesh):
                    rep = verify_guided(r, tol=tol)
                    if rep.passed:
                        found.append((r, rep))
            if omega_max is not None:
                lo = abs(k) / math.sqrt(spec.eps0 * spec.mu0) * (1 + 1e-9) + 1e-6
                if lo < omega_max:
                    for r in find_roots(spec, k, ell, 1, (lo, omega_max), m_set, mesh, samples=12):
                        rep = verify_guided(r, tol=tol)
                        if rep.passed:
                            found.append((r, rep))
    return found


__all__ = [
    "DispersionCurve", "EmbeddedResult", "GuidedReport", "ModeResult", "SubspaceSpec",
    "below_cutoff_bracket", "below_cutoff_spectrum", "dispersion_curve", "eigen_sequence",
    "embedded_mode_search", "embedded_root", "find_roots", "generalized_eigs",
    "scan_eigenvalues", "search_verified_modes", "solve_dispersion", "verify_guided",
    "weak_residual",
]
