"""Galerkin discretisation of the truncated-domain forms for one azimuthal index.

Fields are expanded as ``u = sum_m u_m(r) e^{i l theta} e^{i (m + kappa) z}``
with each radial profile ``u_m`` piecewise linear on a radial mesh.  For an
axisymmetric medium the index ``l`` decouples and the forms reduce to

    a(u, v) = sum_{m, m'} int_0^R (1/mu)_{m-m'} [u'_{m'} conj(v'_m)
              + (l^2 / r^2 + (m' + kappa)(m + kappa)) u_{m'} conj(v_m)] r dr
              + (R / mu0) sum_m gamma_{m l} u_m(R) conj(v_m(R))
    b(u, v) = sum_{m, m'} int_0^R (eps)_{m-m'} u_{m'} conj(v_m) r dr

The common factor 4 pi^2 from the (theta, z) integrals is dropped from every
form, including scattering right-hand sides.  Matrices are indexed
``[test, trial]`` so that ``a(u, v) = v^H A u``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from . import harmonics
from .errors import MeshError, PillarError
from .harmonics import BlochParams, HarmonicClass
from .medium import MediumSpec, z_fourier

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True, eq=False)
class RadialMesh:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshError("mesh needs at least two nodes")
        if nodes[0] != 0.0:
            raise MeshError("first node must be r = 0")
        if np.any(np.diff(nodes) <= 0):
            raise MeshError("nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def R(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        """Number of elements."""
        return self.nodes.size - 1

    @property
    def key(self) -> bytes:
        return self.nodes.tobytes()


def build_mesh(R: float, n: int, grading: str = "uniform", breakpoints=()) -> RadialMesh:
    """Radial P1 mesh on [0, R] with every material breakpoint as a node.

    The n elements are shared among the segments between breakpoints in
    proportion to their length (at least two per segment).  ``uniform``
    spaces nodes evenly inside each segment; ``graded-to-interfaces``
    clusters them toward segment ends with a cosine map.
    """
    if n < 4:
        raise MeshError("n must be >= 4")
    if grading not in ("uniform", "graded-to-interfaces"):
        raise MeshError(f"unknown grading {grading!r}")
    bps = sorted(float(b) for b in breakpoints)
    for b in bps:
        if not (0.0 <= b <= R * (1 + 1e-14)):
            raise MeshError(f"breakpoint {b} outside [0, {R}]")
    inner = [b for b in bps if 1e-14 * R < b < R * (1 - 1e-14)]
    inner = sorted(set(inner))
    edges = np.array([0.0] + inner + [R])
    lengths = np.diff(edges)
    counts = np.maximum(2, np.round(n * lengths / R).astype(int))
    nodes = [0.0]
    for (a, b), k in zip(zip(edges[:-1], edges[1:]), counts):
        t = np.arange(1, k + 1) / k
        if grading == "graded-to-interfaces":
            t = 0.5 * (1 - np.cos(np.pi * t))
        seg = a + (b - a) * t
        seg[-1] = b
        nodes.extend(seg.tolist())
    return RadialMesh(np.array(nodes))


def mesh_for(spec: MediumSpec, n: int, grading: str = "uniform") -> RadialMesh:
    return build_mesh(spec.R, n, grading, spec.r_edges)


def _element_matrices(a: float, b: float):
    """Exact 2x2 element integrals against r dr (stiffness, mass) and dr / r."""
    h = b - a
    stiff = (b * b - a * a) / (2 * h * h) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    mass = h / 12.0 * np.array([[3 * a + b, a + b], [a + b, a + 3 * b]])
    if a == 0.0:
        # the (0, 0) entry diverges; node 0 is eliminated whenever l != 0
        inv_r = np.array([[0.0, 0.5], [0.5, 0.5]])
    else:
        r = 0.5 * (a + b) + 0.5 * h * _GL_X
        n1 = (b - r) / h
        n2 = (r - a) / h
        w = 0.5 * h * _GL_W / r
        inv_r = np.array([[w @ (n1 * n1), w @ (n1 * n2)], [w @ (n1 * n2), w @ (n2 * n2)]])
    return stiff, mass, inv_r


@dataclass
class _CellMatrices:
    """Per radial material region, the global sparse P1 matrices."""

    stiff: list
    mass: list
    inv_r: list


def _cell_matrices(spec: MediumSpec, mesh: RadialMesh) -> _CellMatrices:
    n_cells = spec.n_radial_cells + 1  # last slot is the exterior material
    size = mesh.nodes.size
    rows, cols = {}, {}
    data = {k: [[] for _ in range(n_cells)] for k in ("stiff", "mass", "inv_r")}
    idx = [[] for _ in range(n_cells)]
    for e in range(mesh.n):
        a, b = mesh.nodes[e], mesh.nodes[e + 1]
        c = spec.radial_cell(0.5 * (a + b))
        c = n_cells - 1 if c < 0 else c
        for name, mat in zip(("stiff", "mass", "inv_r"), _element_matrices(a, b)):
            data[name][c].append(mat.ravel())
        idx[c].append(e)
    out = {}
    for name in data:
        mats = []
        for c in range(n_cells):
            if not idx[c]:
                mats.append(sparse.csr_matrix((size, size)))
                continue
            e = np.asarray(idx[c])
            r = np.stack([e, e, e + 1, e + 1], axis=1).ravel()
            q = np.stack([e, e + 1, e, e + 1], axis=1).ravel()
            v = np.concatenate(data[name][c])
            mats.append(sparse.csr_matrix((v, (r, q)), shape=(size, size)))
        out[name] = mats
    return _CellMatrices(out["stiff"], out["mass"], out["inv_r"])


def check_mesh(spec: MediumSpec, mesh: RadialMesh) -> None:
    if abs(mesh.R - spec.R) > 1e-12 * spec.R:
        raise MeshError(f"mesh ends at {mesh.R}, medium truncation radius is {spec.R}")
    for r in spec.r_edges:
        if np.min(np.abs(mesh.nodes - r)) > 1e-12 * max(1.0, r):
            raise MeshError(f"material breakpoint r={r} is not a mesh node")


@dataclass(frozen=True)
class _Interior:
    A: sparse.csr_matrix
    B: sparse.csr_matrix
    dof_m: np.ndarray
    dof_node: np.ndarray


class InteriorCache:
    """Interior blocks keyed by (medium, l, m list, mesh, kappa, boundary kind).

    Reads are plain dictionary lookups; insertion and eviction take a lock.
    """

    def __init__(self, maxsize: int = 256):
        self._data: dict = {}
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            if key not in self._data:
                if len(self._data) >= self.maxsize:
                    self._data.pop(next(iter(self._data)))
                self._data[key] = value
            return self._data[key]

    def clear(self):
        with self._lock:
            self._data.clear()


INTERIOR_CACHE = InteriorCache()


def _assemble_interior(spec, kappa, ell, m_list, mesh, boundary) -> _Interior:
    key = (spec.fingerprint, int(ell), tuple(m_list), mesh.key, float(kappa), boundary)
    hit = INTERIOR_CACHE.get(key)
    if hit is not None:
        return hit
    check_mesh(spec, mesh)
    cells = _cell_matrices(spec, mesh)
    n_cells = spec.n_radial_cells + 1
    q_span = max(m_list) - min(m_list)
    table = z_fourier(spec, q_span)
    size = mesh.nodes.size
    nm = len(m_list)

    def coeff(kind, c, q):
        if c == n_cells - 1:
            if q != 0:
                return 0.0
            return spec.eps0 if kind == "eps" else 1.0 / spec.mu0
        return (table.eps_q(q) if kind == "eps" else table.inv_mu_q(q))[c]

    ell_sq = float(ell) ** 2
    per_q: dict = {}
    for q in range(-q_span, q_span + 1):
        grad = mass_mu = mass_eps = None
        for c in range(n_cells):
            cm = coeff("mu", c, q)
            ce = coeff("eps", c, q)
            if cm != 0:
                g = cm * (cells.stiff[c] + ell_sq * cells.inv_r[c])
                mm = cm * cells.mass[c]
                grad = g if grad is None else grad + g
                mass_mu = mm if mass_mu is None else mass_mu + mm
            if ce != 0:
                me = ce * cells.mass[c]
                mass_eps = me if mass_eps is None else mass_eps + me
        per_q[q] = (grad, mass_mu, mass_eps)
    a_blocks = [[None] * nm for _ in range(nm)]
    b_blocks = [[None] * nm for _ in range(nm)]
    for i, m in enumerate(m_list):
        for j, mp in enumerate(m_list):
            grad, mass_mu, mass_eps = per_q[m - mp]
            if grad is not None:
                a_blocks[i][j] = grad + (m + kappa) * (mp + kappa) * mass_mu
            if mass_eps is not None:
                b_blocks[i][j] = mass_eps
    for i in range(nm):
        if a_blocks[i][i] is None:
            a_blocks[i][i] = sparse.csr_matrix((size, size))
        if b_blocks[i][i] is None:
            b_blocks[i][i] = sparse.csr_matrix((size, size))
    A = sparse.bmat(a_blocks, format="csr", dtype=complex)
    B = sparse.bmat(b_blocks, format="csr", dtype=complex)
    keep_node = np.ones(size, dtype=bool)
    if ell != 0:
        keep_node[0] = False
    if boundary == "dirichlet":
        keep_node[-1] = False
    keep = np.nonzero(np.tile(keep_node, nm))[0]
    dof_m = np.repeat(np.arange(nm), size)[keep]
    dof_node = np.tile(np.arange(size), nm)[keep]
    A = A[keep][:, keep]
    B = B[keep][:, keep]
    A = ((A + A.conj().T) * 0.5).tocsr()
    B = ((B + B.conj().T) * 0.5).tocsr()
    A.eliminate_zeros()
    B.eliminate_zeros()
    return INTERIOR_CACHE.put(key, _Interior(A, B, dof_m, dof_node))


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Discrete forms a_e, a_p and b for one azimuthal index at fixed (omega, kappa).

    Matrices are sparse (CSR); each (m, m') block is tridiagonal.
    """

    ell: int
    m_list: tuple
    params: BlochParams
    mesh: RadialMesh
    spec: MediumSpec
    A_e: sparse.csr_matrix
    A_p: sparse.csr_matrix
    B: sparse.csr_matrix
    A_interior: sparse.csr_matrix
    dof_m: np.ndarray
    dof_node: np.ndarray
    trace_dofs: tuple
    classes: tuple
    gammas: tuple
    boundary: str = "dtn"

    @property
    def size(self) -> int:
        return self.B.shape[0]

    def operator(self, omega_sq: float | None = None) -> sparse.csc_matrix:
        """A_e + A_p - omega^2 B."""
        w2 = self.params.omega**2 if omega_sq is None else omega_sq
        return (self.A_e + self.A_p - w2 * self.B).tocsc()

    def expand(self, x) -> np.ndarray:
        """Nodal values, shape (len(m_list), n_nodes); eliminated nodes are 0."""
        out = np.zeros((len(self.m_list), self.mesh.nodes.size), dtype=complex)
        out[self.dof_m, self.dof_node] = x
        return out

    def trace(self, x) -> dict:
        """u_{m l}(R) for each m in the system."""
        x = np.asarray(x)
        return {m: (complex(x[d]) if d is not None else 0j)
                for m, d in zip(self.m_list, self.trace_dofs)}

    def trace_vector(self, x) -> np.ndarray:
        t = self.trace(x)
        return np.array([t[m] for m in self.m_list])

    def propagating_ms(self) -> list:
        return [m for m, c in zip(self.m_list, self.classes) if c is HarmonicClass.PROPAGATING]

    def embed(self, x, other: "AssembledSystem") -> np.ndarray:
        """Re-index a coefficient vector of this system into ``other`` (zeros elsewhere)."""
        nodal = self.expand(x)
        pos = {m: i for i, m in enumerate(self.m_list)}
        y = np.zeros(other.size, dtype=complex)
        for d, (im, node) in enumerate(zip(other.dof_m, other.dof_node)):
            m = other.m_list[im]
            if m in pos:
                y[d] = nodal[pos[m], node]
        return y


def assemble(spec: MediumSpec, p: BlochParams, ell: int, m_set, mesh: RadialMesh,
             boundary: str = "dtn") -> AssembledSystem:
    """Assemble a_e, a_p and b for azimuthal index ``ell`` over the harmonics ``m_set``.

    ``boundary`` selects the exact DtN condition (``"dtn"``), a homogeneous
    Dirichlet condition at r = R (``"dirichlet"``, validation only) or the
    natural condition with all gamma set to zero (``"neumann"``).
    """
    if boundary not in ("dtn", "dirichlet", "neumann"):
        raise PillarError(f"unknown boundary kind {boundary!r}")
    m_list = tuple(int(m) for m in m_set)
    if not m_list:
        raise PillarError("empty harmonic set")
    if len(set(m_list)) != len(m_list):
        raise PillarError("duplicate harmonic indices")
    ell = int(ell)
    interior = _assemble_interior(spec, p.kappa, ell, m_list, mesh, boundary)
    last = mesh.nodes.size - 1
    trace_dofs = []
    for i in range(len(m_list)):
        hits = np.nonzero((interior.dof_m == i) & (interior.dof_node == last))[0]
        trace_dofs.append(int(hits[0]) if hits.size else None)
    size = interior.B.shape[0]
    diag_e = np.zeros(size)
    diag_p = np.zeros(size, dtype=complex)
    classes, gammas = [], []
    for m, d in zip(m_list, trace_dofs):
        h = harmonics.harmonic(m, p)
        classes.append(h.cls)
        if boundary != "dtn":
            gammas.append(0j)
            continue
        g = harmonics.gamma_coefficient(h, ell, spec.R)
        gammas.append(g)
        entry = spec.R * g / spec.mu0
        if h.cls is HarmonicClass.PROPAGATING:
            diag_p[d] += entry
        else:
            diag_e[d] += entry.real
    A_e = (interior.A + sparse.diags(diag_e.astype(complex))).tocsr()
    A_p = sparse.diags(diag_p).tocsr()
    return AssembledSystem(
        ell=ell, m_list=m_list, params=p, mesh=mesh, spec=spec,
        A_e=A_e, A_p=A_p, B=interior.B, A_interior=interior.A,
        dof_m=interior.dof_m, dof_node=interior.dof_node,
        trace_dofs=tuple(trace_dofs), classes=tuple(classes), gammas=tuple(gammas),
        boundary=boundary,
    )


def restrict_to_subspace(spec: MediumSpec, p: BlochParams, ell: int, m_set, mesh: RadialMesh,
                         banned, boundary: str = "dtn") -> AssembledSystem:
    """Assemble over the harmonics of ``m_set`` for which ``banned(m)`` is false."""
    kept = [m for m in m_set if not banned(m)]
    if not kept:
        raise PillarError("every harmonic is banned; the restricted space is empty")
    return assemble(spec, p, ell, kept, mesh, boundary)


def symmetric_m_set(m_max: int) -> list:
    return list(range(-m_max, m_max + 1))


def hermitian_defect(A) -> float:
    nrm = spla.norm(A) if sparse.issparse(A) else np.linalg.norm(A)
    D = A - A.conj().T
    dn = spla.norm(D) if sparse.issparse(D) else np.linalg.norm(D)
    return 0.0 if nrm == 0 else float(dn / nrm)


def default_m_max(p: BlochParams, extra: int = 3) -> int:
    """Propagating band plus ``extra`` evanescent harmonics on each side."""
    return int(math.ceil(abs(p.kappa) + math.sqrt(p.k0_sq))) + extra
