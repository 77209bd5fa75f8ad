import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from pillarwave import assembly as asm
from pillarwave import certify, harmonics, modes
from pillarwave import medium as md
from pillarwave.certify import CertificateKind, Verdict
from pillarwave.errors import CertificateContradiction
from pillarwave.harmonics import BlochParams, HarmonicClass

J01 = 2.404825557695773


def test_radius_bound_examples():
    assert certify.radius_bound(BlochParams(0.0, 1.0)) == 1.0
    # kappa = +0.5 lies outside [-1/2, 1/2); -0.5 is the same Bloch class
    assert certify.radius_bound(BlochParams(-0.5, 2.0)) == pytest.approx(1 / math.sqrt(3.75), rel=1e-15)
    assert certify.radius_bound(BlochParams(-0.5, 2.0)) == pytest.approx(0.516397779494322, abs=1e-15)
    assert certify.radius_bound(BlochParams(-0.5, 0.4)) is None
    assert certify.radius_bound(BlochParams(-0.5, 0.5)) is None


def test_alpha_example():
    an = certify.alpha_cases(BlochParams(0.0, 1.0), 0.9, 2, 2)
    hit = [c for c in an.cases if (c.m, c.ell, c.k) == (0, 0, 1)]
    assert len(hit) == 1 and hit[0].case == "I"
    assert hit[0].alpha == pytest.approx((J01 / 0.9) ** 2, rel=1e-13)
    assert hit[0].alpha == pytest.approx(7.139735756724424, rel=1e-13)


@pytest.mark.parametrize("kappa,omega,R_frac", [(0.2, 1.3, 0.9), (-0.3, 2.1, 0.5), (0.0, 1.0, 0.9)])
def test_case_one_structure(kappa, omega, R_frac):
    p = BlochParams(kappa, omega)
    R = R_frac * certify.radius_bound(p)
    an = certify.alpha_cases(p, R, 3, 4)
    case1 = [c for c in an.cases if c.case == "I" and c.alpha is not None]
    assert case1
    for c in case1:
        oracle = (special.jn_zeros(abs(c.ell), c.k)[-1] ** 2 / R**2 + (c.m + kappa) ** 2) / p.k0_sq
        assert c.alpha == pytest.approx(oracle, rel=1e-12)
        # chain: alpha >= (1/R^2 + kappa^2)/k0^2 > 1
        assert c.alpha >= (1 / R**2 + kappa**2) / p.k0_sq > 1
    best = min(case1, key=lambda c: c.alpha)
    assert (best.m, best.ell, best.k) == (round(-kappa), 0, 1)


def test_case_tags_follow_classification():
    p = BlochParams(0.3, 1.0)
    an = certify.alpha_cases(p, 0.5, 2, 3)
    expect = {HarmonicClass.PROPAGATING: {"I"}, HarmonicClass.EVANESCENT: {"II"},
              HarmonicClass.ALGEBRAIC: {"III", "IV"}}
    for c in an.cases:
        assert c.case in expect[harmonics.harmonic(c.m, p).cls]
    assert any(c.alpha is None and c.reason for c in an.cases)
    # algebraic cases need a tie eps0 mu0 omega^2 = (m + kappa)^2
    q = BlochParams(0.25, 0.75)
    tags = {c.case for c in certify.alpha_cases(q, 0.5, 1, 2).cases if c.m == 1 - 0 * 1 and c.ell != 0}
    assert harmonics.harmonic(0, q).cls is HarmonicClass.PROPAGATING
    tags = {(c.m, c.ell): c.case for c in certify.alpha_cases(BlochParams(0.0, 1.0), 0.5, 1, 1).cases}
    assert tags[(1, 0)] == "IV" and tags[(1, 1)] == "III" and tags[(0, 0)] == "I"


def test_case_two_robin_roots_and_modified_branch():
    p = BlochParams(0.1, 0.8)
    R = 0.5
    an = certify.alpha_cases(p, R, 2, 3)
    for c in an.cases:
        if c.case != "II":
            continue
        h = harmonics.harmonic(c.m, p)
        gamma = harmonics.gamma_coefficient(h, c.ell, R).real
        assert gamma > 0
        assert certify.modified_robin_positive(c.ell, gamma, R, np.linspace(1e-6, 40, 2000))
        if c.alpha is not None:
            z = math.sqrt(c.zeta_sq)
            res = z * special.jvp(c.ell, z * R) + gamma * special.jv(c.ell, z * R)
            assert abs(res) < 1e-10
            assert c.alpha > 1
    # without a positive Robin coefficient the modified branch could vanish
    assert not certify.modified_robin_positive(1, -5.0, 1.0, np.linspace(0.1, 3, 50))


def test_certify_radius_examples():
    p = BlochParams(-0.5, 2.0)
    b = certify.radius_bound(p)
    inv = md.layered([0.25 * b], [0.5], R=0.5 * b)
    c = certify.certify_radius(inv, p)
    assert c.verdict is Verdict.NO_GUIDED_MODES and c.kind is CertificateKind.RADIUS_BOUND
    assert c.evidence["min_alpha"] > 1 + 1e-9 and c.evidence["R_max"] == b
    c = certify.certify_radius(md.layered([0.25 * b], [2.0], R=0.5 * b), p)
    assert c.verdict is Verdict.INCONCLUSIVE and c.failed_premise == "inverse-structure"
    c = certify.certify_radius(md.layered([0.25 * b], [0.5], R=1.5 * b), p)
    assert c.verdict is Verdict.INCONCLUSIVE and c.failed_premise == "radius"
    # below the cutoff the radius premise is vacuous
    c = certify.certify_radius(md.layered([0.5], [0.5]), BlochParams(0.4, 0.3))
    assert c.verdict is Verdict.NO_GUIDED_MODES and c.evidence["R_max"] is None
    d = c.to_dict()
    assert d["kind"] == "RadiusBound" and d["verdict"] == "NoGuidedModes" and len(d["inputs_hash"]) == 64


def _manufactured(n, eps1=12.0, mu1=1.0, ell=0):
    sm = certify.step_index_mode(eps1, mu1, 0.8, 0.4, ell=ell)
    spec = md.layered([0.8], [eps1], [mu1])
    p = BlochParams(0.4, sm.omega)
    g = harmonics.gamma_coefficient(harmonics.harmonic(0, p), ell, 1.0)
    mesh = asm.mesh_for(spec, n)
    nodal = sm(mesh.nodes)[None, :].astype(complex)
    return certify.rellich_terms(spec, sm.omega, 0.4, ell, [0], mesh.nodes, nodal, (g,))


def test_step_index_mode_is_exact():
    sm = certify.step_index_mode(12.0, 1.0, 0.8, 0.4)
    assert 0.4 / math.sqrt(12) < sm.omega < 0.4
    # continuity of u and of the flux at r = a
    e = 1e-9
    assert abs(sm(0.8 - e) - sm(0.8 + e)) < 1e-8
    du_in = -sm.k1 * special.j1(sm.k1 * 0.8)
    du_out = sm.C * sm.beta * special.kvp(0, sm.beta * 0.8)
    assert du_in == pytest.approx(du_out, rel=1e-10)
    # agrees with the discrete dispersion root
    r = modes.solve_dispersion(md.layered([0.8], [12.0]), 0.4, 0, 1,
                               modes.below_cutoff_bracket(md.layered([0.8], [12.0]), 0.4), [0],
                               asm.mesh_for(md.layered([0.8], [12.0]), 200))
    assert r.omega == pytest.approx(sm.omega, rel=1e-4)
    with pytest.raises(ValueError):
        certify.step_index_mode(1.0, 1.0, 0.8, 0.4)


@pytest.mark.parametrize("eps1,mu1,ell", [(12.0, 1.0, 0), (6.0, 2.0, 0), (80.0, 1.0, 1)])
def test_rellich_manufactured(eps1, mu1, ell):
    res = [_manufactured(n, eps1, mu1, ell).residual for n in (100, 200, 400)]
    assert res[-1] < 1e-6
    assert res[1] <= res[0] / 2 and res[2] <= res[1] / 2


def test_rellich_zero_field():
    spec = md.layered([0.5], [2.0])
    mesh = asm.mesh_for(spec, 20)
    t = certify.rellich_terms(spec, 0.5, 0.1, 0, [-1, 0, 1], mesh.nodes,
                              np.zeros((3, mesh.nodes.size), complex), (1.0, 1.0, 1.0))
    assert (t.lhs, t.rhs) == (0.0, 0.0)


MONO = md.tiled([0.3, 0.7], [0, 0.4, 1], [[1.5, 2.0], [2.5, 2.5]], [[1.0, 1.2], [1.5, 1.2]],
                eps0=3.0, mu0=2.0)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2), st.floats(-0.5, 0.49),
       st.floats(0.2, 1.5))
def test_rellich_lhs_nonnegative_for_monotone_media(seed, ell, kappa, omega):
    assert md.is_radially_monotone(MONO)
    rng = np.random.default_rng(seed)
    p = BlochParams(kappa, omega, MONO.eps0, MONO.mu0)
    m_list = [-1, 0, 1]
    mesh = asm.mesh_for(MONO, 30)
    nodal = rng.normal(size=(3, mesh.nodes.size)) + 1j * rng.normal(size=(3, mesh.nodes.size))
    if ell != 0:
        nodal[:, 0] = 0
    gammas = tuple(harmonics.gamma_coefficient(harmonics.harmonic(m, p), ell, MONO.R) for m in m_list)
    t = certify.rellich_terms(MONO, omega, kappa, ell, m_list, mesh.nodes, nodal, gammas)
    assert t.eps_interfaces >= 0 and t.mu_interfaces >= -1e-12 * abs(t.lhs)
    assert t.transverse >= 0 and t.boundary_dtn >= 0
    assert t.lhs >= -1e-8


def test_rellich_residual_of_computed_mode():
    spec = md.layered([0.8], [12.0])
    r = modes.solve_dispersion(spec, 0.4, 0, 1, modes.below_cutoff_bracket(spec, 0.4), [0],
                               asm.mesh_for(spec, 400))
    lhs, rhs = certify.rellich_residual(r, spec)
    assert abs(lhs - rhs) / max(abs(lhs), abs(rhs)) < 1e-3
    # the interface term carries the sign that the monotone argument forbids
    t = certify.rellich_terms(spec, r.omega, 0.4, 0, r.system.m_list, r.system.mesh.nodes,
                              r.system.expand(r.vector), r.system.gammas)
    assert t.eps_interfaces < 0


def test_certify_monotone_staircase():
    stair = md.layered([0.3, 0.6], [1.5, 2.5], eps0=3.0)
    c = certify.certify_monotone(stair, (0.1, 0.25, 0.4), n=50, omega_max=1.2)
    assert c.verdict is Verdict.NO_GUIDED_MODES
    assert c.evidence["search"]["verified_modes"] == []


def test_certify_monotone_core_and_homogeneous():
    c = certify.certify_monotone(md.layered([0.8], [12.0]), (0.25, 0.4), n=50)
    assert c.verdict is Verdict.INCONCLUSIVE and c.failed_premise == "radial-monotonicity"
    assert c.evidence["search"]["verified_modes"]
    c = certify.certify_monotone(md.homogeneous(), (0.1, 0.4), n=40)
    assert c.verdict is Verdict.NO_GUIDED_MODES


def test_contradiction_is_escalated(monkeypatch):
    spec = md.layered([0.8], [12.0])
    real = modes.search_verified_modes(spec, [0.4], ell_values=(0,), n=50)
    assert real
    monkeypatch.setattr(modes, "search_verified_modes", lambda *a, **k: real)
    with pytest.raises(CertificateContradiction):
        certify.certify_monotone(md.homogeneous(), (0.4,))
