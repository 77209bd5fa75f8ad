import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from pillarwave import medium as md
from pillarwave.errors import MediumError


def test_z_constant_only_q0():
    spec = md.layered([0.3, 0.7], [2.0, 3.5], [1.0, 1.2])
    t = md.z_fourier(spec, 6)
    for q in range(-6, 7):
        if q == 0:
            assert np.allclose(t.eps_q(0), [2.0, 3.5], atol=1e-15)
            assert np.allclose(t.inv_mu_q(0), [1.0, 1 / 1.2], atol=1e-15)
        else:
            assert np.all(t.eps_q(q) == 0) and np.all(t.inv_mu_q(q) == 0)
    with pytest.raises(IndexError):
        t.eps_q(7)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_sampled_cosine(L):
    # eps0 + delta cos(L z) sampled at cell midpoints, n cells per period
    eps0, delta, n = 2.0, 0.3, 32
    edges = np.linspace(0, 1, n + 1)
    mids = -math.pi + (edges[:-1] + 0.5 / n) * 2 * math.pi / L
    spec = md.tiled([0.5], edges, [eps0 + delta * np.cos(L * mids)], L=L)
    t = md.z_fourier(spec, 3 * L)
    h = 2 * math.pi / L / n
    sinc = math.sin(L * h / 2) / (L * h / 2)
    for q in range(-3 * L, 3 * L + 1):
        c = t.eps_q(q)[0]
        if q == 0:
            assert abs(c - eps0) < 1e-14
        elif abs(q) == L:
            assert abs(c - delta / 2 * sinc) < 1e-14
        elif q % L:
            assert c == 0
        else:
            assert abs(c) < 1e-14


def test_two_cell_profile_against_quadrature():
    eps0, eps1 = 1.0, 3.0
    spec = md.MediumSpec((0.5,), (-math.pi, -math.pi / 2, math.pi / 2, math.pi),
                         np.array([[eps0, eps1, eps0]]), np.ones((1, 3)))
    t = md.z_fourier(spec, 9)
    for q in range(-9, 10):
        analytic = (eps1 - eps0) * (math.sin(q * math.pi / 2) / (q * math.pi) if q else 0.5) \
            + (eps0 if q == 0 else 0)
        re = integrate.quad(lambda z: spec.value("eps", 0.1, z) * math.cos(q * z), -math.pi, math.pi,
                            points=[-math.pi / 2, math.pi / 2], epsabs=1e-13, limit=200)[0] / (2 * math.pi)
        c = t.eps_q(q)[0]
        assert abs(c - analytic) < 1e-12
        assert abs(c - re) < 1e-12
        assert abs(c.imag) < 1e-15


@st.composite
def tiled_media(draw):
    L = draw(st.integers(1, 4))
    nr = draw(st.integers(1, 3))
    r = sorted(set(round(draw(st.floats(0.05, 1.0)), 3) for _ in range(nr)))
    nc = draw(st.integers(1, 4))
    cuts = sorted(set(round(draw(st.floats(0.05, 0.95)), 3) for _ in range(nc - 1)))
    frac = [0.0] + cuts + [1.0]
    vals = st.floats(0.2, 10.0)
    eps = [[draw(vals) for _ in range(len(frac) - 1)] for _ in r]
    mu = [[draw(vals) for _ in range(len(frac) - 1)] for _ in r]
    return md.tiled(r, frac, eps, mu, L=L)


@given(tiled_media())
def test_fourier_support_and_symmetry(spec):
    t = md.z_fourier(spec, 12)
    for q in range(-12, 13):
        if q % spec.L:
            assert np.all(t.eps_q(q) == 0) and np.all(t.inv_mu_q(q) == 0)
        assert np.allclose(t.eps_q(-q), np.conj(t.eps_q(q)), atol=1e-14, rtol=0)
    assert np.all(t.eps_q(0).real > 0)


@given(tiled_media())
def test_mean_square_reconstruction(spec):
    Q = 64
    t = md.z_fourier(spec, Q)
    z = np.linspace(-math.pi, math.pi, 4096, endpoint=False) + math.pi / 4096
    q = np.arange(-Q, Q + 1)
    basis = np.exp(1j * np.outer(q, z))
    for k in range(spec.n_radial_cells):
        row = spec.eps[k]
        exact = row[np.clip(np.searchsorted(spec.z_edges, z, side="right") - 1, 0, row.size - 1)]
        approx = (t.eps[k] @ basis).real
        err = math.sqrt(np.mean((approx - exact) ** 2))
        rms = math.sqrt(np.mean(exact ** 2))
        jumps = np.diff(np.append(row, row[0]))
        if not np.any(jumps):
            assert err < 1e-10 * rms
            continue
        # a unit step has |c_q| = 1/(2 pi |q|), so the tail beyond Q carries
        # about sum J^2 / (2 pi^2 Q) of mean-square error
        gibbs = math.sqrt(np.sum(jumps ** 2) / (2 * math.pi ** 2 * Q))
        assert err < 1.5 * gibbs
        if row.max() <= 2 * row.min():
            assert err < 0.05 * rms


def test_structure_predicates():
    hom = md.homogeneous(1.5, 1.0)
    assert md.is_inverse_structure(hom) and md.is_radially_monotone(hom)
    assert not md.is_inverse_structure(md.layered([0.5], [2.0]))
    assert md.is_inverse_structure(md.layered([0.5], [0.5], [1.0]))
    assert md.is_radially_monotone(md.layered([0.3, 0.6], [0.5, 0.8]))
    assert md.is_radially_monotone(md.layered([0.3, 0.6, 0.9], [0.5, 0.8, 1.0]))
    assert not md.is_radially_monotone(md.layered([0.5], [1.5]))
    assert not md.is_radially_monotone(md.layered([0.3, 0.6], [0.5, 0.4]))
    assert not md.is_radially_monotone(md.layered([0.5], [0.5], [1.5]))
    assert not md.is_inverse_structure(md.layered([0.5], [0.5], [1.5]))


def test_validation_messages():
    errs = md.validate_medium((0.5,), (-math.pi, math.pi), [[-1.0]], [[1.0]], 1.0, 1.0, 1.0, 1)
    assert any("eps" in e and "positive" in e for e in errs)
    errs = md.validate_medium((0.5, 1.5), (-math.pi, math.pi), [[1.0], [1.0]], [[1.0], [1.0]],
                              1.0, 1.0, 1.0, 1)
    assert any("exceeds" in e for e in errs)
    # period 2 pi profile declared with L = 2
    errs = md.validate_medium((0.5,), (-math.pi, 0.0, math.pi), [[2.0, 1.0]], [[1.0, 1.0]],
                              1.0, 1.0, 1.0, 2)
    assert any("not periodic" in e for e in errs)
    errs = md.validate_medium((0.5,), (-math.pi, -math.pi / 2, 0.0, math.pi / 2, math.pi),
                              [[2.0, 1.0, 2.0, 1.0]], [[1.0] * 4], 1.0, 1.0, 1.0, 2)
    assert errs == []
    with pytest.raises(MediumError):
        md.layered([0.5], [0.0])
    with pytest.raises(MediumError):
        md.z_fourier(md.homogeneous(), -1)


def test_bounds_and_fingerprint():
    spec = md.layered([0.3, 0.6], [0.5, 4.0], [2.0, 0.7])
    assert spec.eps_minus == 0.5 and spec.eps_plus == 4.0
    assert spec.mu_minus == 0.7 and spec.mu_plus == 2.0
    same = md.layered([0.3, 0.6], [0.5, 4.0], [2.0, 0.7])
    assert spec == same and spec.fingerprint == same.fingerprint
    assert spec.scaled_eps(2.0).eps_plus == 8.0
    assert spec.value("eps", 0.7, 0.0) == 1.0 and spec.radial_cell(0.7) == -1
