import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pillarwave import specfun
from pillarwave.errors import DomainError, SingularityError

mp.mp.dps = 30

ORDERS = range(0, 11)
ARGS = [0.1, 0.5, 1.0, 2.5, 5.0, 7.3, 12.0, 19.9, 25.0, 30.0]


def series_j(ell, x, terms=200):
    """Power series for J_l evaluated in 30-digit arithmetic."""
    x = mp.mpf(x)
    half = x / 2
    total = mp.mpf(0)
    for k in range(terms):
        total += (-1) ** k * half ** (2 * k + ell) / (mp.factorial(k) * mp.factorial(k + ell))
    return total


def series_i(ell, x, terms=200):
    x = mp.mpf(x)
    half = x / 2
    return mp.fsum(half ** (2 * k + ell) / (mp.factorial(k) * mp.factorial(k + ell))
                   for k in range(terms))


def quad_k(ell, x):
    """K_l(x) = int_0^inf exp(-x cosh t) cosh(l t) dt.

    The integrand is below exp(-100) of its peak well before t = 10 for
    x >= 0.1 and l <= 10, so the range is cut there.
    """
    x = mp.mpf(x)
    return mp.quad(lambda t: mp.exp(-x * mp.cosh(t)) * mp.cosh(ell * t), mp.linspace(0, 10, 11))


def quad_y(ell, x):
    """Y_l from its integral representation (integer l)."""
    x = mp.mpf(x)
    a = mp.quad(lambda t: mp.sin(x * mp.sin(t) - ell * t), mp.linspace(0, mp.pi, 13)) / mp.pi
    b = mp.quad(lambda t: (mp.exp(ell * t) + (-1) ** ell * mp.exp(-ell * t))
                * mp.exp(-x * mp.sinh(t)), mp.linspace(0, 10, 11)) / mp.pi
    return a - b


@pytest.mark.parametrize("ell", ORDERS)
def test_j_matches_series(ell):
    for x in ARGS:
        assert abs(specfun.bessel_j(ell, x) - float(series_j(ell, x))) < 1e-10


@pytest.mark.parametrize("ell", ORDERS)
def test_i_matches_series(ell):
    for x in ARGS:
        ref = float(series_i(ell, x))
        assert abs(specfun.bessel_i(ell, x) - ref) < 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("ell", ORDERS)
def test_k_matches_quadrature(ell):
    for x in ARGS:
        ref = float(quad_k(ell, x))
        assert abs(specfun.bessel_k(ell, x) - ref) < 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("ell", [0, 1, 2, 5, 10])
def test_y_matches_quadrature(ell):
    for x in [0.5, 1.0, 2.5, 7.3, 19.9, 30.0]:
        ref = float(quad_y(ell, x))
        assert abs(specfun.bessel_y(ell, x) - ref) < 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("ell", [0, 1, 3, 10])
def test_hankel_real_axis_matches_oracles(ell):
    for x in [0.5, 2.5, 12.0, 30.0]:
        h = specfun.hankel1(ell, x)
        ref = complex(float(series_j(ell, x)), float(quad_y(ell, x)))
        assert abs(h - ref) < 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("ell", [0, 1, 2, 7])
def test_hankel_imaginary_axis_via_k(ell):
    for x in [0.3, 1.0, 4.0, 20.0]:
        h = specfun.hankel1(ell, 1j * x)
        ref = 2 / (1j * math.pi) * (1j) ** (-ell) * float(quad_k(ell, x))
        assert abs(h - ref) < 1e-12 * max(1e-300, abs(ref)) + 1e-300


def test_reference_values():
    assert specfun.bessel_j(0, 0.0) == 1.0
    assert specfun.bessel_j(1, 0.0) == 0.0
    assert specfun.bessel_j(0, 1.0) == pytest.approx(0.765197686557966, abs=1e-15)
    h = specfun.hankel1(0, 1.0)
    assert h.real == pytest.approx(0.765197686557966, abs=1e-15)
    assert h.imag == pytest.approx(0.088256964215677, abs=1e-15)
    assert abs(specfun.hankel1(0, 10j)) < abs(specfun.hankel1(0, 5j))
    assert specfun.bessel_i(0, 0.0) == 1.0
    assert specfun.bessel_i(1, 0.0) == 0.0
    assert specfun.bessel_i(0, 1.0) == pytest.approx(1.266065877752008, abs=1e-15)


def test_wronskian_example():
    x = 2.5
    w = specfun.bessel_j(1, x) * specfun.bessel_y(0, x) - specfun.bessel_j(0, x) * specfun.bessel_y(1, x)
    assert abs(w - 2 / (math.pi * x)) < 1e-10


def test_negative_orders():
    for ell in range(1, 6):
        assert specfun.bessel_j(-ell, 3.3) == pytest.approx((-1) ** ell * specfun.bessel_j(ell, 3.3),
                                                            abs=1e-15)


def test_derivatives_match_finite_differences():
    h = 1e-5
    for ell in [0, 1, 4]:
        for x in [0.7, 3.0, 11.0]:
            for f, fp in [(specfun.bessel_j, specfun.bessel_jp), (specfun.bessel_y, specfun.bessel_yp),
                          (specfun.bessel_i, specfun.bessel_ip), (specfun.bessel_k, specfun.bessel_kp)]:
                fd = (f(ell, x + h) - f(ell, x - h)) / (2 * h)
                assert fp(ell, x) == pytest.approx(fd, rel=1e-7, abs=1e-9)
            fd = (specfun.hankel1(ell, x + h) - specfun.hankel1(ell, x - h)) / (2 * h)
            assert abs(specfun.hankel1p(ell, x) - fd) < 1e-7 * max(1, abs(fd))
            # on the imaginary axis d/dx H(ix) = i H'(ix)
            fd = (specfun.hankel1(ell, 1j * (x + h)) - specfun.hankel1(ell, 1j * (x - h))) / (2 * h)
            assert abs(1j * specfun.hankel1p(ell, 1j * x) - fd) < 1e-7 * max(1e-3, abs(fd))


def test_domain_errors():
    with pytest.raises(DomainError):
        specfun.bessel_j(0, float("nan"))
    with pytest.raises(DomainError):
        specfun.bessel_k(0, 0.0)
    with pytest.raises(DomainError):
        specfun.bessel_k(1, -1.0)
    with pytest.raises(SingularityError):
        specfun.hankel1(0, 0)
    with pytest.raises(DomainError):
        specfun.hankel1(0, -1j)
    with pytest.raises(DomainError):
        specfun.bessel_j(0.5, 1.0)


def test_first_zeros():
    z0 = specfun.j_zeros(0, 3).as_array()
    z1 = specfun.j_zeros(1, 3).as_array()
    ref0 = [float(mp.besseljzero(0, k)) for k in (1, 2, 3)]
    ref1 = [float(mp.besseljzero(1, k)) for k in (1, 2, 3)]
    assert np.max(np.abs(z0 - ref0)) < 1e-12
    assert np.max(np.abs(z1 - ref1)) < 1e-12
    assert z0[0] == pytest.approx(2.404825557695773, abs=1e-12)
    assert z1[0] == pytest.approx(3.831705970207512, abs=1e-12)
    assert abs((z0[1] - z0[0]) - math.pi) < 0.05 * math.pi


@pytest.mark.parametrize("ell", range(0, 8))
def test_zero_table_invariants(ell):
    t = specfun.j_zeros(ell, 6).as_array()
    nxt = specfun.j_zeros(ell + 1, 6).as_array()
    assert np.all(np.diff(t) > 0)
    assert t[0] > ell
    assert np.all(t[:-1] < nxt[:-1]) and np.all(nxt[:-1] < t[1:])
    for z in t:
        assert abs(specfun.bessel_j(ell, z)) < 1e-10
        assert specfun.bessel_j(ell, z - 1e-6) * specfun.bessel_j(ell, z + 1e-6) < 0


@given(st.integers(1, 10), st.floats(0.1, 30.0))
def test_recurrence_residual(ell, x):
    r = specfun.bessel_j(ell - 1, x) + specfun.bessel_j(ell + 1, x) - 2 * ell / x * specfun.bessel_j(ell, x)
    assert abs(r) < 1e-9
    r = specfun.bessel_y(ell - 1, x) + specfun.bessel_y(ell + 1, x) - 2 * ell / x * specfun.bessel_y(ell, x)
    assert abs(r) < 1e-9 * max(1.0, abs(specfun.bessel_y(ell, x)))


@given(st.integers(0, 10), st.floats(0.1, 30.0))
def test_wronskian_residual(ell, x):
    w = specfun.bessel_j(ell + 1, x) * specfun.bessel_y(ell, x) - specfun.bessel_j(ell, x) * specfun.bessel_y(ell + 1, x)
    scale = max(1.0, abs(specfun.bessel_y(ell + 1, x) * specfun.bessel_j(ell, x)))
    assert abs(w - 2 / (math.pi * x)) < 1e-9 * scale


@given(st.integers(0, 10), st.floats(0.01, 30.0))
def test_modified_bessel_signs(ell, x):
    assert specfun.bessel_i(ell, x) > 0
    assert specfun.bessel_ip(ell, x) > 0
    assert specfun.bessel_k(ell, x) > 0
    assert specfun.bessel_kp(ell, x) < 0


@given(st.integers(0, 10), st.floats(0.1, 29.0), st.floats(0.01, 1.0))
def test_i_increasing_and_hankel_decay(ell, x, dx):
    assert specfun.bessel_i(ell, x + dx) > specfun.bessel_i(ell, x)
    assert abs(specfun.hankel1(ell, 1j * (x + dx))) < abs(specfun.hankel1(ell, 1j * x))
