"""Integer-order Bessel-family functions and the zeros of J_l.

Values come from ``scipy.special`` (AMOS / Cephes kernels).  This module
adds the contracts the rest of the package relies on: integer orders only,
domain checks, derivatives through the three-term recurrences, and the
decaying branch of H^1_l on the positive imaginary axis routed through K_l
so that evanescent Dirichlet-to-Neumann coefficients stay real to machine
precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError, SingularityError

__all__ = [
    "OrderedZeroTable",
    "bessel_j",
    "bessel_jp",
    "bessel_y",
    "bessel_yp",
    "bessel_i",
    "bessel_ip",
    "bessel_k",
    "bessel_kp",
    "hankel1",
    "hankel1p",
    "j_zeros",
]


def _order(ell) -> int:
    if isinstance(ell, (bool, np.bool_)) or int(ell) != ell:
        raise DomainError(f"order must be an integer, got {ell!r}")
    return int(ell)


def _finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def bessel_j(ell, x):
    """J_l(x) for integer l (negative orders allowed) and finite real x."""
    ell = _order(ell)
    x = _finite(x)
    return _out(special.jv(ell, x), x)


def bessel_jp(ell, x):
    """Derivative J_l'(x) = (J_{l-1}(x) - J_{l+1}(x)) / 2."""
    ell = _order(ell)
    x = _finite(x)
    return _out(0.5 * (special.jv(ell - 1, x) - special.jv(ell + 1, x)), x)


def bessel_y(ell, x):
    """Y_l(x) for x > 0."""
    ell = _order(ell)
    x = _finite(x)
    if np.any(x <= 0):
        raise DomainError("Y_l is only defined here for x > 0")
    return _out(special.yv(ell, x), x)


def bessel_yp(ell, x):
    ell = _order(ell)
    x = _finite(x)
    if np.any(x <= 0):
        raise DomainError("Y_l is only defined here for x > 0")
    return _out(0.5 * (special.yv(ell - 1, x) - special.yv(ell + 1, x)), x)


def bessel_i(ell, x):
    """Modified Bessel I_l(x) for x >= 0 (I_{-l} = I_l for integer l)."""
    ell = abs(_order(ell))
    x = _finite(x)
    if np.any(x < 0):
        raise DomainError("I_l requires x >= 0")
    return _out(special.iv(ell, x), x)


def bessel_ip(ell, x):
    """I_l'(x) = (I_{l-1}(x) + I_{l+1}(x)) / 2."""
    ell = abs(_order(ell))
    x = _finite(x)
    if np.any(x < 0):
        raise DomainError("I_l requires x >= 0")
    return _out(0.5 * (special.iv(ell - 1, x) + special.iv(ell + 1, x)), x)


def bessel_k(ell, x):
    """Modified Bessel K_l(x) for x > 0."""
    ell = abs(_order(ell))
    x = _finite(x)
    if np.any(x <= 0):
        raise DomainError("K_l requires x > 0")
    return _out(special.kv(ell, x), x)


def bessel_kp(ell, x):
    """K_l'(x) = -(K_{l-1}(x) + K_{l+1}(x)) / 2."""
    ell = abs(_order(ell))
    x = _finite(x)
    if np.any(x <= 0):
        raise DomainError("K_l requires x > 0")
    return _out(-0.5 * (special.kv(ell - 1, x) + special.kv(ell + 1, x)), x)


def _hankel_branch(z):
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise DomainError("argument must be finite")
    if z == 0:
        raise SingularityError("H^1_l has a singularity at z = 0")
    if z.imag == 0.0 and z.real > 0:
        return "real", z.real
    if z.real == 0.0 and z.imag > 0:
        return "imag", z.imag
    raise DomainError(
        "hankel1 supports positive real or positive imaginary arguments only, "
        f"got {z!r}"
    )


def hankel1(ell, z) -> complex:
    """H^1_l(z) on the positive real axis or the positive imaginary axis.

    For z = i x the identity H^1_l(i x) = (2 / (i pi)) i^{-l} K_l(x) is used,
    which is free of the J/Y cancellation on the decaying branch.
    """
    ell = _order(ell)
    branch, x = _hankel_branch(z)
    if branch == "real":
        return complex(special.jv(ell, x), special.yv(ell, x))
    return 2.0 / (1j * np.pi) * (1j) ** (-ell) * special.kv(abs(ell), x)


def hankel1p(ell, z) -> complex:
    """Derivative of H^1_l with respect to its argument."""
    ell = _order(ell)
    branch, x = _hankel_branch(z)
    if branch == "real":
        jp = 0.5 * (special.jv(ell - 1, x) - special.jv(ell + 1, x))
        yp = 0.5 * (special.yv(ell - 1, x) - special.yv(ell + 1, x))
        return complex(jp, yp)
    # d/dx H(ix) = i H'(ix)
    kp = -0.5 * (special.kv(abs(ell) - 1, x) + special.kv(abs(ell) + 1, x))
    return 2.0 / (1j * np.pi) * (1j) ** (-ell) * kp / 1j


@dataclass(frozen=True)
class OrderedZeroTable:
    """First positive zeros j_{l,1} < j_{l,2} < ... of J_l."""

    order: int
    zeros: tuple

    def __len__(self):
        return len(self.zeros)

    def __getitem__(self, k):
        return self.zeros[k]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.zeros, dtype=float)


def j_zeros(ell: int, count: int) -> OrderedZeroTable:
    """Bracket and refine the first ``count`` positive zeros of J_l.

    Sign changes are located on a grid of step 0.25 (zeros of J_l are more
    than 2.5 apart) and each bracket is refined with Brent's method to an
    absolute width below 1e-13.
    """
    ell = abs(_order(ell))
    if count < 1:
        raise DomainError("count must be >= 1")
    step = 0.25
    lo = max(float(ell), step)
    hi = (count + 0.5 * ell + 2.0) * np.pi + ell
    zeros: list[float] = []
    while len(zeros) < count:
        grid = np.arange(lo, hi + step, step)
        vals = special.jv(ell, grid)
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        for i in idx:
            root = optimize.brentq(
                lambda t: special.jv(ell, t), grid[i], grid[i + 1],
                xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200,
            )
            zeros.append(float(root))
            if len(zeros) == count:
                break
        lo, hi = grid[-1], grid[-1] + count * np.pi
    return OrderedZeroTable(order=ell, zeros=tuple(zeros))
