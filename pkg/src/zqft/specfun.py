"""Special functions used by the closed-form geometry formulas.

Bessel functions, the digamma function and E1 come from ``scipy.special``.
The Barnes G-function and the Gauss hypergeometric function with complex
parameters come from ``mpmath``. This module adds argument checking, the
incomplete gamma function for negative parameters (needed by the Mellin
engine), and a Jacobi theta sum with a modular switch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special

# Named constants, 20 significant digits.
EULER_GAMMA = 0.57721566490153286061
ZETA_PRIME_MINUS_ONE = -0.16542114370045092921


@dataclass(frozen=True)
class Precision:
    """Truncation controls for series and mode sums."""

    rel_tol: float = 1e-13
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_PRECISION = Precision()


def _is_nonpositive_integer(x) -> bool:
    x = complex(x)
    return x.imag == 0 and x.real <= 0 and float(x.real).is_integer()


def bessel_i(n: int, x):
    """Modified Bessel function I_n(x) for integer n >= 0 and x >= 0."""
    if n < 0 or int(n) != n:
        raise ValueError("order must be a non-negative integer")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_i requires x >= 0")
    val = special.iv(n, x)
    if np.any(np.isinf(val)):
        raise OverflowError("I_n(x) overflows double precision")
    return val if val.ndim else float(val)


def bessel_i_ratio(n: int, x: float) -> float:
    """I_{n+1}(x) / I_n(x), computed with exponential scaling."""
    if x <= 0:
        raise ValueError("bessel_i_ratio requires x > 0")
    return float(special.ive(n + 1, x) / special.ive(n, x))


def bessel_k(nu: float, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bessel_k requires x > 0")
    val = special.kv(nu, x)
    return val if val.ndim else float(val)


def jacobi_theta3(z, t: float, prec: Precision = DEFAULT_PRECISION):
    """theta(z, iT) = sum_k exp(-pi k^2 T) cos(2 pi k z) for T > 0.

    For T >= 1 the defining sum is used. For T < 1 the modular transform
    theta(z, iT) = T^{-1/2} sum_k exp(-pi (z + k)^2 / T) is used instead, so
    both branches converge geometrically.
    """
    if not t > 0:
        raise ValueError("jacobi_theta3 requires t > 0")
    z = np.asarray(z, dtype=float)
    if t >= 1.0:
        total = np.ones_like(z)
        for k in range(1, prec.max_terms):
            term = 2.0 * math.exp(-math.pi * k * k * t)
            total = total + term * np.cos(2 * math.pi * k * z)
            if term < prec.rel_tol * 1e-3:
                break
    else:
        zr = z - np.round(z)
        total = np.exp(-math.pi * zr**2 / t)
        for k in range(1, prec.max_terms):
            a = np.exp(-math.pi * (zr + k) ** 2 / t)
            b = np.exp(-math.pi * (zr - k) ** 2 / t)
            total = total + a + b
            if math.exp(-math.pi * (k - 0.5) ** 2 / t) < prec.rel_tol * 1e-3:
                break
        total = total / math.sqrt(t)
    return total if total.ndim else float(total)


def theta3_tail(t: float, prec: Precision = DEFAULT_PRECISION) -> float:
    """theta(0, iT) - 1 = 2 sum_{k>=1} exp(-pi k^2 T), without cancellation."""
    if not t > 0:
        raise ValueError("theta3_tail requires t > 0")
    if t < 0.5:
        return jacobi_theta3(0.0, t, prec) - 1.0
    total = 0.0
    for k in range(1, prec.max_terms):
        term = 2.0 * math.exp(-math.pi * k * k * t)
        total += term
        if term <= prec.rel_tol * total or term == 0.0:
            break
    return total


def digamma(x):
    """Digamma function; complex arguments are accepted for Re x > 0."""
    if np.ndim(x) == 0 and _is_nonpositive_integer(x):
        raise ValueError("digamma has a pole at non-positive integers")
    if np.iscomplexobj(x):
        return special.psi(np.asarray(x, dtype=complex))[()]
    val = special.psi(np.asarray(x, dtype=float))
    return val if val.ndim else float(val)


def log_barnes_g(x):
    """Principal logarithm of the Barnes G-function.

    Real for x > 0. For complex x the principal branch of log G(x) is
    returned; conjugate pairs therefore sum to a real number.
    """
    if _is_nonpositive_integer(x):
        raise ValueError("Barnes G has zeros at non-positive integers")
    with mpmath.workdps(30):
        val = mpmath.log(mpmath.barnesg(mpmath.mpmathify(x)))
    if isinstance(x, complex) or np.iscomplexobj(x):
        return complex(val)
    return float(mpmath.re(val))


def hyp2f1(a, b, c: float, z: float, prec: Precision = DEFAULT_PRECISION) -> complex:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1.

    Complex a, b are allowed. mpmath applies the z -> 1 - z connection
    formulas internally, including the logarithmic case c = a + b.
    """
    if _is_nonpositive_integer(c):
        raise ValueError("c must not be a non-positive integer")
    if not z < 1:
        raise ValueError("hyp2f1 requires z < 1")
    with mpmath.workdps(max(20, int(-math.log10(prec.rel_tol)) + 5)):
        val = mpmath.hyp2f1(a, b, c, z, maxterms=prec.max_terms * 10)
    return complex(val)


def exp_integral_e1(u):
    """Exponential integral E1(u) = int_u^inf e^{-t}/t dt for u > 0."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("exp_integral_e1 requires u > 0")
    val = special.exp1(u)
    return val if val.ndim else float(val)


def upper_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma Gamma(a, x) for any real a and x > 0.

    Positive a uses the regularized scipy routine. Zero uses E1. Negative a
    is reached by the downward recurrence
    Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a.
    """
    if not x > 0:
        raise ValueError("upper_gamma requires x > 0")
    if a > 0:
        return float(special.gammaincc(a, x) * special.gamma(a))
    if a == 0:
        return float(special.exp1(x))
    k = math.ceil(-a)
    if float(a).is_integer():
        val = float(special.exp1(x))
        start = 0.0
    else:
        start = a + k
        val = float(special.gammaincc(start, x) * special.gamma(start))
    s = start
    while s > a + 0.5:
        s -= 1.0
        val = (val - x**s * math.exp(-x)) / s
    return val
