"""Petal resummation of short loops, the local RG flow on potentials,
low-valence reduction and the free trace anomaly.

R_tau(p)_n = sum_k (hbar tau / 2)^k / k! p_{n+2k} absorbs every short-loop
insertion with tadpole value tau into the potential. It is the heat flow
d/dtau R = (hbar/2) d^2/dphi^2 R in the field variable.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import pertpart as pp
from . import zetareg as zr
from .geometry import Circle, Cylinder, Geometry, Interval, Sphere, Torus
from .specfun import EULER_GAMMA, ZETA_PRIME_MINUS_ONE

__all__ = [
    "petal_transform", "group_law_residual", "rg_flow_residual", "flow_derivative",
    "partition_consistency_residual", "reduce_low_valence", "neumann_residual",
    "log_det_scaling", "trace_anomaly_sphere_residual", "averaged_classical_trace",
    "anomaly_density", "sphere_small_mass_ratio", "cutoff_tadpole_limit",
]


def _scale(c, factor):
    """factor * c where either may be a callable of the position."""
    if callable(c) or callable(factor):
        cf = c if callable(c) else (lambda x, c=c: c)
        ff = factor if callable(factor) else (lambda x, f=factor: f)
        return lambda x: ff(x) * cf(x)
    return factor * c


def _add(a, b):
    if a is None:
        return b
    if callable(a) or callable(b):
        fa = a if callable(a) else (lambda x, a=a: a)
        fb = b if callable(b) else (lambda x, b=b: b)
        return lambda x: fa(x) + fb(x)
    return a + b


def petal_transform(pot: pp.Potential, tau, k_max: float | None = None) -> pp.Potential:
    """R_tau(p), dropping vertices of order above hbar^k_max (None: keep all).

    A vertex p_(n, h2) contributes at order hbar^((n - 2 + h2)/2), which the
    transform preserves, so the truncation only removes whole families.

    ``tau`` may be a number (Fractions stay exact) or a callable of the
    position, in which case the new coefficients are callables.
    """
    K2 = None if k_max is None else int(round(2 * k_max))
    out: dict = {}
    for (n, h2), c in pot.terms.items():
        if K2 is not None and n - 2 + h2 > K2:
            continue
        for k in range(n // 2 + 1):
            h = h2 + 2 * k
            if k == 0:
                term = c
            elif callable(tau):
                term = _scale(c, lambda x, k=k: (tau(x) / 2) ** k / math.factorial(k))
            else:
                term = _scale(c, (tau / 2) ** k / math.factorial(k))
            key = (n - 2 * k, h)
            out[key] = _add(out.get(key), term)
    return pp.Potential(out, low_valence=True)


def _coeff_diff(p: pp.Potential, q: pp.Potential):
    keys = set(p.terms) | set(q.terms)
    worst = 0
    for k in keys:
        d = p.terms.get(k, 0) - q.terms.get(k, 0)
        worst = max(worst, abs(d))
    return worst


def group_law_residual(pot: pp.Potential, tau1, tau2) -> float | Fraction:
    """max |R_{tau1+tau2}(p) - R_{tau1}(R_{tau2}(p))| over coefficients."""
    return _coeff_diff(petal_transform(pot, tau1 + tau2),
                       petal_transform(petal_transform(pot, tau2), tau1))


def flow_derivative(pot: pp.Potential) -> pp.Potential:
    """(hbar/2) d^2/dphi^2 p: coefficient (n+2, h2) moves to (n, h2+2) times 1/2."""
    return pp.Potential({(n - 2, h2 + 2): c / 2 for (n, h2), c in pot.terms.items() if n >= 2},
                        low_valence=True)


def rg_flow_residual(pot: pp.Potential, tau: float, dtau: float) -> float:
    """Central difference of R_tau in tau against (hbar/2) R_tau''."""
    plus = petal_transform(pot, tau + dtau)
    minus = petal_transform(pot, tau - dtau)
    keys = set(plus.terms) | set(minus.terms)
    lhs = pp.Potential({k: (plus.terms.get(k, 0) - minus.terms.get(k, 0)) / (2 * dtau)
                        for k in keys}, low_valence=True)
    rhs = flow_derivative(petal_transform(pot, tau))
    return float(_coeff_diff(lhs, rhs))


def partition_consistency_residual(model, m: float, pot: pp.Potential, tau, k_max: float = 1.0,
                                   tau2=None, grid=(-1.0, 0.0, 1.0)) -> np.ndarray:
    """Per-order residual of Z^{tau, p} = Z^{tau2, R_{tau - tau2}(p)} (tau2 = 0 by default).

    ``tau`` is a callable of the position (or a constant).
    """
    if isinstance(model, Geometry):
        model = (pp.IntervalModel(model.l, m) if isinstance(model, Interval)
                 else pp.CircleModel(model.L, m))
    tau_f = tau if callable(tau) else (lambda x, t=tau: np.full(np.shape(x), t))
    if tau2 is None:
        shift, tau2_f = tau_f, None
    else:
        t2 = tau2 if callable(tau2) else (lambda x, t=tau2: np.full(np.shape(x), t))
        shift = lambda x: tau_f(x) - t2(x)
        tau2_f = t2
    Z1 = pp.partition_function(model, pot=pot, tadpole=tau_f, k_max=k_max)
    Z2 = pp.partition_function(model, pot=petal_transform(pot, shift, k_max),
                               tadpole=tau2_f, k_max=k_max)
    return pp._state_residual(Z1, Z2, grid)


def reduce_low_valence(coeffs, m: float, tol: float = 1e-13, max_iter: int = 100_000) -> dict:
    """Remove p0, p1, p2 by expanding around the critical point.

    phi_cr is the limit of Xi^N(0) with
    Xi(phi) = -p1/m^2 - (1/m^2) sum_{n>=2} p_n phi^{n-1}/(n-1)!.
    Returns phi_cr, the shifted mass m~ with m~^2 = m^2 + p~_2, the constant
    p(phi_cr) + m^2 phi_cr^2 / 2, and the shifted coefficients p~_n for n >= 3.
    """
    p = [float(c) for c in coeffs]
    N = len(p) - 1
    m2 = m * m

    def xi(phi):
        s = p[1] if N >= 1 else 0.0
        for n in range(2, N + 1):
            s += p[n] * phi ** (n - 1) / math.factorial(n - 1)
        return -s / m2
    phi = 0.0
    for _ in range(max_iter):
        new = xi(phi)
        if not math.isfinite(new) or abs(new) > 1e6:
            raise ArithmeticError("critical-point iteration diverges")
        if abs(new - phi) <= tol * max(1.0, abs(new)):
            phi = new
            break
        phi = new
    else:
        raise ArithmeticError("critical-point iteration did not converge")

    def deriv(n):
        return sum(p[j] * phi ** (j - n) / math.factorial(j - n) for j in range(n, N + 1))
    p2t = deriv(2) if N >= 2 else 0.0
    mt2 = m2 + p2t
    if mt2 <= 0:
        raise ArithmeticError("shifted mass squared is not positive")
    const = deriv(0) + 0.5 * m2 * phi * phi
    return {"phi_cr": phi, "m_tilde": math.sqrt(mt2), "constant": const,
            "p_tilde": {n: deriv(n) for n in range(3, N + 1)},
            "linear_residual": m2 * phi + deriv(1)}


def neumann_residual(p2: float, m: float, L: float, d: float, K: int = 40,
                     n_modes: int = 20_000) -> float:
    """sum_{k<=K} (-p2)^k G^{k+1} against G at mass sqrt(m^2 + p2) on Circle(L).

    Both sides have G_m subtracted: the operator series is summed mode by mode,
    the right side uses closed forms.
    """
    if abs(p2) >= m * m:
        raise ArithmeticError("Neumann series needs |p2| < m^2")
    n = np.arange(-n_modes, n_modes + 1)
    lam = (2 * np.pi * n / L) ** 2 + m * m
    r = -p2 / lam
    geo_sum = (1 - r ** (K + 1)) / (1 - r) / lam  # sum_k r^k / lam
    series = np.sum(np.cos(2 * np.pi * n * d / L) * (geo_sum - 1 / lam)) / L
    mt = math.sqrt(m * m + p2)
    g = lambda mass: math.cosh(mass * (L / 2 - abs(d) % L)) / (2 * mass * math.sinh(mass * L / 2))
    return abs(series - (g(mt) - g(m)))


def log_det_scaling(R: float, m: float, h: float = 1e-3) -> float:
    """(R^2 d/dR^2 - m^2 d/dm^2) log det on the sphere, fourth-order differences."""
    def f(a, b):
        return zr.sphere_log_det(math.exp(a / 2), math.exp(b / 2))
    a, b = 2 * math.log(R), 2 * math.log(m)

    def d(fn):
        return (-fn(2 * h) + 8 * fn(h) - 8 * fn(-h) + fn(-2 * h)) / (12 * h)
    return d(lambda e: f(a + e, b)) - d(lambda e: f(a, b + e))


def trace_anomaly_sphere_residual(R: float, m: float) -> float:
    """|(R^2 d_R^2 - m^2 d_m^2) log det - (-1/3 + m^2 R^2)|."""
    if abs(m * R - 0.5) < 1e-3:
        raise ArithmeticError("too close to the branch point mR = 1/2")
    return abs(log_det_scaling(R, m) - (-1.0 / 3 + (m * R) ** 2))


def averaged_classical_trace(R: float, m: float) -> float:
    """-m^2 int_S tau^reg dA in units of hbar; tends to -1 as m -> 0."""
    return -m * m * 4 * math.pi * R * R * zr.tau_reg(Sphere(R), m)


def anomaly_density(g: Geometry, m: float, p=None) -> tuple[float, float]:
    """(zeta(0, x) from the Mellin route, (K/6 - m^2)/(4 pi))."""
    split = zr.local_heat_split(g, p)
    K = 2 / g.R**2 if isinstance(g, Sphere) else 0.0
    return zr.local_zeta_at_zero(split, m), (K / 6 - m * m) / (4 * math.pi)


def sphere_small_mass_ratio(R: float, m: float) -> float:
    """det(Delta + m^2) / (e^C R^{-2/3} m^2 R^2) with C = 1/2 - 4 zeta'(-1)."""
    C = 0.5 - 4 * ZETA_PRIME_MINUS_ONE
    return math.exp(zr.sphere_log_det(R, m) - C + (2 / 3) * math.log(R)
                    - math.log((m * R) ** 2))


def cutoff_tadpole_limit(g: Geometry, m: float, p=None, lambdas=(1e2, 1e3, 1e4)) -> dict:
    """G_Lambda(p, p) - log(Lambda)/2pi, extrapolated in 1/Lambda^2, against tau^reg - gamma/4pi."""
    vals = [zr.cutoff_tadpole(g, m, p, lam) - math.log(lam) / (2 * math.pi) for lam in lambdas]
    x = np.array([1 / lam**2 for lam in lambdas])
    coef = np.polyfit(x, vals, 1)
    target = zr.tau_reg(g, m, p) - EULER_GAMMA / (4 * math.pi)
    return {"values": vals, "extrapolated": float(coef[-1]), "target": target,
            "residual": abs(float(coef[-1]) - target)}
