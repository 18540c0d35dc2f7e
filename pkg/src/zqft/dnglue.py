"""Dirichlet-to-Neumann spectra and numerical checks of the gluing identities
(BFK determinants, Green's functions and tadpoles).

A gluing is described by two :class:`Piece` objects: a geometry together with
the names of the boundary components that are glued. Supported pairs:

* ``Interval(l1)['right'] + Interval(l2)['left'] -> Interval(l1 + l2)``
* ``Interval(l1)['both'] + Interval(l2)['both'] -> Circle(l1 + l2)`` (two arcs)
* ``Cylinder(L, H1)['top'] + Cylinder(L, H2)['bottom'] -> Cylinder(L, H1 + H2)``
* ``Hemisphere(R)['circle'] + Hemisphere(R)['circle'] -> Sphere(R)``

Points are given in the coordinates of the glued geometry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special

from . import geometry as geo
from . import zetareg as zr
from .geometry import (Circle, Cylinder, Disk, Geometry, Hemisphere, Interval, Sphere,
                       SphericalSector)

__all__ = [
    "Piece", "dn_eigenvalue", "dn_delta", "kappa_eigenvalue", "log_det_kappa",
    "interval_dn_matrix", "interface_dn", "det_dn", "log_det_dn", "bfk_residual",
    "fredholm_tail_check",
    "greens_glue_residual", "glued_greens", "tadpole_glue", "glued_tadpole_field",
    "delta_order_fit", "delta_norm", "delta_threshold", "glued_geometry",
    "sector_delta_coefficients",
]

DEFAULT_NMAX = 128


@dataclass(frozen=True)
class Piece:
    geometry: Geometry
    glued: str  # boundary component name, or "both" for an arc


def glued_geometry(left: Piece, right: Piece) -> Geometry:
    gl, gr = left.geometry, right.geometry
    if isinstance(gl, Interval) and isinstance(gr, Interval):
        if left.glued == "right" and right.glued == "left":
            return Interval(gl.l + gr.l)
        if left.glued == "both" and right.glued == "both":
            return Circle(gl.l + gr.l)
    if isinstance(gl, Cylinder) and isinstance(gr, Cylinder):
        if left.glued == "top" and right.glued == "bottom" and gl.L == gr.L:
            return Cylinder(gl.L, gl.H + gr.H)
    if isinstance(gl, Hemisphere) and isinstance(gr, Hemisphere) and gl.R == gr.R:
        return Sphere(gl.R)
    raise ValueError(f"unsupported gluing: {left} + {right}")


# ---------------------------------------------------------------------------
# spectra

def interval_dn_matrix(l: float, m: float) -> np.ndarray:
    """DN matrix of Interval(l) on (left, right) endpoints, outward normals."""
    a = m / math.tanh(m * l)
    b = m / math.sinh(m * l)
    return np.array([[a, -b], [-b, a]])


def kappa_eigenvalue(length: float | None, m: float, n: int = 0) -> float:
    """omega_n = sqrt(m^2 + (2 pi n / L)^2); a point boundary (length None or 0) gives m."""
    if not length:
        return m
    return math.sqrt(m * m + (2 * math.pi * n / length) ** 2)


def log_det_kappa(length: float, m: float, method: str = "closed") -> float:
    """log det_reg(kappa) on a circle; equals log det_reg(2 kappa) since zeta(0)=0.

    The closed form is log(2 sinh(mL/2)). The ``mellin`` route uses
    zeta_kappa(s) = zeta_{Delta+m^2}(s/2), i.e. half the circle log det.
    """
    if method == "closed":
        return math.log(2 * math.sinh(m * length / 2))
    return 0.5 * zr.mellin_log_det(zr.heat_trace_split(Circle(length)), m)


def _hemi_log_ratio_mp(R: float, m: float, n: int):
    z = (m * R) ** 2
    nu = mpmath.sqrt(mpmath.mpf(0.25) - z)
    a1, a2 = 0.5 + nu, 0.5 - nu
    n = abs(n)
    return (mpmath.loggamma((n + 1 + a1) / 2) + mpmath.loggamma((n + 1 + a2) / 2)
            - mpmath.loggamma((n + a1) / 2) - mpmath.loggamma((n + a2) / 2)
            + mpmath.log(2 / mpmath.mpf(R)))


def _delta_mp(g: Geometry, m: float, n: int):
    """lambda_n / omega_n - 1 in extended precision."""
    n = abs(n)
    with mpmath.workdps(40):
        if isinstance(g, Disk):
            x = mpmath.mpf(m) * g.R
            lam = m * (mpmath.besseli(n + 1, x) / mpmath.besseli(n, x) + n / x)
            om = mpmath.sqrt(mpmath.mpf(n) ** 2 / g.R**2 + m * m)
            return lam / om - 1
        if isinstance(g, Hemisphere):
            loglam = _hemi_log_ratio_mp(g.R, m, n)
            om = mpmath.sqrt(mpmath.mpf(n) ** 2 / g.R**2 + m * m)
            return mpmath.expm1(mpmath.re(loglam) - mpmath.log(om))
    raise TypeError(g.kind)


def sector_delta_coefficients(R: float, m: float, phi: float) -> tuple[float, float]:
    """Coefficients (c3, c4) of the sector asymptotics delta ~ c3/n^3 + c4/n^4."""
    s2 = math.sin(phi) ** 2
    c3 = -(m * R) ** 2 * math.cos(phi) * s2 / 2
    c4 = (m * R) ** 2 * (1 + 3 * math.cos(2 * phi)) * s2 / 8
    return c3, c4


def dn_delta(g: Geometry, m: float, n: int) -> float:
    """delta_n = lambda_n / omega_n - 1, computed without cancellation."""
    if isinstance(g, Cylinder):
        w = kappa_eigenvalue(g.L, m, n)
        x = 2 * g.H * w
        return 0.0 if x > 700 else float(2 / math.expm1(x))  # coth(x/2) - 1
    if isinstance(g, (Disk, Hemisphere)):
        return float(_delta_mp(g, m, n))
    if isinstance(g, SphericalSector):
        c3, c4 = sector_delta_coefficients(g.R, m, g.phi)
        n = abs(n)
        return c3 / n**3 + c4 / n**4
    raise TypeError(f"no circle boundary DN for {g.kind}")


def _omega(g: Geometry, m: float, n: int) -> float:
    if isinstance(g, Cylinder):
        return kappa_eigenvalue(g.L, m, n)
    if isinstance(g, (Disk, Hemisphere)):
        return math.sqrt(n * n / g.R**2 + m * m)
    if isinstance(g, SphericalSector):
        return math.sqrt(n * n / (g.R * math.sin(g.phi)) ** 2 + m * m)
    raise TypeError(g.kind)


def dn_eigenvalue(g: Geometry, b: str | None, m: float, n: int = 0,
                  asymptotic_ok: bool = False):
    """DN eigenvalue lambda_n on boundary component ``b``.

    1D: returns the 2x2 interval DN block (``n`` ignored). Cylinder:
    omega_n coth(H omega_n). Disk: m I_n'(mR)/I_n(mR). Hemisphere: the
    Gamma-function ratio. The spherical sector only has the three-term
    asymptotic spectrum and requires ``asymptotic_ok=True``.
    """
    if not m > 0:
        raise ValueError("mass must be positive")
    if isinstance(g, Interval):
        return interval_dn_matrix(g.l, m)
    if isinstance(g, Cylinder):
        w = kappa_eigenvalue(g.L, m, n)
        return w / math.tanh(g.H * w)
    if isinstance(g, Disk):
        x = m * g.R
        n = abs(n)
        return m * (special.ive(n + 1, x) / special.ive(n, x) + n / x)
    if isinstance(g, Hemisphere):
        return float(mpmath.exp(mpmath.re(_hemi_log_ratio_mp(g.R, m, n))))
    if isinstance(g, SphericalSector):
        if not asymptotic_ok:
            raise ValueError("sector DN spectrum is asymptotic-only; pass asymptotic_ok=True")
        return _omega(g, m, n) * (1 + dn_delta(g, m, n))
    raise TypeError(f"no DN operator for {g.kind}")


# ---------------------------------------------------------------------------
# interface operators and determinants

def interface_dn(left: Piece, right: Piece, m: float) -> np.ndarray:
    """1D interface DN matrix D_L + D_R (1x1 for an interval split, 2x2 for arcs)."""
    gl, gr = left.geometry, right.geometry
    glued = glued_geometry(left, right)
    Dl, Dr = interval_dn_matrix(gl.l, m), interval_dn_matrix(gr.l, m)
    if isinstance(glued, Interval):
        return np.array([[Dl[1, 1] + Dr[0, 0]]])
    # arcs: interface points p (x=0 on arc 1, x=l2 on arc 2), q (x=l1, x=0)
    return np.array([[Dl[0, 0] + Dr[1, 1], Dl[0, 1] + Dr[1, 0]],
                     [Dl[1, 0] + Dr[0, 1], Dl[1, 1] + Dr[0, 0]]])


def _mode_log_terms(left: Piece, right: Piece, m: float, ns: np.ndarray) -> np.ndarray:
    """log((lambda^L_n + lambda^R_n) / (2 omega_n)) = log(1 + delta^tot_n)."""
    out = []
    for n in ns:
        dl = dn_delta(left.geometry, m, int(n))
        dr = dn_delta(right.geometry, m, int(n))
        out.append(math.log1p((dl + dr) / 2))
    return np.asarray(out)


def _tail_estimate(left, right, m, n_max) -> float:
    """Sum over |n| > n_max of log(1 + delta^tot_n) from a power-law fit."""
    ns = np.arange(n_max // 2, n_max + 1)
    vals = _mode_log_terms(left, right, m, ns)
    if np.all(np.abs(vals) < 1e-15):
        return 0.0
    slope = np.polyfit(np.log(ns), np.log(np.abs(vals)), 1)[0]
    p = int(round(-slope))
    if p < 2:
        raise ArithmeticError("delta decays too slowly for a Fredholm tail")
    M = np.column_stack([ns ** (-float(p + j)) for j in range(3)])
    coef = np.linalg.lstsq(M, vals, rcond=None)[0]
    tail = sum(c * special.zeta(p + j, n_max + 1) for j, c in enumerate(coef))
    return float(2 * tail)


def log_det_dn(left: Piece, right: Piece, m: float, n_max: int = DEFAULT_NMAX,
               with_tail: bool = True) -> float:
    """log det of D_L + D_R on the interface (literal determinant in 1D;
    det_reg(2 kappa) times the truncated Fredholm product in 2D)."""
    glued = glued_geometry(left, right)
    if glued.dim == 1:
        return float(np.log(np.linalg.det(interface_dn(left, right, m))))
    length = geo.boundary_components(left.geometry)[0].length
    if isinstance(left.geometry, Cylinder):
        length = left.geometry.L
    ns = np.arange(-n_max, n_max + 1)
    total = log_det_kappa(length, m) + float(np.sum(_mode_log_terms(left, right, m, ns)))
    if with_tail:
        total += _tail_estimate(left, right, m, n_max)
    return total


def det_dn(left: Piece, right: Piece, m: float, n_max: int = DEFAULT_NMAX) -> float:
    return math.exp(log_det_dn(left, right, m, n_max))


def fredholm_tail_check(left: Piece, right: Piece, m: float, n_max: int) -> tuple[float, float]:
    """(tail estimate at n_max, actual change of the raw product on doubling n_max)."""
    est = abs(_tail_estimate(left, right, m, n_max))
    ns = np.arange(n_max + 1, 2 * n_max + 1)
    change = abs(2 * float(np.sum(_mode_log_terms(left, right, m, ns))))
    return est, change


def bfk_residual(left: Piece, right: Piece, m: float, n_max: int = DEFAULT_NMAX) -> float:
    """|log det_Sigma - log det_L - log det_R - log det(c D_{L,R})|.

    c = 1/2 per interface point in 1D and c = 1 in 2D. Pieces with a
    boundary use the Mellin route; closed manifolds use closed forms.
    """
    glued = glued_geometry(left, right)
    ld_sigma = zr.log_det_zeta(glued, m)
    ld_l = zr.log_det_zeta(left.geometry, m)
    ld_r = zr.log_det_zeta(right.geometry, m)
    ld_d = log_det_dn(left, right, m, n_max)
    if glued.dim == 1:
        k = interface_dn(left, right, m).shape[0]
        ld_d += k * math.log(0.5)
    return abs(ld_sigma - ld_l - ld_r - ld_d)


# ---------------------------------------------------------------------------
# Green's function and tadpole gluing

def _poisson_1d(left: Piece, right: Piece, m: float, x):
    """Poisson kernels from the interface points, evaluated at glued coordinate x.

    Returns (piece index array, local Green's function callable data, P matrix)
    where P[:, j] is the harmonic extension of the j-th interface delta.
    """
    l1, l2 = left.geometry.l, right.geometry.l
    x = np.atleast_1d(np.asarray(x, dtype=float))
    in_left = x <= l1
    xl = np.where(in_left, x, x - l1)
    s1, s2 = math.sinh(m * l1), math.sinh(m * l2)
    glued = glued_geometry(left, right)
    if isinstance(glued, Interval):
        P = np.where(in_left, np.sinh(m * xl) / s1, np.sinh(m * (l2 - xl)) / s2)[:, None]
    else:
        # point p sits at x = 0 of arc 1 and x = l2 of arc 2; q at x = l1 / x = 0
        Pp = np.where(in_left, np.sinh(m * (l1 - xl)) / s1, np.sinh(m * xl) / s2)
        Pq = np.where(in_left, np.sinh(m * xl) / s1, np.sinh(m * (l2 - xl)) / s2)
        P = np.column_stack([Pp, Pq])
    return in_left, xl, P


def _cyl_mode_data(left: Piece, right: Piece, m: float, p, n_max: int):
    gl, gr = left.geometry, right.geometry
    H1, H2, L = gl.H, gr.H, gl.L
    n = np.arange(-n_max, n_max + 1)
    w = geo.cylinder_omega(L, m, n)
    y = p[1]
    if y <= H1:
        d = H1 - y  # distance to the interface, Poisson kernel sinh(w y)/sinh(w H1)
        P = np.exp(-w * d) * -np.expm1(-2 * w * y) / -np.expm1(-2 * w * H1)
    else:
        d = y - H1
        P = np.exp(-w * d) * -np.expm1(-2 * w * (H2 - d)) / -np.expm1(-2 * w * H2)
    lam = w / np.tanh(w * H1) + w / np.tanh(w * H2)
    return n, P, lam, L


def _hemi_fourier(R: float, m: float, p, N: int) -> np.ndarray:
    """F_n = int f_p(phi) e^{-i n phi} R dphi with f_p the hemisphere Poisson kernel."""
    th = p[0] if p[0] < math.pi / 2 else math.pi - p[0]
    H = Hemisphere(R)
    phis = 2 * math.pi * np.arange(N) / N
    f = np.array([-geo.greens_normal_derivative(H, m, (th, p[1]), (math.pi / 2, ph))
                  for ph in phis])
    return np.fft.fft(f) * (2 * math.pi * R / N)


def glued_greens(left: Piece, right: Piece, m: float, p, q, n_max: int = 64) -> float:
    """Right-hand side of the Green's function gluing relation."""
    glued = glued_geometry(left, right)
    if glued.dim == 1:
        _, _, Pp = _poisson_1d(left, right, m, p)
        _, _, Pq = _poisson_1d(left, right, m, q)
        K = np.linalg.inv(interface_dn(left, right, m))
        corr = float(Pp[0] @ K @ Pq[0])
        lp, lq = p <= left.geometry.l, q <= left.geometry.l
        if lp != lq:
            return corr
        if lp:
            return geo.greens(left.geometry, m, p, q) + corr
        l1 = left.geometry.l
        return geo.greens(right.geometry, m, p - l1, q - l1) + corr
    if isinstance(glued, Cylinder):
        H1 = left.geometry.H
        n, Pp, lam, L = _cyl_mode_data(left, right, m, p, n_max)
        _, Pq, _, _ = _cyl_mode_data(left, right, m, q, n_max)
        phase = np.cos(2 * math.pi * n * (p[0] - q[0]) / L)
        corr = float(np.sum(phase * Pp * Pq / lam) / L)
        lp, lq = p[1] <= H1, q[1] <= H1
        if lp != lq:
            return corr
        if lp:
            return geo.greens(left.geometry, m, p, q) + corr
        return geo.greens(right.geometry, m, (p[0], p[1] - H1), (q[0], q[1] - H1)) + corr
    if isinstance(glued, Sphere):
        R = glued.R
        N = max(4 * n_max, 256)
        Fp, Fq = _hemi_fourier(R, m, p, N), _hemi_fourier(R, m, q, N)
        H = Hemisphere(R)
        ns = np.fft.fftfreq(N, 1.0 / N).astype(int)
        keep = np.abs(ns) <= n_max
        lam = np.array([dn_eigenvalue(H, "circle", m, int(k)) for k in ns[keep]])
        corr = float(np.real(np.sum(np.conj(Fp[keep]) * Fq[keep] / (2 * lam))) / (2 * math.pi * R))
        up_p, up_q = p[0] < math.pi / 2, q[0] < math.pi / 2
        if up_p != up_q:
            return corr
        pp = p if up_p else (math.pi - p[0], p[1])
        qq = q if up_q else (math.pi - q[0], q[1])
        return geo.greens(H, m, pp, qq) + corr
    raise ValueError("unsupported gluing")


def greens_glue_residual(left: Piece, right: Piece, m: float, p, q, n_max: int = 64) -> float:
    glued = glued_geometry(left, right)
    return abs(geo.greens(glued, m, p, q) - glued_greens(left, right, m, p, q, n_max))


def _interface_correction(left: Piece, right: Piece, m: float, p, n_max: int) -> float:
    glued = glued_geometry(left, right)
    if glued.dim == 1:
        _, _, P = _poisson_1d(left, right, m, p)
        K = np.linalg.inv(interface_dn(left, right, m))
        return float(P[0] @ K @ P[0])
    if isinstance(glued, Cylinder):
        n, P, lam, L = _cyl_mode_data(left, right, m, p, n_max)
        return float(np.sum(P * P / lam) / L)
    raise ValueError("unsupported gluing")


def tadpole_glue(left: zr.TadpoleField, right: zr.TadpoleField, m: float, p,
                 n_max: int = 64) -> float:
    """(tau_L * tau_R)(p) = tau_piece(p) + interface correction at (p, p)."""
    lp, rp = _pieces_from_fields(left, right)
    glued = glued_geometry(lp, rp)
    corr = _interface_correction(lp, rp, m, p, n_max)
    if glued.dim == 1:
        l1 = lp.geometry.l
        base = left(p) if p <= l1 else right(p - l1)
    else:
        H1 = lp.geometry.H
        base = left(p) if p[1] <= H1 else right((p[0], p[1] - H1))
    return float(base) + corr


def _pieces_from_fields(left: zr.TadpoleField, right: zr.TadpoleField):
    gl, gr = left.geometry, right.geometry
    if isinstance(gl, Interval):
        return Piece(gl, "right"), Piece(gr, "left")
    if isinstance(gl, Cylinder):
        return Piece(gl, "top"), Piece(gr, "bottom")
    raise ValueError("tadpole gluing supports interval and cylinder pieces")


def glued_tadpole_field(left: zr.TadpoleField, right: zr.TadpoleField,
                        m: float) -> zr.TadpoleField:
    """Vectorized 1D glued tadpole field tau_L * tau_R on the glued interval."""
    lp, rp = _pieces_from_fields(left, right)
    glued = glued_geometry(lp, rp)
    if glued.dim != 1:
        raise ValueError("vectorized glued fields are 1D only")
    l1 = lp.geometry.l
    K = float(1.0 / interface_dn(lp, rp, m)[0, 0])

    def func(x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        in_left, xl, P = _poisson_1d(lp, rp, m, xa)
        base = np.where(in_left, np.asarray(left(np.where(in_left, xl, 0.5 * l1))),
                        np.asarray(right(np.where(in_left, 0.5 * rp.geometry.l, xl))))
        out = base + K * P[:, 0] ** 2
        return out if np.ndim(x) else float(out[0])
    return zr.TadpoleField(glued, m, "glued", func=func)


# ---------------------------------------------------------------------------
# regularity of delta = lambda/omega - 1

def delta_order_fit(g: Geometry, m: float, n_range=(32, 256)) -> dict:
    """Least-squares slope of log|delta_n| against log n."""
    ns = np.arange(n_range[0], n_range[1] + 1)
    vals = np.array([abs(dn_delta(g, m, int(n))) for n in ns])
    keep = vals > 1e-15
    if keep.sum() < 2:
        return {"superpolynomial": True, "slope": None}
    slope = float(np.polyfit(np.log(ns[keep]), np.log(vals[keep]), 1)[0])
    return {"superpolynomial": False, "slope": slope,
            "asymptotic_only": isinstance(g, SphericalSector)}


def delta_norm(g: Geometry, m: float, n_max: int = 64) -> float:
    """max_n |delta_n| over |n| <= n_max (operator norm of the diagonal delta)."""
    return max(abs(dn_delta(g, m, n)) for n in range(0, n_max + 1))


def delta_threshold(m: float, L: float = 2 * math.pi, lo: float = 1e-3, hi: float = 10.0,
                    tol: float = 1e-10) -> float:
    """Bisection for the cylinder height where ||delta|| crosses 1."""
    f = lambda H: delta_norm(Cylinder(L, H), m, 8) - 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
