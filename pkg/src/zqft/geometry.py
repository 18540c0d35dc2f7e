"""Model geometries: heat kernels on the diagonal, Green's functions of
Delta + m^2 with Dirichlet conditions, normal derivatives and curvature.

Points are plain floats in 1D and tuples in 2D:

* ``Interval(l)``, ``Circle(L)``: ``x`` in ``[0, l]`` / ``[0, L)``.
* ``Torus(L1, L2)``, ``Cylinder(L, H)``: ``(x, y)``; the cylinder boundary
  circles are ``y = 0`` (bottom) and ``y = H`` (top).
* ``Sphere(R)``, ``Hemisphere(R)``: ``(theta, phi)`` with ``theta`` the
  colatitude. The hemisphere is ``theta < pi/2`` with boundary the equator.
* ``Disk(R)``: ``(theta, r)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields

import numpy as np
from scipy import special

from .specfun import DEFAULT_PRECISION, Precision, hyp2f1, jacobi_theta3

__all__ = [
    "Geometry", "Interval", "Circle", "Torus", "Cylinder", "Disk", "Sphere",
    "Hemisphere", "SphericalSector", "BoundaryComponent", "SingularityError",
    "heat_trace_diag", "greens", "greens_normal_derivative",
    "scalar_curvature", "distance", "volume", "parse_geometry",
    "boundary_components", "sphere_heat_coefficients",
]


class SingularityError(ValueError):
    """Raised when a 2D Green's function is evaluated on the diagonal."""


@dataclass(frozen=True)
class Geometry:
    kind = "geometry"
    dim = 0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{self.kind}: {f.name} must be positive")

    def spec(self) -> str:
        args = ",".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return f"{self.kind}:{args}"


@dataclass(frozen=True)
class Interval(Geometry):
    l: float
    kind = "interval"
    dim = 1


@dataclass(frozen=True)
class Circle(Geometry):
    L: float
    kind = "circle"
    dim = 1


@dataclass(frozen=True)
class Torus(Geometry):
    L1: float
    L2: float
    kind = "torus"
    dim = 2


@dataclass(frozen=True)
class Cylinder(Geometry):
    L: float
    H: float
    kind = "cylinder"
    dim = 2


@dataclass(frozen=True)
class Disk(Geometry):
    R: float
    kind = "disk"
    dim = 2


@dataclass(frozen=True)
class Sphere(Geometry):
    R: float
    kind = "sphere"
    dim = 2


@dataclass(frozen=True)
class Hemisphere(Geometry):
    R: float
    kind = "hemisphere"
    dim = 2


@dataclass(frozen=True)
class SphericalSector(Geometry):
    R: float
    phi: float
    kind = "sector"
    dim = 2

    def __post_init__(self):
        super().__post_init__()
        if not self.phi < math.pi:
            raise ValueError("sector: phi must lie in (0, pi)")


_KINDS = {cls.kind: cls for cls in
          (Interval, Circle, Torus, Cylinder, Disk, Sphere, Hemisphere, SphericalSector)}


def parse_geometry(text: str) -> Geometry:
    """Parse ``kind:name=value,...``, e.g. ``cylinder:L=6.283,H=2.0``."""
    m = re.fullmatch(r"\s*([a-z]+)\s*:(.*)", text)
    if not m or m.group(1) not in _KINDS:
        raise ValueError(f"cannot parse geometry {text!r}")
    cls = _KINDS[m.group(1)]
    kwargs = {}
    for item in filter(None, (s.strip() for s in m.group(2).split(","))):
        key, _, value = item.partition("=")
        kwargs[key.strip()] = float(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {cls.kind}: {exc}") from None


@dataclass(frozen=True)
class BoundaryComponent:
    """A boundary component: an endpoint in 1D or a circle in 2D."""

    name: str
    length: float = 0.0
    points: int = 1


def boundary_components(g: Geometry) -> list[BoundaryComponent]:
    if isinstance(g, Interval):
        return [BoundaryComponent("left"), BoundaryComponent("right")]
    if isinstance(g, Cylinder):
        return [BoundaryComponent("bottom", g.L, 0), BoundaryComponent("top", g.L, 0)]
    if isinstance(g, (Disk, Hemisphere)):
        return [BoundaryComponent("circle", 2 * math.pi * g.R, 0)]
    if isinstance(g, SphericalSector):
        return [BoundaryComponent("circle", 2 * math.pi * g.R * math.sin(g.phi), 0)]
    return []


def volume(g: Geometry) -> float:
    if isinstance(g, Interval):
        return g.l
    if isinstance(g, Circle):
        return g.L
    if isinstance(g, Torus):
        return g.L1 * g.L2
    if isinstance(g, Cylinder):
        return g.L * g.H
    if isinstance(g, Disk):
        return math.pi * g.R**2
    if isinstance(g, Sphere):
        return 4 * math.pi * g.R**2
    if isinstance(g, Hemisphere):
        return 2 * math.pi * g.R**2
    return 2 * math.pi * g.R**2 * (1 - math.cos(g.phi))


def scalar_curvature(g: Geometry, p=None) -> float:
    """Scalar curvature: zero for flat kinds, 2/R^2 on the sphere family."""
    if isinstance(g, (Sphere, Hemisphere, SphericalSector)):
        return 2.0 / g.R**2
    return 0.0


# ---------------------------------------------------------------------------
# distances

def _sphere_cos(p, q) -> float:
    (t1, f1), (t2, f2) = p, q
    c = math.cos(t1) * math.cos(t2) + math.sin(t1) * math.sin(t2) * math.cos(f1 - f2)
    return min(1.0, max(-1.0, c))


def _wrap(d: float, L: float) -> float:
    d = abs(d) % L
    return min(d, L - d)


def distance(g: Geometry, p, q) -> float:
    """Geodesic distance (winding-minimized on periodic directions)."""
    if isinstance(g, Interval):
        return abs(p - q)
    if isinstance(g, Circle):
        return _wrap(p - q, g.L)
    if isinstance(g, Torus):
        return math.hypot(_wrap(p[0] - q[0], g.L1), _wrap(p[1] - q[1], g.L2))
    if isinstance(g, Cylinder):
        return math.hypot(_wrap(p[0] - q[0], g.L), p[1] - q[1])
    if isinstance(g, (Sphere, Hemisphere)):
        (t1, f1), (t2, f2) = p, q
        # haversine form, accurate at small separations
        h = math.sin((t1 - t2) / 2) ** 2 + math.sin(t1) * math.sin(t2) * math.sin((f1 - f2) / 2) ** 2
        return 2 * g.R * math.asin(min(1.0, math.sqrt(h)))
    if isinstance(g, Disk):
        (a1, r1), (a2, r2) = p, q
        return math.sqrt(max(0.0, r1 * r1 + r2 * r2 - 2 * r1 * r2 * math.cos(a1 - a2)))
    raise NotImplementedError(g.kind)


# ---------------------------------------------------------------------------
# heat kernels on the diagonal (Laplacian part only)

def _circle_diag(L: float, t: float, prec: Precision) -> float:
    # (1/sqrt(4 pi t)) theta(0, i L^2/(4 pi t)) = (1/L) theta(0, i 4 pi t / L^2)
    return jacobi_theta3(0.0, 4 * math.pi * t / L**2, prec) / L


def _interval_diag(l: float, x: float, t: float, prec: Precision) -> float:
    # Dirichlet images: (1/sqrt(4 pi t)) sum_k [e^{-k^2 l^2/t} - e^{-(x - k l)^2/t}]
    # which equals (1/(2l)) [theta(0, i pi t/l^2) - theta(x/l, i pi t/l^2)].
    T = math.pi * t / l**2
    return 0.5 / l * (jacobi_theta3(0.0, T, prec) - jacobi_theta3(x / l, T, prec))


def _interval_diag_images(l: float, x: float, t: float) -> float:
    kmax = int(math.ceil(math.sqrt(40 * t) / l)) + 2
    ks = np.arange(-kmax, kmax + 1)
    s = np.sum(np.exp(-(ks * l) ** 2 / t) - np.exp(-(x - ks * l) ** 2 / t))
    return float(s / math.sqrt(4 * math.pi * t))


def _interval_diag_modes(l: float, x: float, t: float) -> float:
    nmax = int(math.ceil(l * math.sqrt(40 / t) / math.pi)) + 2
    n = np.arange(1, nmax + 1)
    return float(2 / l * np.sum(np.sin(n * math.pi * x / l) ** 2 * np.exp(-(n * math.pi / l) ** 2 * t)))


def sphere_heat_coefficients(n_terms: int = 16) -> list[float]:
    """Coefficients f_k of F(u) = sum (2l+1) e^{-l(l+1)u} ~ 1/u + sum_k f_k u^k.

    F(u) = e^{u/4} S(u) with S(u) = sum_{n in N+1/2} 2n e^{-n^2 u}; the
    expansion of S follows from the Bernoulli polynomials at 1/2:
    S(u) ~ 1/u + sum_k (-1)^k/k! * (-2 B_{2k+2}(1/2)/(2k+2)) u^k.
    """
    B = special.bernoulli(2 * n_terms + 4)
    b_half = [-(1 - 2.0 ** (1 - n)) * B[n] for n in range(len(B))]
    s = [(-1) ** k / math.factorial(k) * (-2 * b_half[2 * k + 2] / (2 * k + 2))
         for k in range(n_terms + 1)]
    # multiply by e^{u/4} = sum (1/4)^j/j! u^j; the 1/u term feeds all orders
    e = [0.25**j / math.factorial(j) for j in range(n_terms + 2)]
    out = []
    for k in range(n_terms + 1):
        val = e[k + 1]  # from (1/u) * u^{k+1}
        val += sum(s[i] * e[k - i] for i in range(k + 1))
        out.append(val)
    return out


_SPHERE_COEFFS = sphere_heat_coefficients(16)


def sphere_heat_trace_scaled(u: float) -> float:
    """F(u) = sum_l (2l+1) e^{-l(l+1) u}, the sphere heat trace at t = u R^2."""
    if u < 0.2:
        return 1.0 / u + sum(c * u**k for k, c in enumerate(_SPHERE_COEFFS))
    lmax = int(math.ceil(math.sqrt(40.0 / u))) + 3
    ls = np.arange(lmax + 1)
    return float(np.sum((2 * ls + 1) * np.exp(-ls * (ls + 1) * u)))


def _sphere_offdiag_kernel(R: float, cosg: float, t: float) -> float:
    u = t / R**2
    lmax = int(math.ceil(math.sqrt(60.0 / u))) + 3
    ls = np.arange(lmax + 1)
    P = special.eval_legendre(ls, cosg)
    return float(np.sum((2 * ls + 1) * P * np.exp(-ls * (ls + 1) * u)) / (4 * math.pi * R**2))


def heat_trace_diag(g: Geometry, p, t: float, prec: Precision = DEFAULT_PRECISION) -> float:
    """theta_Delta(p, t): the Laplacian heat kernel on the diagonal."""
    if not t > 0:
        raise ValueError("t must be positive")
    if isinstance(g, Circle):
        return _circle_diag(g.L, t, prec)
    if isinstance(g, Interval):
        return _interval_diag(g.l, p, t, prec)
    if isinstance(g, Torus):
        return _circle_diag(g.L1, t, prec) * _circle_diag(g.L2, t, prec)
    if isinstance(g, Cylinder):
        return _circle_diag(g.L, t, prec) * _interval_diag(g.H, p[1], t, prec)
    if isinstance(g, Sphere):
        return sphere_heat_trace_scaled(t / g.R**2) / (4 * math.pi * g.R**2)
    if isinstance(g, Hemisphere):
        th = p[0]
        cos_img = math.cos(th) * math.cos(math.pi - th) + math.sin(th) ** 2
        return (sphere_heat_trace_scaled(t / g.R**2) / (4 * math.pi * g.R**2)
                - _sphere_offdiag_kernel(g.R, cos_img, t))
    raise NotImplementedError(f"no heat kernel for {g.kind}")


def cylinder_heat_diag_forms(g: Cylinder, y: float, t: float) -> tuple[float, float]:
    """The image (small-t) and spectral (large-t) forms of the cylinder kernel."""
    circ_img = jacobi_theta3(0.0, g.L**2 / (4 * math.pi * t)) / math.sqrt(4 * math.pi * t)
    circ_spec = jacobi_theta3(0.0, 4 * math.pi * t / g.L**2) / g.L
    return (circ_img * _interval_diag_images(g.H, y, t),
            circ_spec * _interval_diag_modes(g.H, y, t))


# ---------------------------------------------------------------------------
# Green's functions

def _interval_green(l, m, x, y):
    lo, hi = (x, y) if x <= y else (y, x)
    return math.sinh(m * lo) * math.sinh(m * (l - hi)) / (m * math.sinh(m * l))


def _circle_green(L, m, x, y):
    d = abs(x - y) % L
    return math.cosh(m * (d - L / 2)) / (2 * m * math.sinh(m * L / 2))


def _sphere_green(R, m, cosd):
    z = m * m * R * R
    nu = np.sqrt(complex(0.25 - z))
    a1, a2 = 0.5 + nu, 0.5 - nu
    F = hyp2f1(a1, a2, 1.0, (1 + cosd) / 2)
    val = F / (4 * np.cos(math.pi * nu))
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise ArithmeticError("sphere Green's function lost its real part")
    return float(val.real)


def _torus_green(g: Torus, m, p, q, prec: Precision):
    dx = (p[0] - q[0]) % g.L1
    dy = (p[1] - q[1]) % g.L2
    kmax = int(math.ceil(40 / (m * g.L1))) + 2
    lmax = int(math.ceil(40 / (m * g.L2))) + 2
    k = np.arange(-kmax, kmax + 1)[:, None]
    l_ = np.arange(-lmax, lmax + 1)[None, :]
    r = np.hypot(dx - k * g.L1, dy - l_ * g.L2)
    if np.any(r == 0):
        raise SingularityError("coincident points; use the tadpole module")
    return float(np.sum(special.k0(m * r)) / (2 * math.pi))


def _cylinder_images(g: Cylinder, m, p, q):
    dx = (p[0] - q[0]) % g.L
    kmax = int(math.ceil(40 / (m * g.L))) + 2
    lmax = int(math.ceil(40 / (2 * m * g.H))) + 2
    k = np.arange(-kmax, kmax + 1)[:, None]
    l_ = np.arange(-lmax, lmax + 1)[None, :]
    X = dx - k * g.L
    r_dir = np.hypot(X, p[1] - q[1] - 2 * l_ * g.H)
    r_img = np.hypot(X, p[1] + q[1] - 2 * l_ * g.H)
    if np.any(r_dir == 0):
        raise SingularityError("coincident points; use the tadpole module")
    return float((np.sum(special.k0(m * r_dir)) - np.sum(special.k0(m * r_img))) / (2 * math.pi))


def cylinder_omega(L: float, m: float, n):
    return np.sqrt(m * m + (2 * math.pi * np.asarray(n) / L) ** 2)


def _cylinder_modes(g: Cylinder, m, p, q, prec: Precision):
    # (1/L) sum_n e^{2 pi i n (x-x')/L} sinh(w y<) sinh(w (H - y>)) / (w sinh(w H))
    y1, y2 = sorted((p[1], q[1]))
    gap = y2 - y1
    nmax = int(math.ceil(g.L * 40 / (2 * math.pi * gap))) + 2
    nmax = min(nmax, prec.max_terms)
    n = np.arange(0, nmax + 1)
    w = cylinder_omega(g.L, m, n)
    # stable: sinh(a) sinh(b) / sinh(c) with a + b = c - gap
    term = (np.exp(-w * gap) * -np.expm1(-2 * w * y1) * -np.expm1(-2 * w * (g.H - y2))
            / (-np.expm1(-2 * w * g.H)) / (2 * w))
    mult = np.where(n == 0, 1.0, 2.0) * np.cos(2 * math.pi * n * (p[0] - q[0]) / g.L)
    return float(np.sum(mult * term) / g.L)


def greens(g: Geometry, m: float, p, q, prec: Precision = DEFAULT_PRECISION) -> float:
    """Dirichlet Green's function of Delta + m^2."""
    if not m > 0:
        raise ValueError("mass must be positive")
    if isinstance(g, Interval):
        return _interval_green(g.l, m, p, q)
    if isinstance(g, Circle):
        return _circle_green(g.L, m, p, q)
    if distance(g, p, q) == 0:
        raise SingularityError("coincident points in 2D; use the tadpole module")
    if isinstance(g, Torus):
        return _torus_green(g, m, p, q, prec)
    if isinstance(g, Cylinder):
        if p[1] <= 0 or q[1] <= 0 or p[1] >= g.H or q[1] >= g.H:
            return 0.0
        if abs(p[1] - q[1]) > 0.05 * g.L:
            return _cylinder_modes(g, m, p, q, prec)
        return _cylinder_images(g, m, p, q)
    if isinstance(g, Sphere):
        return _sphere_green(g.R, m, _sphere_cos(p, q))
    if isinstance(g, Hemisphere):
        q_img = (math.pi - q[0], q[1])
        return _sphere_green(g.R, m, _sphere_cos(p, q)) - _sphere_green(g.R, m, _sphere_cos(p, q_img))
    raise NotImplementedError(f"no Green's function for {g.kind}")


def greens_normal_derivative(g: Geometry, m: float, p, b,
                             prec: Precision = DEFAULT_PRECISION) -> float:
    """Outward normal derivative of G(p, .) at the boundary point b.

    ``-greens_normal_derivative`` is the Poisson kernel of the Helmholtz
    Dirichlet problem.
    """
    if isinstance(g, Interval):
        if not 0 < p < g.l:
            raise ValueError("p must be interior")
        if b == 0:
            return -math.sinh(m * (g.l - p)) / math.sinh(m * g.l)
        if b == g.l:
            return -math.sinh(m * p) / math.sinh(m * g.l)
        raise ValueError("b must be an endpoint")
    if isinstance(g, Cylinder):
        x, y = p
        if not 0 < y < g.H:
            raise ValueError("p must be interior")
        bx, by = b
        # distance from p to the boundary circle carrying b
        d = y if by == 0 else g.H - y
        if by not in (0, g.H):
            raise ValueError("b must lie on a boundary circle")
        nmax = min(int(math.ceil(g.L * 40 / (2 * math.pi * d))) + 2, prec.max_terms)
        n = np.arange(0, nmax + 1)
        w = cylinder_omega(g.L, m, n)
        # sinh(w (H - d)) / sinh(w H), written stably
        ratio = np.exp(-w * d) * -np.expm1(-2 * w * (g.H - d)) / -np.expm1(-2 * w * g.H)
        mult = np.where(n == 0, 1.0, 2.0) * np.cos(2 * math.pi * n * (x - bx) / g.L)
        return -float(np.sum(mult * ratio) / g.L)
    if isinstance(g, Hemisphere):
        th, ph = p
        if not 0 <= th < math.pi / 2:
            raise ValueError("p must be interior")
        z = m * m * g.R * g.R
        nu = np.sqrt(complex(0.25 - z))
        a1, a2 = 0.5 + nu, 0.5 - nu
        c = math.sin(th) * math.cos(ph - b[1])  # cos of the geodesic angle to b
        dF = a1 * a2 * hyp2f1(a1 + 1, a2 + 1, 2.0, (1 + c) / 2) / 2
        dG_dc = dF / (4 * np.cos(math.pi * nu))
        # d(cos d)/d(theta_b) at the equator equals -cos(theta_p); images double it
        val = 2 * dG_dc * (-math.cos(th)) / g.R
        return float(val.real)
    raise NotImplementedError(f"no boundary for {g.kind}")
