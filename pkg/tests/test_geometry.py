import math

import numpy as np
import pytest

from zqft import geometry as geo
from zqft.geometry import (Circle, Cylinder, Disk, Hemisphere, Interval, Sphere, SphericalSector,
                           Torus)


def test_parse_geometry():
    assert geo.parse_geometry("interval:l=1.0") == Interval(1.0)
    assert geo.parse_geometry("cylinder:L=6.283,H=2.0") == Cylinder(6.283, 2.0)
    assert geo.parse_geometry("sphere:R=1") == Sphere(1.0)
    for bad in ("blob:R=1", "sphere:Q=1", "interval"):
        with pytest.raises(ValueError):
            geo.parse_geometry(bad)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        Interval(0.0)
    with pytest.raises(ValueError):
        SphericalSector(1.0, math.pi)


def test_heat_circle_short_time():
    L = 2.0
    t = 1e-6 * L**2
    assert geo.heat_trace_diag(Circle(L), 0.3, t) == pytest.approx(1 / math.sqrt(4 * math.pi * t), rel=1e-10)


def test_heat_torus_long_time():
    assert geo.heat_trace_diag(Torus(1.0, 2.0), (0.1, 0.2), 50.0) == pytest.approx(0.5, rel=1e-12)


def test_cylinder_theta_forms_agree():
    g = Cylinder(2 * math.pi, 1.5)
    for y in (0.2, 0.75, 1.3):
        a, b = geo.cylinder_heat_diag_forms(g, y, g.H**2 / math.pi)
        assert a == pytest.approx(b, rel=1e-12)


def test_heat_interval_against_eigenfunctions():
    l, x, t = 1.3, 0.4, 0.05
    n = np.arange(1, 400)
    ref = np.sum(2 / l * np.sin(n * np.pi * x / l) ** 2 * np.exp(-(n * np.pi / l) ** 2 * t))
    assert geo.heat_trace_diag(Interval(l), x, t) == pytest.approx(ref, rel=1e-12)


def test_heat_sphere_against_legendre_sum():
    R, t = 1.3, 0.2
    ls = np.arange(0, 200)
    ref = np.sum((2 * ls + 1) * np.exp(-ls * (ls + 1) * t / R**2)) / (4 * math.pi * R**2)
    assert geo.heat_trace_diag(Sphere(R), (0.3, 0.1), t) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        geo.heat_trace_diag(Sphere(R), (0.3, 0.1), 0.0)


def test_greens_interval_closed_form():
    val = geo.greens(Interval(1.0), 1.0, 0.25, 0.75)
    assert val == pytest.approx(math.sinh(0.25) ** 2 / math.sinh(1.0), rel=1e-14)
    assert val == pytest.approx(0.05429962371407516, rel=1e-13)


def test_greens_circle_diagonal():
    assert geo.greens(Circle(2.0), 1.0, 0.4, 0.4) == pytest.approx(0.5 / math.tanh(1.0), rel=1e-14)


def test_greens_sphere_symmetry():
    rng = np.random.default_rng(0)
    g = Sphere(1.0)
    for _ in range(50):
        p = (rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        q = (rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        assert geo.greens(g, 0.8, p, q) == pytest.approx(geo.greens(g, 0.8, q, p), rel=1e-11)


def test_greens_sphere_both_sides_of_branch_point():
    # mR above and below 1/2: the Green's function is real and continuous in m
    g = Sphere(1.0)
    p, q = (0.5, 0.0), (1.4, 1.0)
    lo = geo.greens(g, 0.5 - 1e-6, p, q)
    hi = geo.greens(g, 0.5 + 1e-6, p, q)
    assert lo == pytest.approx(hi, rel=1e-5)


def test_greens_sphere_legendre_oracle():
    # G = -P_nu(-cos d) / (4 sin(pi nu)) with nu(nu + 1) = -(mR)^2, via mpmath's Legendre function
    import mpmath
    for R, m, d in [(1.2, 0.9, 1.1), (1.0, 0.3, 2.5), (2.0, 0.1, 0.2)]:
        nu = -0.5 + mpmath.sqrt(mpmath.mpf(0.25) - (m * R) ** 2)
        ref = -mpmath.legenp(nu, 0, -math.cos(d)) / (4 * mpmath.sin(mpmath.pi * nu))
        assert geo.greens(Sphere(R), m, (0.0, 0.0), (d / R * R, 0.0)) == pytest.approx(
            float(mpmath.re(ref)), rel=1e-12)


def test_greens_singularity_error():
    with pytest.raises(geo.SingularityError):
        geo.greens(Torus(1.0, 2.0), 1.0, (0.1, 0.2), (0.1, 0.2))
    with pytest.raises(ValueError):
        geo.greens(Interval(1.0), 0.0, 0.1, 0.2)


def _laplacian_residual(g, m, q, p, h):
    if g.dim == 1:
        f = lambda x: geo.greens(g, m, x, q)
        lap = -(f(p + h) - 2 * f(p) + f(p - h)) / h**2
        return lap + m * m * f(p)
    if isinstance(g, (Sphere, Hemisphere)):
        th, ph = p
        f = lambda a, b: geo.greens(g, m, (a, b), q)
        d_th = (math.sin(th + h / 2) * (f(th + h, ph) - f(th, ph))
                - math.sin(th - h / 2) * (f(th, ph) - f(th - h, ph))) / (h * h * math.sin(th))
        d_ph = (f(th, ph + h) - 2 * f(th, ph) + f(th, ph - h)) / (h * h * math.sin(th) ** 2)
        return -(d_th + d_ph) / g.R**2 + m * m * f(th, ph)
    x, y = p
    f = lambda a, b: geo.greens(g, m, (a, b), q)
    lap = -(f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / h**2
    return lap + m * m * f(x, y)


@pytest.mark.parametrize("g,q,p", [
    (Interval(1.0), 0.3, 0.7),
    (Circle(2.0), 0.3, 1.2),
    (Torus(1.0, 1.5), (0.2, 0.3), (0.6, 0.9)),
    (Cylinder(2 * math.pi, 2.0), (0.5, 0.6), (1.5, 1.3)),
    (Sphere(1.0), (0.4, 0.2), (1.5, 1.7)),
    (Hemisphere(1.0), (0.4, 0.2), (1.0, 1.7)),
])
def test_helmholtz_equation_second_order(g, q, p):
    r1 = abs(_laplacian_residual(g, 0.9, q, p, 2e-2))
    r2 = abs(_laplacian_residual(g, 0.9, q, p, 1e-2))
    assert r2 < 1e-3
    if r2 > 1e-9:  # above roundoff the stencil error must shrink like h^2
        assert math.log2(r1 / r2) >= 1.9


def test_dirichlet_boundary_values():
    assert abs(geo.greens(Interval(1.0), 1.0, 1e-9, 0.5)) < 1e-8
    assert abs(geo.greens(Cylinder(2 * math.pi, 1.0), 1.0, (0.3, 1e-9), (1.0, 0.5))) < 1e-8
    assert abs(geo.greens(Hemisphere(1.0), 1.0, (math.pi / 2 - 1e-9, 0.3), (0.5, 1.0))) < 1e-8


@pytest.mark.parametrize("g,p", [(Torus(1.0, 1.5), (0.3, 0.4)), (Sphere(1.0), (0.9, 0.3)),
                                 (Cylinder(2 * math.pi, 2.0), (0.5, 1.0))])
def test_diagonal_log_law(g, p):
    ds = np.geomspace(1e-2, 1e-5, 8)
    vals = []
    for d in ds:
        q = (p[0] + d / (g.R if isinstance(g, Sphere) else 1.0), p[1])
        vals.append(geo.greens(g, 1.0, p, q))
    slope = np.polyfit(np.log(ds), vals, 1)[0]
    assert slope == pytest.approx(-1 / (2 * math.pi), rel=0.02)


def test_normal_derivative_interval():
    val = geo.greens_normal_derivative(Interval(1.0), 1.0, 0.5, 0.0)
    assert val == pytest.approx(-math.sinh(0.5) / math.sinh(1.0), rel=1e-14)
    assert val == pytest.approx(-0.4434094, abs=1e-7)
    m = 1e-7
    total = -(geo.greens_normal_derivative(Interval(2.0), m, 0.7, 0.0)
              + geo.greens_normal_derivative(Interval(2.0), m, 0.7, 2.0))
    assert total == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        geo.greens_normal_derivative(Interval(1.0), 1.0, 0.0, 0.0)


def test_normal_derivative_matches_difference_quotient():
    for g, p, b, inward in [
        (Cylinder(2 * math.pi, 1.5), (0.4, 0.7), (1.1, 0.0), lambda h: (1.1, h)),
        (Cylinder(2 * math.pi, 1.5), (0.4, 0.7), (1.1, 1.5), lambda h: (1.1, 1.5 - h)),
        (Hemisphere(1.0), (0.6, 0.4), (math.pi / 2, 1.3), lambda h: (math.pi / 2 - h, 1.3)),
    ]:
        h = 1e-4
        # G vanishes on the boundary; outward derivative = -(G(inward h) - 0)/h to O(h)
        g1 = geo.greens(g, 0.8, p, inward(h))
        g2 = geo.greens(g, 0.8, p, inward(2 * h))
        fd = -(4 * g1 - g2) / (2 * h)
        assert geo.greens_normal_derivative(g, 0.8, p, b) == pytest.approx(fd, rel=1e-6)


def test_cylinder_poisson_kernel_fourier_modes():
    # sum over the boundary circle of the Poisson kernel = sinh(m(H-y))/sinh(mH) (n = 0 mode)
    g = Cylinder(2 * math.pi, 1.5)
    m, y = 0.8, 0.6
    xs = np.linspace(0, g.L, 256, endpoint=False)
    total = -np.mean([geo.greens_normal_derivative(g, m, (0.3, y), (x, 0.0)) for x in xs]) * g.L
    assert total == pytest.approx(math.sinh(m * (g.H - y)) / math.sinh(m * g.H), rel=1e-10)


def test_scalar_curvature():
    assert geo.scalar_curvature(Torus(1.0, 2.0)) == 0.0
    assert geo.scalar_curvature(Sphere(2.0)) == 0.5
    assert geo.scalar_curvature(Cylinder(1.0, 2.0)) == 0.0


def test_boundary_components_and_volume():
    assert [b.name for b in geo.boundary_components(Interval(1.0))] == ["left", "right"]
    assert [b.name for b in geo.boundary_components(Cylinder(1.0, 2.0))] == ["bottom", "top"]
    assert geo.boundary_components(Sphere(1.0)) == []
    assert geo.volume(Hemisphere(1.0)) == pytest.approx(2 * math.pi)
    assert geo.volume(Disk(2.0)) == pytest.approx(4 * math.pi)


def test_distance():
    assert geo.distance(Circle(2.0), 0.1, 1.9) == pytest.approx(0.2)
    assert geo.distance(Sphere(2.0), (0.0, 0.0), (math.pi, 0.0)) == pytest.approx(2 * math.pi)
    assert geo.distance(Torus(1.0, 1.0), (0.05, 0.0), (0.95, 0.0)) == pytest.approx(0.1)
