import math

import mpmath
import numpy as np
import pytest

from zqft import dnglue as dn
from zqft import geometry as geo
from zqft import zetareg as zr
from zqft.geometry import (Circle, Cylinder, Disk, Hemisphere, Interval, Sphere, SphericalSector)

TWO_PI = 2 * math.pi


def test_disk_zero_mode():
    val = dn.dn_eigenvalue(Disk(1.0), None, 1.0, 0)
    assert val == pytest.approx(float(mpmath.besseli(1, 1) / mpmath.besseli(0, 1)), rel=1e-14)
    assert val == pytest.approx(0.4463900, abs=1e-7)


def test_cylinder_ratio_is_coth():
    g = Cylinder(TWO_PI, 1.3)
    for n in range(6):
        w = dn.kappa_eigenvalue(g.L, 0.7, n)
        assert dn.dn_eigenvalue(g, "top", 0.7, n) / w == pytest.approx(1 / math.tanh(g.H * w), rel=1e-14)


def test_hemisphere_against_gamma_ratio():
    R, m = 1.0, 0.7
    nu = mpmath.sqrt(mpmath.mpf(0.25) - (m * R) ** 2)
    a1, a2 = 0.5 + nu, 0.5 - nu
    for n in (0, 1, 5, 20):
        ref = (2 / R) * mpmath.gamma((n + 1 + a1) / 2) * mpmath.gamma((n + 1 + a2) / 2) / (
            mpmath.gamma((n + a1) / 2) * mpmath.gamma((n + a2) / 2))
        assert dn.dn_eigenvalue(Hemisphere(R), "circle", m, n) == pytest.approx(float(mpmath.re(ref)), rel=1e-12)


def test_hemisphere_against_dirichlet_problem():
    # independent oracle: lambda_n = d/dn log P_nu^n along the meridian at the equator,
    # P_nu^n the associated Legendre function regular at the pole
    R, m, n = 1.0, 0.6, 3
    nu = -0.5 + mpmath.sqrt(mpmath.mpf(0.25) - (m * R) ** 2)
    f = lambda th: mpmath.legenp(nu, n, mpmath.cos(th))
    deriv = mpmath.diff(f, mpmath.pi / 2) / f(mpmath.pi / 2)
    # outward normal at the equator points towards increasing colatitude
    assert dn.dn_eigenvalue(Hemisphere(R), "circle", m, n) == pytest.approx(float(mpmath.re(deriv)) / R, rel=1e-8)


def test_hemisphere_delta_order():
    fit = dn.delta_order_fit(Hemisphere(1.0), 1.0, (32, 256))
    assert -4.2 <= fit["slope"] <= -3.8
    n = 200
    assert dn.dn_delta(Hemisphere(1.0), 1.0, n) * n**4 == pytest.approx(-0.25, rel=0.02)


def test_delta_order_fits():
    assert -3.1 <= dn.delta_order_fit(Disk(1.0), 1.0)["slope"] <= -2.9
    assert -4.1 <= dn.delta_order_fit(Hemisphere(1.0), 1.0)["slope"] <= -3.9
    assert dn.delta_order_fit(Cylinder(TWO_PI, 2.0), 1.0)["superpolynomial"]
    sec = dn.delta_order_fit(SphericalSector(1.0, 1.0), 1.0)
    assert sec["asymptotic_only"]


def test_sector_requires_flag():
    with pytest.raises(ValueError):
        dn.dn_eigenvalue(SphericalSector(1.0, 1.0), "circle", 1.0, 5)
    assert dn.dn_eigenvalue(SphericalSector(1.0, 1.0), "circle", 1.0, 5, asymptotic_ok=True) > 0


def test_sector_complementary_cancellation():
    phi = 0.9
    c3a, c4a = dn.sector_delta_coefficients(1.0, 1.0, phi)
    c3b, c4b = dn.sector_delta_coefficients(1.0, 1.0, math.pi - phi)
    assert c3a + c3b == pytest.approx(0.0, abs=1e-15)
    assert c4a == pytest.approx(c4b)


@pytest.mark.parametrize("g", [Disk(1.0), Hemisphere(1.0), Cylinder(TWO_PI, 1.0)])
def test_dn_positive_and_increasing(g):
    vals = [dn.dn_eigenvalue(g, None, 0.8, n) for n in range(0, 30)]
    assert all(v > 0 for v in vals)
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_kappa():
    assert dn.kappa_eigenvalue(TWO_PI, 0.9, 0) == 0.9
    assert dn.kappa_eigenvalue(None, 0.9) == 0.9
    assert dn.kappa_eigenvalue(TWO_PI, 0.9, 3) == pytest.approx(math.sqrt(0.81 + 9))
    L, m = 3.0, 0.8
    assert math.exp(dn.log_det_kappa(L, m)) == pytest.approx(2 * math.sinh(m * L / 2), rel=1e-14)
    assert dn.log_det_kappa(L, m, "mellin") == pytest.approx(dn.log_det_kappa(L, m), abs=1e-8)


def test_interval_dn_matrix():
    l, m = 1.2, 0.8
    D = dn.interval_dn_matrix(l, m)
    assert D[0, 0] == pytest.approx(m / math.tanh(m * l))
    assert D[0, 1] == pytest.approx(-m / math.sinh(m * l))


def test_hemisphere_det():
    H = dn.Piece(Hemisphere(1.0), "circle")
    val = math.exp(dn.log_det_dn(H, H, 0.4))
    assert val == pytest.approx(2 * math.cos(math.pi * 0.3), rel=1e-10)
    assert val == pytest.approx(1.1755705, abs=1e-7)


def test_one_point_interface():
    L, R = dn.Piece(Interval(0.6), "right"), dn.Piece(Interval(1.1), "left")
    D = dn.interface_dn(L, R, 1.0)
    assert D.shape == (1, 1)
    assert D[0, 0] == pytest.approx(1 / math.tanh(0.6) + 1 / math.tanh(1.1))


def test_arc_interface():
    l1, l2, m = 0.7, 1.3, 1.0
    A, B = dn.Piece(Interval(l1), "both"), dn.Piece(Interval(l2), "both")
    det = np.linalg.det(dn.interface_dn(A, B, m))
    assert det == pytest.approx(4 * m**2 * math.sinh(m * (l1 + l2) / 2) ** 2
                                / (math.sinh(m * l1) * math.sinh(m * l2)), rel=1e-13)


def test_bfk_1d():
    one = dn.bfk_residual(dn.Piece(Interval(1.0), "right"), dn.Piece(Interval(1.0), "left"), 1.0)
    arcs = dn.bfk_residual(dn.Piece(Interval(0.7), "both"), dn.Piece(Interval(1.3), "both"), 1.0)
    assert one < 1e-12 and arcs < 1e-12
    # the identity behind the one-point case: 4 sinh^2(1) coth(1) / 2 = 2 sinh(2) / 2
    assert 4 * math.sinh(1) ** 2 / math.tanh(1) == pytest.approx(2 * math.sinh(2))


def test_bfk_2d():
    C1, C2 = dn.Piece(Cylinder(TWO_PI, 1.0), "top"), dn.Piece(Cylinder(TWO_PI, 1.5), "bottom")
    assert dn.bfk_residual(C1, C2, 1.0, 64) < 1e-6
    H = dn.Piece(Hemisphere(1.0), "circle")
    assert dn.bfk_residual(H, H, 0.4, 64) < 1e-6


def test_unsupported_gluing():
    with pytest.raises(ValueError):
        dn.glued_geometry(dn.Piece(Interval(1.0), "right"), dn.Piece(Hemisphere(1.0), "circle"))
    with pytest.raises(ValueError):
        dn.glued_geometry(dn.Piece(Cylinder(1.0, 1.0), "top"), dn.Piece(Cylinder(2.0, 1.0), "bottom"))


def test_fredholm_tail_is_conservative():
    H = dn.Piece(Hemisphere(1.0), "circle")
    for n_max in (16, 32, 64):
        est, actual = dn.fredholm_tail_check(H, H, 0.4, n_max)
        assert est >= actual


def test_greens_gluing_interval():
    L, R = dn.Piece(Interval(0.5), "right"), dn.Piece(Interval(0.5), "left")
    assert dn.greens_glue_residual(L, R, 1.0, 0.3, 0.7) < 1e-12
    assert dn.greens_glue_residual(L, R, 1.0, 0.3, 0.3) < 1e-12


def test_greens_gluing_arcs_and_cylinder():
    A, B = dn.Piece(Interval(0.7), "both"), dn.Piece(Interval(1.3), "both")
    assert dn.greens_glue_residual(A, B, 1.0, 0.3, 1.5) < 1e-12
    C1, C2 = dn.Piece(Cylinder(TWO_PI, 1.0), "top"), dn.Piece(Cylinder(TWO_PI, 1.5), "bottom")
    assert dn.greens_glue_residual(C1, C2, 1.0, (0.3, 0.6), (1.0, 1.8)) < 1e-8
    assert dn.greens_glue_residual(C1, C2, 1.0, (0.3, 0.6), (1.0, 0.8)) < 1e-8


def test_greens_gluing_sphere_same_hemisphere():
    H = dn.Piece(Hemisphere(1.0), "circle")
    assert dn.greens_glue_residual(H, H, 0.7, (0.6, 0.2), (1.0, 1.3)) < 1e-6


def test_greens_gluing_sphere_mode_oracle():
    # same hemisphere: G_S = G_H + sum_n P_n(p) P_n(q) / (2 lambda_n) with P_n the Fourier modes
    # of the Poisson kernel, built here from the normal derivative by brute-force quadrature
    H = Hemisphere(1.0)
    m, p, q = 0.7, (0.6, 0.2), (1.0, 1.3)
    N = 256
    phis = np.linspace(0, TWO_PI, N, endpoint=False)
    kp = np.array([-geo.greens_normal_derivative(H, m, p, (math.pi / 2, f)) for f in phis])
    kq = np.array([-geo.greens_normal_derivative(H, m, q, (math.pi / 2, f)) for f in phis])
    cp, cq = np.fft.rfft(kp) / N, np.fft.rfft(kq) / N
    total = 0.0
    for n in range(0, 40):
        w = 1.0 if n == 0 else 2.0
        total += w * (cp[n] * np.conj(cq[n])).real / (2 * dn.dn_eigenvalue(H, "circle", m, n))
    total *= TWO_PI
    assert geo.greens(Sphere(1.0), m, p, q) == pytest.approx(geo.greens(H, m, p, q) + total, abs=1e-6)


def test_tadpole_gluing_interval():
    f = zr.TadpoleField(Interval(1.0), 1.0, "closed")
    assert dn.tadpole_glue(f, f, 1.0, 0.3) == pytest.approx(zr.tau_reg(Interval(2.0), 1.0, 0.3), abs=1e-12)
    z = zr.TadpoleField(Interval(1.0), 1.0, "zero")
    corr = dn.tadpole_glue(z, z, 1.0, 0.3)
    assert corr == pytest.approx(zr.tau_reg(Interval(2.0), 1.0, 0.3) - zr.tau_reg(Interval(1.0), 1.0, 0.3),
                                 abs=1e-12)
    field = dn.glued_tadpole_field(f, f, 1.0)
    xs = np.array([0.1, 0.7, 1.5])
    assert np.allclose(field(xs), [zr.tau_reg(Interval(2.0), 1.0, x) for x in xs], atol=1e-12)


def test_tadpole_gluing_cylinder():
    c1 = zr.TadpoleField(Cylinder(TWO_PI, 1.0), 1.0)
    c2 = zr.TadpoleField(Cylinder(TWO_PI, 1.5), 1.0)
    glued = Cylinder(TWO_PI, 2.5)
    for p in [(0.2, 0.7), (1.0, 1.9)]:
        assert dn.tadpole_glue(c1, c2, 1.0, p) == pytest.approx(zr.tau_reg(glued, 1.0, p), abs=1e-5)
    # cross-check the glued value against the Mellin route of the glued cylinder
    assert dn.tadpole_glue(c1, c2, 1.0, (0.2, 0.7)) == pytest.approx(
        zr.tau_reg(glued, 1.0, (0.2, 0.7), "mellin"), abs=1e-5)


def test_delta_threshold():
    assert dn.delta_threshold(1.0) == pytest.approx(math.atanh(0.5), abs=1e-3)
    assert dn.delta_threshold(2.0) == pytest.approx(math.atanh(0.5) / 2, abs=1e-3)
    assert dn.delta_norm(Cylinder(TWO_PI, 0.6), 1.0) < 1 < dn.delta_norm(Cylinder(TWO_PI, 0.5), 1.0)
