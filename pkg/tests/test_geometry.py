import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geovlasov.geometry import (
    Curvature,
    DomainError,
    SingularityError,
    angles_from_point,
    check_point,
    circle_fourier_quadrature,
    constraint_residual,
    csn,
    ctn,
    dot,
    exp_map,
    geodesic_distance,
    greens_function,
    kernel_fourier_circle,
    kernel_fourier_line,
    kernel_l1_norm,
    kernel_W,
    line_fourier_quadrature,
    point_from_angles,
    polar_frame,
    project_point,
    project_tangent,
    sn,
    tangent_basis,
    unified_trig,
)

# Frozen with mpmath at 30 digits (power series for cosh/sinh, closed-form
# logs, and oscillatory quadrature with the singular head split off).
COSH_1 = 1.54308063481524377847790562076
SINH_1 = 1.1752011936438014568823818506
G_SPHERE_1 = 0.0962222847781928920324935124165
G_HYPER_1 = 0.122857562711581692368449941463
W_LINE_5 = 0.00214478760051974567577518708809
W_CIRCLE_2 = -0.0705092564452452611195927243144
W_HAT_LINE_2 = 0.249068019055187486066172645003
W_HAT_LINE_1 = 0.458576167833637173186546460721
L1_CIRCLE = 1.16624361612327512055353782587

MANIFOLDS = [Curvature.SPHERE, Curvature.HYPERBOLIC]
angles = st.floats(0.05, 3.0)
turns = st.floats(0.0, 2 * np.pi)


def random_point(sigma, alpha, theta):
    return point_from_angles(alpha, theta, sigma)


class TestCurvature:
    @pytest.mark.parametrize("text,expected", [
        ("sphere", 1), ("S2", 1), ("circle", 1), (1, 1),
        ("hyperbolic", -1), ("h2", -1), ("line", -1), (-1, -1),
    ])
    def test_parse(self, text, expected):
        assert Curvature.parse(text).sigma == expected

    def test_parse_rejects(self):
        with pytest.raises(ValueError):
            Curvature.parse("torus")


class TestUnifiedTrig:
    def test_zero(self):
        for s in (1, -1):
            sn0, csn0, tn0, _ = unified_trig(0.0, s)
            assert (sn0, csn0, tn0) == (0.0, 1.0, 0.0)

    def test_hyperbolic_at_one(self):
        assert csn(1.0, -1) == pytest.approx(COSH_1, abs=1e-15)
        assert sn(1.0, -1) == pytest.approx(SINH_1, abs=1e-15)

    def test_ctn_pole(self):
        assert unified_trig(0.0, 1)[3] == np.inf
        with pytest.raises(SingularityError):
            ctn(0.0, -1)

    @given(x=st.floats(-5, 5))
    def test_pythagoras(self, x):
        assert csn(x, 1) ** 2 + sn(x, 1) ** 2 == pytest.approx(1.0, abs=1e-14)
        # cancellation: error scales with cosh^2
        assert abs(csn(x, -1) ** 2 - sn(x, -1) ** 2 - 1.0) <= 1e-15 * csn(x, -1) ** 2 * 4


class TestPoints:
    def test_origin(self):
        p = check_point([0.0, 0.0, 1.0], 1)
        assert dot(p, p, 1) == 1.0

    def test_off_manifold(self):
        with pytest.raises(DomainError):
            check_point([0.0, 0.0, 1.1], 1)
        with pytest.raises(DomainError):
            check_point([0.0, 0.0, -1.0], -1)  # lower sheet

    @pytest.mark.parametrize("sigma", MANIFOLDS)
    @given(alpha=angles, theta=turns)
    def test_angles_roundtrip(self, sigma, alpha, theta):
        x = random_point(sigma, alpha, theta)
        assert abs(constraint_residual(x, sigma)) < 1e-12 * max(1.0, dot(x, x, 1))
        a, t = angles_from_point(x, sigma)
        assert a == pytest.approx(alpha, abs=1e-9)
        assert np.cos(t - theta) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("sigma", MANIFOLDS)
    def test_polar_frame_orthonormal(self, sigma):
        x = point_from_angles(0.8, 0.4, sigma)
        e_r, e_a, e_t = polar_frame(0.8, 0.4, sigma)
        assert np.allclose(e_r, x)
        assert abs(dot(e_a, e_a, sigma) - 1) < 1e-13
        assert abs(dot(e_t, e_t, sigma) - 1) < 1e-13
        assert abs(dot(e_a, x, sigma)) < 1e-13
        assert abs(dot(e_a, e_t, sigma)) < 1e-13

    @pytest.mark.parametrize("sigma", MANIFOLDS)
    def test_tangent_basis(self, sigma):
        x = point_from_angles(1.3, 2.0, sigma)
        e1, e2 = tangent_basis(x, sigma)
        for e in (e1, e2):
            assert abs(dot(e, x, sigma)) < 1e-12
            assert abs(dot(e, e, sigma) - 1) < 1e-12
        assert abs(dot(e1, e2, sigma)) < 1e-12

    def test_project_point_guard(self):
        with pytest.raises(DomainError):
            project_point([1.0, 0.0, 1.0], -1)  # null vector: no timelike direction left
        with pytest.raises(DomainError):
            project_point([0.0, 0.0, 0.0], 1)

    def test_project_tangent(self):
        x = point_from_angles(0.5, 0.5, -1)
        v = project_tangent(x, np.array([0.3, -0.2, 0.7]), -1)
        assert abs(dot(x, v, -1)) < 1e-14


class TestDistance:
    def test_sphere_quarter(self):
        assert geodesic_distance([1, 0, 0], [0, 0, 1], 1) == pytest.approx(np.pi / 2)

    def test_hyperbolic_unit(self):
        b = np.array([SINH_1, 0.0, COSH_1])
        assert geodesic_distance([0, 0, 1], b, -1) == pytest.approx(1.0, abs=1e-12)

    def test_clamps_roundoff(self):
        x = np.array([0.6, 0.8, 0.0])
        assert geodesic_distance(x, x * (1 + 1e-13), 1) == pytest.approx(0.0, abs=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            geodesic_distance([0, 0, 1], [0, 0, 2], 1)

    @pytest.mark.parametrize("sigma", MANIFOLDS)
    @given(a=st.tuples(angles, turns), b=st.tuples(angles, turns), c=st.tuples(angles, turns))
    @settings(max_examples=60)
    def test_metric_axioms(self, sigma, a, b, c):
        x, y, z = (random_point(sigma, *p) for p in (a, b, c))
        dxy = geodesic_distance(x, y, sigma)
        assert dxy == pytest.approx(geodesic_distance(y, x, sigma), abs=1e-9)
        assert dxy <= geodesic_distance(x, z, sigma) + geodesic_distance(z, y, sigma) + 1e-7

    @pytest.mark.parametrize("sigma", MANIFOLDS)
    @given(alpha=angles, theta=turns, phi=turns, d=st.floats(0.01, 3.0))
    def test_exp_map_distance(self, sigma, alpha, theta, phi, d):
        x = random_point(sigma, alpha, theta)
        e1, e2 = tangent_basis(x, sigma)
        y = exp_map(x, np.cos(phi) * e1 + np.sin(phi) * e2, d, sigma)
        assert geodesic_distance(x, y, sigma) == pytest.approx(d, abs=1e-6)


class TestGreensAndKernel:
    def test_greens_values(self):
        assert greens_function(1.0, 1) == pytest.approx(G_SPHERE_1, rel=1e-13)
        assert greens_function(1.0, -1) == pytest.approx(G_HYPER_1, rel=1e-13)

    def test_greens_singular(self):
        with pytest.raises(SingularityError):
            greens_function(0.0, -1)
        with pytest.raises(SingularityError):
            greens_function(np.pi, 1)

    def test_kernel_values(self):
        assert kernel_W(5.0, -1) == pytest.approx(W_LINE_5, rel=1e-12)
        assert kernel_W(2.0, 1) == pytest.approx(W_CIRCLE_2, rel=1e-12)

    def test_kernel_far_tail(self):
        # log coth(x/2) ~ 2 e^{-x}; no cancellation at large x
        assert kernel_W(60.0, -1) == pytest.approx(np.exp(-60.0) / np.pi, rel=1e-12)

    def test_kernel_singular(self):
        with pytest.raises(SingularityError):
            kernel_W(np.pi, 1)
        with pytest.raises(SingularityError):
            kernel_W(0.0, -1)

    @given(x=st.floats(0.01, 3.1))
    def test_circle_kernel_odd_about_quarter(self, x):
        # W(pi - x) = -W(x): the reason even modes vanish
        assert kernel_W(np.pi - x, 1) == pytest.approx(-kernel_W(x, 1), abs=1e-12)

    def test_fourier_circle_table(self):
        k = np.arange(-6, 7)
        expected = np.where(k % 2 == 1, 1.0 / np.maximum(np.abs(k), 1), 0.0)
        assert np.array_equal(kernel_fourier_circle(k), expected)

    def test_fourier_circle_rejects_fraction(self):
        with pytest.raises(ValueError):
            kernel_fourier_circle(1.5)

    def test_fourier_line_values(self):
        assert kernel_fourier_line(2.0) == pytest.approx(W_HAT_LINE_2, rel=1e-14)
        assert kernel_fourier_line(1.0) == pytest.approx(W_HAT_LINE_1, rel=1e-14)
        assert kernel_fourier_line(0.0) == pytest.approx(np.pi / 4, rel=1e-15)
        assert kernel_fourier_line(1e-9) == pytest.approx(np.pi / 4, rel=1e-15)

    @given(xi=st.floats(1e-8, 1e-4))
    def test_fourier_line_continuous_at_zero(self, xi):
        direct = np.tanh(0.5 * np.pi * xi) / (2 * xi)
        assert kernel_fourier_line(xi) == pytest.approx(direct, rel=1e-10)

    @pytest.mark.parametrize("k", [1, 2, 3, 8, 33])
    def test_circle_quadrature(self, k):
        assert abs(circle_fourier_quadrature(k) - kernel_fourier_circle(k)) < 1e-10

    @pytest.mark.parametrize("xi", [0.05, 1.0, 20.0])
    def test_line_quadrature(self, xi):
        assert line_fourier_quadrature(xi) == pytest.approx(kernel_fourier_line(xi), abs=1e-10)

    def test_l1_norms(self):
        assert kernel_l1_norm(1) == pytest.approx(L1_CIRCLE, rel=1e-10)
        # W > 0 on the line, so the L1 norm is W_hat(0)
        assert kernel_l1_norm(-1) == pytest.approx(np.pi / 4, rel=1e-10)
