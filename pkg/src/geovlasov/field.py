"""Gravitational potential and field on S^2 / H^2, Gauss flux, particle motion.

Two quadratures are available for a smooth density:

``grid``
    Tensor Gauss-Legendre (alpha) x trapezoid (theta) rule on the stored
    nodes.  Nodes coinciding with the evaluation point (or its antipode on
    S^2) are dropped; convergence is only O(h^2 log h).
``polar``
    Geodesic polar coordinates (d, phi) centred at the evaluation point.
    With y = exp_x(d u) the field kernel times the volume form collapses to
    ``u dd dphi / 2pi`` and the potential kernel to
    ``log ctn(d/2) sn(d) dd dphi / 2pi``, so the integrands are regular and
    the rule converges spectrally.  Needs the density as a callable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .geometry import (
    TWO_PI,
    Curvature,
    SingularityError,
    check_point,
    check_tangent,
    constraint_residual,
    csn,
    dot,
    exp_map,
    geodesic_distance,
    point_from_angles,
    polar_frame,
    project_point,
    project_tangent,
    sn,
    tangent_basis,
)


@dataclass
class PointMass:
    """A Dirac mass, handled through the closed-form kernels."""

    position: np.ndarray
    manifold: Curvature = Curvature.SPHERE
    mass: float = 1.0

    def __post_init__(self):
        self.manifold = Curvature.parse(self.manifold)
        self.position = check_point(np.asarray(self.position, dtype=float), self.manifold)


@dataclass
class SurfaceDensity:
    """Density sampled on a polar (alpha, theta) grid.

    ``weights`` already contain the volume form ``sn(alpha) dalpha dtheta``.
    ``func`` maps ambient points ``(..., 3)`` to density values; it enables
    the polar quadrature.  ``center``/``radius`` bound the region where the
    density is non-negligible (only used on H^2 to truncate integrals).
    """

    manifold: Curvature
    alpha_nodes: np.ndarray
    theta_nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    center: Optional[np.ndarray] = None
    radius: float = np.pi

    def __post_init__(self):
        self.manifold = Curvature.parse(self.manifold)
        if np.any(self.values < 0):
            raise ValueError("surface density must be non-negative")

    @classmethod
    def from_function(cls, manifold, func, n_alpha=256, n_theta=256, alpha_max=None, center=None):
        c = Curvature.parse(manifold)
        if alpha_max is None:
            alpha_max = np.pi if c is Curvature.SPHERE else 8.0
        x, w = np.polynomial.legendre.leggauss(n_alpha)
        alpha = 0.5 * alpha_max * (x + 1.0)
        wa = 0.5 * alpha_max * w
        theta = TWO_PI * np.arange(n_theta) / n_theta
        pts = point_from_angles(alpha[:, None], theta[None, :], c)
        values = np.asarray(func(pts), dtype=float)
        weights = (wa * sn(alpha, c))[:, None] * np.full(n_theta, TWO_PI / n_theta)[None, :]
        if center is None:
            center = np.array([0.0, 0.0, 1.0])
        radius = np.pi if c is Curvature.SPHERE else float(alpha_max)
        return cls(c, alpha, theta, values, weights, func, np.asarray(center, float), radius)

    @property
    def points(self) -> np.ndarray:
        return point_from_angles(self.alpha_nodes[:, None], self.theta_nodes[None, :], self.manifold)

    def mass(self) -> float:
        return float(np.sum(self.values * self.weights))

    def mass_within(self, alpha: float) -> float:
        """Mass of the polar cap ``alpha' < alpha`` by an independent GL rule."""
        if self.func is None:
            raise ValueError("cap mass needs the density function")
        x, w = np.polynomial.legendre.leggauss(len(self.alpha_nodes))
        a = 0.5 * alpha * (x + 1.0)
        wa = 0.5 * alpha * w
        n = len(self.theta_nodes)
        th = TWO_PI * np.arange(n) / n
        vals = self.func(point_from_angles(a[:, None], th[None, :], self.manifold))
        return float(np.sum(vals * (wa * sn(a, self.manifold))[:, None]) * TWO_PI / n)


Density = Union[SurfaceDensity, PointMass]


# --- density factories ------------------------------------------------------

def uniform_density(level=1.0 / (4.0 * np.pi), n_alpha=128, n_theta=128):
    """Constant density on S^2 (unit total mass by default)."""
    return SurfaceDensity.from_function(
        Curvature.SPHERE, lambda p: np.full(p.shape[:-1], level), n_alpha, n_theta
    )


def gaussian_bumps(manifold, centers, widths, amplitudes, n_alpha=256, n_theta=256, alpha_max=None):
    """Sum of ``a exp(-d(y, c)^2 / 2w^2)`` bumps."""
    c = Curvature.parse(manifold)
    centers = [check_point(np.asarray(p, float), c, 1e-10) for p in centers]
    widths = np.atleast_1d(np.asarray(widths, float))
    amplitudes = np.atleast_1d(np.asarray(amplitudes, float))

    def func(p):
        out = np.zeros(p.shape[:-1])
        for ctr, w, a in zip(centers, widths, amplitudes):
            d = geodesic_distance(p, ctr, c)
            out = out + a * np.exp(-0.5 * (d / w) ** 2)
        return out

    if alpha_max is None and c is Curvature.HYPERBOLIC:
        reach = max(geodesic_distance(ctr, np.array([0.0, 0.0, 1.0]), c) for ctr in centers)
        alpha_max = float(reach + 10.0 * widths.max())
    return SurfaceDensity.from_function(c, func, n_alpha, n_theta, alpha_max)


def gaussian_cap(manifold, width, mass=1.0, n_alpha=256, n_theta=256):
    """A Gaussian bump of given total mass centred at the pole (0, 0, 1)."""
    pole = np.array([0.0, 0.0, 1.0])
    unit = gaussian_bumps(manifold, [pole], [width], [1.0], n_alpha, n_theta)
    scale = mass / unit.mass()
    return gaussian_bumps(manifold, [pole], [width], [scale], n_alpha, n_theta)


# --- potential and field ------------------------------------------------------

def _point_mass_potential(pm: PointMass, x):
    s = pm.manifold.sigma
    xy = dot(x, pm.position, s)
    num, den = 1.0 + s * xy, s - xy
    if np.any(den <= 0) or np.any(num <= 0):
        raise SingularityError("evaluation point coincides with the point mass (or its antipode)")
    return pm.mass / (4.0 * np.pi) * np.log(num / den)


def _point_mass_field(pm: PointMass, x):
    s = pm.manifold.sigma
    y = pm.position
    xy = dot(x, y, s)
    den = 1.0 - xy ** 2
    if np.any(np.abs(den) == 0):
        raise SingularityError("evaluation point coincides with the point mass (or its antipode)")
    vec = y - s * xy[..., None] * x
    return pm.mass / (TWO_PI * s) * vec / den[..., None]


def _polar_nodes(rho: SurfaceDensity, x, n_radial, n_angular):
    c = rho.manifold
    if c is Curvature.SPHERE:
        reach = np.pi
    else:
        reach = float(geodesic_distance(x, rho.center, c)) + rho.radius
    s, w = np.polynomial.legendre.leggauss(n_radial)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    # smoothstep map clusters nodes at both ends, taming d log d behaviour
    d = reach * (3 * s ** 2 - 2 * s ** 3)
    dd = reach * 6 * s * (1 - s) * w
    e1, e2 = tangent_basis(x, c)
    phi = TWO_PI * np.arange(n_angular) / n_angular
    u = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
    y = exp_map(x, u[None, :, :], d[:, None], c)
    return d, dd, u, y, TWO_PI / n_angular


def _choose(rho, method):
    if method == "auto":
        return "polar" if rho.func is not None else "grid"
    if method == "polar" and rho.func is None:
        raise ValueError("polar quadrature needs SurfaceDensity.func")
    if method not in ("polar", "grid"):
        raise ValueError(f"unknown method {method!r}")
    return method


def _grid_mask(rho, x):
    pts = rho.points
    s = rho.manifold.sigma
    xy = dot(pts, x, s)
    den = 1.0 - xy ** 2
    keep = np.abs(den) > 1e-24
    return pts, xy, den, keep


def potential_at(rho: Density, x, method="auto", n_radial=128, n_angular=128) -> float:
    """Potential ``U(x) = (1/4pi) int rho(y) log((1+s x.y)/(s-x.y)) dy``."""
    if isinstance(rho, PointMass):
        return float(_point_mass_potential(rho, check_point(x, rho.manifold, 1e-10)))
    c = rho.manifold
    x = check_point(x, c, 1e-10)
    if _choose(rho, method) == "polar":
        d, dd, _, y, dphi = _polar_nodes(rho, x, n_radial, n_angular)
        vals = rho.func(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            lc = np.where(d > 0, np.log(np.abs(csn(d / 2, c) / sn(d / 2, c))), 0.0)
            ker = np.nan_to_num(lc * sn(d, c))
        return float(np.sum(vals * (ker * dd)[:, None]) * dphi / TWO_PI)
    pts, xy, den, keep = _grid_mask(rho, x)
    s = c.sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = np.where(keep, np.log(np.abs((1.0 + s * xy) / (s - xy))), 0.0)
    return float(np.sum(rho.values * rho.weights * ker) / (4.0 * np.pi))


def field_at(rho: Density, x, method="auto", n_radial=128, n_angular=128) -> np.ndarray:
    """Field ``grad U``, an ambient vector tangent to the manifold at ``x``."""
    if isinstance(rho, PointMass):
        return _point_mass_field(rho, check_point(x, rho.manifold, 1e-10))
    c = rho.manifold
    x = check_point(x, c, 1e-10)
    if _choose(rho, method) == "polar":
        _, dd, u, y, dphi = _polar_nodes(rho, x, n_radial, n_angular)
        vals = rho.func(y)
        weights = vals * dd[:, None]
        return np.einsum("ij,jk->k", weights, u) * dphi / TWO_PI
    pts, xy, den, keep = _grid_mask(rho, x)
    s = c.sigma
    vec = pts - s * xy[..., None] * x
    w = np.where(keep, rho.values * rho.weights / np.where(keep, den, 1.0), 0.0)
    return np.einsum("ij,ijk->k", w, vec) / (TWO_PI * s)


def gauss_flux(rho: Density, alpha: float, n_points=64, **kw) -> float:
    """Inward flux of the field through the colatitude circle ``alpha`` on S^2.

    For a point mass at the pole this equals its mass for every alpha.
    """
    manifold = rho.manifold
    if manifold is not Curvature.SPHERE:
        raise ValueError("Gauss flux check is defined on S^2 only")
    if not 0.0 < alpha < np.pi:
        raise ValueError("alpha must lie strictly between the poles")
    theta = TWO_PI * np.arange(n_points) / n_points
    _, e_a, _ = polar_frame(alpha, theta, manifold)
    pts = point_from_angles(alpha, theta, manifold)
    normal_comp = np.array([dot(field_at(rho, p, **kw), e, manifold) for p, e in zip(pts, e_a)])
    return float(-np.sum(normal_comp) * np.sin(alpha) * TWO_PI / n_points)


def field_table(rho: Density, alphas, thetas, **kw):
    """Rows ``(alpha, theta, U, F_alpha, F_theta, tangency)`` on a polar grid."""
    c = rho.manifold
    rows = []
    for a in alphas:
        for t in thetas:
            x = point_from_angles(a, t, c)
            _, e_a, e_t = polar_frame(a, t, c)
            F = field_at(rho, x, **kw)
            U = potential_at(rho, x, **kw)
            rows.append((float(a), float(t), U, float(dot(F, e_a, c)), float(dot(F, e_t, c)), float(abs(dot(F, x, c)))))
    return rows


# --- constrained particle dynamics -------------------------------------------

@dataclass
class ParticleState:
    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0
    manifold: Curvature = Curvature.SPHERE

    def __post_init__(self):
        self.manifold = Curvature.parse(self.manifold)
        self.position = check_point(np.asarray(self.position, float), self.manifold, 1e-10)
        self.velocity = check_tangent(self.position, np.asarray(self.velocity, float), self.manifold, 1e-10)


@dataclass
class Trajectory:
    manifold: Curvature
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    max_constraint_drift: float = 0.0
    max_tangency_drift: float = 0.0
    residuals: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> ParticleState:
        return ParticleState(self.positions[i], self.velocities[i], float(self.times[i]), self.manifold)

    @property
    def states(self):
        return [self[i] for i in range(len(self))]


def integrate_particle(state: ParticleState, rho: Optional[Density], dt: float, steps: int, **field_kw) -> Trajectory:
    """Classical RK4 for ``x' = v, v' = grad U - sigma (v.v) x`` with projection.

    After every step x is rescaled back onto the manifold and v projected onto
    the tangent plane.  The largest residuals seen *before* projection are
    reported as drift.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    c = state.manifold
    s = c.sigma

    def accel(x, v):
        a = -s * dot(v, v, c) * x
        if rho is not None:
            a = a + field_at(rho, project_point(x, c), **field_kw)
        return a

    x = state.position.copy()
    v = state.velocity.copy()
    xs = np.empty((steps + 1, 3))
    vs = np.empty((steps + 1, 3))
    xs[0], vs[0] = x, v
    drift_c = drift_t = 0.0
    post_c = post_t = 0.0
    # scale-free residuals; on H2 far from the origin |x|^2 ~ e^{2d} and the
    # absolute residual is dominated by roundoff
    rel_c = rel_t = 0.0
    for n in range(steps):
        if dt > 0:
            k1x, k1v = v, accel(x, v)
            k2x, k2v = v + 0.5 * dt * k1v, accel(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
            k3x, k3v = v + 0.5 * dt * k2v, accel(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
            k4x, k4v = v + dt * k3v, accel(x + dt * k3x, v + dt * k3v)
            x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            drift_c = max(drift_c, abs(float(constraint_residual(x, c))))
            drift_t = max(drift_t, abs(float(dot(x, v, c))))
            scale_x, scale_v = float(x @ x), float(np.linalg.norm(v))
            rel_c = max(rel_c, abs(float(constraint_residual(x, c))) / scale_x)
            if scale_v > 0:
                rel_t = max(rel_t, abs(float(dot(x, v, c))) / float(np.sqrt(scale_x) * scale_v))
            x = project_point(x, c)
            v = project_tangent(x, v, c)
            post_c = max(post_c, abs(float(constraint_residual(x, c))))
            post_t = max(post_t, abs(float(dot(x, v, c))))
        xs[n + 1], vs[n + 1] = x, v
    times = state.time + dt * np.arange(steps + 1)
    return Trajectory(
        c, times, xs, vs, drift_c, drift_t,
        residuals={"constraint": post_c, "tangency": post_t,
                   "constraint_rel": rel_c, "tangency_rel": rel_t},
    )
