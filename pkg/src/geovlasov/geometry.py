"""Unified trigonometry, distances and interaction kernels on S^2 and H^2.

Points live in the embedding space: R^3 for the unit sphere and the
Minkowski space R^{2,1} (upper sheet, x3 > 0) for the hyperbolic sphere.
The scalar product is ``a1*b1 + a2*b2 + sigma*a3*b3`` throughout.
"""
from __future__ import annotations

import enum

import numpy as np
from scipy.integrate import quad

TWO_PI = 2.0 * np.pi
CLAMP_TOL = 1e-9


class SingularityError(ArithmeticError):
    """Evaluation at a pole or logarithmic singularity."""


class DomainError(ValueError):
    """Input outside the domain of an inverse function or manifold."""


class Curvature(enum.IntEnum):
    SPHERE = 1
    HYPERBOLIC = -1

    @classmethod
    def parse(cls, value) -> "Curvature":
        if isinstance(value, Curvature):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            names = {
                "sphere": cls.SPHERE, "s2": cls.SPHERE, "circle": cls.SPHERE, "+1": cls.SPHERE,
                "hyperbolic": cls.HYPERBOLIC, "h2": cls.HYPERBOLIC, "line": cls.HYPERBOLIC, "-1": cls.HYPERBOLIC,
            }
            if key in names:
                return names[key]
            raise ValueError(f"unknown manifold {value!r}")
        if value in (1, -1):
            return cls(int(value))
        raise ValueError(f"curvature sign must be +1 or -1, got {value!r}")

    @property
    def sigma(self) -> int:
        return int(self)

    @property
    def label(self) -> str:
        return "sphere" if self is Curvature.SPHERE else "hyperbolic"


# --- unified trigonometry -------------------------------------------------

def sn(x, sigma):
    return np.sin(x) if Curvature.parse(sigma) is Curvature.SPHERE else np.sinh(x)


def csn(x, sigma):
    return np.cos(x) if Curvature.parse(sigma) is Curvature.SPHERE else np.cosh(x)


def tn(x, sigma):
    return sn(x, sigma) / csn(x, sigma)


def ctn(x, sigma):
    s = sn(x, sigma)
    if np.any(s == 0):
        raise SingularityError("ctn has a pole where sn vanishes")
    return csn(x, sigma) / s


def unified_trig(x, sigma):
    """Return ``(sn, csn, tn, ctn)`` at ``x``.

    ``ctn`` is reported as ``inf`` where ``sn`` vanishes; call :func:`ctn`
    directly to get a :class:`SingularityError` there instead.
    """
    s = sn(x, sigma)
    c = csn(x, sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = s / c
        ct = np.where(s == 0, np.inf, c / np.where(s == 0, 1.0, s))
    if np.ndim(ct) == 0:
        ct = float(ct)
    return s, c, t, ct


# --- ambient geometry -----------------------------------------------------

def dot(a, b, sigma):
    """The sigma-scalar product over the last axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = Curvature.parse(sigma).sigma
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + s * a[..., 2] * b[..., 2]


def constraint_residual(x, sigma):
    return dot(x, x, sigma) - Curvature.parse(sigma).sigma


def check_point(x, sigma, tol=1e-12):
    x = np.asarray(x, dtype=float)
    res = np.max(np.abs(constraint_residual(x, sigma)))
    if res > tol:
        raise DomainError(f"point off the manifold (residual {res:.3e})")
    if Curvature.parse(sigma) is Curvature.HYPERBOLIC and np.any(x[..., 2] <= 0):
        raise DomainError("hyperbolic points must have x3 > 0")
    return x


def ambient_point(x1, x2, x3, sigma, tol=1e-12):
    return check_point(np.array([x1, x2, x3], dtype=float), sigma, tol)


def check_tangent(x, v, sigma, tol=1e-12):
    res = np.max(np.abs(dot(x, v, sigma)))
    if res > tol:
        raise DomainError(f"vector not tangent (x.v = {res:.3e})")
    return np.asarray(v, dtype=float)


def point_from_angles(alpha, theta, sigma):
    """Polar parametrisation (sn a cos t, sn a sin t, csn a)."""
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = sn(alpha, sigma)
    return np.stack([s * np.cos(theta), s * np.sin(theta), csn(alpha, sigma) * np.ones_like(theta)], axis=-1)


def angles_from_point(x, sigma):
    x = np.asarray(x, dtype=float)
    theta = np.mod(np.arctan2(x[..., 1], x[..., 0]), TWO_PI)
    r = np.hypot(x[..., 0], x[..., 1])
    if Curvature.parse(sigma) is Curvature.SPHERE:
        alpha = np.arctan2(r, x[..., 2])
    else:
        alpha = np.arcsinh(r)
    return alpha, theta


def polar_frame(alpha, theta, sigma):
    """Unit vectors (e_r, e_alpha, e_theta) of the polar parametrisation."""
    s = Curvature.parse(sigma).sigma
    sa, ca = sn(alpha, sigma), csn(alpha, sigma)
    ct, st = np.cos(theta), np.sin(theta)
    zero = np.zeros_like(sa * ct)
    e_r = np.stack([sa * ct, sa * st, ca + zero], axis=-1)
    e_a = np.stack([ca * ct, ca * st, -s * sa + zero], axis=-1)
    e_t = np.stack([-st + zero, ct + zero, zero], axis=-1)
    return e_r, e_a, e_t


def project_point(x, sigma):
    """Pull an ambient vector back onto the manifold by radial rescaling."""
    x = np.asarray(x, dtype=float)
    c = Curvature.parse(sigma)
    q = c.sigma * dot(x, x, c)
    if not np.all(np.isfinite(q)) or np.any(q <= 0):
        raise DomainError("cannot project: the point has lost its causal character (precision exhausted)")
    y = x / np.sqrt(q)[..., None]
    if c is Curvature.HYPERBOLIC:
        y = np.where(y[..., 2:3] < 0, -y, y)
    return y


def project_tangent(x, v, sigma):
    s = Curvature.parse(sigma).sigma
    return np.asarray(v, dtype=float) - s * dot(x, v, sigma)[..., None] * np.asarray(x, dtype=float)


def tangent_basis(x, sigma):
    """Two tangent vectors at ``x``, orthonormal for the sigma-product."""
    x = np.asarray(x, dtype=float)
    cands = [project_tangent(x, e, sigma) for e in np.eye(3)]
    norms = [dot(c, c, sigma) for c in cands]
    order = np.argsort(norms)[::-1]
    e1 = cands[order[0]] / np.sqrt(norms[order[0]])
    # two projected axes can be parallel; keep the better-conditioned remainder
    rest = [cands[i] - dot(cands[i], e1, sigma) * e1 for i in order[1:]]
    w = max(rest, key=lambda r: dot(r, r, sigma))
    e2 = w / np.sqrt(dot(w, w, sigma))
    return e1, e2


def exp_map(x, u, d, sigma):
    """Point at geodesic distance ``d`` from ``x`` along the unit tangent ``u``."""
    d = np.asarray(d, dtype=float)
    return csn(d, sigma)[..., None] * x + sn(d, sigma)[..., None] * u


def geodesic_distance(a, b, sigma):
    """``csn^{-1}(sigma a.b)`` with clamping of round-off drift."""
    c = Curvature.parse(sigma)
    arg = c.sigma * dot(a, b, c)
    if c is Curvature.SPHERE:
        if np.any(arg > 1 + CLAMP_TOL) or np.any(arg < -1 - CLAMP_TOL):
            raise DomainError("inner product outside [-1, 1]; points not on S^2")
        return np.arccos(np.clip(arg, -1.0, 1.0))
    if np.any(arg < 1 - CLAMP_TOL):
        raise DomainError("inner product below 1; points not on H^2")
    return np.arccosh(np.maximum(arg, 1.0))


# --- Green's function and the reduced kernel ------------------------------

def greens_function(d, sigma):
    """Fundamental solution ``(1/2pi) log ctn(d/2)`` of the Laplace-Beltrami operator."""
    c = Curvature.parse(sigma)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise SingularityError("Green's function is singular at d = 0")
    if c is Curvature.SPHERE and np.any(d >= np.pi):
        raise SingularityError("Green's function is singular at the antipode d = pi")
    return _log_ctn_half(d, c) / TWO_PI


def _log_ctn_half(x, c):
    """log |ctn(x/2)| evaluated without cancellation in the tails."""
    x = np.abs(np.asarray(x, dtype=float))
    if c is Curvature.SPHERE:
        return np.log(np.abs(np.cos(x / 2))) - np.log(np.abs(np.sin(x / 2)))
    return np.log1p(2.0 / np.expm1(x))


def kernel_W(x, sigma):
    """Reduced interaction kernel ``(1/2pi) log|ctn(x/2)|`` on the circle or line."""
    c = Curvature.parse(sigma)
    x = np.asarray(x, dtype=float)
    if c is Curvature.SPHERE:
        r = np.mod(x, np.pi)
        if np.any(r == 0):
            raise SingularityError("circle kernel is singular at multiples of pi")
    elif np.any(x == 0):
        raise SingularityError("line kernel is singular at 0")
    return _log_ctn_half(x, c) / TWO_PI


def kernel_fourier_circle(k):
    """Exact coefficients: 1/|k| for odd k, 0 for even k (including 0)."""
    k = np.asarray(k)
    if not np.all(np.equal(np.mod(k, 1), 0)):
        raise ValueError("circle modes must be integers")
    k = k.astype(np.int64)
    odd = np.mod(k, 2) == 1
    out = np.where(odd, 1.0 / np.where(odd, np.abs(k), 1), 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_fourier_line(xi):
    """Exact transform ``tanh(pi xi/2)/(2 xi)`` with the limit pi/4 at xi = 0."""
    a = 0.5 * np.pi * np.abs(np.asarray(xi, dtype=float))
    small = a < 1e-6
    safe = np.where(small, 1.0, a)
    ratio = np.where(small, 1.0 - a * a / 3.0, np.tanh(safe) / safe)
    out = 0.25 * np.pi * ratio
    return float(out) if out.ndim == 0 else out


def kernel_multiplier(freqs, sigma):
    """Fourier multiplier of W on integer modes (circle) or angular frequencies (line)."""
    if Curvature.parse(sigma) is Curvature.SPHERE:
        return kernel_fourier_circle(np.rint(freqs).astype(np.int64))
    return kernel_fourier_line(freqs)


def circle_fourier_quadrature(k: int) -> complex:
    """Adaptive quadrature of ``int_0^{2pi} W(t) exp(-ikt) dt``.

    The interval is cut at the singular points 0, pi, 2pi and further into
    quarter-wavelength pieces; each piece goes to QAGS, which extrapolates
    through the logarithmic endpoint singularities.
    """
    k = int(k)
    pieces = 4 * max(abs(k), 1)
    br = np.linspace(0.0, TWO_PI, pieces + 1)
    w = lambda t: _log_ctn_half(t, Curvature.SPHERE) / TWO_PI
    re = im = 0.0
    for a, b in zip(br[:-1], br[1:]):
        re += quad(lambda t: w(t) * np.cos(k * t), a, b, epsabs=1e-15, epsrel=1e-13, limit=100)[0]
        im -= quad(lambda t: w(t) * np.sin(k * t), a, b, epsabs=1e-15, epsrel=1e-13, limit=100)[0]
    return complex(re, im)


def line_fourier_quadrature(xi: float, cutoff: float = 40.0) -> float:
    """Quadrature of ``int W(x) exp(-i xi x) dx`` truncated to ``|x| <= cutoff``.

    W is even so only the cosine part survives.  The log singularity at 0 is
    isolated on [0, 1] (QAGS); the smooth remainder uses the QAWO cosine rule.
    """
    w = lambda x: _log_ctn_half(x, Curvature.HYPERBOLIC) / TWO_PI
    xi = float(xi)
    split = min(1.0, cutoff)
    head = quad(lambda x: w(x) * np.cos(xi * x), 0.0, split, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    if xi == 0.0:
        tail = quad(w, split, cutoff, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    else:
        tail = quad(w, split, cutoff, weight="cos", wvar=xi, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
    return 2.0 * (head + tail)


def kernel_l1_norm(sigma, cutoff: float = 40.0) -> float:
    """``int |W|`` over one period (circle) or the line; finite for both."""
    c = Curvature.parse(sigma)
    w = lambda x: abs(_log_ctn_half(x, c)) / TWO_PI
    if c is Curvature.SPHERE:
        return 4.0 * quad(w, 0.0, np.pi / 2, epsabs=1e-14, limit=200)[0]
    return 2.0 * (quad(w, 0.0, 1.0, epsabs=1e-14, limit=200)[0] + quad(w, 1.0, cutoff, epsabs=1e-14, limit=200)[0])
