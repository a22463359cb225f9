"""Linearized dynamics around homogeneous states.

Fourier conventions: ``f_hat(eta) = int f(v) e^{-i eta v} dv`` in velocity and
``g_hat(k) = int g(x) e^{-i k x} dx`` in space.  Each spatial mode of the
density perturbation obeys a scalar Volterra equation

    phi(t) = a(t) + int_0^t K(t - s) phi(s) ds

with ``K(t, k) = |k| t f0_hat(k t)`` for odd k on the circle (0 for even k) and
``K(t, xi) = (xi t / 2) tanh(pi xi / 2) f0_hat(xi t)`` on the line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .geometry import Curvature, kernel_fourier_line

SQRT2PI = np.sqrt(2.0 * np.pi)
CRITICAL_WINDOW = 12.0
CRITICAL_STEP = 1e-3
MARGINAL_TOL = 1e-6


# --- equilibrium profiles --------------------------------------------------------

@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    center: float
    width: float


@dataclass
class EquilibriumProfile:
    """Homogeneous velocity profile f0(v).

    Gaussian mixtures carry closed forms for f0, f0' and f0_hat; other
    profiles fall back to quadrature for the transform.
    """

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    fhat: Optional[Callable[[np.ndarray], np.ndarray]] = None
    components: tuple = ()
    label: str = "custom"
    support: float = 40.0

    @classmethod
    def gaussian_mixture(cls, components: Sequence[GaussianComponent], label="mixture"):
        comps = tuple(components)
        for c in comps:
            if c.weight < 0 or c.width <= 0:
                raise ValueError("mixture weights must be >= 0 and widths > 0")

        def f(v):
            v = np.asarray(v, dtype=float)
            return sum(c.weight * np.exp(-0.5 * ((v - c.center) / c.width) ** 2) / (SQRT2PI * c.width) for c in comps)

        def df(v):
            v = np.asarray(v, dtype=float)
            return sum(
                -c.weight * (v - c.center) / c.width ** 2
                * np.exp(-0.5 * ((v - c.center) / c.width) ** 2) / (SQRT2PI * c.width)
                for c in comps
            )

        def fhat(eta):
            eta = np.asarray(eta, dtype=float)
            return sum(c.weight * np.exp(-1j * eta * c.center - 0.5 * (eta * c.width) ** 2) for c in comps)

        reach = max(abs(c.center) + 40.0 * c.width for c in comps)
        return cls(f, df, fhat, comps, label, reach)

    @classmethod
    def maxwellian(cls, mass=1.0, center=0.0, width=1.0):
        if mass <= 0:
            raise ValueError("mass must be positive")
        return cls.gaussian_mixture([GaussianComponent(mass, center, width)], f"maxwellian:{mass:g}")

    @classmethod
    def two_stream(cls, u, mass=1.0, width=1.0):
        half = 0.5 * mass
        return cls.gaussian_mixture(
            [GaussianComponent(half, -u, width), GaussianComponent(half, u, width)], f"two_stream:{u:g},{mass:g}"
        )

    @classmethod
    def parse(cls, text: str) -> "EquilibriumProfile":
        """Parse ``maxwellian:mass[,center,width]`` or ``two_stream:u,mass``."""
        kind, _, args = text.partition(":")
        nums = [float(a) for a in args.split(",") if a.strip()] if args else []
        kind = kind.strip().lower()
        if kind == "maxwellian":
            if not 1 <= len(nums) <= 3:
                raise ValueError("maxwellian takes mass[,center,width]")
            return cls.maxwellian(*nums)
        if kind in ("two_stream", "two-stream"):
            if not 1 <= len(nums) <= 3:
                raise ValueError("two_stream takes u[,mass[,width]]")
            return cls.two_stream(*nums)
        raise ValueError(f"unknown profile {kind!r}")

    @property
    def mass(self) -> float:
        if self.components:
            return float(sum(c.weight for c in self.components))
        return float(integrate.quad(self.f, -np.inf, np.inf, epsabs=1e-13)[0])

    def transform(self, eta):
        """``f0_hat(eta)``; quadrature when no closed form is attached."""
        if self.fhat is not None:
            return self.fhat(eta)
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        out = np.empty(eta.shape, dtype=complex)
        R = self.support
        for i, e in enumerate(eta.flat):
            re, _ = integrate.quad(lambda v: self.f(v) * np.cos(e * v), -R, R, limit=400)
            im, _ = integrate.quad(lambda v: -self.f(v) * np.sin(e * v), -R, R, limit=400)
            out.flat[i] = re + 1j * im
        return out

    def tail_check(self, v_tail=6.0, v_max=1e3, n=200) -> float:
        """Largest ``|v f0'(v)|`` on a log grid beyond v_tail (bounded tails pass)."""
        v = np.logspace(np.log10(v_tail), np.log10(v_max), n)
        return float(max(np.max(np.abs(v * self.df(v))), np.max(np.abs(v * self.df(-v)))))


# --- Volterra equation -----------------------------------------------------------

def volterra_kernel(t, mode, f0: EquilibriumProfile, manifold) -> np.ndarray:
    """``K(t, mode)``; equals ``|mode| t f0_hat(mode t) W_hat(mode)`` on either manifold."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    c = Curvature.parse(manifold)
    if c is Curvature.SPHERE:
        k = int(mode)
        if k % 2 == 0:
            return np.zeros_like(t)
        val = abs(k) * t * f0.transform(k * t)
    else:
        xi = float(mode)
        val = 0.5 * xi * t * np.tanh(0.5 * np.pi * xi) * f0.transform(xi * t)
    if np.all(np.imag(val) == 0):
        return np.real(val)
    return val


def gaussian_seed(epsilon=1.0, center=0.0, width=1.0, mass=1.0, x_width: Optional[float] = None):
    """Closed-form double transform of a separable seed perturbation.

    On the circle the seed is ``epsilon cos(x) g(v)`` with g a Gaussian of the
    given mass; on the line (``x_width`` set) it is
    ``epsilon exp(-x^2 / 2 x_width^2) g(v)``.
    Returns ``h0_bar(mode, eta)``.
    """

    def g_hat(eta):
        return mass * np.exp(-1j * eta * center - 0.5 * (eta * width) ** 2)

    if x_width is None:
        def h_bar(mode, eta):
            k = int(mode)
            space = np.pi if abs(k) == 1 else 0.0
            return epsilon * space * g_hat(eta)
    else:
        def h_bar(mode, eta):
            space = SQRT2PI * x_width * np.exp(-0.5 * (mode * x_width) ** 2)
            return epsilon * space * g_hat(eta)
    return h_bar


def forcing(h0_bar: Callable, mode, t) -> np.ndarray:
    """``a(t) = h0_bar(mode, mode t)``, the free-streaming response."""
    t = np.asarray(t, dtype=float)
    out = np.asarray(h0_bar(mode, mode * t))
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("forcing transform did not converge")
    return out


def forcing_quadrature(h0: Callable, mode, t, manifold, x_extent=30.0, v_extent=12.0, n=400) -> np.ndarray:
    """Forcing for a custom ``h0(x, v)`` by tensor Gauss-Legendre quadrature."""
    c = Curvature.parse(manifold)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if c is Curvature.SPHERE:
        x = 2 * np.pi * np.arange(n) / n
        wx = np.full(n, 2 * np.pi / n)
    else:
        s, w = np.polynomial.legendre.leggauss(n)
        x, wx = x_extent * s, x_extent * w
    s, w = np.polynomial.legendre.leggauss(n)
    v, wv = v_extent * s, v_extent * w
    H = h0(x[:, None], v[None, :])
    Hx = np.einsum("i,ij->j", wx * np.exp(-1j * mode * x), H)
    out = np.array([np.sum(wv * Hx * np.exp(-1j * mode * tt * v)) for tt in t])
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("forcing quadrature did not converge")
    return out


@dataclass
class VolterraProblem:
    t: np.ndarray
    kernel: np.ndarray
    forcing: np.ndarray
    mode: float = 1.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or len(self.t) < 2:
            raise ValueError("time grid needs at least two points")
        steps = np.diff(self.t)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise ValueError("time grid must be uniform and increasing")
        self.kernel = np.asarray(self.kernel)
        self.forcing = np.asarray(self.forcing)
        if self.kernel.shape != self.t.shape or self.forcing.shape != self.t.shape:
            raise ValueError("kernel and forcing must be sampled on the time grid")

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0])

    @classmethod
    def build(cls, f0, manifold, mode, h0_bar, T=100.0, h=1e-2):
        n = int(round(T / h))
        t = h * np.arange(n + 1)
        return cls(t, volterra_kernel(t, mode, f0, manifold), forcing(h0_bar, mode, t), mode)


def solve_volterra(p: VolterraProblem) -> np.ndarray:
    """Trapezoidal product rule, O(h^2); phi_0 = a_0."""
    h = p.h
    K = p.kernel
    a = p.forcing
    n = len(a)
    dtype = np.result_type(K, a, float)
    phi = np.zeros(n, dtype=dtype)
    phi[0] = a[0]
    if not np.any(K):
        phi[:] = a
        return phi
    denom = 1.0 - 0.5 * h * K[0]
    for m in range(1, n):
        # sum_{j=1}^{m-1} K[m-j] phi[j]
        conv = np.dot(K[m - 1:0:-1], phi[1:m]) if m > 1 else 0.0
        phi[m] = (a[m] + h * (0.5 * K[m] * phi[0] + conv)) / denom
    return phi


# --- Laplace transform and principal values --------------------------------------

def _mode_weight(mode, manifold):
    """``W_hat(mode)``, the factor multiplying the velocity integral."""
    c = Curvature.parse(manifold)
    if c is Curvature.SPHERE:
        k = int(mode)
        if k == 0 or k % 2 == 0:
            return 0.0
        return 1.0 / abs(k)
    return float(kernel_fourier_line(float(mode)))


def plemelj_pv(f0: EquilibriumProfile, omega: float, half_width=None) -> complex:
    """``p.v. int f0'(v)/(v - omega) dv - i pi f0'(omega)``.

    The real part integrates ``(f0'(v) - f0'(omega))/(v - omega)`` over a
    window symmetric about omega (the subtracted constant has zero principal
    value there) and adds the plain tails outside it.
    """
    omega = float(omega)
    if half_width is None:
        half_width = f0.support
    d0 = float(f0.df(omega))

    def sub(v):
        dv = v - omega
        return np.where(dv == 0, 0.0, (f0.df(v) - d0) / np.where(dv == 0, 1.0, dv))

    lo, hi = omega - half_width, omega + half_width
    core, _ = integrate.quad(sub, lo, hi, points=[omega], limit=500, epsabs=1e-14, epsrel=1e-13)
    tail = 0.0
    for a, b in ((-np.inf, lo), (hi, np.inf)):
        val, _ = integrate.quad(lambda v: f0.df(v) / (v - omega), a, b, limit=200, epsabs=1e-15)
        tail += val
    return complex(core + tail, -np.pi * d0)


def is_critical(f0: EquilibriumProfile, omega, tol=1e-8) -> bool:
    scale = max(1.0, float(np.max(np.abs(f0.df(np.linspace(-CRITICAL_WINDOW, CRITICAL_WINDOW, 2001))))))
    return abs(float(f0.df(omega))) <= tol * scale


def laplace_kernel(lam: float, omega: float, mode, f0: EquilibriumProfile, manifold) -> complex:
    """``K^L = int_0^inf e^{-(lam + i omega)|mode| t} K(t) dt``.

    Evaluated through the velocity form
    ``-W_hat(mode) int f0'(v) / (i lam + v - omega) dv``.  At ``lam = 0`` the
    integral is singular and only the Plemelj limit at a critical point of f0'
    is accepted.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    w = _mode_weight(mode, manifold)
    if lam == 0:
        if not is_critical(f0, omega):
            raise ValueError("lambda = 0 away from a critical point: use plemelj_pv")
        return -w * plemelj_pv(f0, omega)
    if w == 0:
        return 0j
    d0 = float(f0.df(omega))
    R = f0.support

    # subtract the pole part d0 / (i lam + v - omega) and integrate it exactly
    def re_part(v):
        dv = v - omega
        return (f0.df(v) - d0) * dv / (dv ** 2 + lam ** 2)

    def im_part(v):
        dv = v - omega
        return -(f0.df(v) - d0) * lam / (dv ** 2 + lam ** 2)

    lo, hi = omega - R, omega + R
    opts = dict(points=[omega], limit=500, epsabs=1e-14, epsrel=1e-12)
    re, _ = integrate.quad(re_part, lo, hi, **opts)
    im, _ = integrate.quad(im_part, lo, hi, **opts)
    # int_{-R}^{R} dv / (i lam + v) = -2i arctan(R / lam)
    pole = d0 * (-2j * np.arctan(R / lam))
    for a, b in ((-np.inf, lo), (hi, np.inf)):
        tr, _ = integrate.quad(lambda v: f0.df(v) * (v - omega) / ((v - omega) ** 2 + lam ** 2), a, b, limit=200)
        ti, _ = integrate.quad(lambda v: -f0.df(v) * lam / ((v - omega) ** 2 + lam ** 2), a, b, limit=200)
        re += tr
        im += ti
    return complex(-w * (re + 1j * im + pole))


# --- Penrose criterion -----------------------------------------------------------

@dataclass
class CriticalPoint:
    omega: float
    pv: float
    margin: float


@dataclass
class PenroseReport:
    manifold: Curvature
    threshold: float
    critical_points: list
    verdict: str
    mode_margins: dict = field(default_factory=dict)
    note: str = ""

    @property
    def margin(self) -> float:
        if not self.critical_points:
            return float("inf")
        return min(c.margin for c in self.critical_points)

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold.label,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "margin": self.margin if self.critical_points else None,
            "critical_points": [vars(c) for c in self.critical_points],
            "mode_margins": {str(k): v for k, v in self.mode_margins.items()},
            "note": self.note,
        }


def penrose_threshold(manifold) -> float:
    """-1 on the circle (worst mode |k| = 1), -4/pi on the line (xi -> 0)."""
    return -1.0 if Curvature.parse(manifold) is Curvature.SPHERE else -4.0 / np.pi


def critical_points(f0: EquilibriumProfile, window=CRITICAL_WINDOW, step=CRITICAL_STEP, xtol=1e-10):
    """Zeros of f0' from sign changes on a dense grid, refined by brentq."""
    n = int(round(2 * window / step)) + 1
    v = np.linspace(-window, window, n)
    d = f0.df(v)
    roots = []
    exact = np.flatnonzero(d == 0)
    roots.extend(v[exact].tolist())
    change = np.flatnonzero(d[:-1] * d[1:] < 0)
    for i in change:
        roots.append(optimize.brentq(f0.df, v[i], v[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    return sorted(roots)


def penrose_check(f0: EquilibriumProfile, manifold, max_mode=9) -> PenroseReport:
    c = Curvature.parse(manifold)
    thr = penrose_threshold(c)
    points = []
    for w in critical_points(f0):
        pv = plemelj_pv(f0, w).real
        points.append(CriticalPoint(float(w), float(pv), float(pv - thr)))
    if not points:
        return PenroseReport(c, thr, [], "stable", note="no critical points of f0' in the scanned window")
    margins = [p.margin for p in points]
    if any(abs(m) <= MARGINAL_TOL for m in margins):
        verdict = "marginal"
    elif all(m > 0 for m in margins):
        verdict = "stable"
    else:
        verdict = "unstable"
    mode_margins = {}
    if c is Curvature.SPHERE:
        worst = min(p.pv for p in points)
        # mode k is safe when -(1/|k|) pv != 1 along the whole ray, i.e. pv > -|k|
        mode_margins = {k: worst + k for k in range(1, max_mode + 1, 2)}
    return PenroseReport(c, thr, points, verdict, mode_margins)


def critical_stream_speed(mass=2.0, width=1.0, lo=0.0, hi=3.0, xtol=1e-12, manifold="sphere"):
    """Bisection for the two-stream speed u where pv at omega = 0 crosses the threshold."""
    thr = penrose_threshold(manifold)

    def g(u):
        return plemelj_pv(EquilibriumProfile.two_stream(u, mass, width), 0.0).real - thr

    if g(lo) * g(hi) > 0:
        raise ValueError("threshold is not crossed on the bracket")
    return optimize.bisect(g, lo, hi, xtol=xtol)


# --- decay fits and norms --------------------------------------------------------

@dataclass
class DecayFit:
    model: str
    slope: float
    intercept: float
    window: tuple
    r2: float
    n_samples: int

    @property
    def rate(self) -> float:
        """delta for the exponential model, p for the algebraic one."""
        return -self.slope

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "rate": self.rate,
            "slope": self.slope,
            "intercept": self.intercept,
            "window": list(self.window),
            "r2": self.r2,
            "n_samples": self.n_samples,
        }


def fit_decay(t, y, model="exponential", window=None) -> DecayFit:
    """Least squares on (t, log y) or (log t, log y)."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y))
    if model not in ("exponential", "algebraic"):
        raise ValueError(f"unknown model {model!r}")
    mask = np.isfinite(y)
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    floor = 1e3 * np.finfo(float).eps * np.max(y[mask]) if np.any(mask) else 0.0
    mask &= y > floor
    if model == "algebraic":
        mask &= t > 0
    if mask.sum() < 10:
        raise ValueError("fit window has fewer than 10 usable samples")
    ts, ys = t[mask], np.log(y[mask])
    xs = ts if model == "exponential" else np.log(ts)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = np.sum((ys - ys.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(model, float(slope), float(intercept), (float(ts[0]), float(ts[-1])), float(r2), int(mask.sum()))


def hyperbolic_norm(rho_hat, lambda_prime=0.1, xi=None, cutoff=None) -> float:
    """``int e^{lambda' |xi|} |rho_hat(xi)| dxi`` over the real line.

    ``rho_hat`` is either a callable (adaptive quadrature, symmetric in
    |xi|) or an array of samples on the non-negative grid ``xi``
    (trapezoid, doubled for the negative half-line).
    """
    if callable(rho_hat):
        def integrand(s):
            mag = abs(rho_hat(s)) + abs(rho_hat(-s))
            return 0.0 if mag == 0 else np.exp(lambda_prime * abs(s)) * mag

        upper = np.inf if cutoff is None else cutoff
        if upper == np.inf:
            far = [integrand(s) * s for s in (1e2, 1e3)]
            if far[1] > 1e-8 and far[1] >= far[0]:
                raise ArithmeticError("integrand does not decay")
        val, _ = integrate.quad(integrand, 0.0, upper, limit=400)
        return float(val)
    if xi is None:
        raise ValueError("sampled rho_hat needs its xi grid")
    xi = np.asarray(xi, dtype=float)
    vals = np.exp(lambda_prime * np.abs(xi)) * np.abs(np.asarray(rho_hat))
    if vals.shape[-1] > 2 and vals[..., -1].max() > 0.1 * vals.max() and vals[..., -1].max() > 1e-300:
        raise ArithmeticError("integrand does not decay across the probe grid")
    return 2.0 * integrate.trapezoid(vals, xi, axis=-1)


def probe_grid(n=64, lo=1e-2, hi=10.0, include_zero=True) -> np.ndarray:
    xi = np.logspace(np.log10(lo), np.log10(hi), n)
    return np.concatenate([[0.0], xi]) if include_zero else xi
