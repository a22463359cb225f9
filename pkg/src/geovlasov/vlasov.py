"""Semi-Lagrangian solver for the reduced system on a geodesic.

    df/dt + v df/dx + F df/dv = 0,   F = W * d(rho)/dx,   rho = int f dv

on the circle (sphere geodesic) or the line (hyperbolic geodesic).  Transport
in x is an exact spectral shift; the kick in v is a cubic B-spline shift with
zero extension, which conserves the discrete column sums exactly while the
profile stays away from the velocity wall.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
from scipy.linalg import solve_banded

from .geometry import Curvature, kernel_multiplier
from .linear import EquilibriumProfile

WALL_CELLS = 5
WALL_TOL = 1e-10
EDGE_TOL = 1e-12
LINE_PROBES = (0.25, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform phase-space grid.

    On the line, ``bc="isolated"`` (default) computes the force on a
    zero-padded domain [-2L, 2L) so the periodic images do not interact;
    ``bc="periodic"`` treats [-L, L) as a periodic box, which is what a
    spatially homogeneous state needs.
    """

    manifold: Curvature
    nx: int = 128
    nv: int = 256
    V: float = 8.0
    L: float = 16.0
    bc: str = "isolated"

    def __post_init__(self):
        object.__setattr__(self, "manifold", Curvature.parse(self.manifold))
        if self.nx < 2 or self.nv < 8:
            raise ValueError("grid needs nx >= 2 and nv >= 8")
        if self.V <= 0 or self.L <= 0:
            raise ValueError("V and L must be positive")
        if self.bc not in ("isolated", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @property
    def circle(self) -> bool:
        return self.manifold is Curvature.SPHERE

    @property
    def periodic(self) -> bool:
        return self.circle or self.bc == "periodic"

    @property
    def length(self) -> float:
        return 2 * np.pi if self.circle else 2 * self.L

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dv(self) -> float:
        return 2 * self.V / (self.nv - 1)

    @property
    def x(self) -> np.ndarray:
        start = 0.0 if self.circle else -self.L
        return start + self.dx * np.arange(self.nx)

    @property
    def v(self) -> np.ndarray:
        return np.linspace(-self.V, self.V, self.nv)

    @property
    def v_weights(self) -> np.ndarray:
        w = np.full(self.nv, self.dv)
        w[[0, -1]] *= 0.5
        return w

    def padded_size(self) -> int:
        return self.nx if self.periodic else 2 * self.nx

    def wavenumbers(self, n: Optional[int] = None) -> np.ndarray:
        """Angular frequencies of the rfft on a domain of ``n`` cells."""
        n = self.padded_size() if n is None else n
        return 2 * np.pi * np.fft.rfftfreq(n, d=self.dx)


@dataclass
class DistributionField:
    grid: PhaseGrid
    values: np.ndarray
    time: float = 0.0
    min_f: float = np.inf

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.nv):
            raise ValueError(f"values must have shape {(self.grid.nx, self.grid.nv)}")
        self.min_f = min(self.min_f, float(self.values.min()))

    def copy(self, values=None, time=None) -> "DistributionField":
        vals = self.values.copy() if values is None else values
        return DistributionField(self.grid, vals, self.time if time is None else time, self.min_f)


@dataclass
class DiagnosticsRecord:
    t: float
    N: float
    E_kin: float
    E_pot: float
    E_unhalved: float
    E_consistent: float
    S: float
    casimirs: Dict[str, float]
    min_f: float
    modes: np.ndarray
    max_F: float = 0.0

    def row(self) -> dict:
        out = {
            "t": self.t, "N": self.N, "E_kin": self.E_kin, "E_pot": self.E_pot,
            "E_unhalved": self.E_unhalved, "E_consistent": self.E_consistent, "S": self.S,
        }
        out.update({f"casimir_{k}": v for k, v in self.casimirs.items()})
        out["min_f"] = self.min_f
        out["max_F"] = self.max_F
        out.update({f"mode_{i + 1}": float(abs(m)) for i, m in enumerate(self.modes)})
        return out


# --- spatial operators -----------------------------------------------------------

def density(f: DistributionField) -> np.ndarray:
    """Trapezoid rule in v."""
    return f.values @ f.grid.v_weights


def _spectral(rho, grid: PhaseGrid, multiplier: Callable[[np.ndarray], np.ndarray]):
    n = grid.padded_size()
    k = grid.wavenumbers(n)
    if grid.circle:
        k = np.rint(k)
    rho_hat = np.fft.rfft(rho, n=n)
    out = np.fft.irfft(multiplier(k) * rho_hat, n=n)
    return out[: grid.nx]


def _force_multiplier(grid):
    if grid.circle:
        def m(k):
            odd = (k.astype(int) % 2) == 1
            return np.where(odd, 1j, 0.0)
    else:
        def m(xi):
            return 0.5j * np.tanh(0.5 * np.pi * xi)
    return m


def force(rho, grid: PhaseGrid) -> np.ndarray:
    """``F = W * rho'``: ``i sgn(k)`` on odd circle modes, ``(i/2) tanh(pi xi/2)`` on the line."""
    rho = np.asarray(rho, dtype=float)
    if not grid.circle and not grid.periodic:
        _wall_check(rho[:, None], grid)
    return _spectral(rho, grid, _force_multiplier(grid))


def potential(rho, grid: PhaseGrid) -> np.ndarray:
    """``U = W * rho`` with the analytic kernel transform as multiplier."""
    rho = np.asarray(rho, dtype=float)
    sigma = grid.manifold.sigma
    return _spectral(rho, grid, lambda k: kernel_multiplier(k, sigma))


def _wall_check(values, grid):
    # signed mass: spectral ringing of size ~1e-13 per cell cancels, real
    # particles arriving at the wall do not
    weights = grid.v_weights if values.shape[1] == grid.nv else np.ones(values.shape[1])
    edge = np.concatenate([values[:WALL_CELLS], values[-WALL_CELLS:]])
    mass = abs(float(np.sum(edge @ weights))) * grid.dx
    if mass > WALL_TOL:
        raise ValueError(f"distribution reached the spatial wall (edge mass {mass:.3g})")


def edge_values(f: DistributionField):
    """Largest |f| within WALL_CELLS of the velocity and (line) spatial walls."""
    vals = np.abs(f.values)
    v_edge = max(vals[:, :WALL_CELLS].max(), vals[:, -WALL_CELLS:].max())
    x_edge = 0.0 if f.grid.periodic else max(vals[:WALL_CELLS].max(), vals[-WALL_CELLS:].max())
    return float(v_edge), float(x_edge)


def check_margins(f: DistributionField, spatial=True):
    v_edge, x_edge = edge_values(f)
    if v_edge > EDGE_TOL:
        raise ValueError(f"f reaches the velocity wall ({v_edge:.3g} > {EDGE_TOL:g}); increase V")
    if spatial and x_edge > EDGE_TOL:
        raise ValueError(f"f reaches the spatial wall ({x_edge:.3g} > {EDGE_TOL:g}); increase L")


def transport_x(f: DistributionField, dt: float) -> DistributionField:
    """Exact spectral shift ``f(x - v dt, v)`` row by row in v."""
    if dt == 0:
        return f.copy()
    grid = f.grid
    n = grid.padded_size()
    if not grid.periodic:
        _wall_check(f.values, grid)
    k = grid.wavenumbers(n)
    fh = np.fft.rfft(f.values, n=n, axis=0)
    fh *= np.exp(-1j * np.outer(k, grid.v) * dt)
    out = np.fft.irfft(fh, n=n, axis=0)[: grid.nx]
    return f.copy(out, f.time)


def _bspline(x):
    """Cubic B-spline on [-2, 2]."""
    ax = np.abs(x)
    return np.where(
        ax < 1, 2.0 / 3.0 - ax ** 2 + 0.5 * ax ** 3,
        np.where(ax < 2, (2.0 - ax) ** 3 / 6.0, 0.0),
    )


def spline_coefficients(values: np.ndarray) -> np.ndarray:
    """Interpolating cubic B-spline coefficients along the last axis, zero outside."""
    nv = values.shape[-1]
    ab = np.empty((3, nv))
    ab[0] = 1.0 / 6.0
    ab[1] = 4.0 / 6.0
    ab[2] = 1.0 / 6.0
    return solve_banded((1, 1), ab, values.T).T


def shift_columns(values: np.ndarray, shift_cells: np.ndarray) -> np.ndarray:
    """Evaluate each row's spline at ``j - shift``, i.e. translate by +shift cells."""
    nx, nv = values.shape
    c = spline_coefficients(values)
    s = np.asarray(shift_cells, dtype=float)
    base = np.floor(s).astype(int)
    frac = s - base
    j = np.arange(nv)
    out = np.zeros_like(values)
    rows = np.arange(nx)[:, None]
    for p in (-1, 0, 1, 2):
        w = _bspline(p - frac)[:, None]
        idx = j[None, :] - base[:, None] - p
        ok = (idx >= 0) & (idx < nv)
        out += np.where(ok, w * c[rows, np.clip(idx, 0, nv - 1)], 0.0)
    return out


def kick_v(f: DistributionField, F, dt: float) -> DistributionField:
    """``f(x, v - F(x) dt)`` by cubic B-spline interpolation."""
    F = np.broadcast_to(np.asarray(F, dtype=float), (f.grid.nx,))
    if dt == 0 or not np.any(F):
        return f.copy()
    grid = f.grid
    if np.max(np.abs(F)) * abs(dt) > grid.V / 4:
        raise ValueError("velocity kick exceeds V/4 in one step; reduce dt")
    out = shift_columns(f.values, F * dt / grid.dv)
    g = f.copy(out)
    g.min_f = min(g.min_f, float(out.min()))
    return g


def strang_step(f: DistributionField, dt: float, field_off=False) -> DistributionField:
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = transport_x(f, 0.5 * dt)
    if not field_off:
        g = kick_v(g, force(density(g), g.grid), dt)
    g = transport_x(g, 0.5 * dt)
    g.time = f.time + dt
    return g


# --- diagnostics -----------------------------------------------------------------

def _entropy_density(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = -s[pos] * np.log(s[pos])
    return out


DEFAULT_CASIMIRS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "s2": lambda s: s ** 2,
    "s": lambda s: s,
}


def rho_modes(rho, grid: PhaseGrid, count=4) -> np.ndarray:
    """``rho_hat(k) = int rho e^{-ikx} dx`` for k = 1..count, or at line probe frequencies."""
    if grid.circle:
        return grid.dx * np.fft.fft(rho)[1: count + 1]
    xi = np.asarray(LINE_PROBES[:count])
    return grid.dx * np.exp(-1j * np.outer(xi, grid.x)) @ rho


def diagnostics(f: DistributionField, casimirs=None) -> DiagnosticsRecord:
    grid = f.grid
    casimirs = DEFAULT_CASIMIRS if casimirs is None else casimirs
    wv = grid.v_weights
    rho = f.values @ wv
    N = grid.dx * rho.sum()
    E_kin = 0.5 * grid.dx * np.sum(f.values @ (wv * grid.v ** 2))
    U = potential(rho, grid)
    E_pot = grid.dx * float(np.dot(U, rho))
    S = grid.dx * np.sum(_entropy_density(f.values) @ wv)
    cas = {name: float(grid.dx * np.sum(A(f.values) @ wv)) for name, A in casimirs.items()}
    F = force(rho, grid) if (grid.periodic or _inside(f)) else np.zeros(grid.nx)
    return DiagnosticsRecord(
        t=float(f.time), N=float(N), E_kin=float(E_kin), E_pot=E_pot,
        E_unhalved=float(E_kin - E_pot), E_consistent=float(E_kin - 0.5 * E_pot),
        S=float(S), casimirs=cas, min_f=float(min(f.min_f, f.values.min())),
        modes=rho_modes(rho, grid), max_F=float(np.max(np.abs(F))),
    )


def _inside(f):
    try:
        _wall_check(f.values, f.grid)
    except ValueError:
        return False
    return True


def run(f0: DistributionField, T: float, dt: float, cadence: int = 1, field_off=False, casimirs=None):
    """Advance to time T with Strang steps; diagnostics every ``cadence`` steps.

    The velocity margin is checked at every diagnostic time, the spatial
    margin of the isolated line only initially (transport guards the wall).
    """
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise ValueError("T must be an integer multiple of dt")
    check_margins(f0)
    f = f0
    records = [diagnostics(f, casimirs)]
    for step in range(1, n + 1):
        f = strang_step(f, dt, field_off)
        f.time = f0.time + step * dt
        if step % cadence == 0 or step == n:
            check_margins(f, spatial=False)
            records.append(diagnostics(f, casimirs))
    return f, records


# --- initial states --------------------------------------------------------------

def initial_state(
    grid: PhaseGrid,
    profile: EquilibriumProfile,
    epsilon: float = 0.0,
    mode: float = 1,
    x_width: float = 2.0,
) -> DistributionField:
    """``f0(v) (1 + epsilon cos(k x))`` on the circle or a periodic box.

    On the isolated line the state is ``f0(v) exp(-x^2 / 2 x_width^2)
    (1 + epsilon cos(mode x))`` so that it vanishes at the wall.
    On the periodic box ``mode`` counts wavelengths across [-L, L).
    """
    x, v = grid.x, grid.v
    fv = profile.f(v)
    if grid.circle:
        shape = 1.0 + epsilon * np.cos(mode * x)
    elif grid.periodic:
        shape = 1.0 + epsilon * np.cos(2 * np.pi * mode * x / grid.length)
    else:
        shape = np.exp(-0.5 * (x / x_width) ** 2) * (1.0 + epsilon * np.cos(mode * x))
    return DistributionField(grid, np.outer(shape, fv))


def from_expression(grid: PhaseGrid, expression: str) -> DistributionField:
    """Initial state from a numpy expression in ``x`` and ``v``."""
    names = {n: getattr(np, n) for n in ("exp", "cos", "sin", "tanh", "cosh", "sinh", "sqrt", "log", "abs", "pi", "where")}
    names.update(x=grid.x[:, None], v=grid.v[None, :])
    try:
        vals = eval(compile(expression, "<initial>", "eval"), {"__builtins__": {}}, names)
    except Exception as exc:  # noqa: BLE001 - surfaced as a config problem
        raise ValueError(f"cannot evaluate initial expression: {exc}") from exc
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (grid.nx, grid.nv)).copy()
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("initial distribution must be finite and non-negative")
    return DistributionField(grid, vals)
