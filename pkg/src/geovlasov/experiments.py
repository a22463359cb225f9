"""Reference experiments shared by the acceptance suite and ``scripts/``."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .linear import (
    EquilibriumProfile,
    VolterraProblem,
    fit_decay,
    gaussian_seed,
    hyperbolic_norm,
    probe_grid,
    solve_volterra,
)
from .vlasov import PhaseGrid, initial_state, run


@dataclass
class LandauResult:
    t: np.ndarray
    nonlinear: np.ndarray
    linear: np.ndarray
    rate_nonlinear: float
    rate_linear: float
    r2_nonlinear: float
    r2_linear: float
    wall_time: float

    @property
    def max_rel_diff(self) -> float:
        return float(np.max(np.abs(self.nonlinear - self.linear) / self.linear))


def landau_circle(mass=0.5, epsilon=1e-5, T=10.0, dt=1 / 32, nx=16, nv=256, V=8.0, window=(3.0, 10.0)):
    """Weak mode-1 perturbation of a circle Maxwellian: Vlasov run against the Volterra solution."""
    start = time.perf_counter()
    grid = PhaseGrid("sphere", nx, nv, V=V)
    prof = EquilibriumProfile.maxwellian(mass)
    _, recs = run(initial_state(grid, prof, epsilon, mode=1), T, dt, cadence=1)
    t = np.array([r.t for r in recs])
    rho1 = np.array([abs(r.modes[0]) for r in recs])
    prob = VolterraProblem.build(prof, "sphere", 1, gaussian_seed(epsilon, mass=mass), T, dt)
    phi = np.abs(solve_volterra(prob))
    fit_n = fit_decay(t, rho1, "exponential", window)
    fit_l = fit_decay(prob.t, phi, "exponential", window)
    return LandauResult(t, rho1, phi, fit_n.rate, fit_l.rate, fit_n.r2, fit_l.r2, time.perf_counter() - start)


@dataclass
class DichotomyResult:
    t: np.ndarray
    hyperbolic_norm: np.ndarray
    circle_norm: np.ndarray
    hyperbolic_fit: object
    circle_fit: object
    hyperbolic_exponential_fit: object = None  # the wrong model, for contrast
    extras: dict = field(default_factory=dict)


def decay_dichotomy(T=100.0, h=1e-2, lambda_prime=0.1, window=(10.0, 100.0),
                    hyper_mass=1.0, circle_mass=0.5, x_width=1.0, xi=None):
    """Weighted density norms on H2 (line) and S2 (circle) from Volterra solutions.

    On the line the norm integrates ``e^{lambda' |xi|} |rho_hat(t, xi)|``
    over the probe grid; on the circle it sums the same weight over the
    seeded modes k = +-1.
    """
    xi = probe_grid() if xi is None else np.asarray(xi, dtype=float)
    line_prof = EquilibriumProfile.maxwellian(hyper_mass)
    seed = gaussian_seed(1.0, mass=hyper_mass, x_width=x_width)
    sols = []
    for x in xi:
        prob = VolterraProblem.build(line_prof, "hyperbolic", float(x), seed, T, h)
        sols.append(np.abs(solve_volterra(prob)))
    t = prob.t
    line_norm = hyperbolic_norm(np.array(sols).T, lambda_prime, xi=xi)

    circ_prof = EquilibriumProfile.maxwellian(circle_mass)
    prob = VolterraProblem.build(circ_prof, "sphere", 1, gaussian_seed(1.0, mass=circle_mass), T, h)
    circ_norm = 2.0 * np.exp(lambda_prime) * np.abs(solve_volterra(prob))

    return DichotomyResult(
        t, line_norm, circ_norm,
        fit_decay(t, line_norm, "algebraic", window),
        fit_decay(t, circ_norm, "exponential", window),
        fit_decay(t, line_norm, "exponential", window),
        extras={"t_times_norm_max": float(np.max((t * line_norm)[t >= window[0]]))},
    )


@dataclass
class ConservationResult:
    records: list
    drifts: dict
    wall_time: float


def conservation_suite(manifold="sphere", nx=128, nv=256, dt=1 / 32, T=20.0, mass=0.5, epsilon=0.05,
                       cadence=32, bc=None):
    start = time.perf_counter()
    grid = PhaseGrid(manifold, nx, nv, bc=bc or "isolated")
    _, recs = run(initial_state(grid, EquilibriumProfile.maxwellian(mass), epsilon), T, dt, cadence)
    first = recs[0]

    def worst(get):
        ref = abs(get(first))
        return max(abs(get(r) - get(first)) for r in recs) / ref

    drifts = {
        "mass": worst(lambda r: r.N),
        "energy": worst(lambda r: r.E_consistent),
        "energy_unhalved": worst(lambda r: r.E_unhalved),
        "entropy": worst(lambda r: r.S),
        "casimir_s2": worst(lambda r: r.casimirs["s2"]),
    }
    return ConservationResult(recs, drifts, time.perf_counter() - start)
