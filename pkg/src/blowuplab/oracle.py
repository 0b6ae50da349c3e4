"""Exact solutions of the diffusion-free equation u_t = V(x) u^p.

With x frozen, u(t) = M phi (1 - t/T_x)^{-1/(p-1)} and
T_x = (M phi)^{1-p} / ((p-1) V). These serve as oracles for the integrator
with the Laplacian switched off.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NonpositiveInputError, TimePastBlowupError
from .problem import Grid, ProblemSpec, sample_field


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise NonpositiveInputError(f"{name} must be positive, got {v}")


def ode_blowup_time(M: float, phi_x: float, V_x: float, p: float) -> float:
    """T_x = M^{1-p} / ((p-1) V phi^{p-1})."""
    _check_positive(M=M, phi_x=phi_x, V_x=V_x)
    if not p > 1:
        raise NonpositiveInputError(f"p must exceed 1, got {p}")
    return M ** (1.0 - p) / ((p - 1.0) * V_x * phi_x ** (p - 1.0))


def ode_value(M: float, phi_x: float, V_x: float, p: float, t: float) -> float:
    T = ode_blowup_time(M, phi_x, V_x, p)
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t >= T:
        raise TimePastBlowupError(f"t = {t} is at or past the blow-up time {T}")
    return M * phi_x * (1.0 - t / T) ** (-1.0 / (p - 1.0))


@dataclass(frozen=True)
class OdeSolution:
    """Pointwise ODE trajectory started from u0 = M phi(x)."""

    base: float
    rate: float
    exponent: float

    @property
    def blowup_time(self) -> float:
        return ode_blowup_time(self.base, 1.0, self.rate, self.exponent)

    def __call__(self, t):
        T = self.blowup_time
        t = np.asarray(t, dtype=float)
        if np.any(t >= T):
            raise TimePastBlowupError(f"requested time at or past {T}")
        return self.base * (1.0 - t / T) ** (-1.0 / (self.exponent - 1.0))


def ode_blowup_times(problem: ProblemSpec, grid: Grid) -> np.ndarray:
    """Per-node T_x; ``inf`` where phi vanishes (boundary nodes included)."""
    _check_positive(M=problem.M)
    phi = sample_field(problem.profile, grid).values.copy()
    phi[grid.boundary] = 0.0
    V = sample_field(problem.potential, grid).values
    p = problem.p
    out = np.full(grid.n_nodes, np.inf)
    pos = phi > 0
    out[pos] = problem.M ** (1.0 - p) / ((p - 1.0) * V[pos] * phi[pos] ** (p - 1.0))
    return out


def ode_min_blowup_time(problem: ProblemSpec, grid: Grid) -> tuple[float, np.ndarray]:
    """Earliest pointwise blow-up time over the nodes, and where it happens."""
    times = ode_blowup_times(problem, grid)
    node = int(np.argmin(times))
    return float(times[node]), grid.coords[node].copy()
