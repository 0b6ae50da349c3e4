"""Self-similar variables and the frozen-potential weighted energy.

A snapshot u(., t) is mapped to

    w(y, s) = (T - t)^{1/(p-1)} u(a + y (T - t)^{1/2}, t),   s = log(T / (T - t)),

and measured with

    E(w) = int (|grad w|^2 / 2 + w^2 / (2(p-1)) - V(a) w^{p+1} / (p+1)) rho(y) dy,

where rho(y) = exp(-|y|^2 / 4). Bounded blow-up profiles converge to the
constant k(a) = (V(a)(p-1))^{-1/(p-1)}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    EmptyMaskError,
    InsufficientSnapshotsError,
    NonpositiveInputError,
    TimePastBlowupError,
)
from .integrator import Snapshot
from .problem import GridField, ProblemSpec

# calibrated on the reference run (cosine profile, V = 1, p = 2, M = 160, h = 0.0125)
DEFAULT_C_SLACK = 10.0
E_TARGET_FLOOR = 1e-3


@dataclass(frozen=True, eq=False)
class RescaledProfile:
    center: np.ndarray
    t: float
    T: float
    s: float
    p: float
    y_nodes: np.ndarray
    w_values: np.ndarray
    omega_mask: np.ndarray
    spacing: tuple[float, ...]
    shape: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return self.y_nodes.shape[1]

    def center_value(self) -> float:
        """w at the y-node nearest the origin."""
        r2 = np.einsum("ij,ij->i", self.y_nodes, self.y_nodes)
        return float(self.w_values[int(np.argmin(r2))])


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    s_values: np.ndarray
    E_values: np.ndarray
    w_center: np.ndarray
    k_target: float
    E_target: float
    times: np.ndarray | None = None

    @property
    def w_errors(self) -> np.ndarray:
        return np.abs(self.w_center / self.k_target - 1.0)

    @property
    def E_errors(self) -> np.ndarray:
        return np.abs(self.E_values - self.E_target) / max(abs(self.E_target), E_TARGET_FLOOR)

    @property
    def w_error_final(self) -> float:
        return float(self.w_errors[-1])

    @property
    def E_error_final(self) -> float:
        return float(self.E_errors[-1])


def _unpack(snapshot):
    if isinstance(snapshot, Snapshot):
        return snapshot.time, snapshot.field
    t, fld = snapshot
    return float(t), fld


def rescale_snapshot(snapshot, a, T: float, p: float) -> RescaledProfile:
    """Map a snapshot ``(t, field)`` to self-similar variables around ``a``.

    The y-nodes are the images of the x-nodes, so no interpolation happens.
    """
    t, fld = _unpack(snapshot)
    if not 0 <= t < T:
        raise TimePastBlowupError(f"snapshot time {t} must lie in [0, {T})")
    grid = fld.grid
    a = np.atleast_1d(np.asarray(a, dtype=float))
    tau = T - t
    root = math.sqrt(tau)
    y = (grid.coords - a) / root
    mask = grid.domain.contains(grid.coords)
    w = tau ** (1.0 / (p - 1.0)) * np.asarray(fld.values)
    w = np.where(mask, w, 0.0)
    return RescaledProfile(
        center=a, t=t, T=T, s=math.log(T / tau), p=p, y_nodes=y, w_values=w,
        omega_mask=mask, spacing=tuple(h / root for h in grid.spacing), shape=grid.shape,
    )


def _trapezoid_weights(shape, spacing) -> np.ndarray:
    wts = np.ones(shape)
    for axis, (n, dy) in enumerate(zip(shape, spacing)):
        w1 = np.full(n, dy)
        w1[0] = w1[-1] = 0.5 * dy
        bshape = [1] * len(shape)
        bshape[axis] = n
        wts = wts * w1.reshape(bshape)
    return wts


def weighted_energy(profile: RescaledProfile, V_a: float, p: float) -> float:
    """Gaussian-weighted energy by trapezoid quadrature over the masked y-nodes.

    Gradients are central differences on the y-lattice (one-sided on its edge).
    """
    if not profile.omega_mask.any():
        raise EmptyMaskError("no y-node lies in the rescaled domain")
    W = profile.w_values.reshape(profile.shape)
    grads = np.gradient(W, *profile.spacing)
    if profile.dimension == 1:
        grads = [grads]
    grad2 = sum(g * g for g in grads)
    Y = profile.y_nodes
    rho = np.exp(-np.einsum("ij,ij->i", Y, Y) / 4.0).reshape(profile.shape)
    dens = 0.5 * grad2 + W * W / (2.0 * (p - 1.0)) - V_a * np.abs(W) ** (p + 1.0) / (p + 1.0)
    dens = np.where(profile.omega_mask.reshape(profile.shape), dens, 0.0)
    return float(np.sum(dens * rho * _trapezoid_weights(profile.shape, profile.spacing)))


def k_of_a(V_a: float, p: float) -> float:
    """Constant self-similar limit (V(a)(p-1))^{-1/(p-1)}."""
    if not V_a > 0:
        raise NonpositiveInputError(f"V(a) must be positive, got {V_a}")
    if not p > 1:
        raise NonpositiveInputError(f"p must exceed 1, got {p}")
    return (V_a * (p - 1.0)) ** (-1.0 / (p - 1.0))


def gaussian_mass(N: int) -> float:
    """int_{R^N} exp(-|y|^2/4) dy = (4 pi)^{N/2}."""
    return (4.0 * math.pi) ** (N / 2.0)


def f_function(z: float, V_a: float, p: float) -> tuple[float, float]:
    """F(z) = z^2/(2(p-1)) - V z^{p+1}/(p+1) and its second derivative."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    F = z * z / (2.0 * (p - 1.0)) - V_a * z ** (p + 1.0) / (p + 1.0)
    F2 = 1.0 / (p - 1.0) - p * V_a * z ** (p - 1.0)
    return F, F2


def energy_of_constant(b: float, V_a: float, p: float, N: int) -> float:
    """Energy of the constant profile ``w = b`` over all of R^N."""
    if N not in (1, 2):
        raise ValueError(f"N must be 1 or 2, got {N}")
    if b < 0:
        raise ValueError("b must be nonnegative")
    return gaussian_mass(N) * f_function(b, V_a, p)[0]


def limit_energy(V_a: float, p: float, N: int) -> float:
    """E(k(a)) written as k^2 (1/(2(p-1)) - 1/((p+1)(p-1))) * Gamma."""
    k = k_of_a(V_a, p)
    return k * k * (1.0 / (2.0 * (p - 1.0)) - 1.0 / ((p + 1.0) * (p - 1.0))) * gaussian_mass(N)


def profile_energy(snapshot, a, T: float, problem: ProblemSpec) -> float:
    V_a = problem.potential.at(a)
    return weighted_energy(rescale_snapshot(snapshot, a, T, problem.p), V_a, problem.p)


def convergence_diagnostic(snapshots, a, T_est: float, problem: ProblemSpec) -> EnergyTrace:
    """w(0, s) and E(w(., s)) for each snapshot taken before ``T_est``.

    The rescaled spacing is ``h / sqrt(T - t)``; once it is not small against
    the weight's width (order 1) the quadrature is meaningless, so snapshots
    should stop around ``u_max ~ 1/h^2`` (1e4 for h = 0.0125).
    """
    snaps = sorted((s for s in snapshots if _unpack(s)[0] < T_est), key=lambda s: _unpack(s)[0])
    levels = {round(_unpack(s)[1].max(), 9) for s in snaps}
    if len(levels) < 3:
        raise InsufficientSnapshotsError(
            f"need snapshots at 3 distinct u_max levels, got {len(levels)}"
        )
    p, N = problem.p, problem.dimension
    V_a = problem.potential.at(a)
    s_vals, E_vals, w_vals, times = [], [], [], []
    for snap in snaps:
        prof = rescale_snapshot(snap, a, T_est, p)
        s_vals.append(prof.s)
        w_vals.append(prof.center_value())
        E_vals.append(weighted_energy(prof, V_a, p))
        times.append(prof.t)
    k = k_of_a(V_a, p)
    return EnergyTrace(np.array(s_vals), np.array(E_vals), np.array(w_vals), k,
                       energy_of_constant(k, V_a, p, N), np.array(times))


def energy_inequality_check(trace: EnergyTrace, E_w0: float, T: float,
                            C_slack: float = DEFAULT_C_SLACK) -> tuple[float, bool]:
    """Largest ``(E(s) - E(w0)) / T^2`` along the trace, and whether it stays below ``C_slack``."""
    if len(trace.E_values) == 0:
        raise ValueError("empty energy trace")
    slack = float(np.max((trace.E_values - E_w0) / (T * T)))
    return slack, slack <= C_slack
