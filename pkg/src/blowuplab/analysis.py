"""Blow-up time, point, set and rate extracted from a trajectory record."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import (
    InsufficientTailError,
    NoBlowupError,
    NonmonotoneTailError,
    PointOutsideDomainError,
    WanderingArgmaxWarning,
)
from .integrator import TrajectoryRecord
from .problem import ProblemSpec, refine_peak

DEFAULT_WINDOW = (1e4, math.inf)
MIN_TAIL_POINTS = 50


@dataclass(frozen=True)
class BlowupEstimate:
    T_est: float
    T_fit_window: tuple[float, float]
    blowup_point: np.ndarray
    blowup_set: np.ndarray
    rate_exponent: float
    rate_constant: float
    fit_residual: float
    T_after_last: float = 0.0


@dataclass(frozen=True)
class BlowupSet:
    nodes: np.ndarray
    component: np.ndarray
    fraction: float


def _require_blowup(traj: TrajectoryRecord):
    if not traj.blew_up:
        raise NoBlowupError(f"trajectory stopped with {traj.stop_reason!r}")


def _tail(traj: TrajectoryRecord, window, min_points: int):
    """Tail samples ``(t, u_max, time left until the last sample)`` inside the window."""
    lo, hi = window
    hi = min(hi, traj.stop_threshold) if math.isfinite(traj.stop_threshold) else hi
    sel = (traj.umax >= lo) & (traj.umax <= hi)
    # the last step may overshoot the stop level; keep it
    if traj.blew_up and traj.umax[-1] >= lo:
        sel[-1] = True
    t, u = traj.times[sel], traj.umax[sel]
    if t.size < min_points:
        raise InsufficientTailError(
            f"{t.size} points with u_max in [{lo:g}, {hi:g}], need {min_points}"
        )
    return t, u, traj.time_to_end()[sel]


def _linear_fit(x: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None):
    """Weighted least-squares ``y = a + b x``; returns ``(a, b, weighted rms residual)``."""
    w = np.ones_like(x) if weights is None else weights / weights.sum() * x.size
    xm = np.dot(w, x) / x.size
    ym = np.dot(w, y) / x.size
    dx, dy = x - xm, y - ym
    b = float(np.dot(w * dx, dy) / np.dot(w * dx, dx))
    a = float(ym - b * xm)
    rms = float(np.sqrt(np.dot(w, (dy - b * dx) ** 2) / x.size))
    return a, b, rms


def _time_fit(traj: TrajectoryRecord, p: float, window, min_points: int):
    """Fit in ``x = t - t_last`` (exact from the step sizes); returns ``(x_root, rms, t_last)``."""
    _require_blowup(traj)
    t, u, left = _tail(traj, window, min_points)
    if np.any(np.diff(u) <= 0):
        raise NonmonotoneTailError("u_max is not increasing across the fit window")
    x = -left
    y = u ** (1.0 - p)
    a, b, _ = _linear_fit(x, y, y ** -2.0)
    rms = float(np.sqrt(np.mean(((a + b * x) / y - 1.0) ** 2)))
    if not b < 0:
        raise NonmonotoneTailError("fitted line does not decrease")
    root = -a / b
    if not root > 0:
        raise NonmonotoneTailError(f"extrapolated time precedes the last sample by {-root:g}")
    return root, rms, float(traj.times[-1])


def estimate_blowup_time(traj: TrajectoryRecord, p: float, window=DEFAULT_WINDOW,
                         min_points: int = MIN_TAIL_POINTS) -> tuple[float, float]:
    """Root of the least-squares line through ``y = u_max^(1-p)`` against ``t`` on the tail.

    Residuals are measured relative to ``y`` (weights ``y^-2``): the samples are
    geometric in u_max, and an unweighted fit would be set by the first decade
    of the window alone. Time enters as the offset from the last sample,
    summed from the step sizes, so the fit keeps full precision even when
    ``T - t`` falls below the resolution of ``t`` itself.
    Returns ``(T_est, rms_relative_residual)``.
    """
    root, rms, t_last = _time_fit(traj, p, window, min_points)
    return t_last + root, rms


def estimate_blowup_point(traj: TrajectoryRecord) -> np.ndarray:
    """Refined location of the argmax of the final snapshot.

    The parabola is fitted to ``-u^(1-p)`` rather than to ``u``: near blow-up
    u is far too peaked for a three-point fit, while ``u^(1-p)`` stays smooth
    (for the diffusion-free equation it is affine in the local blow-up time).

    Warns with :class:`WanderingArgmaxWarning` if the argmax node moved during
    the last decade of u_max growth.
    """
    _require_blowup(traj)
    final = traj.final.field
    node = final.argmax()
    u = final.values
    with np.errstate(divide="ignore"):
        smooth = np.where(u > 0, -np.abs(u) ** (1.0 - traj.p), -np.inf)
    late = traj.umax >= traj.umax[-1] / 10.0
    moved = np.unique(traj.argmax_node[late])
    if moved.size > 1:
        warnings.warn(f"argmax visited nodes {moved.tolist()} in the last decade",
                      WanderingArgmaxWarning, stacklevel=2)
    return refine_peak(smooth, node, traj.grid)


def extract_blowup_set(traj: TrajectoryRecord, fraction: float = 0.5) -> BlowupSet:
    """Nodes whose final value is at least ``fraction * u_max``.

    ``component`` is the connected part of that set containing the argmax.
    """
    _require_blowup(traj)
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    final = traj.final.field
    v = final.values
    member = v >= fraction * v.max()
    labels, _ = ndimage.label(member.reshape(traj.grid.shape))
    labels = labels.ravel()
    comp = np.flatnonzero(labels == labels[final.argmax()])
    return BlowupSet(np.flatnonzero(member), comp, fraction)


def fit_blowup_rate(traj: TrajectoryRecord, T_est: float, p: float, window=DEFAULT_WINDOW,
                    min_points: int = MIN_TAIL_POINTS, *, after_last: float | None = None
                    ) -> tuple[float, float]:
    """Slope and prefactor of ``log u_max`` against ``log(T_est - t)`` on the tail.

    ``after_last`` (``T_est - t_last``) may be passed directly when it is known
    more precisely than the difference of the two rounded times.
    """
    t, u, left = _tail(traj, window, min_points)
    gap = T_est - float(traj.times[-1]) if after_last is None else after_last
    remaining = left + gap
    if not np.all(remaining > 0):
        raise ValueError("T_est must exceed every time in the fit window")
    a, b, _ = _linear_fit(np.log(remaining), np.log(u))
    return b, math.exp(a)


def concentration_residual(blowup_point, problem: ProblemSpec, A: float) -> float:
    """``1/A - phi^(p-1)(a) V(a)``: how far the blow-up point is from maximizing the weight."""
    pt = np.atleast_1d(np.asarray(blowup_point, dtype=float))
    if not problem.domain.contains(pt.reshape(1, -1))[0]:
        raise PointOutsideDomainError(f"{pt} lies outside the domain")
    return 1.0 / A - problem.weight_at(pt)


def analyze(traj: TrajectoryRecord, window=DEFAULT_WINDOW, fraction: float = 0.5,
            min_points: int = MIN_TAIL_POINTS) -> BlowupEstimate:
    root, rms, t_last = _time_fit(traj, traj.p, window, min_points)
    T_est = t_last + root
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WanderingArgmaxWarning)
        point = estimate_blowup_point(traj)
    bset = extract_blowup_set(traj, fraction)
    expo, const = fit_blowup_rate(traj, T_est, traj.p, window, min_points, after_last=root)
    return BlowupEstimate(T_est, tuple(window), point, bset.nodes, expo, const, rms, root)
