"""Explicit finite-difference integration of u_t = Lap(u) + V u^p up to near blow-up.

The step size is the smaller of the diffusion bound ``sigma h^2 / (2N)`` and
the reaction cap ``eta / (max V * u_max^(p-1))``, so u_max grows by roughly a
factor ``1 + eta`` per step once the reaction dominates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from . import _kernel
from .exceptions import NonfiniteValueError
from .problem import Grid, GridField, ProblemSpec, sample_field

STOP_THRESHOLD = "threshold-reached"
STOP_MAX_STEPS = "max-steps"
STOP_DECAY = "decay-detected"


@dataclass(frozen=True)
class SolverConfig:
    diffusion_safety: float = 0.4
    growth_cap: float = 0.05
    stop_threshold: float = 1e8
    max_steps: int = 10_000_000
    snapshot_levels: tuple[float, ...] = (1e2, 1e3, 1e4, 1e5, 1e6)
    reaction_only: bool = False
    decay_window: int = 1000
    chunk_size: int = 1 << 16

    def __post_init__(self):
        if not (0 < self.diffusion_safety <= 1):
            raise ValueError("diffusion_safety must lie in (0, 1]")
        if not self.growth_cap > 0:
            raise ValueError("growth_cap must be positive")
        if not self.max_steps > 0:
            raise ValueError("max_steps must be positive")
        if not self.decay_window > 0:
            raise ValueError("decay_window must be positive")
        object.__setattr__(self, "snapshot_levels",
                           tuple(sorted(float(v) for v in self.snapshot_levels)))

    def diffusion_dt(self, grid: Grid) -> float:
        # sigma h^2 / (2N) for equal spacings
        return self.diffusion_safety / (2.0 * float(np.sum(grid.inv_h2)))


@dataclass(frozen=True, eq=False)
class Snapshot:
    time: float
    field: GridField
    level: float | None = None
    tag: str = "level"

    @property
    def umax(self) -> float:
        return self.field.max()


@dataclass(eq=False)
class TrajectoryRecord:
    """Discrete orbit of one integration.

    ``times``, ``umax``, ``argmax_node`` and ``steps`` hold one entry per
    step, starting with the initial state at ``t = 0`` (``steps[0] = 0``).
    ``steps`` are the exact step sizes; near blow-up they can drop below the
    resolution of ``times``, so time-to-end is best summed from them.
    """

    grid: Grid
    p: float
    times: np.ndarray
    umax: np.ndarray
    argmax_node: np.ndarray
    snapshots: list = field(default_factory=list)
    stop_reason: str = STOP_MAX_STEPS
    monotone_diagnostic: float = 1.0
    stop_threshold: float = math.inf
    steps: np.ndarray | None = None

    def __post_init__(self):
        if self.steps is None:
            self.steps = np.concatenate([[0.0], np.diff(self.times)])

    def time_to_end(self) -> np.ndarray:
        """``times[-1] - times`` summed from the step sizes, backwards."""
        tail = np.cumsum(self.steps[:0:-1])[::-1]
        return np.concatenate([tail, [0.0]])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @property
    def initial(self) -> Snapshot:
        return self.snapshots[0]

    @property
    def blew_up(self) -> bool:
        return self.stop_reason == STOP_THRESHOLD

    def level_snapshots(self) -> list:
        return [s for s in self.snapshots if s.tag == "level"]


def initial_state(problem: ProblemSpec, grid: Grid) -> GridField:
    """``M phi`` at the nodes, pinned to zero on the boundary."""
    u = problem.M * sample_field(problem.profile, grid).values
    u[grid.boundary] = 0.0
    return GridField(grid, u)


def _potential(problem: ProblemSpec, grid: Grid) -> np.ndarray:
    return np.ascontiguousarray(sample_field(problem.potential, grid).values)


def step(state: GridField, t: float, problem: ProblemSpec,
         config: SolverConfig = SolverConfig()) -> tuple[GridField, float]:
    """One forward-Euler step. Returns the new state and the step size used.

    Raises
    ------
    NonfiniteValueError
        If the update overflows.
    """
    grid = state.grid
    u = state.values
    if np.any(u[grid.boundary] != 0):
        raise ValueError("state must vanish on boundary nodes")
    if np.any(u < 0):
        raise ValueError("state must be nonnegative")
    V = _potential(problem, grid)
    p = problem.p
    dt = config.diffusion_dt(grid)
    umax = float(u.max())
    if umax > 0:
        dt = min(dt, config.growth_cap / (float(V.max()) * umax ** (p - 1.0)))
    rhs = V * u ** p
    if not config.reaction_only:
        rhs = grid.laplacian(u) + rhs
    new = u + dt * rhs
    new[grid.boundary] = 0.0
    if not np.all(np.isfinite(new)):
        raise NonfiniteValueError(f"overflow in step at t = {t}")
    return GridField(grid, new), dt


def integrate(problem: ProblemSpec, grid: Grid,
              config: SolverConfig = SolverConfig()) -> TrajectoryRecord:
    """Step from ``M phi`` until u_max reaches the stop threshold, decays, or runs out of steps.

    A snapshot is stored at t = 0, at the first step where u_max reaches each
    configured level, and at the final step.
    """
    u0 = initial_state(problem, grid)
    u = u0.values.copy()
    umax0 = float(u.max())
    if not config.stop_threshold > umax0:
        raise ValueError(
            f"stop threshold {config.stop_threshold:g} must exceed the initial max {umax0:g}"
        )
    V = _potential(problem, grid)
    m = float(V.min())
    ii = np.ascontiguousarray(grid.interior_index.astype(np.int64))
    nb = np.ascontiguousarray(grid.neighbors.astype(np.int64))
    inv_h2 = np.ascontiguousarray(grid.inv_h2)
    dt_diff = config.diffusion_dt(grid)
    vmax = float(V.max())
    levels = list(config.snapshot_levels)

    snapshots = [Snapshot(0.0, u0, tag="initial")]
    while levels and umax0 >= levels[0]:
        snapshots.append(Snapshot(0.0, u0, level=levels.pop(0)))

    t_chunks = [np.zeros(1)]
    dt_chunks = [np.zeros(1)]
    m_chunks = [np.array([umax0])]
    a_chunks = [np.array([u0.argmax()], dtype=np.int64)]
    work = np.zeros_like(u)
    t = 0.0
    t_err = 0.0
    steps = 0
    decay_run = 0
    mono_pass = 0
    reason = STOP_MAX_STEPS
    while True:
        n_max = min(config.chunk_size, config.max_steps - steps)
        if n_max <= 0:
            reason = STOP_MAX_STEPS
            break
        out_t = np.empty(n_max)
        out_dt = np.empty(n_max)
        out_m = np.empty(n_max)
        out_a = np.empty(n_max, dtype=np.int64)
        next_level = levels[0] if levels else math.inf
        n, status, t, t_err, decay_run, passed = _kernel.advance(
            u, work, t, t_err, ii, nb, inv_h2, V, problem.p, dt_diff, config.growth_cap, vmax,
            config.reaction_only, config.stop_threshold, next_level, 0.5 * m, umax0,
            config.decay_window, decay_run, out_t, out_dt, out_m, out_a, n_max)
        steps += n
        mono_pass += passed
        t_chunks.append(out_t[:n])
        dt_chunks.append(out_dt[:n])
        m_chunks.append(out_m[:n])
        a_chunks.append(out_a[:n])
        if status == _kernel.NEGATIVE:
            raise RuntimeError(f"positivity lost at t = {t}; check diffusion_safety")
        current = float(u.max())
        if levels and current >= levels[0]:
            field_now = GridField(grid, u)
            while levels and current >= levels[0]:
                snapshots.append(Snapshot(t, field_now, level=levels.pop(0)))
        if status in (_kernel.THRESHOLD, _kernel.NONFINITE):
            reason = STOP_THRESHOLD
            break
        if status == _kernel.DECAY:
            reason = STOP_DECAY
            break
    snapshots.append(Snapshot(t, GridField(grid, u), tag="final"))
    return TrajectoryRecord(
        grid=grid,
        p=problem.p,
        times=np.concatenate(t_chunks),
        umax=np.concatenate(m_chunks),
        argmax_node=np.concatenate(a_chunks),
        snapshots=snapshots,
        stop_reason=reason,
        monotone_diagnostic=mono_pass / steps if steps else 1.0,
        stop_threshold=config.stop_threshold,
        steps=np.concatenate(dt_chunks),
    )
