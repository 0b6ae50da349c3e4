"""Problem instances for u_t = Lap(u) + V(x) u^p with Dirichlet data and u(., 0) = M phi.

Domains, closed-form fields, uniform grids and the static quantities of the
data (admissibility of the initial datum, location of max phi^{p-1} V).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .exceptions import (
    DegenerateWeightError,
    DimensionMismatchError,
    GridError,
    GridTooCoarseError,
)

SHAPES = ("interval", "rectangle", "disc")
FIELD_KINDS = ("constant", "gaussian", "cosine", "cosine_gaussian")

BOUNDARY_ZERO_TOL = 1e-12
MIN_CELLS_PER_AXIS = 8


@dataclass(frozen=True)
class DomainSpec:
    """Convex domain centered at the origin.

    ``half_lengths`` holds the interval half-length, the two rectangle
    half-sides, or the disc radius.
    """

    dimension: int
    shape: str
    half_lengths: tuple[float, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        hl = tuple(float(v) for v in self.half_lengths)
        object.__setattr__(self, "half_lengths", hl)
        expected = {"interval": (1, 1), "rectangle": (2, 2), "disc": (2, 1)}[self.shape]
        if (self.dimension, len(hl)) != expected:
            raise ValueError(
                f"{self.shape} needs dimension {expected[0]} and {expected[1]} half-length(s)"
            )
        if any(not (v > 0) for v in hl):
            raise ValueError("half-lengths must be positive")

    @classmethod
    def interval(cls, half_length: float = 1.0) -> "DomainSpec":
        return cls(1, "interval", (half_length,))

    @classmethod
    def rectangle(cls, half_x: float, half_y: float | None = None) -> "DomainSpec":
        return cls(2, "rectangle", (half_x, half_x if half_y is None else half_y))

    @classmethod
    def disc(cls, radius: float) -> "DomainSpec":
        return cls(2, "disc", (radius,))

    @property
    def box_half_lengths(self) -> tuple[float, ...]:
        """Half-extent of the bounding box, one entry per axis."""
        if self.shape == "disc":
            return (self.half_lengths[0],) * 2
        return self.half_lengths

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        """Membership in the closed domain for an ``(n, N)`` array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.shape == "disc":
            r = self.half_lengths[0]
            return np.einsum("ij,ij->i", pts, pts) <= r * r * (1 + tol)
        hl = np.asarray(self.half_lengths)
        return np.all(np.abs(pts) <= hl * (1 + tol), axis=1)


def _as_points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    if pts.shape[1] != dim:
        raise DimensionMismatchError(f"points have dimension {pts.shape[1]}, expected {dim}")
    return pts


@dataclass(frozen=True)
class FieldSpec:
    """Closed-form scalar field.

    Kinds:

    - ``constant``: ``c0``
    - ``gaussian``: ``c0 + sum_i a_i exp(-b_i |x - x_i|^2)``
    - ``cosine``: ``prod_j cos(pi x_j / (2 l_j))``
    - ``cosine_gaussian``: product of the two above
    """

    kind: str
    c0: float = 0.0
    amplitudes: tuple[float, ...] = ()
    rates: tuple[float, ...] = ()
    centers: tuple[tuple[float, ...], ...] = ()
    half_lengths: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        amps = tuple(float(a) for a in self.amplitudes)
        rates = tuple(float(b) for b in self.rates)
        centers = tuple(tuple(float(c) for c in np.atleast_1d(ctr)) for ctr in self.centers)
        hl = tuple(float(v) for v in self.half_lengths)
        if not (len(amps) == len(rates) == len(centers)):
            raise ValueError("amplitudes, rates and centers must have equal length")
        if any(b <= 0 for b in rates):
            raise ValueError("gaussian rates must be positive")
        if len({len(c) for c in centers}) > 1:
            raise DimensionMismatchError("gaussian centers of mixed dimension")
        if self.kind in ("cosine", "cosine_gaussian"):
            if not hl or any(v <= 0 for v in hl):
                raise ValueError("cosine profiles need positive half_lengths")
            if centers and len(centers[0]) != len(hl):
                raise DimensionMismatchError("centers and half_lengths disagree on dimension")
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "half_lengths", hl)

    @classmethod
    def constant(cls, value: float) -> "FieldSpec":
        return cls("constant", c0=value)

    @classmethod
    def gaussian(cls, c0: float, amplitudes, rates, centers) -> "FieldSpec":
        return cls("gaussian", c0=c0, amplitudes=tuple(amplitudes), rates=tuple(rates),
                   centers=tuple(centers))

    @classmethod
    def cosine(cls, half_lengths) -> "FieldSpec":
        return cls("cosine", half_lengths=tuple(np.atleast_1d(half_lengths)))

    @classmethod
    def cosine_gaussian(cls, half_lengths, c0: float, amplitudes, rates, centers) -> "FieldSpec":
        return cls("cosine_gaussian", c0=c0, amplitudes=tuple(amplitudes),
                   rates=tuple(rates), centers=tuple(centers),
                   half_lengths=tuple(np.atleast_1d(half_lengths)))

    @property
    def dimension(self) -> int | None:
        """Dimension fixed by the parameters, or None for a constant field."""
        if self.half_lengths:
            return len(self.half_lengths)
        if self.centers:
            return len(self.centers[0])
        return None

    @property
    def has_cosine(self) -> bool:
        return self.kind in ("cosine", "cosine_gaussian")

    def _bumps(self, pts: np.ndarray) -> np.ndarray:
        out = np.full(pts.shape[0], self.c0)
        for a, b, c in zip(self.amplitudes, self.rates, self.centers):
            d = pts - np.asarray(c)
            out = out + a * np.exp(-b * np.einsum("ij,ij->i", d, d))
        return out

    def _cosines(self, pts: np.ndarray) -> np.ndarray:
        out = np.ones(pts.shape[0])
        for j, l in enumerate(self.half_lengths):
            out = out * np.cos(math.pi * pts[:, j] / (2.0 * l))
        return out

    def evaluate(self, points, dim: int | None = None) -> np.ndarray:
        """Evaluate at an ``(n, N)`` array of points (1D accepts a flat array)."""
        dim = dim or self.dimension or (np.asarray(points).shape[-1] if np.ndim(points) == 2 else 1)
        if self.dimension is not None and dim != self.dimension:
            raise DimensionMismatchError(
                f"{self.kind} field has dimension {self.dimension}, points have {dim}"
            )
        pts = _as_points(points, dim)
        if self.kind == "constant":
            return np.full(pts.shape[0], self.c0)
        if self.kind == "gaussian":
            return self._bumps(pts)
        if self.kind == "cosine":
            return self._cosines(pts)
        return self._cosines(pts) * self._bumps(pts)

    def at(self, point) -> float:
        """Value at a single point."""
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        return float(self.evaluate(pt.reshape(1, -1), dim=pt.size)[0])

    def sup_bound(self) -> float:
        """Upper bound for |f| on all of R^N."""
        bumps = abs(self.c0) + sum(abs(a) for a in self.amplitudes)
        if self.kind == "cosine":
            return 1.0
        return bumps

    def gradient_bound(self) -> float:
        """Upper bound for |grad f| on all of R^N, i.e. a Lipschitz constant.

        A bump ``a exp(-b r^2)`` has radial slope at most ``|a| sqrt(2b/e)``.
        """
        bump_slope = sum(abs(a) * math.sqrt(2.0 * b / math.e)
                         for a, b in zip(self.amplitudes, self.rates))
        cos_slope = math.sqrt(sum((math.pi / (2.0 * l)) ** 2 for l in self.half_lengths))
        if self.kind == "constant":
            return 0.0
        if self.kind == "gaussian":
            return bump_slope
        if self.kind == "cosine":
            return cos_slope
        bumps_sup = abs(self.c0) + sum(abs(a) for a in self.amplitudes)
        return cos_slope * bumps_sup + bump_slope


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the blow-up problem: domain, V, phi, p and M."""

    domain: DomainSpec
    potential: FieldSpec
    profile: FieldSpec
    p: float
    M: float = 0.0
    potential_floor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "M", float(self.M))
        object.__setattr__(self, "potential_floor", float(self.potential_floor))
        if self.M < 0:
            raise ValueError("amplitude M must be nonnegative")
        for f in (self.potential, self.profile):
            if f.dimension is not None and f.dimension != self.domain.dimension:
                raise DimensionMismatchError(
                    f"field of dimension {f.dimension} on a {self.domain.dimension}D domain"
                )

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def with_amplitude(self, M: float) -> "ProblemSpec":
        return replace(self, M=M)

    def weight_at(self, point) -> float:
        """phi^{p-1} V at a point, from the closed forms."""
        phi = max(self.profile.at(point), 0.0)
        return phi ** (self.p - 1.0) * self.potential.at(point)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice over the domain's bounding box.

    Nodes are ordered lexicographically (first axis slowest). ``boundary``
    flags nodes whose value is pinned to zero.
    """

    domain: DomainSpec
    h: float
    spacing: tuple[float, ...]
    axes: tuple[np.ndarray, ...]
    coords: np.ndarray
    boundary: np.ndarray
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(len(a) for a in self.axes))

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @cached_property
    def interior(self) -> np.ndarray:
        return _readonly(~self.boundary)

    @cached_property
    def interior_index(self) -> np.ndarray:
        return _readonly(np.flatnonzero(~self.boundary))

    @cached_property
    def neighbors(self) -> np.ndarray:
        """Flat indices ``[left, right(, down, up)]`` for each interior node."""
        idx = np.arange(self.n_nodes).reshape(self.shape)
        cols = []
        for axis in range(self.dimension):
            cols.append(np.roll(idx, 1, axis=axis).ravel())
            cols.append(np.roll(idx, -1, axis=axis).ravel())
        nb = np.stack(cols, axis=1)[self.interior_index]
        return _readonly(np.ascontiguousarray(nb))

    @cached_property
    def inv_h2(self) -> np.ndarray:
        return _readonly(np.array([1.0 / (s * s) for s in self.spacing]))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    def laplacian(self, values) -> np.ndarray:
        """Central 3-point (1D) / 5-point (2D) Laplacian; zero on boundary nodes.

        Neighbor pairs are summed before subtracting the center so the stencil
        commutes exactly with reflections.
        """
        v = np.asarray(values, dtype=float)
        nb = self.neighbors
        ii = self.interior_index
        lap = np.zeros(self.n_nodes)
        acc = ((v[nb[:, 0]] + v[nb[:, 1]]) - 2.0 * v[ii]) * self.inv_h2[0]
        for axis in range(1, self.dimension):
            acc = acc + ((v[nb[:, 2 * axis]] + v[nb[:, 2 * axis + 1]]) - 2.0 * v[ii]) * self.inv_h2[axis]
        lap[ii] = acc
        return lap

    def lattice(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)

    def contains(self, point) -> bool:
        return bool(self.domain.contains(np.atleast_1d(point).reshape(1, -1))[0])

    def nearest_node(self, point) -> int:
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        d = self.coords - pt
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def adjacent_pairs(self):
        """Yield ``(i, j, spacing)`` index arrays of lattice-adjacent node pairs."""
        idx = np.arange(self.n_nodes).reshape(self.shape)
        for axis in range(self.dimension):
            lo = np.take(idx, range(self.shape[axis] - 1), axis=axis).ravel()
            hi = np.take(idx, range(1, self.shape[axis]), axis=axis).ravel()
            yield lo, hi, self.spacing[axis]


@dataclass(frozen=True, eq=False)
class GridField:
    """Values of a scalar function at the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise ValueError(f"expected {self.grid.n_nodes} values, got shape {v.shape}")
        object.__setattr__(self, "values", _readonly(v))

    def max(self) -> float:
        return float(self.values.max())

    def argmax(self) -> int:
        return int(np.argmax(self.values))

    def __mul__(self, c: float) -> "GridField":
        return GridField(self.grid, self.values * c)

    __rmul__ = __mul__


def build_grid(domain: DomainSpec, h: float) -> Grid:
    """Uniform grid of spacing ``h`` over ``domain``.

    Raises
    ------
    GridError
        If ``h`` is not positive or does not divide the domain extent.
    GridTooCoarseError
        If an axis has fewer than 8 cells (7 interior nodes).
    """
    if not (h > 0):
        raise GridError(f"spacing must be positive, got {h}")
    axes, spacing = [], []
    for l in domain.box_half_lengths:
        ratio = 2.0 * l / h
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise GridError(f"h={h} does not divide the extent {2 * l}")
        if n < MIN_CELLS_PER_AXIS:
            raise GridTooCoarseError(
                f"{n} cells per axis, need at least {MIN_CELLS_PER_AXIS}"
            )
        # (2i - n) * (l/n) keeps the node set exactly symmetric about 0
        x = (2.0 * np.arange(n + 1) - n) * (l / n)
        x[0], x[-1] = -l, l
        axes.append(_readonly(x))
        spacing.append(2.0 * l / n)
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    edge = np.zeros([len(a) for a in axes], dtype=bool)
    for axis in range(domain.dimension):
        sl = [slice(None)] * domain.dimension
        sl[axis] = 0
        edge[tuple(sl)] = True
        sl[axis] = -1
        edge[tuple(sl)] = True
    boundary = edge.ravel()
    if domain.shape == "disc":
        r = domain.half_lengths[0]
        boundary = boundary | (np.einsum("ij,ij->i", coords, coords) >= r * r * (1 - 1e-12))
        mid = len(axes[1]) // 2
        if np.count_nonzero(~boundary.reshape(edge.shape)[:, mid]) < MIN_CELLS_PER_AXIS - 1:
            raise GridTooCoarseError("too few interior nodes across the disc")
    return Grid(domain, float(spacing[0]), tuple(spacing), tuple(axes),
                _readonly(coords), _readonly(boundary))


def sample_field(spec: FieldSpec, grid: Grid) -> GridField:
    """Exact pointwise evaluation of ``spec`` at every node of ``grid``."""
    if spec.dimension is not None and spec.dimension != grid.dimension:
        raise DimensionMismatchError(
            f"field has dimension {spec.dimension}, grid has {grid.dimension}"
        )
    return GridField(grid, spec.evaluate(grid.coords, dim=grid.dimension))


@dataclass(frozen=True)
class ValidationReport:
    checks: dict
    details: dict
    lipschitz_estimate: float
    min_potential: float

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]

    def __str__(self):
        lines = [f"{'PASS' if v else 'FAIL'}  {k}: {self.details[k]}" for k, v in self.checks.items()]
        return "\n".join(lines)


def empirical_lipschitz(values: np.ndarray, grid: Grid) -> float:
    """Largest difference quotient over lattice-adjacent node pairs."""
    L = 0.0
    for i, j, hs in grid.adjacent_pairs():
        if len(i):
            L = max(L, float(np.max(np.abs(values[j] - values[i]))) / hs)
    return L


def validate_problem(problem: ProblemSpec, grid: Grid) -> ValidationReport:
    """Check the standing assumptions at the grid nodes. Never raises."""
    checks, details = {}, {}
    V = sample_field(problem.potential, grid).values
    phi = sample_field(problem.profile, grid).values

    checks["exponent"] = problem.p > 1
    details["exponent"] = f"p = {problem.p:g}"

    vmin = float(V.min())
    c = problem.potential_floor
    checks["potential_floor"] = c > 0 and vmin >= c
    details["potential_floor"] = f"min V = {vmin:.6g}, declared floor c = {c:g}"

    interior_phi = phi[grid.interior]
    checks["profile_positive"] = bool(np.all(interior_phi > 0))
    details["profile_positive"] = f"min phi over interior = {interior_phi.min():.6g}"

    bmax = float(np.max(np.abs(phi[grid.boundary]))) if grid.boundary.any() else 0.0
    if problem.profile.has_cosine:
        checks["profile_boundary_zero"] = bmax <= BOUNDARY_ZERO_TOL
        details["profile_boundary_zero"] = f"max |phi| on boundary = {bmax:.3g}"
    else:
        checks["profile_boundary_zero"] = True
        details["profile_boundary_zero"] = (
            f"not a cosine profile, boundary pinned by the solver (max |phi| = {bmax:.3g})"
        )

    L = empirical_lipschitz(V, grid)
    bound = problem.potential.gradient_bound()
    checks["potential_lipschitz"] = L <= bound * (1 + 1e-9) + 1e-12
    details["potential_lipschitz"] = f"empirical L = {L:.6g}, closed-form bound = {bound:.6g}"

    checks["grid_domain"] = grid.domain == problem.domain
    details["grid_domain"] = "grid built on the problem domain" if checks["grid_domain"] else "domain mismatch"
    return ValidationReport(checks, details, L, vmin)


def initial_condition_margin(problem: ProblemSpec, grid: Grid) -> np.ndarray:
    """``M Lap_h phi + (m/2) M^p phi^p`` at the interior nodes."""
    phi = sample_field(problem.profile, grid).values.copy()
    phi[grid.boundary] = 0.0
    m = float(sample_field(problem.potential, grid).values.min())
    M, p = problem.M, problem.p
    lap = grid.laplacian(phi)
    ii = grid.interior_index
    return M * lap[ii] + 0.5 * m * M ** p * np.maximum(phi[ii], 0.0) ** p


def check_initial_condition(problem: ProblemSpec, grid: Grid) -> tuple[bool, float]:
    """Discrete check of M Lap(phi) + (min V / 2) M^p phi^p >= 0.

    Returns whether the minimum over interior nodes clears ``-1e-8 M^p`` and
    the minimum itself.
    """
    margin = initial_condition_margin(problem, grid)
    worst = float(margin.min()) if margin.size else 0.0
    return worst >= -1e-8 * problem.M ** problem.p, worst


def refine_peak(values: np.ndarray, node: int, grid: Grid) -> np.ndarray:
    """Vertex of the per-axis parabola through ``node`` and its two neighbors."""
    lat = np.asarray(values, dtype=float).reshape(grid.shape)
    ijk = np.unravel_index(node, grid.shape)
    point = grid.coords[node].copy()
    for axis in range(grid.dimension):
        i = ijk[axis]
        if i == 0 or i == grid.shape[axis] - 1:
            continue
        lo = list(ijk)
        hi = list(ijk)
        lo[axis] -= 1
        hi[axis] += 1
        fm, f0, fp = lat[tuple(lo)], lat[ijk], lat[tuple(hi)]
        curv = fm - 2.0 * f0 + fp
        if curv < 0:
            shift = 0.5 * (fm - fp) / curv
            point[axis] += float(np.clip(shift, -0.5, 0.5)) * grid.spacing[axis]
    return point


def weight_field(problem: ProblemSpec, grid: Grid) -> np.ndarray:
    phi = np.maximum(sample_field(problem.profile, grid).values, 0.0)
    phi[grid.boundary] = 0.0
    V = sample_field(problem.potential, grid).values
    return phi ** (problem.p - 1.0) * V


def argmax_weight(problem: ProblemSpec, grid: Grid) -> tuple[np.ndarray, float]:
    """Locate the maximizer of phi^{p-1} V: best node, then one parabolic refinement.

    The returned value is the closed-form weight at the refined point (or at
    the node, if refinement does not improve it).
    """
    w = weight_field(problem, grid)
    node = int(np.argmax(w))
    point = refine_peak(w, node, grid)
    value = problem.weight_at(point) if grid.contains(point) else -np.inf
    node_value = problem.weight_at(grid.coords[node])
    if not value >= node_value:
        point, value = grid.coords[node].copy(), node_value
    if not value > 0:
        raise DegenerateWeightError(
            f"max phi^(p-1) V = {value}; the problem was not validated"
        )
    return point, float(value)
