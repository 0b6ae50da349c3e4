"""Explicit theoretical quantities: A, the comparison-ball upper bound on T(M),
the blow-up rate constant, the two-sided window for T(M) M^{p-1} and gamma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import MTooSmallError, UnsupportedDimensionError
from .problem import Grid, ProblemSpec, argmax_weight, sample_field


@dataclass(frozen=True)
class BoundsReport:
    A: float
    x_bar: np.ndarray
    K: float
    D: float
    epsilon: float
    delta: float
    lambda1: float
    T_upper: float
    rate_constant: float
    gamma: float
    M: float


def compute_A(problem: ProblemSpec, grid: Grid) -> tuple[float, np.ndarray]:
    """A = 1 / max(phi^{p-1} V) and the maximizer."""
    x_bar, W = argmax_weight(problem, grid)
    return 1.0 / W, x_bar


def bessel_j0(x: float) -> float:
    """J_0 by its power series; adequate for |x| up to about 10."""
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while abs(term) > 1e-17 * max(1.0, abs(total)):
        k += 1
        term *= q / (k * k)
        total += term
    return total


def bisect(f, lo: float, hi: float, rtol: float = 1e-15, max_iter: int = 400) -> float:
    """Root of ``f`` in ``[lo, hi]`` given a sign change."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * abs(mid):
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eigenvalue_constant(N: int) -> float:
    """First Dirichlet eigenvalue of -Lap on the unit ball in R^N."""
    if N == 1:
        return math.pi ** 2 / 4.0
    if N == 2:
        j01 = bisect(bessel_j0, 2.0, 3.0)
        return j01 * j01
    raise UnsupportedDimensionError(f"N = {N} is not supported")


def comparison_constant(problem: ProblemSpec) -> float:
    """K = max(sup |grad phi|, Lip(V)) from the closed-form field bounds."""
    return max(problem.profile.gradient_bound(), problem.potential.gradient_bound())


def epsilon_equation(eps: float, M: float, phi_bar: float, p: float, D: float, K: float) -> float:
    """(eps/2) (M (phi_bar - eps))^{p-1} - D (2K/eps)^2."""
    return 0.5 * eps * (M * (phi_bar - eps)) ** (p - 1.0) - D * (2.0 * K / eps) ** 2


def lemma21_upper_bound(problem: ProblemSpec, grid: Grid) -> BoundsReport:
    """Upper bound on T(M) from a subsolution on the ball B(x_bar, delta).

    epsilon solves ``lambda1(delta) = (eps/2)(M(phi(x_bar) - eps))^{p-1}`` with
    ``delta = eps / (2K)`` and ``lambda1(delta) = D / delta^2``; then

        T <= 1 / (M^{p-1} (p-1) (V(x_bar) - eps) (phi(x_bar) - eps)^{p-1}).

    Raises
    ------
    MTooSmallError
        If no root exists below ``min(phi(x_bar), V(x_bar)) / 2`` or the ball
        leaves the domain.
    """
    A, x_bar = compute_A(problem, grid)
    M, p, N = problem.M, problem.p, problem.dimension
    phi_bar = problem.profile.at(x_bar)
    V_bar = problem.potential.at(x_bar)
    K = comparison_constant(problem)
    D = eigenvalue_constant(N)
    if not (M > 0 and K > 0):
        raise MTooSmallError(f"degenerate construction (M = {M}, K = {K})")
    cap = 0.5 * min(phi_bar, V_bar)

    def g(eps):
        return epsilon_equation(eps, M, phi_bar, p, D, K)

    if not g(cap) > 0:
        raise MTooSmallError(f"no admissible epsilon below {cap:.6g} at M = {M:g}")
    lo = cap
    while g(lo) > 0:
        lo *= 1e-3
    eps = bisect(g, lo, cap)
    delta = eps / (2.0 * K)
    lam = D / delta ** 2
    if not _ball_inside(problem, x_bar, delta):
        raise MTooSmallError(f"ball of radius {delta:.4g} around x_bar leaves the domain")
    assert eps < V_bar
    T_upper = 1.0 / (M ** (p - 1.0) * (p - 1.0) * (V_bar - eps) * (phi_bar - eps) ** (p - 1.0))
    return BoundsReport(A=A, x_bar=x_bar, K=K, D=D, epsilon=eps, delta=delta, lambda1=lam,
                        T_upper=T_upper, rate_constant=lemma22_rate_constant(problem, grid),
                        gamma=gamma_exponent(p), M=M)


def _ball_inside(problem: ProblemSpec, center, radius: float) -> bool:
    c = np.atleast_1d(center)
    dom = problem.domain
    if dom.shape == "disc":
        return float(np.linalg.norm(c)) + radius <= dom.half_lengths[0]
    return bool(np.all(np.abs(c) + radius <= np.asarray(dom.half_lengths)))


def lemma22_rate_constant(problem: ProblemSpec, grid: Grid) -> float:
    """C with u <= C (T - t)^{-1/(p-1)}: (2 / (m (p-1)))^{1/(p-1)}, m = min V over nodes."""
    m = float(sample_field(problem.potential, grid).values.min())
    p = problem.p
    return rate_constant(m, p)


def rate_constant(m: float, p: float) -> float:
    return (2.0 / (m * (p - 1.0))) ** (1.0 / (p - 1.0))


def theorem1_window(A: float, p: float, M: float, C1: float, C2: float) -> tuple[float, float]:
    """Bounds for T(M) M^{p-1}: A/(p-1) - C1 M^{-(p-1)/4} and A/(p-1) + C2 M^{-(p-1)/3}."""
    limit = A / (p - 1.0)
    return limit - C1 * M ** (-(p - 1.0) / 4.0), limit + C2 * M ** (-(p - 1.0) / 3.0)


def gamma_exponent(p: float) -> float:
    """Concentration exponent min((p-1)/4, 1/3)."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    return min((p - 1.0) / 4.0, 1.0 / 3.0)
