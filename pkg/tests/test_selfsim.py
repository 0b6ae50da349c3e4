import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowuplab import DomainSpec, FieldSpec, ProblemSpec, SolverConfig, build_grid, integrate
from blowuplab.analysis import analyze
from blowuplab.exceptions import (EmptyMaskError, InsufficientSnapshotsError, NonpositiveInputError,
                                  TimePastBlowupError)
from blowuplab.integrator import Snapshot
from blowuplab.problem import GridField
from blowuplab.selfsim import (EnergyTrace, convergence_diagnostic, energy_inequality_check,
                               energy_of_constant, f_function, gaussian_mass, k_of_a, limit_energy,
                               profile_energy, rescale_snapshot, weighted_energy)

from conftest import H_REF, reference_problem

GRID = build_grid(DomainSpec.interval(1.0), H_REF)


def const_field(value, grid=GRID):
    v = np.full(grid.n_nodes, float(value))
    return GridField(grid, v)


def test_rescale_constant_field():
    prof = rescale_snapshot((0.5, const_field(3.0)), [0.0], 1.0, 2.0)
    assert np.allclose(prof.w_values, 0.5 * 3.0)
    assert prof.s == pytest.approx(math.log(2.0))


def test_rescale_ode_solution_is_k():
    T = 0.1
    for t in (0.0, 0.05, 0.09, 0.0999):
        u = 1.0 / (T - t)  # ode_value with (p-1)V = 1
        prof = rescale_snapshot((t, const_field(u)), [0.0], T, 2.0)
        assert prof.center_value() == pytest.approx(1.0, rel=1e-12)


def test_rescale_initial_time():
    prob = reference_problem(10.0)
    phi = np.cos(math.pi * GRID.coords[:, 0] / 2)
    T = 0.11
    prof = rescale_snapshot((0.0, GridField(GRID, 10 * phi)), [0.0], T, 2.0)
    assert prof.s == 0.0
    expected = T * 10 * np.cos(math.pi * (prof.y_nodes[:, 0] * math.sqrt(T)) / 2)
    assert np.allclose(prof.w_values, expected, rtol=1e-12, atol=1e-15)


def test_rescale_past_blowup():
    with pytest.raises(TimePastBlowupError):
        rescale_snapshot((1.0, const_field(1.0)), [0.0], 1.0, 2.0)


def test_energy_zero_profile():
    prof = rescale_snapshot((0.0, const_field(0.0)), [0.0], 1.0, 2.0)
    assert weighted_energy(prof, 1.0, 2.0) == 0.0


def wide_constant_profile(k, width=40.0, n=8000):
    dom = DomainSpec.interval(width)
    grid = build_grid(dom, 2 * width / n)
    return rescale_snapshot((0.0, const_field(k, grid)), [0.0], 1.0, 2.0), grid


@pytest.mark.parametrize("V,p", [(1.0, 2.0), (2.0, 3.0), (0.7, 1.5)])
def test_energy_of_wide_constant_matches_closed_form(V, p):
    k = k_of_a(V, p)
    dom = DomainSpec.interval(40.0)
    grid = build_grid(dom, 0.01)
    prof = rescale_snapshot((0.0, const_field(k, grid)), [0.0], 1.0, p)
    assert weighted_energy(prof, V, p) == pytest.approx(energy_of_constant(k, V, p, 1), abs=1e-6)


def test_energy_half_profile_is_between():
    k = 1.0
    grid = build_grid(DomainSpec.interval(40.0), 0.01)
    v = np.where(grid.coords[:, 0] < 0, k, 0.0)
    prof = rescale_snapshot((0.0, GridField(grid, v)), [0.0], 1.0, 2.0)
    E_half = weighted_energy(prof, 1.0, 2.0)
    E_full = energy_of_constant(k, 1.0, 2.0, 1)
    assert 0 < E_half
    assert E_half != pytest.approx(E_full)


def test_energy_empty_mask():
    prof = rescale_snapshot((0.0, const_field(1.0)), [0.0], 1.0, 2.0)
    empty = type(prof)(**{**prof.__dict__, "omega_mask": np.zeros_like(prof.omega_mask)})
    with pytest.raises(EmptyMaskError):
        weighted_energy(empty, 1.0, 2.0)


@pytest.mark.parametrize("V,p,k", [(1, 2, 1.0), (2, 3, 0.5), (1, 3, 2 ** -0.5)])
def test_k_of_a(V, p, k):
    assert k_of_a(V, p) == pytest.approx(k, rel=1e-15)


def test_k_of_a_guards():
    with pytest.raises(NonpositiveInputError):
        k_of_a(0.0, 2.0)
    with pytest.raises(NonpositiveInputError):
        k_of_a(1.0, 1.0)


def test_energy_of_constant_examples():
    assert energy_of_constant(0.0, 1.0, 2.0, 1) == 0.0
    assert energy_of_constant(1.0, 1.0, 2.0, 1) == pytest.approx(2 * math.sqrt(math.pi) / 6, rel=1e-14)
    assert energy_of_constant(1.0, 1.0, 2.0, 1) == pytest.approx(0.59082, abs=1e-5)


@settings(max_examples=20, deadline=None)
@given(V=st.floats(0.1, 10), p=st.floats(1.1, 6), N=st.sampled_from([1, 2]))
def test_limit_energy_forms_agree(V, p, N):
    k = k_of_a(V, p)
    assert energy_of_constant(k, V, p, N) == pytest.approx(limit_energy(V, p, N), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(V=st.floats(0.1, 10), p=st.floats(1.1, 6))
def test_f_identities(V, p):
    k = k_of_a(V, p)
    F, F2 = f_function(k, V, p)
    assert F2 == pytest.approx(-1.0, abs=1e-12)
    # F'(k) = k/(p-1) - V k^p = 0
    assert k / (p - 1) - V * k ** p == pytest.approx(0.0, abs=1e-12 * max(1.0, k))


def test_f_at_zero():
    assert f_function(0.0, 1.0, 3.0) == (0.0, 0.5)


def test_gaussian_mass():
    assert gaussian_mass(1) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-15)
    assert gaussian_mass(2) == pytest.approx(4 * math.pi, rel=1e-15)


def test_convergence_diagnostic_exact_ode():
    T = 0.1
    snaps = [Snapshot(t, const_field(1.0 / (T - t)), level=1.0 / (T - t)) for t in (0.0, 0.09, 0.099)]
    prob = ProblemSpec(DomainSpec.interval(1.0), FieldSpec.constant(1.0), FieldSpec.constant(1.0), 2.0, 10.0, 1.0)
    trace = convergence_diagnostic(snaps, [0.0], T, prob)
    assert np.allclose(trace.w_center, 1.0, rtol=1e-12)
    assert trace.k_target == 1.0


def test_convergence_diagnostic_needs_levels():
    snaps = [Snapshot(0.0, const_field(1.0))] * 3
    with pytest.raises(InsufficientSnapshotsError):
        convergence_diagnostic(snaps, [0.0], 1.0, reference_problem())


def test_reference_run_trace():
    prob = reference_problem(160.0)
    traj = integrate(prob, GRID, SolverConfig(snapshot_levels=(1e2, 1e3, 1e4)))
    est = analyze(traj)
    trace = convergence_diagnostic(traj.level_snapshots(), est.blowup_point, est.T_est, prob)
    assert trace.w_error_final <= 0.10
    assert trace.E_error_final <= 0.15
    E0 = profile_energy(traj.initial, est.blowup_point, est.T_est, prob)
    slack, ok = energy_inequality_check(trace, E0, est.T_est)
    assert ok and slack <= 0


def test_energy_inequality_synthetic():
    T, E0 = 0.01, 0.3
    flat = EnergyTrace(np.array([0.0, 1.0]), np.array([E0, E0]), np.ones(2), 1.0, 0.59)
    slack, ok = energy_inequality_check(flat, E0, T)
    assert slack <= 0 and ok
    bad = EnergyTrace(np.array([0.0, 1.0]), np.array([E0, E0 + 100 * T * T]), np.ones(2), 1.0, 0.59)
    slack, ok = energy_inequality_check(bad, E0, T)
    assert slack == pytest.approx(100.0) and not ok
