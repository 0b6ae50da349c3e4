import math

import numpy as np
import pytest

from blowuplab import (DomainSpec, FieldSpec, GridField, ProblemSpec, SolverConfig, build_grid,
                       check_initial_condition, integrate, step)
from blowuplab.integrator import STOP_DECAY, STOP_MAX_STEPS, STOP_THRESHOLD, initial_state
from blowuplab.oracle import ode_blowup_time, ode_value

from conftest import reference_problem


def flat_problem(M=10.0, p=2.0):
    return ProblemSpec(DomainSpec.interval(1.0), FieldSpec.constant(1.0), FieldSpec.constant(1.0), p, M, 1.0)


def bumped_profile_problem(M, p=2.0):
    prof = FieldSpec.cosine_gaussian(1.0, 0.0, [1.0], [1.0], [0.0])
    return ProblemSpec(DomainSpec.interval(1.0), FieldSpec.constant(1.0), prof, p, M, 1.0)


def test_step_zero_state(ref_grid):
    zero = GridField(ref_grid, np.zeros(ref_grid.n_nodes))
    new, dt = step(zero, 0.0, reference_problem(1.0))
    assert dt > 0 and np.all(new.values == 0)


def test_step_reaction_only_arithmetic():
    grid = build_grid(DomainSpec.interval(1.0), 0.2)
    u = np.zeros(grid.n_nodes)
    u[5] = 10.0
    cfg = SolverConfig(growth_cap=0.05, reaction_only=True)
    new, dt = step(GridField(grid, u), 0.0, flat_problem(), cfg)
    assert dt == pytest.approx(0.005, rel=1e-15)
    assert new.values[5] == pytest.approx(10.5, rel=1e-15)
    assert np.count_nonzero(new.values) == 1


def test_step_heat_decay(ref_grid):
    prob = reference_problem(1e-6)
    u0 = initial_state(prob, ref_grid)
    new, _ = step(u0, 0.0, prob)
    assert new.max() < u0.max()


def test_step_rejects_bad_state(ref_grid):
    u = np.ones(ref_grid.n_nodes)
    with pytest.raises(ValueError):
        step(GridField(ref_grid, u), 0.0, reference_problem(1.0))


def test_reaction_only_blowup_time():
    grid = build_grid(DomainSpec.interval(1.0), 0.0125)
    cfg = SolverConfig(growth_cap=2e-4, stop_threshold=1e6, reaction_only=True, snapshot_levels=())
    traj = integrate(flat_problem(), grid, cfg)
    assert traj.stop_reason == STOP_THRESHOLD
    assert traj.times[-1] == pytest.approx(0.1, rel=1e-3)


def test_zero_amplitude_decays(ref_grid):
    traj = integrate(reference_problem(0.0), ref_grid)
    assert traj.stop_reason == STOP_DECAY
    assert np.all(traj.umax == 0)
    assert np.all(traj.final.field.values == 0)


def test_small_amplitude_decays(ref_grid):
    traj = integrate(reference_problem(1.0), ref_grid, SolverConfig(decay_window=200))
    assert traj.stop_reason == STOP_DECAY
    assert traj.umax[-1] < traj.umax[0]


def test_max_steps(ref_grid):
    traj = integrate(reference_problem(160.0), ref_grid, SolverConfig(max_steps=50))
    assert traj.stop_reason == STOP_MAX_STEPS
    assert traj.n_steps == 50


def test_stop_threshold_must_exceed_initial(ref_grid):
    with pytest.raises(ValueError):
        integrate(reference_problem(160.0), ref_grid, SolverConfig(stop_threshold=100.0))


@pytest.fixture(scope="module")
def ref_traj():
    grid = build_grid(DomainSpec.interval(1.0), 0.0125)
    return integrate(reference_problem(160.0), grid)


def test_reference_run_invariants(ref_traj):
    t = ref_traj
    assert t.stop_reason == STOP_THRESHOLD
    assert np.all(np.diff(t.times) > 0)
    assert np.all(t.umax >= 0)
    assert t.umax[-1] >= 1e8
    late = t.umax >= 1e4
    assert np.all(t.argmax_node[late] == 80)
    for s in t.snapshots:
        assert np.all(s.field.values[t.grid.boundary] == 0)


def test_reference_run_symmetric(ref_traj):
    for s in ref_traj.snapshots:
        v = s.field.values
        assert np.max(np.abs(v - v[::-1])) <= 1e-12 * max(v.max(), 1.0)


def test_snapshot_levels(ref_traj):
    levels = [s for s in ref_traj.level_snapshots()]
    assert [s.level for s in levels] == [1e2, 1e3, 1e4, 1e5, 1e6]
    # 1e2 is already met by M phi at t = 0
    assert levels[0].time == 0.0
    for s in levels[1:]:
        assert s.umax >= s.level
    assert ref_traj.initial.tag == "initial" and ref_traj.final.tag == "final"


def test_comparison_in_M(ref_grid):
    cfg = SolverConfig(growth_cap=1e9)
    p1, p2 = reference_problem(5.0), reference_problem(7.0)
    u1, u2 = initial_state(p1, ref_grid), initial_state(p2, ref_grid)
    t = 0.0
    for _ in range(400):
        u1, dt1 = step(u1, t, p1, cfg)
        u2, dt2 = step(u2, t, p2, cfg)
        assert dt1 == dt2
        t += dt1
        assert np.all(u2.values >= u1.values)


def test_reaction_only_nodewise_oracle(ref_grid):
    eta = 0.05
    prob = reference_problem(10.0)
    cfg = SolverConfig(growth_cap=eta, reaction_only=True, snapshot_levels=(30.0, 100.0, 1e3))
    traj = integrate(prob, ref_grid, cfg)
    phi = np.cos(math.pi * ref_grid.coords[:, 0] / 2)
    ii = ref_grid.interior_index
    for s in traj.level_snapshots():
        if s.time == 0:
            continue
        exact = np.array([ode_value(10.0, phi[i], 1.0, 2.0, s.time) for i in ii])
        rel = np.abs(s.field.values[ii] / exact - 1)
        assert rel.max() <= 10 * eta


def test_monotone_diagnostic_when_initial_condition_holds(ref_grid):
    prob = bumped_profile_problem(160.0)
    assert check_initial_condition(prob, ref_grid)[0]
    traj = integrate(prob, ref_grid)
    assert traj.monotone_diagnostic == pytest.approx(1.0, abs=1e-12)


def test_numpy_step_matches_kernel(ref_grid):
    prob = reference_problem(160.0)
    cfg = SolverConfig(max_steps=30)
    traj = integrate(prob, ref_grid, cfg)
    u, t = initial_state(prob, ref_grid), 0.0
    for _ in range(30):
        u, dt = step(u, t, prob, cfg)
        t += dt
    assert t == pytest.approx(traj.times[-1], rel=1e-13)
    assert np.allclose(u.values, traj.final.field.values, rtol=1e-12, atol=0)


def test_two_dimensional_run_blows_up_at_center():
    dom = DomainSpec.rectangle(1.0, 1.0)
    grid = build_grid(dom, 0.0625)
    prob = ProblemSpec(dom, FieldSpec.constant(1.0), FieldSpec.cosine((1.0, 1.0)), 2.0, 200.0, 1.0)
    traj = integrate(prob, grid, SolverConfig(snapshot_levels=()))
    assert traj.blew_up
    assert np.allclose(grid.coords[traj.argmax_node[-1]], 0.0)
    # diffusion delays blow-up past the pointwise ODE time 1/M
    assert traj.times[-1] * 200 > 1.0
