"""Single runs, M-sweeps, fitted constants and the configured checks."""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..analysis import analyze, concentration_residual
from ..bounds import compute_A, gamma_exponent, lemma21_upper_bound, lemma22_rate_constant
from ..exceptions import BlowupLabError, ConfigError, InsufficientRowsError
from ..integrator import integrate
from ..problem import check_initial_condition, validate_problem
from ..selfsim import convergence_diagnostic, energy_inequality_check, profile_energy
from .config import ExperimentConfig

R_RESOLUTION = 1e-12
SATURATED = "concentration saturated at grid resolution"


@dataclass(eq=False)
class SweepRow:
    """One trajectory's worth of results.

    Any null analysis field comes with a reason in ``error``. Fields after
    ``error`` are diagnostics kept in memory but not written to results.csv.
    """

    M: float
    T_est: float | None = None
    T_est_scaled: float | None = None
    T_upper: float | None = None
    blowup_point: tuple[float, ...] | None = None
    concentration_residual: float | None = None
    rate_exponent: float | None = None
    w_center_final: float | None = None
    E_final: float | None = None
    E_target: float | None = None
    stop_reason: str = "not-run"
    error: str = ""
    A: float | None = None
    x_bar: tuple[float, ...] | None = None
    epsilon: float | None = None
    rate_sup: float | None = None
    C_rate: float | None = None
    initial_condition_ok: bool | None = None
    energy_slack: float | None = None
    energy_pass: bool | None = None
    n_steps: int = 0
    trace: dict | None = None
    snapshots: list = field(default_factory=list)

    def note(self, stage: str, exc) -> None:
        msg = f"{stage}: {type(exc).__name__}: {exc}" if isinstance(exc, BaseException) else f"{stage}: {exc}"
        self.error = f"{self.error}; {msg}" if self.error else msg


def run_single(config: ExperimentConfig, M: float, keep_snapshots: bool = False) -> SweepRow:
    """Validate, integrate, analyze and bound one amplitude.

    Module errors end up in ``row.error``; nothing is raised for a bad run.
    """
    row = SweepRow(M=float(M))
    problem = config.problem.with_amplitude(M)
    grid = config.grid()
    report = validate_problem(problem, grid)
    if not report.ok:
        row.stop_reason = "invalid-problem"
        row.note("validate", ", ".join(report.failures()))
        return row
    try:
        row.A, x_bar = compute_A(problem, grid)
        row.x_bar = tuple(float(v) for v in x_bar)
    except BlowupLabError as exc:
        row.note("weight", exc)
    try:
        traj = integrate(problem, grid, config.solver)
    except (BlowupLabError, ValueError, RuntimeError) as exc:
        row.stop_reason = "solver-error"
        row.note("integrate", exc)
        return row
    row.stop_reason = traj.stop_reason
    row.n_steps = traj.n_steps
    if keep_snapshots:
        row.snapshots = [(s.tag, s.level, s.time, np.array(s.field.values)) for s in traj.snapshots]
    if not traj.blew_up:
        row.note("analysis", f"no blow-up detected ({traj.stop_reason})")
        return row

    acfg = config.analysis
    try:
        est = analyze(traj, acfg.fit_window, acfg.set_fraction)
    except (BlowupLabError, ValueError) as exc:
        row.note("analysis", exc)
        return row
    p = problem.p
    row.T_est = est.T_est
    row.T_est_scaled = est.T_est * M ** (p - 1.0)
    row.blowup_point = tuple(float(v) for v in est.blowup_point)
    row.rate_exponent = est.rate_exponent
    if row.A is not None:
        try:
            row.concentration_residual = concentration_residual(est.blowup_point, problem, row.A)
        except BlowupLabError as exc:
            row.note("concentration", exc)

    lo, hi = acfg.fit_window
    sel = (traj.umax >= lo) & (traj.umax <= hi)
    if sel.any():
        remaining = traj.time_to_end()[sel] + est.T_after_last
        scaled = traj.umax[sel] * remaining ** (1.0 / (p - 1.0))
        row.rate_sup = float(scaled.max())
    row.C_rate = lemma22_rate_constant(problem, grid)
    row.initial_condition_ok = check_initial_condition(problem, grid)[0]

    try:
        bounds = lemma21_upper_bound(problem, grid)
        row.T_upper = bounds.T_upper
        row.epsilon = bounds.epsilon
    except BlowupLabError as exc:
        row.note("upper bound", exc)

    try:
        trace = convergence_diagnostic(traj.level_snapshots(), est.blowup_point, est.T_est, problem)
        row.w_center_final = float(trace.w_center[-1])
        row.E_final = float(trace.E_values[-1])
        row.E_target = trace.E_target
        row.trace = {"t": trace.times, "s": trace.s_values, "w_center": trace.w_center,
                     "E": trace.E_values, "k_target": trace.k_target}
        E_w0 = profile_energy(traj.initial, est.blowup_point, est.T_est, problem)
        row.energy_slack, row.energy_pass = energy_inequality_check(trace, E_w0, est.T_est,
                                                                    acfg.c_slack)
    except (BlowupLabError, ValueError) as exc:
        row.note("energy", exc)
    return row


def _run_cell(args):
    config, M, keep = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_single(config, M, keep)


def run_sweep(config: ExperimentConfig, jobs: int = 1, on_row=None,
              keep_snapshots: bool = False) -> list[SweepRow]:
    """Run every configured M. Rows come back, and are handed to ``on_row``, in M order.

    With ``jobs > 1`` cells run in worker processes; results are still
    released strictly in M order.
    """
    if not config.m_values:
        raise ConfigError("[sweep] m_values is empty")
    cells = [(config, M, keep_snapshots) for M in config.m_values]
    rows = []
    if jobs <= 1:
        for cell in cells:
            row = _run_cell(cell)
            rows.append(row)
            if on_row:
                on_row(row)
        return rows
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_cell, cell) for cell in cells]
        for fut in futures:
            row = fut.result()
            rows.append(row)
            if on_row:
                on_row(row)
    return rows


@dataclass(frozen=True)
class FitReport:
    C1_fit: float | None
    C2_fit: float | None
    slope: float | None
    slope_stderr: float | None
    note: str = ""


def _loglog(x, y):
    x, y = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if x.size == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return float(slope), float(y[0] - slope * x[0]), 0.0
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.intercept), float(fit.stderr)


def fit_convergence(rows, A: float, p: float) -> FitReport:
    """Constants of the two-sided window for ``T M^(p-1)`` around ``A/(p-1)``.

    C2 is the largest ``(T M^(p-1) - A/(p-1)) M^((p-1)/3)`` over rows above the
    limit, C1 the largest ``(A/(p-1) - T M^(p-1)) M^((p-1)/4)`` over rows below.
    The slope of ``log|T M^(p-1) - A/(p-1)|`` against ``log M`` is reported too.
    """
    valid = [r for r in rows if r.T_est_scaled is not None and r.M > 0]
    if len(valid) < 3:
        raise InsufficientRowsError(f"{len(valid)} rows with a blow-up time, need 3")
    limit = A / (p - 1.0)
    M = np.array([r.M for r in valid])
    d = np.array([r.T_est_scaled for r in valid]) - limit
    d[np.abs(d) <= 1e-12 * abs(limit)] = 0.0
    notes = []
    above, below = d >= 0, d <= 0
    C2 = float(np.max(d[above] * M[above] ** ((p - 1.0) / 3.0))) if above.any() else None
    C1 = float(np.max(-d[below] * M[below] ** ((p - 1.0) / 4.0))) if below.any() else None
    if C2 is None:
        notes.append("all rows below the limit; C2 not fitted")
    if C1 is None:
        notes.append("all rows above the limit; C1 not fitted")
    nz = d != 0
    slope = stderr = None
    if nz.sum() >= 2:
        slope, _, stderr = _loglog(M[nz], np.abs(d[nz]))
    else:
        notes.append("fewer than 2 rows off the limit; slope undefined")
    return FitReport(C1, C2, slope, stderr, "; ".join(notes))


@dataclass(frozen=True)
class ConcentrationFit:
    C_fit: float | None
    slope: float | None
    n_used: int
    n_excluded: int
    note: str = ""

    @property
    def saturated(self) -> bool:
        return self.C_fit is None


def fit_concentration(rows, gamma: float) -> ConcentrationFit:
    """``C = max r M^gamma`` and the slope of ``log r`` against ``log M``.

    Rows with ``r <= 1e-12`` are below grid resolution and are excluded; if
    fewer than three remain the result is reported as saturated.
    """
    have = [r for r in rows if r.concentration_residual is not None and r.M > 0]
    used = [r for r in have if r.concentration_residual > R_RESOLUTION]
    excluded = len(have) - len(used)
    if len(used) < 3:
        return ConcentrationFit(None, None, len(used), excluded, SATURATED)
    M = np.array([r.M for r in used])
    res = np.array([r.concentration_residual for r in used])
    C = float(np.max(res * M ** gamma))
    slope, _, _ = _loglog(M, res)
    note = f"{excluded} row(s) below resolution excluded" if excluded else ""
    return ConcentrationFit(C, slope, len(used), excluded, note)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool | None
    detail: str

    @property
    def status(self) -> str:
        return {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]


def _strictly_decreasing(v) -> bool:
    return bool(np.all(np.diff(np.asarray(v, dtype=float)) < 0))


def _monotone(v) -> bool:
    d = np.diff(np.asarray(v, dtype=float))
    return bool(np.all(d > 0) or np.all(d < 0))


def check_upper_bound(rows) -> CheckResult:
    adm = [r for r in rows if r.T_upper is not None and r.T_est is not None]
    if not adm:
        return CheckResult("upper_bound", None, "no row has an admissible epsilon root")
    bad = [r.M for r in adm if not r.T_est <= r.T_upper]
    return CheckResult("upper_bound", not bad,
                       f"{len(adm)} admissible row(s); T_est > T_upper at M = {bad}" if bad
                       else f"T_est <= T_upper on {len(adm)} admissible row(s)")


def check_scaling(rows, A: float | None, p: float) -> CheckResult:
    valid = [r for r in rows if r.T_est_scaled is not None]
    if len(valid) < 2 or A is None:
        return CheckResult("scaling", None, f"{len(valid)} row(s) with a blow-up time, need 2")
    if len(valid) < len(rows):
        return CheckResult("scaling", False, f"{len(rows) - len(valid)} row(s) without a blow-up time")
    tm = [r.T_est_scaled for r in valid]
    dist = [abs(v - A / (p - 1.0)) for v in tm]
    ok = _monotone(tm) and _strictly_decreasing(dist)
    return CheckResult("scaling", ok, "T M^(p-1) = " + ", ".join(f"{v:.6g}" for v in tm)
                       + f"; limit A/(p-1) = {A / (p - 1.0):.6g}")


def check_energy(rows) -> CheckResult:
    have = [r for r in rows if r.energy_pass is not None]
    if not have:
        return CheckResult("energy", None, "no row has an energy trace")
    bad = [r.M for r in have if not r.energy_pass]
    worst = max(r.energy_slack for r in have)
    return CheckResult("energy", not bad, f"max slack {worst:.4g} over {len(have)} row(s)"
                       + (f"; exceeded at M = {bad}" if bad else ""))


def check_concentration(rows) -> CheckResult:
    have = [r for r in rows if r.concentration_residual is not None and r.x_bar is not None]
    if len(have) < 2:
        return CheckResult("concentration", None, f"{len(have)} row(s) with a residual, need 2")
    fit = fit_concentration(have, 1.0)
    if fit.saturated:
        return CheckResult("concentration", True, SATURATED)
    dist = [float(np.linalg.norm(np.subtract(r.blowup_point, r.x_bar))) for r in have]
    res = [r.concentration_residual for r in have]
    ok = _strictly_decreasing(dist) and _strictly_decreasing(res)
    return CheckResult("concentration", ok, "|a - x_bar| = " + ", ".join(f"{v:.3g}" for v in dist)
                       + "; r = " + ", ".join(f"{v:.3g}" for v in res))


def run_checks(rows, config: ExperimentConfig) -> list[CheckResult]:
    A = next((r.A for r in rows if r.A is not None), None)
    p = config.problem.p
    out = []
    for name in config.analysis.checks:
        if name == "upper_bound":
            out.append(check_upper_bound(rows))
        elif name == "scaling":
            out.append(check_scaling(rows, A, p))
        elif name == "energy":
            out.append(check_energy(rows))
        elif name == "concentration":
            out.append(check_concentration(rows))
    return out


def sweep_reports(rows, config: ExperimentConfig) -> dict:
    """Fitted constants and check results for a finished sweep."""
    p = config.problem.p
    A = next((r.A for r in rows if r.A is not None), None)
    reports: dict = {"A": A, "p": p, "gamma": gamma_exponent(p)}
    if A is not None:
        try:
            reports["convergence"] = fit_convergence(rows, A, p)
        except InsufficientRowsError as exc:
            reports["convergence_error"] = str(exc)
    reports["concentration"] = fit_concentration(rows, reports["gamma"])
    reports["checks"] = run_checks(rows, config)
    return reports


def all_passed(checks) -> bool:
    return all(c.passed is not False for c in checks)
