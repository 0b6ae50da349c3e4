import json
import math
from pathlib import Path

import numpy as np
import pytest

from blowuplab.exceptions import ConfigError, InsufficientRowsError
from blowuplab.harness import (SweepRow, emit_outputs, fit_concentration, fit_convergence,
                               load_config, parse_config, run_single, run_sweep, sweep_reports)
from blowuplab.harness.cli import main
from blowuplab.harness.output import csv_columns, read_csv, row_record

ROOT = Path(__file__).resolve().parents[1]
REF = ROOT / "configs" / "reference.ini"
VBUMP = ROOT / "configs" / "vbump.ini"


def ref_text(**overrides):
    text = REF.read_text()
    for key, value in overrides.items():
        lines = [f"{key} = {value}" if ln.split("=")[0].strip() == key else ln for ln in text.splitlines()]
        text = "\n".join(lines) + "\n"
    return text


@pytest.fixture(scope="module")
def ref_cfg():
    return load_config(REF)


@pytest.fixture(scope="module")
def ref_rows(ref_cfg):
    return run_sweep(ref_cfg)


def test_parse_reference(ref_cfg):
    assert ref_cfg.problem.p == 2.0
    assert ref_cfg.h == 0.0125
    assert ref_cfg.m_values == (20.0, 40.0, 80.0, 160.0)
    assert ref_cfg.solver.snapshot_levels == (1e2, 1e3, 1e4)
    assert ref_cfg.problem.profile.kind == "cosine"
    assert ref_cfg.output.dir.is_absolute() or ref_cfg.output.dir.parts


def test_parse_vbump():
    cfg = load_config(VBUMP)
    V = cfg.problem.potential
    assert V.kind == "gaussian" and V.centers == ((0.3,),) and V.rates == (20.0,)
    assert "concentration" in cfg.analysis.checks


def test_parse_two_dimensional():
    text = """
[domain]
dimension = 2
shape = rectangle
half_length = 1.0
[potential]
kind = gaussian
c0 = 1
amplitudes = 1, 0.5
rates = 10, 5
centers = 0.2 0.1; -0.3, 0.0
[profile]
kind = cosine
[exponent]
p = 3
[solver]
h = 0.125
"""
    cfg = parse_config(text)
    assert cfg.problem.potential.centers == ((0.2, 0.1), (-0.3, 0.0))
    assert cfg.problem.profile.half_lengths == (1.0, 1.0)


def test_config_errors():
    with pytest.raises(ConfigError, match="strictly increasing"):
        parse_config(ref_text(m_values="20, 20, 40"))
    with pytest.raises(ConfigError, match="h"):
        parse_config(ref_text(h="0.5"))
    with pytest.raises(ConfigError, match="missing section"):
        parse_config("[domain]\ndimension = 1\n")
    with pytest.raises(ConfigError, match="unknown check"):
        parse_config(ref_text(checks="scaling, nonsense"))
    with pytest.raises(ConfigError):
        parse_config(ref_text(kind="sawtooth"))
    with pytest.raises(ConfigError):
        load_config(ROOT / "no-such-file.ini")


def test_run_single_reference(ref_cfg):
    row = run_single(ref_cfg, 160.0)
    assert row.stop_reason == "threshold-reached"
    # blow-up is delayed by diffusion: T M approaches 1 from above
    assert 1.0 < row.T_est_scaled <= 1.1
    assert row.blowup_point == (0.0,)
    assert row.concentration_residual == 0.0
    assert row.T_upper is None and "MTooSmallError" in row.error
    assert row.energy_pass


def test_run_single_zero_amplitude(ref_cfg):
    row = run_single(ref_cfg, 0.0)
    assert row.stop_reason == "decay-detected"
    assert row.T_est is None and row.blowup_point is None and row.E_final is None
    assert "no blow-up" in row.error


def test_run_single_invalid_problem():
    cfg = parse_config(ref_text(floor="2.0"))
    row = run_single(cfg, 20.0)
    assert row.stop_reason == "invalid-problem"
    assert "potential_floor" in row.error


def test_sweep_order_and_trend(ref_rows):
    assert [r.M for r in ref_rows] == [20.0, 40.0, 80.0, 160.0]
    tm = [r.T_est_scaled for r in ref_rows]
    assert np.all(np.diff(tm) < 0)
    assert np.all(np.diff([abs(v - 1) for v in tm]) < 0)


def test_singleton_sweep_equals_single():
    cfg = parse_config(ref_text(m_values="80"))
    [row] = run_sweep(cfg)
    single = run_single(cfg, 80.0)
    assert row_record(row, 1) == row_record(single, 1)


def test_parallel_sweep_matches_serial(ref_cfg, ref_rows):
    rows = run_sweep(ref_cfg, jobs=2)
    assert [row_record(r, 1) for r in rows] == [row_record(r, 1) for r in ref_rows]


def test_sweep_incremental_callback(ref_cfg):
    seen = []
    run_sweep(ref_cfg, on_row=lambda r: seen.append(r.M))
    assert seen == list(ref_cfg.m_values)


def synthetic_rows(Ms, scaled, r=None):
    rows = []
    for i, M in enumerate(Ms):
        rows.append(SweepRow(M=M, T_est=scaled[i] / M, T_est_scaled=scaled[i],
                             concentration_residual=None if r is None else r[i]))
    return rows


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_fit_convergence_power_law(p):
    Ms = [10.0, 40.0, 160.0, 640.0]
    A = 1.3
    rows = synthetic_rows(Ms, [A / (p - 1) + M ** (-(p - 1) / 3) for M in Ms])
    rep = fit_convergence(rows, A, p)
    assert rep.C2_fit == pytest.approx(1.0, abs=1e-9)
    assert rep.slope == pytest.approx(-(p - 1) / 3, abs=1e-9)
    assert rep.C1_fit is None and "C1" in rep.note


def test_fit_convergence_below():
    Ms = [10.0, 40.0, 160.0]
    rows = synthetic_rows(Ms, [1 - 2 * M ** -0.25 for M in Ms])
    rep = fit_convergence(rows, 1.0, 2.0)
    assert rep.C1_fit == pytest.approx(2.0, abs=1e-9)
    assert rep.C2_fit is None
    assert rep.slope == pytest.approx(-0.25, abs=1e-9)


def test_fit_convergence_exact_limit():
    rows = synthetic_rows([10.0, 20.0, 40.0], [1.0, 1.0, 1.0])
    rep = fit_convergence(rows, 1.0, 2.0)
    assert rep.C1_fit == 0.0 and rep.C2_fit == 0.0
    assert rep.slope is None and "undefined" in rep.note


def test_fit_convergence_insufficient():
    with pytest.raises(InsufficientRowsError):
        fit_convergence(synthetic_rows([10.0, 20.0], [1.1, 1.05]), 1.0, 2.0)


def test_fit_convergence_reference(ref_rows):
    rep = fit_convergence(ref_rows, 1.0, 2.0)
    # every row sits above the limit, so only C2 is fitted
    assert math.isfinite(rep.C2_fit) and rep.C1_fit is None
    assert rep.slope < 0 and rep.slope_stderr > 0


def test_fit_concentration_power_law():
    Ms = [10.0, 20.0, 40.0, 80.0]
    g = 0.25
    rows = synthetic_rows(Ms, [1.0] * 4, [M ** -g for M in Ms])
    fit = fit_concentration(rows, g)
    assert fit.C_fit == pytest.approx(1.0, abs=1e-12)
    assert fit.slope == pytest.approx(-g, abs=1e-12)


def test_fit_concentration_saturated(ref_rows):
    fit = fit_concentration(ref_rows, 0.25)
    assert fit.saturated and "saturated" in fit.note
    assert fit.n_excluded == 4


def test_emit_outputs(tmp_path, ref_cfg, ref_rows):
    reports = sweep_reports(ref_rows, ref_cfg)
    emit_outputs(ref_rows, reports, ref_cfg, tmp_path)
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0].split(",") == csv_columns(1)
    assert len(lines) == 5
    data = [ln for ln in (tmp_path / "plotdata" / "tm_vs_M.dat").read_text().splitlines() if not ln.startswith("#")]
    assert len(data) == 4
    jl = [json.loads(ln) for ln in (tmp_path / "results.jsonl").read_text().splitlines()]
    assert [j["M"] for j in jl] == [20.0, 40.0, 80.0, 160.0]
    assert jl[0]["T_upper"] is None
    back = read_csv(tmp_path / "results.csv")
    assert back[3]["T_est"] == ref_rows[3].T_est
    assert "checks:" in (tmp_path / "report.txt").read_text()
    assert len(list((tmp_path / "energy").glob("trace_M*.csv"))) == 4


def test_emit_outputs_empty(tmp_path, ref_cfg):
    reports = sweep_reports([], ref_cfg)
    emit_outputs([], reports, ref_cfg, tmp_path)
    assert (tmp_path / "results.csv").read_text().splitlines() == [",".join(csv_columns(1))]
    assert (tmp_path / "plotdata" / "tm_vs_M.dat").read_text().count("\n") == 1
    assert "rows: 0" in (tmp_path / "report.txt").read_text()


def test_snapshot_files(tmp_path):
    cfg = parse_config(ref_text(m_values="40", formats="csv, snapshots"))
    rows = run_sweep(cfg, keep_snapshots=True)
    emit_outputs(rows, sweep_reports(rows, cfg), cfg, tmp_path)
    files = sorted((tmp_path / "snapshots").glob("*.csv"))
    assert len(files) == len(rows[0].snapshots)
    head = files[0].read_text().splitlines()
    assert head[0].startswith("# time = ") and head[1].startswith("# u_max = ")
    assert head[2] == "x,u" and len(head) == 3 + 161


def test_cli_sweep_and_report(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["sweep", str(REF), "--out", str(out)]) == 0
    first = (out / "results.csv").read_bytes()
    assert main(["sweep", str(REF), "--out", str(out), "--jobs", "2"]) == 0
    assert (out / "results.csv").read_bytes() == first
    assert main(["report", str(out)]) == 0
    assert "PASS  scaling" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text(ref_text(h="0.5"))
    assert main(["sweep", str(bad)]) == 2
    assert main(["validate", str(REF)]) == 0
    assert main(["run", str(REF), "--M", "0"]) == 0
    assert main(["report", str(tmp_path / "nothing")]) == 2
    # energy check forced to fail with a negative slack tolerance
    strict = tmp_path / "strict.ini"
    text = ref_text(m_values="40, 80", dir=str(tmp_path / "strict"))
    strict.write_text(text.replace("set_fraction = 0.5", "set_fraction = 0.5\nc_slack = -1"))
    assert main(["sweep", str(strict)]) == 1
