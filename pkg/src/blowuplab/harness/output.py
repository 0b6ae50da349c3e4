"""Result files: results.csv / results.jsonl, plot data, energy traces and the text report.

Floats are written with ``repr`` so files are byte-identical across reruns.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .sweep import CheckResult, ConcentrationFit, FitReport, SweepRow

AXES = ("x", "y")


def csv_columns(dim: int) -> list[str]:
    point = [f"blowup_point_{AXES[i]}" for i in range(dim)]
    return (["M", "T_est", "T_est_scaled", "T_upper"] + point
            + ["concentration_residual", "rate_exponent", "w_center_final", "E_final",
               "E_target", "stop_reason", "error"])


def _num(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def row_record(row: SweepRow, dim: int) -> dict:
    """Serialized fields of a row; ``None`` marks a null."""
    rec = {"M": row.M, "T_est": row.T_est, "T_est_scaled": row.T_est_scaled, "T_upper": row.T_upper}
    for i in range(dim):
        rec[f"blowup_point_{AXES[i]}"] = None if row.blowup_point is None else row.blowup_point[i]
    rec.update(concentration_residual=row.concentration_residual, rate_exponent=row.rate_exponent,
               w_center_final=row.w_center_final, E_final=row.E_final, E_target=row.E_target,
               stop_reason=row.stop_reason, error=row.error)
    return rec


def _csv_cells(rec: dict) -> list[str]:
    return [v if isinstance(v, str) else _num(v) for v in rec.values()]


class ResultsWriter:
    """Appends rows to results.csv as they arrive, flushing after each one."""

    def __init__(self, path, dim: int):
        self.path = Path(path)
        self.dim = dim
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(csv_columns(dim))
        self._fh.flush()

    def write(self, row: SweepRow) -> None:
        self._w.writerow(_csv_cells(row_record(row, self.dim)))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(rows, path, dim: int) -> None:
    with ResultsWriter(path, dim) as w:
        for row in rows:
            w.write(row)


def read_csv(path) -> list[dict]:
    """Rows of a results.csv with numeric cells parsed and empty cells as ``None``."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            parsed = {}
            for k, v in rec.items():
                if k in ("stop_reason", "error"):
                    parsed[k] = v
                else:
                    parsed[k] = float(v) if v != "" else None
            out.append(parsed)
    return out


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def write_jsonl(rows, path, dim: int) -> None:
    with open(path, "w") as fh:
        for row in rows:
            rec = {k: _json_safe(v) for k, v in row_record(row, dim).items()}
            fh.write(json.dumps(rec) + "\n")


def _write_dat(path, pairs, header: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for a, b in pairs:
            fh.write(f"{float(a)!r} {float(b)!r}\n")


def write_plotdata(rows, out_dir) -> None:
    d = Path(out_dir) / "plotdata"
    d.mkdir(parents=True, exist_ok=True)
    _write_dat(d / "tm_vs_M.dat", [(r.M, r.T_est_scaled) for r in rows if r.T_est_scaled is not None],
               "M T_est*M^(p-1)")
    _write_dat(d / "r_vs_M.dat",
               [(r.M, r.concentration_residual) for r in rows if r.concentration_residual is not None],
               "M concentration_residual")
    traced = [r for r in rows if r.trace is not None]
    pairs = []
    if traced:
        tr = traced[-1].trace
        pairs = list(zip(tr["s"], tr["E"]))
    _write_dat(d / "energy_vs_s.dat", pairs, "s E(w(s))" + (f" at M = {traced[-1].M!r}" if traced else ""))


def write_energy_traces(rows, out_dir) -> None:
    d = Path(out_dir) / "energy"
    d.mkdir(parents=True, exist_ok=True)
    for r in rows:
        if r.trace is None:
            continue
        tr = r.trace
        with open(d / f"trace_M{r.M:g}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "s", "w_center", "E", "k_target", "E_target"])
            for t, s, wc, E in zip(tr["t"], tr["s"], tr["w_center"], tr["E"]):
                w.writerow([_num(t), _num(s), _num(wc), _num(E), _num(tr["k_target"]), _num(r.E_target)])


def write_snapshots(rows, config: ExperimentConfig, out_dir) -> None:
    """One CSV per stored snapshot: node coordinates then value, time and u_max in the header."""
    grid = config.grid()
    d = Path(out_dir) / "snapshots"
    d.mkdir(parents=True, exist_ok=True)
    names = [f"{AXES[i]}" for i in range(grid.dimension)] + ["u"]
    for r in rows:
        for k, (tag, level, t, values) in enumerate(r.snapshots):
            label = f"{tag}" if level is None else f"{tag}{level:g}"
            with open(d / f"M{r.M:g}_{k:02d}_{label}.csv", "w", newline="") as fh:
                fh.write(f"# time = {float(t)!r}\n# u_max = {float(values.max())!r}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(names)
                for c, v in zip(grid.coords, values):
                    w.writerow([_num(x) for x in c] + [_num(v)])


def _fmt(v, spec: str = ".6g") -> str:
    return "null" if v is None else format(v, spec)


def report_text(rows, reports: dict) -> str:
    lines = [f"rows: {len(rows)}"]
    A = reports.get("A")
    p = reports.get("p")
    if A is not None and p is not None:
        lines.append(f"A = {A:.10g}, limit A/(p-1) = {A / (p - 1.0):.10g}, p = {p:g}")
    if "gamma" in reports:
        lines.append(f"gamma = {reports['gamma']:.6g}")
    lines.append("")
    lines.append(f"{'M':>10} {'T_est*M^(p-1)':>14} {'T_upper':>12} {'r':>12} {'rate_exp':>10}  stop_reason")
    for r in rows:
        lines.append(f"{r.M:>10g} {_fmt(r.T_est_scaled):>14} {_fmt(r.T_upper):>12} "
                     f"{_fmt(r.concentration_residual, '.4g'):>12} {_fmt(r.rate_exponent, '.5g'):>10}  "
                     f"{r.stop_reason}" + (f"  [{r.error}]" if r.error else ""))
    lines.append("")
    conv = reports.get("convergence")
    if isinstance(conv, FitReport):
        lines.append(f"convergence: C1_fit = {_fmt(conv.C1_fit)}, C2_fit = {_fmt(conv.C2_fit)}, "
                     f"slope = {_fmt(conv.slope)} +- {_fmt(conv.slope_stderr, '.3g')}"
                     + (f" ({conv.note})" if conv.note else ""))
    elif "convergence_error" in reports:
        lines.append(f"convergence: not fitted ({reports['convergence_error']})")
    conc = reports.get("concentration")
    if isinstance(conc, ConcentrationFit):
        if conc.saturated:
            lines.append(f"concentration: {conc.note}")
        else:
            lines.append(f"concentration: C_fit = {conc.C_fit:.6g}, slope = {conc.slope:.6g}"
                         + (f" ({conc.note})" if conc.note else ""))
    checks = reports.get("checks", [])
    if checks:
        lines.append("")
        lines.append("checks:")
        for c in checks:
            lines.append(f"  {c.status}  {c.name}: {c.detail}")
    return "\n".join(lines) + "\n"


def _meta(reports: dict, config: ExperimentConfig) -> dict:
    conv = reports.get("convergence")
    conc = reports.get("concentration")
    return {
        "source": config.source,
        "p": reports.get("p"),
        "A": reports.get("A"),
        "gamma": reports.get("gamma"),
        "dimension": config.problem.dimension,
        "h": config.h,
        "m_values": list(config.m_values),
        "convergence": None if not isinstance(conv, FitReport) else vars(conv),
        "concentration": None if not isinstance(conc, ConcentrationFit) else vars(conc),
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                   for c in reports.get("checks", [])],
    }


def emit_outputs(rows, reports: dict, config: ExperimentConfig, out_dir=None) -> Path:
    """Write every configured output format into ``out_dir`` (default: the config's)."""
    out = Path(out_dir) if out_dir is not None else config.output.dir
    out.mkdir(parents=True, exist_ok=True)
    dim = config.problem.dimension
    fmts = config.output.formats
    if "csv" in fmts:
        write_csv(rows, out / "results.csv", dim)
    if "jsonl" in fmts:
        write_jsonl(rows, out / "results.jsonl", dim)
    if "plotdata" in fmts:
        write_plotdata(rows, out)
    if "energy" in fmts:
        write_energy_traces(rows, out)
    if "snapshots" in fmts:
        write_snapshots(rows, config, out)
    if "report" in fmts:
        (out / "report.txt").write_text(report_text(rows, reports))
    (out / "meta.json").write_text(json.dumps(_meta(reports, config), indent=2, default=_default) + "\n")
    return out


def _default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"not serializable: {type(v)}")


def rows_from_records(records) -> list[SweepRow]:
    """Rebuild rows (serialized fields only) from parsed CSV records."""
    rows = []
    for rec in records:
        pt = [rec[k] for k in rec if k.startswith("blowup_point_")]
        rows.append(SweepRow(
            M=rec["M"], T_est=rec["T_est"], T_est_scaled=rec["T_est_scaled"], T_upper=rec["T_upper"],
            blowup_point=None if any(v is None for v in pt) else tuple(pt),
            concentration_residual=rec["concentration_residual"], rate_exponent=rec["rate_exponent"],
            w_center_final=rec["w_center_final"], E_final=rec["E_final"], E_target=rec["E_target"],
            stop_reason=rec["stop_reason"], error=rec["error"],
        ))
    return rows


__all__ = ["CheckResult", "ResultsWriter", "csv_columns", "emit_outputs", "read_csv",
           "report_text", "row_record", "rows_from_records", "write_csv"]
