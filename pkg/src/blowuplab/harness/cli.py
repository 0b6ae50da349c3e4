"""Command line: ``blowuplab validate|run|sweep|report``.

Exit codes: 0 when every configured check passes (skipped checks do not
fail), 1 when a check fails or validation fails, 2 on a configuration or I/O
error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..exceptions import ConfigError, InsufficientRowsError
from ..problem import check_initial_condition, validate_problem
from .config import load_config
from .output import (ResultsWriter, emit_outputs, read_csv, report_text, row_record,
                     rows_from_records)
from .sweep import (CheckResult, all_passed, fit_concentration, fit_convergence, run_checks,
                    run_single, run_sweep, sweep_reports)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.grid()
    report = validate_problem(cfg.problem, grid)
    print(f"grid: {grid.shape} nodes, h = {cfg.h:g}")
    print(report)
    for M in cfg.m_values:
        ok, worst = check_initial_condition(cfg.problem.with_amplitude(M), grid)
        print(f"initial condition at M = {M:g}: {'holds' if ok else 'fails'} (min margin {worst:.4g})")
    return EXIT_OK if report.ok else EXIT_FAIL


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.M is not None:
        M = args.M
    elif cfg.problem.M > 0:
        M = cfg.problem.M
    elif cfg.m_values:
        M = cfg.m_values[0]
    else:
        raise ConfigError("no amplitude: pass --M or set [amplitude] M")
    row = run_single(cfg, M)
    rec = row_record(row, cfg.problem.dimension)
    for k, v in rec.items():
        print(f"{k:>24}: {'null' if v is None else v}")
    checks = run_checks([row], cfg)
    for c in checks:
        print(f"{c.status}  {c.name}: {c.detail}")
    return EXIT_OK if all_passed(checks) and not row.error.startswith("validate") else EXIT_FAIL


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else cfg.output.dir
    keep = "snapshots" in cfg.output.formats
    dim = cfg.problem.dimension
    if "csv" in cfg.output.formats:
        with ResultsWriter(out / "results.csv", dim) as writer:
            rows = run_sweep(cfg, jobs=args.jobs, on_row=writer.write, keep_snapshots=keep)
    else:
        rows = run_sweep(cfg, jobs=args.jobs, keep_snapshots=keep)
    reports = sweep_reports(rows, cfg)
    emit_outputs(rows, reports, cfg, out)
    sys.stdout.write(report_text(rows, reports))
    return EXIT_OK if all_passed(reports["checks"]) else EXIT_FAIL


def _cmd_report(args) -> int:
    d = Path(args.results_dir)
    try:
        rows = rows_from_records(read_csv(d / "results.csv"))
        meta = json.loads((d / "meta.json").read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read results in {d}: {exc}") from exc
    reports = {"A": meta.get("A"), "p": meta.get("p"), "gamma": meta.get("gamma")}
    if reports["A"] is not None and reports["p"] is not None:
        try:
            reports["convergence"] = fit_convergence(rows, reports["A"], reports["p"])
        except InsufficientRowsError as exc:
            reports["convergence_error"] = str(exc)
    if reports["gamma"] is not None:
        reports["concentration"] = fit_concentration(rows, reports["gamma"])
    reports["checks"] = [CheckResult(c["name"], c["passed"], c["detail"]) for c in meta.get("checks", [])]
    sys.stdout.write(report_text(rows, reports))
    return EXIT_OK if all_passed(reports["checks"]) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowuplab",
                                 description="Blow-up experiments for u_t = Lap(u) + V(x) u^p.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config and the problem it describes")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="integrate and analyze one amplitude")
    p.add_argument("config")
    p.add_argument("--M", type=float, default=None, help="amplitude (default: [amplitude] M or the first sweep value)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run every M in [sweep] m_values and write results")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p.add_argument("--out", default=None, help="results directory (default: [output] dir)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="summarize an existing results directory")
    p.add_argument("results_dir")
    p.set_defaults(func=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
