"""Config files, sweeps, fitted constants, result files and the command line."""
from .config import AnalysisConfig, ExperimentConfig, OutputConfig, load_config, parse_config
from .sweep import (CheckResult, ConcentrationFit, FitReport, SweepRow, fit_concentration,
                    fit_convergence, run_checks, run_single, run_sweep, sweep_reports)
from .output import emit_outputs
