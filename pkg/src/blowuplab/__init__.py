"""Numerical laboratory for finite-time blow-up of u_t = Lap(u) + V(x) u^p."""
from .problem import (
    DomainSpec,
    FieldSpec,
    Grid,
    GridField,
    ProblemSpec,
    ValidationReport,
    argmax_weight,
    build_grid,
    check_initial_condition,
    sample_field,
    validate_problem,
)
from .integrator import SolverConfig, TrajectoryRecord, integrate, step

__version__ = "0.1.0"
