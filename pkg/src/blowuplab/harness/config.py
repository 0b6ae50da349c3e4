"""Experiment configuration files.

Flat ``[section]`` / ``key = value`` text. Lists are comma separated; gaussian
centers are separated by ``;`` with coordinates split by commas or spaces::

    [domain]
    dimension = 1
    shape = interval
    half_length = 1.0

    [potential]
    kind = gaussian
    c0 = 1.0
    amplitudes = 1.0
    rates = 20.0
    centers = 0.3
    floor = 1.0

    [profile]
    kind = cosine

    [exponent]
    p = 2

    [solver]
    h = 0.0125
    snapshot_levels = 1e2, 1e3, 1e4

    [sweep]
    m_values = 20, 40, 80, 160
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..analysis import DEFAULT_WINDOW
from ..exceptions import ConfigError, GridError
from ..integrator import SolverConfig
from ..problem import DomainSpec, FieldSpec, ProblemSpec, build_grid
from ..selfsim import DEFAULT_C_SLACK

REQUIRED_SECTIONS = ("domain", "potential", "profile", "exponent", "solver")
KNOWN_CHECKS = ("upper_bound", "scaling", "energy", "concentration")
KNOWN_FORMATS = ("csv", "jsonl", "plotdata", "report", "snapshots", "energy")


@dataclass(frozen=True)
class AnalysisConfig:
    fit_window: tuple[float, float] = DEFAULT_WINDOW
    set_fraction: float = 0.5
    c_slack: float = DEFAULT_C_SLACK
    checks: tuple[str, ...] = ("upper_bound", "scaling", "energy")


@dataclass(frozen=True)
class OutputConfig:
    dir: Path = Path("results")
    formats: tuple[str, ...] = ("csv", "jsonl", "plotdata", "report", "energy")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    h: float
    solver: SolverConfig = SolverConfig()
    m_values: tuple[float, ...] = ()
    analysis: AnalysisConfig = AnalysisConfig()
    output: OutputConfig = OutputConfig()
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        ms = self.m_values
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigError(f"m_values must be strictly increasing, got {list(ms)}")
        if any(m < 0 for m in ms):
            raise ConfigError("m_values must be nonnegative")
        try:
            build_grid(self.problem.domain, self.h)
        except GridError as exc:
            raise ConfigError(f"[solver] h: {exc}") from exc

    def grid(self):
        return build_grid(self.problem.domain, self.h)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _points(text: str, dim: int) -> tuple[tuple[float, ...], ...]:
    if dim == 1:
        return tuple((v,) for v in _floats(text))
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            pts.append(tuple(float(v) for v in chunk.replace(",", " ").split()))
    return tuple(pts)


def _domain(sec) -> DomainSpec:
    dim = sec.getint("dimension", fallback=1)
    shape = sec.get("shape", fallback="interval" if dim == 1 else "rectangle").strip()
    hl = _floats(sec.get("half_length", fallback="1.0"))
    if shape == "rectangle" and len(hl) == 1:
        hl = hl * 2
    return DomainSpec(dim, shape, hl)


def _field(sec, domain: DomainSpec) -> FieldSpec:
    kind = sec.get("kind", fallback="constant").strip()
    dim = domain.dimension
    hl = sec.get("half_lengths")
    half_lengths = _floats(hl) if hl else domain.box_half_lengths
    c0 = sec.getfloat("c0", fallback=0.0 if kind == "cosine_gaussian" else 1.0)
    amps = _floats(sec.get("amplitudes", fallback=""))
    rates = _floats(sec.get("rates", fallback=""))
    centers = _points(sec.get("centers", fallback=""), dim)
    if kind == "constant":
        return FieldSpec.constant(sec.getfloat("c0", fallback=1.0))
    if kind == "gaussian":
        return FieldSpec.gaussian(c0, amps, rates, centers)
    if kind == "cosine":
        return FieldSpec.cosine(half_lengths)
    if kind == "cosine_gaussian":
        return FieldSpec.cosine_gaussian(half_lengths, c0, amps, rates, centers)
    raise ConfigError(f"unknown field kind {kind!r}")


def _bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    missing = [s for s in REQUIRED_SECTIONS if not cp.has_section(s)]
    if missing:
        raise ConfigError(f"missing section(s): {', '.join(missing)}")
    try:
        domain = _domain(cp["domain"])
        potential = _field(cp["potential"], domain)
        profile = _field(cp["profile"], domain)
        p = cp["exponent"].getfloat("p")
        if p is None:
            raise ConfigError("[exponent] p is required")
        M = cp.getfloat("amplitude", "M", fallback=0.0) if cp.has_section("amplitude") else 0.0
        floor = cp["potential"].getfloat("floor", fallback=potential.c0)
        problem = ProblemSpec(domain, potential, profile, p, M, floor)

        s = cp["solver"]
        if "h" not in s:
            raise ConfigError("[solver] h is required")
        defaults = SolverConfig()
        solver = SolverConfig(
            diffusion_safety=s.getfloat("sigma", fallback=defaults.diffusion_safety),
            growth_cap=s.getfloat("eta", fallback=defaults.growth_cap),
            stop_threshold=s.getfloat("u_stop", fallback=defaults.stop_threshold),
            max_steps=int(s.getfloat("max_steps", fallback=defaults.max_steps)),
            snapshot_levels=_floats(s.get("snapshot_levels", fallback="1e2, 1e3, 1e4")),
            reaction_only=_bool(s.get("reaction_only", fallback="false")),
            decay_window=s.getint("decay_window", fallback=defaults.decay_window),
        )
        m_values = ()
        if cp.has_section("sweep"):
            m_values = _floats(cp["sweep"].get("m_values", fallback=""))
        analysis = AnalysisConfig()
        if cp.has_section("analysis"):
            a = cp["analysis"]
            checks = tuple(c.strip() for c in a.get("checks", fallback=",".join(analysis.checks)).split(",") if c.strip())
            unknown = [c for c in checks if c not in KNOWN_CHECKS]
            if unknown:
                raise ConfigError(f"unknown check(s): {unknown}")
            analysis = AnalysisConfig(
                fit_window=(a.getfloat("fit_window_lo", fallback=DEFAULT_WINDOW[0]),
                            a.getfloat("fit_window_hi", fallback=math.inf)),
                set_fraction=a.getfloat("set_fraction", fallback=0.5),
                c_slack=a.getfloat("c_slack", fallback=DEFAULT_C_SLACK),
                checks=checks,
            )
        output = OutputConfig()
        if cp.has_section("output"):
            o = cp["output"]
            formats = tuple(f.strip() for f in o.get("formats", fallback=",".join(output.formats)).split(",") if f.strip())
            unknown = [f for f in formats if f not in KNOWN_FORMATS]
            if unknown:
                raise ConfigError(f"unknown output format(s): {unknown}")
            out_dir = Path(o.get("dir", fallback="results"))
            if source and not out_dir.is_absolute():
                out_dir = Path(source).parent / out_dir
            output = OutputConfig(out_dir, formats)
        return ExperimentConfig(problem, s.getfloat("h"), solver, m_values, analysis, output, source)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, source=str(path))
