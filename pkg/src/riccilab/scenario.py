"""Scenario configuration: a flat `section.key = value` text format, validation
that collects every problem instead of failing fast, and builders that turn a
spec into an initial state plus flow problem.

Geometry families:
  flat-torus        periodic x periodic, identity metric (held exactly flat)
  conformal-torus   periodic x periodic, u(0) = amplitude * sin(2 pi x / lx)
  warped-cylinder   truncated x, periodic theta; f(x,0) = a - b exp(-(x/w)^2), h = 1
  conformal-plane   both axes truncated; the cigar profile u = -log(1+r^2)/2

Tracked-form presets: "dtheta", "sinx_dx", and "dtheta_dsinx:<c>" which is
dtheta + c d(sin x); all are exactly closed at the stencil level.
"""

from __future__ import annotations

import difflib
import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ScenarioError
from .flows import FlowProblem, FlowState, IntegratorSpec
from .functionals import ThetaCircle, make_probe
from .geometry import (Grid2D, MetricField, OneFormField, ScalarField,
                       conformal_metric, flat_metric, warped_metric)

FAMILIES = ("flat-torus", "conformal-torus", "warped-cylinder", "conformal-plane")

_GRID_DEFAULTS = {
    "flat-torus": (64, 64, 2 * math.pi, 2 * math.pi),
    "conformal-torus": (64, 64, 2 * math.pi, 2 * math.pi),
    "warped-cylinder": (256, 32, 20.0, 2 * math.pi),
    "conformal-plane": (129, 129, 16.0, 16.0),
}


@dataclass
class FormSpec:
    label: str
    preset: str            # dtheta | sinx_dx | dtheta_dsinx
    coeff: float = 0.0

    def token(self) -> str:
        if self.preset == "dtheta_dsinx":
            return f"{self.preset}:{self.coeff!r}"
        return self.preset


@dataclass
class ProbeSpec:
    label: str
    form: str
    cycle_x: int | None = None    # None = the grid origin column


@dataclass
class ScenarioSpec:
    name: str = "scenario"
    family: str = "flat-torus"
    nx: int = 0                   # 0 = family default
    ny: int = 0
    lx: float = 0.0
    ly: float = 0.0
    metric_amplitude: float = 0.05    # conformal-torus seed
    metric_outer: float = 2.0         # warped: f = outer - dip * exp(-(x/width)^2)
    metric_dip: float = 1.0
    metric_width: float = 1.0
    metric_path: str = "auto"         # "auto" or "general"
    evolve_metric: bool = True
    forms: list = field(default_factory=list)        # [FormSpec]
    probes: list = field(default_factory=list)       # [ProbeSpec]
    gauge_form: str = ""              # label of the form the gauge flow shadows
    subsolution: str = "none"         # none | one-plus-cos | bump
    sub_amplitude: float = 1.0
    sub_width: float = 2.0
    sink: float = 0.0
    form_operator: str = "dd"
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    buffer_threshold: float = 1e-6
    monitor_energy: bool = True


# ------------------------------------------------------------------- key table
def _set_form(spec, label, token):
    preset, _, coeff = token.partition(":")
    spec.forms = [fs for fs in spec.forms if fs.label != label]
    spec.forms.append(FormSpec(label, preset, float(coeff) if coeff else 0.0))


def _set_probe_form(spec, label, value):
    probe = _probe(spec, label)
    probe.form = value


def _set_probe_cycle(spec, label, value):
    probe = _probe(spec, label)
    probe.cycle_x = None if value == "auto" else int(value)


def _probe(spec, label) -> ProbeSpec:
    for p in spec.probes:
        if p.label == label:
            return p
    p = ProbeSpec(label, "")
    spec.probes.append(p)
    return p


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "on", "1"):
        return True
    if s.lower() in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float(s: str) -> float:
    if s.lower() in ("inf", "infinity"):
        return math.inf
    return float(s)


# key -> (setter(spec, value_str), serializer(spec) -> str or None to omit)
_KEYS = {
    "name": (lambda s, v: setattr(s, "name", v), lambda s: s.name),
    "family": (lambda s, v: setattr(s, "family", v), lambda s: s.family),
    "grid.nx": (lambda s, v: setattr(s, "nx", int(v)), lambda s: str(s.nx)),
    "grid.ny": (lambda s, v: setattr(s, "ny", int(v)), lambda s: str(s.ny)),
    "grid.lx": (lambda s, v: setattr(s, "lx", _parse_float(v)), lambda s: repr(s.lx)),
    "grid.ly": (lambda s, v: setattr(s, "ly", _parse_float(v)), lambda s: repr(s.ly)),
    "metric.amplitude": (lambda s, v: setattr(s, "metric_amplitude", _parse_float(v)),
                         lambda s: repr(s.metric_amplitude)),
    "metric.outer_radius": (lambda s, v: setattr(s, "metric_outer", _parse_float(v)),
                            lambda s: repr(s.metric_outer)),
    "metric.dip": (lambda s, v: setattr(s, "metric_dip", _parse_float(v)),
                   lambda s: repr(s.metric_dip)),
    "metric.width": (lambda s, v: setattr(s, "metric_width", _parse_float(v)),
                     lambda s: repr(s.metric_width)),
    "metric.path": (lambda s, v: setattr(s, "metric_path", v), lambda s: s.metric_path),
    "flow.evolve_metric": (lambda s, v: setattr(s, "evolve_metric", _parse_bool(v)),
                           lambda s: str(s.evolve_metric).lower()),
    "flow.form_operator": (lambda s, v: setattr(s, "form_operator", v),
                           lambda s: s.form_operator),
    "gauge.form": (lambda s, v: setattr(s, "gauge_form", v),
                   lambda s: s.gauge_form or None),
    "subsolution.preset": (lambda s, v: setattr(s, "subsolution", v),
                           lambda s: s.subsolution),
    "subsolution.amplitude": (lambda s, v: setattr(s, "sub_amplitude", _parse_float(v)),
                              lambda s: repr(s.sub_amplitude)),
    "subsolution.width": (lambda s, v: setattr(s, "sub_width", _parse_float(v)),
                          lambda s: repr(s.sub_width)),
    "subsolution.sink": (lambda s, v: setattr(s, "sink", _parse_float(v)),
                         lambda s: repr(s.sink)),
    "integrator.scheme": (lambda s, v: setattr(s.integrator, "scheme", v),
                          lambda s: s.integrator.scheme),
    "integrator.cfl": (lambda s, v: setattr(s.integrator, "cfl", _parse_float(v)),
                       lambda s: repr(s.integrator.cfl)),
    "integrator.dt_cap": (lambda s, v: setattr(s.integrator, "dt_cap", _parse_float(v)),
                          lambda s: repr(s.integrator.dt_cap)),
    "integrator.t_final": (lambda s, v: setattr(s.integrator, "t_final", _parse_float(v)),
                           lambda s: repr(s.integrator.t_final)),
    "integrator.max_steps": (lambda s, v: setattr(s.integrator, "max_steps", int(v)),
                             lambda s: str(s.integrator.max_steps)),
    "output.cadence": (lambda s, v: setattr(s.integrator, "cadence", int(v)),
                       lambda s: str(s.integrator.cadence)),
    "output.snapshot_every": (lambda s, v: setattr(s.integrator, "snapshot_every", int(v)),
                              lambda s: str(s.integrator.snapshot_every)),
    "buffer.threshold": (lambda s, v: setattr(s, "buffer_threshold", _parse_float(v)),
                         lambda s: repr(s.buffer_threshold)),
    "monitor.energy": (lambda s, v: setattr(s, "monitor_energy", _parse_bool(v)),
                       lambda s: str(s.monitor_energy).lower()),
}


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse and validate; raises ScenarioError carrying every problem found."""
    spec = ScenarioSpec()
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _KEYS:
                _KEYS[key][0](spec, value)
            elif key.startswith("form.") and key.count(".") == 1:
                _set_form(spec, key.split(".", 1)[1], value)
            elif key.startswith("probe.") and key.endswith(".form"):
                _set_probe_form(spec, key.split(".")[1], value)
            elif key.startswith("probe.") and key.endswith(".cycle_x"):
                _set_probe_cycle(spec, key.split(".")[1], value)
            else:
                near = difflib.get_close_matches(key, list(_KEYS), n=1, cutoff=0.0)
                hint = f" (nearest valid key: {near[0]!r})" if near else ""
                problems.append(f"line {lineno}: unknown key {key!r}{hint}")
        except (ValueError, TypeError) as e:
            problems.append(f"line {lineno}: bad value for {key!r}: {e}")

    _fill_defaults(spec)
    problems.extend(validate(spec))
    if problems:
        raise ScenarioError(problems)
    return spec


def _fill_defaults(spec: ScenarioSpec):
    nx, ny, lx, ly = _GRID_DEFAULTS.get(spec.family, _GRID_DEFAULTS["flat-torus"])
    spec.nx = spec.nx or nx
    spec.ny = spec.ny or ny
    spec.lx = spec.lx or lx
    spec.ly = spec.ly or ly
    spec.probes.sort(key=lambda p: p.label)
    spec.forms.sort(key=lambda f: f.label)


def validate(spec: ScenarioSpec) -> list:
    problems = []
    if spec.family not in FAMILIES:
        near = difflib.get_close_matches(spec.family, FAMILIES, n=1)
        hint = f" (did you mean {near[0]!r}?)" if near else ""
        problems.append(f"unknown family {spec.family!r}{hint}")
        return problems
    if spec.nx < 8 or spec.ny < 8:
        problems.append(f"grid {spec.nx}x{spec.ny} too small (need >= 8 per axis)")
    if spec.lx <= 0 or spec.ly <= 0:
        problems.append("domain lengths must be positive")
    if spec.family == "warped-cylinder":
        if spec.metric_outer - spec.metric_dip <= 0:
            problems.append(
                f"f not positive: outer_radius - dip = "
                f"{spec.metric_outer - spec.metric_dip:g} <= 0")
        if spec.metric_width <= 0:
            problems.append("neck width must be positive")
    if spec.metric_path not in ("auto", "general"):
        problems.append(f"metric.path must be 'auto' or 'general', got {spec.metric_path!r}")
    if spec.form_operator not in ("dd", "bochner"):
        problems.append(f"form operator must be 'dd' or 'bochner', got {spec.form_operator!r}")
    for fs in spec.forms:
        if fs.preset not in ("dtheta", "sinx_dx", "dtheta_dsinx"):
            problems.append(f"form {fs.label!r}: unknown preset {fs.preset!r}")
    labels = {fs.label for fs in spec.forms}
    for p in spec.probes:
        if p.form not in labels:
            problems.append(f"probe {p.label!r} references unknown form {p.form!r}")
        if p.cycle_x is not None and not (0 <= p.cycle_x < max(spec.nx, 1)):
            problems.append(f"probe {p.label!r}: cycle_x {p.cycle_x} outside the grid")
    if spec.probes and spec.family == "conformal-plane":
        problems.append("theta-circle probes need a periodic theta axis")
    if spec.gauge_form and spec.gauge_form not in labels:
        problems.append(f"gauge form {spec.gauge_form!r} is not tracked")
    if spec.subsolution not in ("none", "one-plus-cos", "bump"):
        problems.append(f"unknown subsolution preset {spec.subsolution!r}")
    if spec.sink < 0:
        problems.append("subsolution sink must be >= 0")
    if spec.buffer_threshold <= 0:
        problems.append("buffer threshold must be positive")
    problems.extend(spec.integrator.validate())
    return problems


def serialize_scenario(spec: ScenarioSpec) -> str:
    """Canonical text form; parse(serialize(spec)) reproduces the spec."""
    lines = []
    for key, (_, to_str) in _KEYS.items():
        val = to_str(spec)
        if val is not None:
            lines.append(f"{key} = {val}")
    for fs in spec.forms:
        lines.append(f"form.{fs.label} = {fs.token()}")
    for p in spec.probes:
        lines.append(f"probe.{p.label}.form = {p.form}")
        cyc = "auto" if p.cycle_x is None else str(p.cycle_x)
        lines.append(f"probe.{p.label}.cycle_x = {cyc}")
    return "\n".join(lines) + "\n"


def scenario_hash(spec: ScenarioSpec) -> str:
    return hashlib.sha256(serialize_scenario(spec).encode()).hexdigest()[:16]


# ------------------------------------------------------------------- builders
def build_grid(spec: ScenarioSpec) -> Grid2D:
    if spec.family in ("flat-torus", "conformal-torus"):
        return Grid2D.torus(spec.nx, spec.ny, spec.lx, spec.ly)
    if spec.family == "warped-cylinder":
        return Grid2D.cylinder(spec.nx, spec.ny, spec.lx, spec.ly)
    return Grid2D.plane(spec.nx, spec.ny, spec.lx, spec.ly)


def build_metric(spec: ScenarioSpec, grid: Grid2D) -> MetricField:
    if spec.family == "flat-torus":
        return flat_metric(grid)
    if spec.family == "conformal-torus":
        X, _ = grid.mesh()
        u = spec.metric_amplitude * np.sin(2 * math.pi * X / spec.lx)
        return conformal_metric(grid, u)
    if spec.family == "warped-cylinder":
        x = grid.x
        f = spec.metric_outer - spec.metric_dip * np.exp(-(x / spec.metric_width) ** 2)
        return warped_metric(grid, np.ones_like(x), f)
    X, T = grid.mesh()
    u = -0.5 * np.log1p(X ** 2 + T ** 2)
    return conformal_metric(grid, u)


def build_form(fs: FormSpec, grid: Grid2D) -> OneFormField:
    X, _ = grid.mesh()
    k = 2 * math.pi / grid.lx
    zero = np.zeros((grid.nx, grid.ny))
    if fs.preset == "dtheta":
        return OneFormField(zero, np.ones_like(zero), closed=True)
    if fs.preset == "sinx_dx":
        return OneFormField(np.sin(k * X), zero, closed=True)
    if fs.preset == "dtheta_dsinx":
        # dtheta + c d(sin kx): the exact gradient is added analytically, so the
        # discrete form is exactly closed
        return OneFormField(fs.coeff * k * np.cos(k * X), np.ones_like(zero), closed=True)
    raise ValueError(f"unknown form preset {fs.preset!r}")


def build_subsolution(spec: ScenarioSpec, grid: Grid2D) -> ScalarField | None:
    if spec.subsolution == "none":
        return None
    X, _ = grid.mesh()
    if spec.subsolution == "one-plus-cos":
        k = 2 * math.pi / grid.lx
        vals = spec.sub_amplitude * (1.0 + np.cos(k * X))
    else:  # compactly supported C^1 bump in x
        s = np.clip(1.0 - (X / spec.sub_width) ** 2, 0.0, None)
        vals = spec.sub_amplitude * s ** 2
    return ScalarField(vals, role="subsolution")


@dataclass
class RunSetup:
    name: str
    scenario_hash: str
    grid: Grid2D
    state: FlowState
    problem: FlowProblem
    integrator: IntegratorSpec


def build(spec: ScenarioSpec) -> RunSetup:
    problems = validate(spec)
    if problems:
        raise ScenarioError(problems)
    grid = build_grid(spec)
    metric = build_metric(spec, grid)
    forms = {fs.label: build_form(fs, grid) for fs in spec.forms}

    probes = {}
    for p in spec.probes:
        cyc = ThetaCircle(grid.origin[0] if p.cycle_x is None else p.cycle_x)
        probes[p.form] = make_probe(p.form, forms[p.form], cyc, metric, grid)

    gauge = None
    gauge_base = None
    if spec.gauge_form:
        gauge = ScalarField(np.zeros((grid.nx, grid.ny)), role="gauge")
        gauge_base = forms[spec.gauge_form].copy()

    state = FlowState(
        t=0.0, grid=grid, metric=metric, forms=forms, gauge=gauge,
        subsolution=build_subsolution(spec, grid),
        t_max=spec.integrator.t_final,
    )
    problem = FlowProblem(
        grid=grid,
        evolve_metric=spec.evolve_metric,
        metric_path=spec.metric_path,
        form_operator=spec.form_operator,
        gauge_base=gauge_base,
        gauge_label=spec.gauge_form or None,
        sink=spec.sink,
        probes=probes,
        buffer_threshold=spec.buffer_threshold,
        monitor_energy=spec.monitor_energy,
        track_circumference=(spec.family == "warped-cylinder"),
    )
    return RunSetup(spec.name, scenario_hash(spec), grid, state, problem,
                    spec.integrator)


def make_scenario(**overrides) -> ScenarioSpec:
    """Programmatic construction with the same defaults and validation as the
    text format."""
    spec = ScenarioSpec()
    integ_fields = {f: overrides.pop(f) for f in
                    ("scheme", "cfl", "dt_cap", "t_final", "max_steps",
                     "cadence", "snapshot_every") if f in overrides}
    for key, val in overrides.items():
        if not hasattr(spec, key):
            raise ScenarioError([f"unknown scenario field {key!r}"])
        setattr(spec, key, val)
    if integ_fields:
        spec.integrator = replace(spec.integrator, **integ_fields)
    _fill_defaults(spec)
    problems = validate(spec)
    if problems:
        raise ScenarioError(problems)
    return spec
