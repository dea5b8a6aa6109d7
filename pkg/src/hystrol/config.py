"""Line-oriented ``section.key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored. Several assignments may share a
line when separated by commas (``hysteresis.a = -1, hysteresis.b = 1``);
list values are comma-separated too, which is unambiguous because list
items never contain ``=``.
"""
from dataclasses import dataclass, field
import re

import numpy as np

from .errors import ConfigError, RegistryError


def _int(text):
    return int(text, 10)


def _list(conv):
    def parse(text):
        items = [s.strip() for s in text.split(",")]
        if any(not s for s in items):
            raise ValueError("empty list item")
        return [conv(s) for s in items]

    return parse


# key -> (parser, default). A default of None marks an optional key.
SCHEMA = {
    "domain.n": (_int, 64),
    "domain.m": (_int, 2),
    "domain.length": (float, 1.0),
    "domain.horizon": (float, 1.0),
    "domain.steps": (_int, 2000),
    "domain.boundary": (_list(str), None),
    "domain.diffusion": (_list(float), None),
    "hysteresis.a": (float, -1.0),
    "hysteresis.b": (float, 1.0),
    "hysteresis.z0": (float, 0.0),
    "model.name": (str, "zero"),
    "model.coupling": (_list(float), None),
    "model.amplitude": (_list(float), None),
    "model.slope": (_list(float), None),
    "model.shift": (_list(float), None),
    "model.kink_component": (_int, 0),
    "model.gain": (float, 1.0),
    "model.threshold": (float, 0.0),
    "projection.components": (_list(_int), None),
    "control.kind": (str, "distributed"),
    "control.ends": (_list(str), None),
    "control.kappa": (float, 1e-2),
    "control.lower": (float, None),
    "control.upper": (float, None),
    "control.init_value": (float, 0.0),
    "control.init_profile": (str, "constant"),
    "target.name": (str, "zero"),
    "target.amplitude": (_list(float), None),
    "target.time_freq": (float, 1.0),
    "target.space_mode": (float, 1.0),
    "target.value": (_list(float), None),
    "run.mode": (str, None),
    "run.checkpoint": (str, None),
    "run.eps": (_list(float), [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4]),
    "run.epsilon": (float, 1e-2),
    "run.grad_tol": (float, 1e-3),
    "run.max_iter": (_int, 300),
    "run.step0": (float, 1.0),
    "run.shrink": (float, 0.5),
    "run.armijo": (float, 1e-4),
    "run.seed": (_int, 0),
    "run.samples": (_int, 5),
    "run.fd_step": (float, 1e-5),
    "run.diag_eps": (_list(float), [1e-2, 1e-3, 1e-4]),
    "run.scan_magnitudes": (_list(float), [0.0, 1e-2, 2e-2]),
    "output.dir": (str, "out"),
    "output.sample_times": (_list(float), [0.25, 0.5, 0.75, 1.0]),
    "output.formats": (_list(str), ["csv", "json", "npz"]),
}

MODES = ("solve-forward", "solve-regularized", "adjoint-check", "gradient-check",
         "optimize", "continuation", "limit-diagnostics", "value-scan")
OUTPUT_FORMATS = ("csv", "json", "npz")

MODEL_NAMES = ("linear-coupling", "kinked-activation", "zero")
TARGET_NAMES = ("zero", "sine", "constant")
CONTROL_KINDS = ("distributed", "boundary")
INIT_PROFILES = ("constant", "sine")
BC_NAMES = ("dirichlet", "neumann")

_ASSIGN = re.compile(r"\s*([A-Za-z_][\w]*(?:\.[A-Za-z_]\w*)+)\s*=(.*)$")
_NEXT_KEY = re.compile(r",(?=\s*[A-Za-z_][\w]*(?:\.[A-Za-z_]\w*)+\s*=)")


@dataclass
class ExperimentConfig:
    """Parsed configuration: explicit values keyed by dotted name, plus source lines."""

    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, compare=False)

    def get(self, key):
        if key in self.values:
            return self.values[key]
        return SCHEMA[key][1]

    def __getitem__(self, key):
        return self.get(key)


def _format_value(v):
    if isinstance(v, list):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg):
    """Canonical text form: one ``key = value`` per line, keys sorted."""
    return "".join(f"{k} = {_format_value(cfg.values[k])}\n" for k in sorted(cfg.values))


def _split_assignments(body, lineno):
    """Yield ``(key, raw_value, key_column, value_column)`` for each assignment on a line."""
    pieces, start = [], 0
    for m in _NEXT_KEY.finditer(body):
        pieces.append((body[start:m.start()], start))
        start = m.start() + 1
    pieces.append((body[start:], start))
    for text, offset in pieces:
        m = _ASSIGN.match(text)
        if not m:
            col = offset + len(text) - len(text.lstrip()) + 1
            raise ConfigError("expected 'section.key = value'", lineno, col)
        raw = m.group(2)
        lead = len(raw) - len(raw.lstrip()) if raw.strip() else 0
        yield m.group(1), raw.strip(), offset + m.start(1) + 1, offset + m.start(2) + lead + 1


def parse_config(text):
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        On a syntax error, unknown or duplicate key, bad value or violated
        constraint; carries the line (and column where meaningful).
    RegistryError
        When a named model, target or boundary kind is not registered.
    """
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        for key, value, key_col, col in _split_assignments(body, lineno):
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}", lineno, key_col)
            if key in cfg.values:
                raise ConfigError(f"duplicate key {key!r}", lineno, key_col)
            if not value:
                raise ConfigError(f"missing value for {key!r}", lineno, col)
            try:
                cfg.values[key] = SCHEMA[key][0](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", lineno, col) from None
            cfg.lines[key] = lineno
    validate_config(cfg)
    return cfg


def _fail(cfg, key, message):
    raise ConfigError(message, cfg.lines.get(key))


def validate_config(cfg):
    g = cfg.get
    for key in ("domain.n", "domain.m", "domain.steps", "run.max_iter", "run.samples"):
        if g(key) < 1:
            _fail(cfg, key, f"{key} must be at least 1")
    for key in ("domain.length", "domain.horizon", "control.kappa", "run.grad_tol", "run.epsilon", "run.fd_step"):
        if not g(key) > 0:
            _fail(cfg, key, f"{key} must be positive")
    if not g("hysteresis.a") < g("hysteresis.b"):
        _fail(cfg, "hysteresis.b" if "hysteresis.b" in cfg.lines else "hysteresis.a",
              f"out of range: need hysteresis.a < hysteresis.b, got a={g('hysteresis.a')}, b={g('hysteresis.b')}")
    if not g("hysteresis.a") <= g("hysteresis.z0") <= g("hysteresis.b"):
        _fail(cfg, "hysteresis.z0", "out of range: hysteresis.z0 must lie in [a, b]")
    for key in ("run.shrink", "run.armijo"):
        if not 0 < g(key) < 1:
            _fail(cfg, key, f"{key} must lie in (0, 1)")
    for key in ("run.eps", "run.diag_eps"):
        sched = g(key)
        if any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
            _fail(cfg, key, f"{key} must be positive and strictly decreasing")
    lo, hi = g("control.lower"), g("control.upper")
    if lo is not None and hi is not None and lo > hi:
        _fail(cfg, "control.upper", "control.lower exceeds control.upper")
    m = g("domain.m")
    for key, size in (("domain.diffusion", m), ("model.coupling", m * m), ("model.amplitude", m),
                      ("model.slope", m), ("model.shift", m), ("target.amplitude", m),
                      ("target.value", m), ("domain.boundary", m)):
        v = g(key)
        allowed = (size,) if key == "model.coupling" else (1, size)
        if v is not None and len(v) not in allowed:
            _fail(cfg, key, f"{key} needs {size} entries")
    if g("domain.diffusion") is not None and min(g("domain.diffusion")) <= 0:
        _fail(cfg, "domain.diffusion", "diffusion coefficients must be positive")
    if not 0 <= g("model.kink_component") < m:
        _fail(cfg, "model.kink_component", "model.kink_component out of range")
    comps = g("projection.components")
    if comps is not None and any(not 0 <= c < m for c in comps):
        _fail(cfg, "projection.components", "projection component out of range")
    for key, names in (("model.name", MODEL_NAMES), ("target.name", TARGET_NAMES), ("control.kind", CONTROL_KINDS),
                        ("control.init_profile", INIT_PROFILES)):
        if g(key) not in names:
            raise RegistryError(f"unknown {key} {g(key)!r}; known: {', '.join(names)}", cfg.lines.get(key))
    if g("run.mode") is not None and g("run.mode") not in MODES:
        raise RegistryError(f"unknown run.mode {g('run.mode')!r}; known: {', '.join(MODES)}", cfg.lines.get("run.mode"))
    bad = [f for f in g("output.formats") if f not in OUTPUT_FORMATS]
    if bad:
        _fail(cfg, "output.formats", f"unknown output format {bad[0]!r}; known: {', '.join(OUTPUT_FORMATS)}")
    for entry in g("domain.boundary") or []:
        parts = entry.split(":")
        if len(parts) != 2 or any(p not in BC_NAMES for p in parts):
            raise RegistryError(f"unknown boundary spec {entry!r}; use e.g. dirichlet:neumann", cfg.lines.get("domain.boundary"))
    for entry in g("control.ends") or []:
        parts = entry.split(":")
        if len(parts) != 2 or not parts[0].isdigit() or parts[1] not in ("left", "right"):
            _fail(cfg, "control.ends", f"bad control end {entry!r}; use e.g. 1:left")
        if int(parts[0]) >= m:
            _fail(cfg, "control.ends", f"control end component out of range in {entry!r}")
    return cfg


def _per_component(v, m, default):
    if v is None:
        return np.full(m, default, dtype=float)
    return np.broadcast_to(np.asarray(v, dtype=float), (m,)).copy()


def build_problem(cfg):
    """Translate a validated configuration into ``(ControlProblem, OptimizerConfig)``."""
    from .errors import InvalidInputError
    from .hysteresis import HysteresisBounds
    from .models import build_model
    from .optimizer import OptimizerConfig
    from .problem import ControlProblem, build_target, make_system

    g = cfg.get
    m = g("domain.m")
    bspec = g("domain.boundary")
    if bspec is None:
        boundary = [("dirichlet", "dirichlet")] * m
    else:
        pairs = [tuple(e.split(":")) for e in bspec]
        boundary = pairs * m if len(pairs) == 1 else pairs
    params = {"coupling": g("model.coupling") or [0.0] * (m * m),
              "amplitude": _per_component(g("model.amplitude"), m, 0.0),
              "slope": _per_component(g("model.slope"), m, 1.0),
              "shift": _per_component(g("model.shift"), m, 0.0),
              "kink_component": g("model.kink_component"),
              "gain": g("model.gain"), "threshold": g("model.threshold")}
    model = build_model(g("model.name"), m, params)
    ends = None
    if g("control.ends") is not None:
        ends = [(int(e.split(":")[0]), e.split(":")[1]) for e in g("control.ends")]
    try:
        system = make_system(
            n=g("domain.n"), m=m, horizon=g("domain.horizon"), steps=g("domain.steps"),
            boundary=boundary, diffusion=_per_component(g("domain.diffusion"), m, 1.0),
            model=model, bounds=HysteresisBounds(g("hysteresis.a"), g("hysteresis.b"), g("hysteresis.z0")),
            control=g("control.kind"), control_ends=ends,
            projection_components=g("projection.components"), length=g("domain.length"),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"inconsistent configuration: {exc}") from None
    tparams = {"amplitude": _per_component(g("target.amplitude"), m, 1.0),
               "time_freq": g("target.time_freq"), "space_mode": g("target.space_mode"),
               "value": _per_component(g("target.value"), m, 0.0)}
    target = build_target(g("target.name"), system, tparams)
    problem = ControlProblem(system, target, g("control.kappa"), g("control.lower"), g("control.upper"))
    opt = OptimizerConfig(eps_schedule=tuple(g("run.eps")), max_iter=g("run.max_iter"), step0=g("run.step0"),
                          shrink=g("run.shrink"), armijo=g("run.armijo"), grad_tol=g("run.grad_tol"))
    return problem, opt
