from pathlib import Path

import numpy as np
import pytest

import hystrol
from hystrol.config import build_problem, parse_config
from hystrol.hysteresis import HysteresisBounds
from hystrol.models import LinearCoupling
from hystrol.problem import make_system

CONFIG_DIR = Path(hystrol.__file__).parent / "configs"


def load_config(name, **overrides):
    """Parse a shipped config, appending ``key = value`` overrides."""
    text = (CONFIG_DIR / name).read_text()
    lines = [ln for ln in text.splitlines() if ln.split("=")[0].strip() not in overrides]
    lines += [f"{k} = {v}" for k, v in overrides.items()]
    return parse_config("\n".join(lines))


def load_problem(name, **overrides):
    return build_problem(load_config(name, **overrides))


def piecewise_linear(rng, size, knots=12, scale=2.0):
    """Random piecewise-linear samples on ``[0, 1]`` with ``size`` points."""
    t = np.linspace(0.0, 1.0, size)
    kt = np.linspace(0.0, 1.0, knots)
    return t, np.interp(t, kt, rng.normal(scale=scale, size=knots))


@pytest.fixture(scope="session")
def small_system():
    model = LinearCoupling(coupling=[[-1.0, 0.5], [0.3, -0.5]], amplitude=[2.0, -1.0],
                           slope=[1.5, 1.0], shift=[0.0, 0.2])
    return make_system(n=16, m=2, steps=200, boundary=[("dirichlet", "dirichlet"), ("neumann", "neumann")],
                       model=model, bounds=HysteresisBounds(-0.3, 0.3, 0.0))


@pytest.fixture(scope="session")
def sine_control():
    def build(system, amplitude=8.0):
        u = system.zero_control()
        x = system.op.grid.nodes
        vals = amplitude * np.sin(np.pi * system.t)[:, None, None] * np.sin(np.pi * x)[None, None, :]
        return u.like(np.where(system.mask, vals * np.ones_like(u.values), 0.0))
    return build


ACCEPTANCE_LINES = []


def record_verdict(tag, ok, detail):
    """Print and keep one verdict line per acceptance criterion."""
    line = f"{'PASS' if ok else 'FAIL'} {tag}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
