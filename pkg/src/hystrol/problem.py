"""Assembly of a complete control problem from plain parameters."""
from dataclasses import dataclass

import numpy as np

from .discretization import (
    ComponentBoundaryConfig,
    SpatialGrid,
    assemble_diffusion,
    make_injector,
    make_projection,
)
from .dynamics import StateSystem
from .errors import InvalidInputError
from .hysteresis import HysteresisBounds
from .models import ZeroModel


def _target_zero(t, x, m, params):
    return np.zeros((t.size, m, x.size))


def _target_sine(t, x, m, params):
    """``amplitude_j * sin(pi * time_freq * t / T) * sin(pi * space_mode * x / L)``."""
    amp = np.broadcast_to(np.asarray(params.get("amplitude", 1.0), dtype=float), (m,))
    tf = float(params.get("time_freq", 1.0))
    sm = float(params.get("space_mode", 1.0))
    T, L = t[-1], x[-1]
    tt = np.sin(np.pi * tf * t / T)
    xx = np.sin(np.pi * sm * x / L)
    return tt[:, None, None] * amp[None, :, None] * xx[None, None, :]


def _target_constant(t, x, m, params):
    val = np.broadcast_to(np.asarray(params.get("value", 0.0), dtype=float), (m,))
    return np.broadcast_to(val[None, :, None], (t.size, m, x.size)).copy()


TARGET_REGISTRY = {
    "zero": _target_zero,
    "sine": _target_sine,
    "constant": _target_constant,
}


def build_target(name, system, params=None):
    if name not in TARGET_REGISTRY:
        raise KeyError(f"unknown target profile {name!r}; known: {sorted(TARGET_REGISTRY)}")
    grid = system.op.grid
    out = TARGET_REGISTRY[name](system.t, grid.nodes, grid.m, params or {})
    return np.where(system.mask, out, 0.0)


@dataclass
class ControlProblem:
    """State system, tracking target, control weight and optional box ``[lower, upper]``."""

    system: StateSystem
    target: np.ndarray
    kappa: float = 1e-2
    lower: object = None
    upper: object = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidInputError("control weight kappa must be positive")
        if self.target.shape != (self.system.steps + 1,) + self.system.op.grid.shape:
            raise InvalidInputError("target does not match the state grid")
        if self.lower is not None and self.upper is not None and np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise InvalidInputError("box lower bound exceeds upper bound")

    @property
    def boxed(self):
        return self.lower is not None or self.upper is not None

    def with_steps(self, steps, target=None):
        sys2 = self.system.with_steps(steps)
        if target is None:
            t_old, t_new = self.system.t, sys2.t
            flat = self.target.reshape(self.target.shape[0], -1)
            tgt = np.stack([np.interp(t_new, t_old, col) for col in flat.T], axis=1)
            target = tgt.reshape((t_new.size,) + self.target.shape[1:])
        return ControlProblem(sys2, target, self.kappa, self.lower, self.upper)

    def with_box(self, lower, upper):
        return ControlProblem(self.system, self.target, self.kappa, lower, upper)


def make_system(n=64, m=2, horizon=1.0, steps=2000, boundary=None, diffusion=None,
                model=None, bounds=None, control="distributed", control_ends=None,
                projection_components=None, length=1.0):
    """Build a :class:`StateSystem` on the unit interval with sensible defaults.

    ``boundary`` is a list of ``(left, right)`` kinds per component and
    defaults to Dirichlet on both ends for every component.
    """
    grid = SpatialGrid(n, m, length)
    bc = ComponentBoundaryConfig(tuple(boundary)) if boundary is not None else ComponentBoundaryConfig.uniform(m)
    coeffs = np.ones(m) if diffusion is None else diffusion
    op = assemble_diffusion(grid, coeffs, bc)
    S = make_projection(grid, bc, components=projection_components)
    inj = make_injector(control, grid, bc, control_ends)
    return StateSystem(op, S, inj, model or ZeroModel(m), bounds or HysteresisBounds(), horizon, steps)
