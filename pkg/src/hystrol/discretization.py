"""Finite differences on the unit interval for an m-component field.

Fields are stored in the *full layout*: an array of shape ``(m, n + 2)``
holding every node ``x_0 .. x_{n+1}`` of every component. Nodes at a
Dirichlet end are inactive and always hold zero; their mass weight is zero,
so they never enter an inner product. All pairings use the diagonal mass
(trapezoid) weights, under which the diffusion operator is self-adjoint and
the injector/restriction pairs below are exact adjoints.
"""
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import InvalidInputError

BC_KINDS = ("dirichlet", "neumann")
ENDS = ("left", "right")


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid with ``n`` interior nodes and ``m`` field components."""

    n: int
    m: int = 1
    length: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if int(self.n) < 1 or int(self.m) < 1:
            raise InvalidInputError("grid needs n >= 1 interior nodes and m >= 1 components")
        if not self.length > 0:
            raise InvalidInputError("domain length must be positive")
        if self.dim != 1:
            raise InvalidInputError("only one-dimensional grids are implemented")

    @property
    def h(self):
        return self.length / (self.n + 1)

    @property
    def nodes(self):
        return np.linspace(0.0, self.length, self.n + 2)

    @property
    def shape(self):
        return (self.m, self.n + 2)


@dataclass(frozen=True)
class ComponentBoundaryConfig:
    """Boundary kind at each end of each component, e.g. ``[("dirichlet", "neumann")]``."""

    kinds: tuple

    def __post_init__(self):
        kinds = tuple((str(l).lower(), str(r).lower()) for l, r in self.kinds)
        for pair in kinds:
            for k in pair:
                if k not in BC_KINDS:
                    raise InvalidInputError(f"unknown boundary kind {k!r}")
        object.__setattr__(self, "kinds", kinds)

    @classmethod
    def uniform(cls, m, left="dirichlet", right="dirichlet"):
        return cls(tuple((left, right) for _ in range(m)))

    @property
    def m(self):
        return len(self.kinds)

    def kind(self, component, end):
        return self.kinds[component][ENDS.index(end)]

    def neumann_ends(self):
        return [(j, e) for j in range(self.m) for e in ENDS if self.kind(j, e) == "neumann"]


def active_mask(grid, bc):
    if bc.m != grid.m:
        raise InvalidInputError(f"boundary config has {bc.m} components, grid has {grid.m}")
    mask = np.ones(grid.shape, dtype=bool)
    for j, (left, right) in enumerate(bc.kinds):
        mask[j, 0] = left == "neumann"
        mask[j, -1] = right == "neumann"
    return mask


def mass_weights(grid, bc):
    """Trapezoid weights: ``h`` inside, ``h/2`` at Neumann ends, 0 at Dirichlet ends."""
    mass = np.full(grid.shape, grid.h)
    mass[:, 0] *= 0.5
    mass[:, -1] *= 0.5
    return np.where(active_mask(grid, bc), mass, 0.0)


class ImplicitStepSolver:
    """Prefactored tridiagonal solver for ``(I + dt A) y = rhs`` on active nodes."""

    def __init__(self, op, dt):
        if not dt > 0:
            raise InvalidInputError("time step must be positive")
        self.dt = float(dt)
        self.mask = op.mask
        act = op.mask.astype(float)
        self._lower = np.ascontiguousarray(dt * op.lower)
        diag = np.ascontiguousarray(1.0 + dt * op.diag * act)
        upper = np.ascontiguousarray(dt * op.upper)
        self._cp, self._inv = kernels.thomas_factor(self._lower, diag, upper)
        if not (np.all(np.isfinite(self._inv)) and np.all(np.isfinite(self._cp))):
            raise InvalidInputError("implicit diffusion step is singular")

    def solve(self, rhs):
        rhs = np.ascontiguousarray(np.where(self.mask, rhs, 0.0), dtype=float)
        return kernels.thomas_solve(self._lower, self._cp, self._inv, rhs)


@dataclass
class DiffusionOperator:
    """Per-component second-difference operator stored as three diagonals.

    ``(A y)[j, i] = lower[j, i] y[j, i-1] + diag[j, i] y[j, i] + upper[j, i] y[j, i+1]``
    on active nodes; rows and columns of inactive nodes are zero.
    """

    grid: SpatialGrid
    bc: ComponentBoundaryConfig
    coefficients: np.ndarray
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    mask: np.ndarray
    mass: np.ndarray
    _solvers: dict = field(default_factory=dict, repr=False)

    def matvec(self, y):
        y = np.where(self.mask, y, 0.0)
        out = self.diag * y
        out[:, 1:] += self.lower[:, 1:] * y[:, :-1]
        out[:, :-1] += self.upper[:, :-1] * y[:, 1:]
        return np.where(self.mask, out, 0.0)

    def step_solver(self, dt):
        key = float(dt)
        if key not in self._solvers:
            self._solvers[key] = ImplicitStepSolver(self, key)
        return self._solvers[key]

    def inner(self, x, y):
        return float(np.sum(self.mass * x * y))

    def active_index(self):
        """Flat indices of active nodes in the full layout."""
        return np.flatnonzero(self.mask.ravel())

    def dense(self):
        """Dense matrix of the operator restricted to active nodes."""
        k = self.grid.n + 2
        full = np.zeros((self.grid.m * k, self.grid.m * k))
        for j in range(self.grid.m):
            off = j * k
            idx = np.arange(k)
            full[off + idx, off + idx] = self.diag[j]
            full[off + idx[1:], off + idx[:-1]] = self.lower[j, 1:]
            full[off + idx[:-1], off + idx[1:]] = self.upper[j, :-1]
        act = self.active_index()
        return full[np.ix_(act, act)]


def assemble_diffusion(grid, coefficients, bc):
    """Assemble the diffusion operator.

    Parameters
    ----------
    grid : SpatialGrid
    coefficients : sequence of float
        One positive diffusion coefficient per component.
    bc : ComponentBoundaryConfig

    Returns
    -------
    DiffusionOperator
    """
    d = np.atleast_1d(np.asarray(coefficients, dtype=float))
    if d.shape != (grid.m,):
        raise InvalidInputError(f"expected {grid.m} diffusion coefficients, got {d.size}")
    if not np.all(d > 0):
        raise InvalidInputError("diffusion coefficients must be positive")
    mask = active_mask(grid, bc)
    s = (d / grid.h**2)[:, None]
    lower = np.broadcast_to(-s, grid.shape).copy()
    upper = lower.copy()
    diag = np.broadcast_to(2.0 * s, grid.shape).copy()
    lower[:, 0] = 0.0
    upper[:, -1] = 0.0
    # Neumann ends: reflect the ghost node, doubling the single neighbour.
    upper[:, 0] = np.where(mask[:, 0], -2.0 * s[:, 0], 0.0)
    lower[:, -1] = np.where(mask[:, -1], -2.0 * s[:, 0], 0.0)
    # Couplings into inactive nodes carry no information.
    lower[:, 1:] *= mask[:, :-1]
    upper[:, :-1] *= mask[:, 1:]
    lower *= mask
    upper *= mask
    diag *= mask
    return DiffusionOperator(grid, bc, d, lower, diag, upper, mask, mass_weights(grid, bc))


@dataclass(frozen=True)
class ScalarProjection:
    """Linear functional ``y -> sum(mass * weight * y)``.

    The weight is also the representer of the functional in the mass inner
    product, so the adjoint maps a scalar ``s`` to the field ``s * weight``.
    """

    weight: np.ndarray
    mass: np.ndarray

    def apply(self, y):
        y = np.asarray(y)
        if y.shape[-2:] != self.weight.shape:
            raise InvalidInputError(f"field shape {y.shape} does not match projection {self.weight.shape}")
        return np.sum(self.mass * self.weight * y, axis=(-2, -1))

    def representer(self):
        return self.weight

    def norm(self):
        return float(np.sqrt(np.sum(self.mass * self.weight**2)))


def default_weight(grid, bc, components=None):
    """Normalized mean-value weight with a smooth cut-off next to Dirichlet ends.

    The profile is one away from Dirichlet ends and ramps as ``sin^2`` over
    the two adjacent cells; it is scaled so the constant-one field maps to 1.
    """
    x = grid.nodes
    comps = range(grid.m) if components is None else components
    phi = np.zeros(grid.shape)
    ramp_width = 2.0 * grid.h
    for j in comps:
        prof = np.ones_like(x)
        for end, dist in (("left", x), ("right", grid.length - x)):
            if bc.kind(j, end) == "dirichlet":
                r = np.clip(dist / ramp_width, 0.0, 1.0)
                prof *= np.sin(0.5 * np.pi * r) ** 2
        phi[j] = prof
    mass = mass_weights(grid, bc)
    total = np.sum(mass * phi)
    if not total > 0:
        raise InvalidInputError("projection weight vanishes identically")
    return phi / total


def make_projection(grid, bc, weight=None, components=None):
    mass = mass_weights(grid, bc)
    w = default_weight(grid, bc, components) if weight is None else np.asarray(weight, dtype=float)
    if w.shape != grid.shape:
        raise InvalidInputError(f"weight shape {w.shape} != {grid.shape}")
    return ScalarProjection(np.where(mass > 0, w, 0.0), mass)


def apply_S(y, S, mass=None):
    """Mass-weighted pairing of the projection weight with ``y`` (batched over leading axes)."""
    if mass is not None and np.shape(mass) != S.weight.shape:
        raise InvalidInputError("mass shape does not match projection")
    return S.apply(y)


@dataclass(frozen=True)
class ControlInjector:
    """Maps control snapshots into source fields.

    ``kind="distributed"``: a control snapshot is a full-layout field and the
    injection is the identity. ``kind="boundary"``: a snapshot holds one
    flux value per entry of ``ends`` (pairs ``(component, "left"|"right")``,
    all Neumann); the flux enters the end node as ``u / mass``.
    """

    kind: str
    grid: SpatialGrid
    mass: np.ndarray
    ends: tuple = ()

    def __post_init__(self):
        if self.kind not in ("distributed", "boundary"):
            raise InvalidInputError(f"unknown control kind {self.kind!r}")
        if self.kind == "boundary":
            if not self.ends:
                raise InvalidInputError("boundary control needs at least one Neumann end")
            for j, e in self.ends:
                col = 0 if e == "left" else -1
                if not 0 <= j < self.grid.m or self.mass[j, col] == 0.0:
                    raise InvalidInputError(f"control end ({j}, {e}) is not a Neumann node")

    @property
    def snapshot_shape(self):
        return self.grid.shape if self.kind == "distributed" else (len(self.ends),)

    def _nodes(self):
        return [(j, 0 if e == "left" else self.grid.n + 1) for j, e in self.ends]

    def weights(self):
        """Quadrature weights of the control inner product within one snapshot."""
        if self.kind == "distributed":
            return self.mass
        return np.ones(len(self.ends))

    def inject(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-len(self.snapshot_shape):] != self.snapshot_shape:
            raise InvalidInputError(f"control shape {u.shape} does not match {self.snapshot_shape}")
        if self.kind == "distributed":
            return np.where(self.mass > 0, u, 0.0)
        out = np.zeros(u.shape[:-1] + self.grid.shape)
        for k, (j, i) in enumerate(self._nodes()):
            out[..., j, i] = u[..., k] / self.mass[j, i]
        return out

    def restrict(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape[-2:] != self.grid.shape:
            raise InvalidInputError(f"field shape {g.shape} does not match {self.grid.shape}")
        if self.kind == "distributed":
            return np.where(self.mass > 0, g, 0.0)
        return np.stack([g[..., j, i] for j, i in self._nodes()], axis=-1)


def make_injector(kind, grid, bc, ends=None):
    mass = mass_weights(grid, bc)
    if kind == "boundary":
        chosen = tuple(bc.neumann_ends() if ends is None else ((int(j), str(e)) for j, e in ends))
        return ControlInjector("boundary", grid, mass, chosen)
    return ControlInjector(kind, grid, mass)


def inject_control(u, injector, mass=None):
    return injector.inject(u)


def restrict_adjoint(g, injector, mass=None):
    return injector.restrict(g)
