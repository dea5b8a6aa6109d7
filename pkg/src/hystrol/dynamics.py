"""Forward solvers for the coupled field/memory system and their linearizations.

Every solver advances the same IMEX step: diffusion implicitly, reaction
explicitly, then the memory from the increment of the projected field::

    (I + dt A) y[n+1] = y[n] + dt * (f(y[n], z[n]) + B u[n+1])
    z[n+1] = stop-update(z[n], S y[n+1] - S y[n])

The linearized solvers differentiate this discrete recursion exactly.
"""
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import InvalidInputError, NumericalFailure
from .hysteresis import HysteresisBounds, PenaltyFunction, ScalarTrajectory, stop_apply


def control_time_weights(t):
    """Right-endpoint weights ``[0, dt_1, ..., dt_N]`` matching how the scheme samples controls.

    The step to ``t[n+1]`` injects ``u[n+1]``, so the sample at ``t[0]``
    never reaches the state and carries no weight.
    """
    t = np.asarray(t, dtype=float)
    w = np.zeros_like(t)
    w[1:] = np.diff(t)
    return w


def trapezoid_weights(t):
    t = np.asarray(t, dtype=float)
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


@dataclass
class StateSystem:
    """Everything needed to run a forward solve except the control.

    Attributes
    ----------
    op : DiffusionOperator
    projection : ScalarProjection
    injector : ControlInjector
    model : nonlinearity model (see :mod:`hystrol.models`)
    bounds : HysteresisBounds
    horizon : float
    steps : int
        Number of uniform time steps ``N``.
    """

    op: object
    projection: object
    injector: object
    model: object
    bounds: HysteresisBounds
    horizon: float = 1.0
    steps: int = 2000

    def __post_init__(self):
        if not self.horizon > 0 or int(self.steps) < 1:
            raise InvalidInputError("need a positive horizon and at least one time step")
        self.steps = int(self.steps)
        self.penalty = PenaltyFunction(self.bounds)

    @property
    def t(self):
        return np.linspace(0.0, self.horizon, self.steps + 1)

    @property
    def dt(self):
        return self.horizon / self.steps

    @property
    def mask(self):
        return self.op.mask

    @property
    def mass(self):
        return self.op.mass

    def with_steps(self, steps):
        return StateSystem(self.op, self.projection, self.injector, self.model, self.bounds,
                           self.horizon, steps)

    def with_model(self, model):
        return StateSystem(self.op, self.projection, self.injector, model, self.bounds,
                           self.horizon, self.steps)

    def zero_control(self):
        return ControlTrajectory.zeros(self.t, self.injector)

    def field_inner(self, a, b):
        """Space-time inner product of two field trajectories (trapezoid in time)."""
        tw = trapezoid_weights(self.t)
        return float(np.einsum("n,nji,ji,nji->", tw, a, self.mass, b))


@dataclass
class ControlTrajectory:
    """Control samples on the state time grid.

    The inner product weights each snapshot by its spatial quadrature and
    by :func:`control_time_weights` in time.

    ``values`` has shape ``(N + 1,) + snapshot_shape``; ``weights`` holds the
    spatial quadrature of one snapshot.
    """

    t: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.values.shape[0] != self.t.size or self.values.shape[1:] != self.weights.shape:
            raise InvalidInputError(
                f"control values {self.values.shape} do not match grid {self.t.size} and snapshot {self.weights.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("control contains non-finite values")

    @classmethod
    def zeros(cls, t, injector):
        return cls(t, np.zeros((len(t),) + injector.snapshot_shape), injector.weights())

    def like(self, values):
        return ControlTrajectory(self.t, values, self.weights)

    def inner(self, other):
        self._check(other)
        tw = control_time_weights(self.t)
        prod = self.values * other.values * self.weights
        return float(np.sum(tw * prod.reshape(prod.shape[0], -1).sum(axis=1)))

    def norm(self):
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def _check(self, other):
        if self.values.shape != other.values.shape or not np.array_equal(self.t, other.t):
            raise InvalidInputError("control trajectories live on different grids")

    def __add__(self, other):
        self._check(other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self.like(self.values - other.values)

    def __mul__(self, scalar):
        return self.like(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)


@dataclass
class StateTrajectory:
    """Field ``y`` (shape ``(N + 1, m, n + 2)``), memory ``z`` and projected field ``Sy``."""

    t: np.ndarray
    y: np.ndarray
    z: ScalarTrajectory
    Sy: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def eps(self):
        return self.meta.get("eps")

    def sy_trajectory(self):
        return ScalarTrajectory(self.t, self.Sy)


def _check_control(system, u):
    if not isinstance(u, ControlTrajectory):
        raise InvalidInputError("control must be a ControlTrajectory")
    if u.t.size != system.steps + 1 or not np.allclose(u.t, system.t, rtol=0, atol=1e-14 * system.horizon):
        raise InvalidInputError("control grid does not match the state grid")
    if u.values.shape[1:] != system.injector.snapshot_shape:
        raise InvalidInputError("control snapshot shape does not match the injector")


def _forward(system, u, model, memory_step, meta):
    _check_control(system, u)
    N, dt, mask = system.steps, system.dt, system.mask
    solver = system.op.step_solver(dt)
    S = system.projection
    source = system.injector.inject(u.values)
    y = np.zeros((N + 1,) + system.op.grid.shape)
    z = np.empty(N + 1)
    Sy = np.empty(N + 1)
    z[0] = system.bounds.z0
    Sy[0] = 0.0
    for n in range(N):
        rhs = y[n] + dt * (np.where(mask, model.f(y[n], z[n]), 0.0) + source[n + 1])
        y[n + 1] = solver.solve(rhs)
        Sy[n + 1] = S.apply(y[n + 1])
        if not np.isfinite(Sy[n + 1]):
            raise NumericalFailure("non-finite state", step=n + 1)
        z[n + 1] = memory_step(n, z[n], Sy[n + 1] - Sy[n])
    return StateTrajectory(system.t, y, ScalarTrajectory(system.t, z), Sy, meta)


def solve_state(u, system):
    """Forward solve with the exact stop. Returns a :class:`StateTrajectory`."""
    a, b = system.bounds.a, system.bounds.b

    def clamp(n, z, dv):
        return min(max(z + dv, a), b)

    return _forward(system, u, system.model, clamp, {"solver": "exact-stop", "eps": None})


def solve_state_regularized(u, system, eps):
    """Forward solve with the penalty-relaxed stop and the relaxed model ``f_eps``.

    Raises
    ------
    NumericalFailure
        On a non-finite state or a failed penalized memory update.
    """
    if not eps > 0:
        raise InvalidInputError("regularization parameter must be positive")
    a, b = system.bounds.a, system.bounds.b
    c = system.dt / eps
    step_fn = kernels.reg_stop_step

    def penalized(n, z, dv):
        znew, it = step_fn(z, dv, c, a, b, 1e-12)
        if it < 0:
            raise NumericalFailure("penalized memory update did not converge", step=n + 1)
        return znew

    model = system.model.regularized(eps)
    return _forward(system, u, model, penalized, {"solver": "regularized", "eps": float(eps)})


def solve_linearized_regularized(u, h, base, system, eps):
    """Derivative of :func:`solve_state_regularized` at ``u`` in direction ``h``.

    Returns
    -------
    zeta : ndarray, shape (N + 1, m, n + 2)
    zeta_z : ScalarTrajectory
    """
    _check_control(system, h)
    N, dt, mask = system.steps, system.dt, system.mask
    solver = system.op.step_solver(dt)
    S = system.projection
    model = system.model.regularized(eps)
    c = dt / eps
    curv = system.penalty.curv(base.z.values)
    source = system.injector.inject(h.values)
    zeta = np.zeros_like(base.y)
    zz = np.zeros(N + 1)
    Sz_prev = 0.0
    for n in range(N):
        yn, zn = base.y[n], base.z.values[n]
        lin = model.dy_apply(yn, zn, zeta[n]) + model.dz(yn, zn) * zz[n]
        rhs = zeta[n] + dt * (np.where(mask, lin, 0.0) + source[n + 1])
        zeta[n + 1] = solver.solve(rhs)
        Sz = S.apply(zeta[n + 1])
        zz[n + 1] = (zz[n] + Sz - Sz_prev) / (1.0 + c * curv[n + 1])
        Sz_prev = Sz
        if not np.isfinite(zz[n + 1]):
            raise NumericalFailure("non-finite linearized state", step=n + 1)
    return zeta, ScalarTrajectory(system.t, zz)


def solve_linearized_nonsmooth(u, h, base, system, kink_tol=None):
    """Directional derivative of :func:`solve_state` at ``u`` in direction ``h``.

    Positively homogeneous in ``h``; the memory part follows the one-sided
    derivative of the clamp.
    """
    _check_control(system, h)
    N, dt, mask = system.steps, system.dt, system.mask
    solver = system.op.step_solver(dt)
    S = system.projection
    model = system.model
    a, b = system.bounds.a, system.bounds.b
    tol = system.bounds.default_kink_tol() if kink_tol is None else kink_tol
    source = system.injector.inject(h.values)
    zeta = np.zeros_like(base.y)
    zz = np.zeros(N + 1)
    Sz_prev = 0.0
    zv, Sy = base.z.values, base.Sy
    for n in range(N):
        lin = model.dir_deriv(base.y[n], zv[n], zeta[n], zz[n])
        rhs = zeta[n] + dt * (np.where(mask, lin, 0.0) + source[n + 1])
        zeta[n + 1] = solver.solve(rhs)
        Sz = S.apply(zeta[n + 1])
        s = zv[n] + (Sy[n + 1] - Sy[n])
        zz[n + 1] = kernels.stop_derivative_step(s, zz[n] + (Sz - Sz_prev), a, b, tol)
        Sz_prev = Sz
    return zeta, ScalarTrajectory(system.t, zz)


def _tracking(state, target, system):
    if target.shape != state.y.shape:
        raise InvalidInputError(f"target shape {target.shape} does not match state {state.y.shape}")
    r = state.y - target
    return 0.5 * system.field_inner(r, r)


def cost_eval(state, u, target, kappa, system):
    """``1/2 ||y - y_d||^2 + kappa/2 ||u||^2``.

    The tracking term uses the trapezoid rule in time and the mass weights
    in space; the control term uses the control inner product.
    """
    _check_control(system, u)
    return _tracking(state, target, system) + 0.5 * kappa * u.inner(u)


def reg_cost_eval(state, u, target, kappa, u_ref, system, prox_weight=1.0):
    """Regularized cost: :func:`cost_eval` plus ``prox_weight/2 ||u - u_ref||^2``."""
    d = u - u_ref
    return cost_eval(state, u, target, kappa, system) + 0.5 * prox_weight * d.inner(d)


@dataclass
class BoundAuditReport:
    eps: list
    energy: list
    penalty_peak: list
    audited: list
    state_sup: list
    fitted_constant: float
    control_norm: float
    within_bound: list
    all_within: bool
    penalty_values: list


def memory_energy(state, penalty, eps):
    """Returns ``(sum (dz)^2 / dt, max psi(z) / eps, max psi(z))``."""
    z = state.z.values
    dz = np.diff(z)
    energy = float(np.sum(dz * dz / np.diff(state.t)))
    peak = float(np.max(penalty.value(z)))
    return energy, peak / eps, peak


def bound_audit(states, u, system, slack=0.10):
    """Uniform-in-eps bound audit over regularized solves sharing the control ``u``.

    The constant ``c`` is fitted at the largest ``eps`` so that
    ``Q = energy + max psi / eps`` equals ``c (1 + ||u||)^2``; smaller ``eps``
    pass when ``Q <= (1 + slack) c (1 + ||u||)^2``.
    """
    states = sorted(states, key=lambda s: -s.eps)
    un = u.norm()
    scale = (1.0 + un) ** 2
    eps, energy, peaks, audited, ysup, pvals = [], [], [], [], [], []
    for st in states:
        e, p, raw = memory_energy(st, system.penalty, st.eps)
        eps.append(st.eps)
        energy.append(e)
        peaks.append(p)
        pvals.append(raw)
        audited.append(e + p)
        ysup.append(float(np.sqrt(np.max(np.einsum("nji,ji,nji->n", st.y, system.mass, st.y)))))
    c = audited[0] / scale
    within = [q <= (1.0 + slack) * c * scale + 1e-14 for q in audited]
    return BoundAuditReport(eps, energy, peaks, audited, ysup, c, un, within, all(within), pvals)


def stop_drift(state, system):
    """``max |z - stop(Sy)|``: distance of the memory from the exact stop of its driver."""
    exact = stop_apply(state.sy_trajectory(), system.bounds)
    return float(np.max(np.abs(state.z.values - exact.values)))


def random_smooth_field(t, x, m, rng, modes=3):
    """Random field of shape ``(len(t), m, len(x))`` built from low sine/cosine modes.

    Mode ``(a, b)`` has a standard normal amplitude scaled by ``1 / (a b)`` and
    random phases, so samples are smooth and reproducible from ``rng``.
    """
    out = np.zeros((t.size, m, x.size))
    for j in range(m):
        for a in range(1, modes + 1):
            for b in range(1, modes + 1):
                amp = rng.normal() / (a * b)
                ph_t, ph_x = rng.uniform(0.0, 2 * np.pi, size=2)
                out[:, j, :] += amp * np.outer(np.sin(a * np.pi * t + ph_t), np.cos(b * np.pi * x + ph_x))
    return out


def resample_control(u, t_new):
    """Linear interpolation of a control trajectory onto another time grid."""
    t_new = np.asarray(t_new, dtype=float)
    flat = u.values.reshape(u.values.shape[0], -1)
    cols = [np.interp(t_new, u.t, col) for col in flat.T]
    vals = np.stack(cols, axis=1) if cols else np.zeros((t_new.size, 0))
    return ControlTrajectory(t_new, vals.reshape((t_new.size,) + u.values.shape[1:]), u.weights)
