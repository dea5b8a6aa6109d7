"""Projected gradient descent, eps-continuation, stationarity audit and value scans."""
from dataclasses import dataclass, field
import itertools

import numpy as np

from .adjoint import discrete_gradient, gradient_field, reduced_gradient, solve_adjoint_regularized
from .dynamics import cost_eval, solve_state_regularized, stop_drift
from .errors import InvalidInputError, NumericalFailure

DEFAULT_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


@dataclass
class OptimizerConfig:
    """Settings for :func:`minimize_regularized` and :func:`epsilon_continuation`.

    ``grad_tol`` is relative: iteration stops once the projected-gradient
    step ``||P(u - g) - u||`` is at most ``grad_tol * max(kappa ||u||, grad_floor)``.
    For the plain cost this bounds the relative distance to the minimizer by
    ``grad_tol`` because the reduced Hessian is at least ``kappa``.
    """

    eps_schedule: tuple = DEFAULT_SCHEDULE
    max_iter: int = 300
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    grad_tol: float = 1e-4
    grad_floor: float = 1e-10
    max_backtracks: int = 40
    barzilai_borwein: bool = True
    gradient: str = "discrete"
    polish: bool = True
    warm_start: bool = True
    presolve: bool = True

    def __post_init__(self):
        sched = tuple(float(e) for e in self.eps_schedule)
        if not sched or any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
            raise InvalidInputError("eps schedule must be nonempty, positive and strictly decreasing")
        self.eps_schedule = sched
        for name in ("shrink", "armijo"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must lie in (0, 1)")
        if self.gradient not in ("discrete", "continuous"):
            raise InvalidInputError("gradient must be 'discrete' or 'continuous'")
        if not self.grad_tol > 0 or int(self.max_iter) < 1:
            raise InvalidInputError("need grad_tol > 0 and max_iter >= 1")


def project(u, lower=None, upper=None):
    """Componentwise clamp of a control trajectory to ``[lower, upper]``."""
    if lower is None and upper is None:
        return u
    lo = -np.inf if lower is None else lower
    hi = np.inf if upper is None else upper
    return u.like(np.clip(u.values, lo, hi))


@dataclass
class MinimizeResult:
    control: object
    state: object
    value: float
    converged: bool
    iterations: int
    stationarity: float
    history: list = field(default_factory=list)
    message: str = ""

    @property
    def z(self):
        return self.state.z


def _gradient(config, u, problem, eps, u_ref, prox_weight, state=None):
    fn = discrete_gradient if config.gradient == "discrete" else reduced_gradient
    return fn(u, problem.system, eps, problem.target, problem.kappa, u_ref, prox_weight, state=state)


def _value(problem, state, u, u_ref, prox_weight):
    v = cost_eval(state, u, problem.target, problem.kappa, problem.system)
    if prox_weight:
        d = u - u_ref
        v += 0.5 * prox_weight * d.inner(d)
    return v


def minimize_regularized(eps, u_ref, init, config, problem, prox_weight=1.0):
    """Projected gradient with Armijo backtracking on the regularized cost.

    Parameters
    ----------
    eps : float
    u_ref : ControlTrajectory
        Anchor of the proximal term (ignored when ``prox_weight = 0``).
    init : ControlTrajectory
    config : OptimizerConfig
    problem : ControlProblem
    prox_weight : float
        1 for the regularized cost, 0 for the plain tracking cost.

    Returns
    -------
    MinimizeResult
        ``converged`` is False if the iteration cap was hit or the line
        search failed; the last accepted iterate is returned either way.
    """
    lo, hi = problem.lower, problem.upper
    u = project(init, lo, hi)
    gr = _gradient(config, u, problem, eps, u_ref, prox_weight)
    value, g, state = gr.cost, gr.gradient, gr.state
    history = [value]
    step = config.step0
    prev = None
    kappa = problem.kappa
    stat = np.inf
    for it in range(config.max_iter + 1):
        pg = project(u - g, lo, hi) - u
        scale = max(kappa * u.norm(), config.grad_floor)
        stat = pg.norm() / scale
        if stat <= config.grad_tol:
            return MinimizeResult(u, state, value, True, it, stat, history, "tolerance reached")
        if it == config.max_iter:
            break
        if config.barzilai_borwein and prev is not None:
            s = u - prev[0]
            yv = g - prev[1]
            sy = s.inner(yv)
            if sy > 0:
                step = min(max(s.inner(s) / sy, 1e-10), 1e10)
        accepted = False
        trial_step = step
        for _ in range(config.max_backtracks):
            cand = project(u - trial_step * g, lo, hi)
            try:
                cstate = solve_state_regularized(cand, problem.system, eps)
            except NumericalFailure:
                trial_step *= config.shrink
                continue
            cval = _value(problem, cstate, cand, u_ref, prox_weight)
            if cval <= value + config.armijo * g.inner(cand - u):
                accepted = True
                break
            trial_step *= config.shrink
        if not accepted:
            return MinimizeResult(u, state, value, False, it, stat, history, "line search failed")
        prev = (u, g)
        u = cand
        gr = _gradient(config, u, problem, eps, u_ref, prox_weight, state=cstate)
        value, g, state = gr.cost, gr.gradient, gr.state
        history.append(value)
        step = trial_step
    return MinimizeResult(u, state, value, False, config.max_iter, stat, history, "iteration cap")


@dataclass
class ContinuationReport:
    eps: list
    values: list
    control_distance: list
    plain_costs: list
    stationarity: list
    drift: list
    converged: list
    iterations: list
    controls: list = field(repr=False, default_factory=list)
    states: list = field(repr=False, default_factory=list)
    limit_control: object = field(repr=False, default=None)
    limit_state: object = field(repr=False, default=None)
    limit_cost: float = float("nan")
    limit_stationarity: float = float("nan")
    limit_converged: bool = False

    def summary(self):
        def tail_decreasing(vals):
            v = vals[-3:]
            return bool(len(v) == 3 and v[1] < v[0] and v[2] < v[1])

        return {
            "per_eps": [
                {
                    "eps": e,
                    "value": v,
                    "control_distance": d,
                    "plain_cost": c,
                    "stationarity": s,
                    "drift": dr,
                    "converged": cv,
                    "iterations": it,
                }
                for e, v, d, c, s, dr, cv, it in zip(
                    self.eps, self.values, self.control_distance, self.plain_costs,
                    self.stationarity, self.drift, self.converged, self.iterations,
                )
            ],
            "drift_decreasing_last3": tail_decreasing(self.drift),
            "distance_decreasing_last3": tail_decreasing([d for d in self.control_distance if d is not None]),
            "limit_cost": self.limit_cost,
            "limit_stationarity": self.limit_stationarity,
            "limit_converged": self.limit_converged,
            "all_levels_converged": bool(all(self.converged)),
        }


def epsilon_continuation(config, problem, init=None):
    """Minimize along the eps schedule, anchoring each level at the previous minimizer.

    With ``config.presolve`` the first anchor is the minimizer of the plain
    cost at the largest eps, started from ``init``. With ``config.warm_start``
    off every level restarts from that anchor and is anchored there, which
    gives the cold-start baseline. When ``config.polish`` is set, the plain
    cost is finally minimized at the smallest eps from the last level's control.
    """
    u0 = problem.system.zero_control() if init is None else init
    if config.presolve:
        u0 = minimize_regularized(config.eps_schedule[0], u0, u0, config, problem, prox_weight=0.0).control
    rep = ContinuationReport([], [], [], [], [], [], [], [])
    u_prev = None
    current = u0
    for eps in config.eps_schedule:
        ref = current if config.warm_start else u0
        start = current if config.warm_start else u0
        res = minimize_regularized(eps, ref, start, config, problem, prox_weight=1.0)
        rep.eps.append(eps)
        rep.values.append(res.value)
        rep.control_distance.append(None if u_prev is None else (res.control - u_prev).norm())
        rep.plain_costs.append(cost_eval(res.state, res.control, problem.target, problem.kappa, problem.system))
        rep.stationarity.append(res.stationarity)
        rep.drift.append(stop_drift(res.state, problem.system))
        rep.converged.append(res.converged)
        rep.iterations.append(res.iterations)
        rep.controls.append(res.control)
        rep.states.append(res.state)
        u_prev = res.control
        current = res.control
    if config.polish:
        res = minimize_regularized(config.eps_schedule[-1], current, current, config, problem, prox_weight=0.0)
        rep.limit_control, rep.limit_state = res.control, res.state
        rep.limit_cost, rep.limit_converged = res.value, res.converged
    else:
        rep.limit_control, rep.limit_state = current, rep.states[-1]
        rep.limit_cost = rep.plain_costs[-1]
        rep.limit_converged = rep.converged[-1]
    rep.limit_stationarity = stationarity_residual(rep.limit_control, problem, config.eps_schedule[-1], config.grad_floor)
    return rep


def stationarity_residual(u, problem, eps_probe, floor=1e-10):
    """Relative projected residual ``||P(u - g) - u|| / max(||kappa u||, floor)``.

    ``g = B*(p + w q) + kappa u`` with ``(p, q)`` solving the adjoint system
    of the plain cost at ``eps_probe``; without a box this is ``||g||``
    relative to ``||kappa u||``.
    """
    system = problem.system
    state = solve_state_regularized(u, system, eps_probe)
    adj = solve_adjoint_regularized(state, system, eps_probe, state.y - problem.target)
    g = gradient_field(adj, system) + problem.kappa * u.values
    step = project(u.like(u.values - g), problem.lower, problem.upper) - u
    return step.norm() / max(problem.kappa * u.norm(), floor)


@dataclass
class ValueScanEntry:
    index: int
    perturbation_norm: float
    value: float
    minimizer_norm: float
    gradient_norm: float
    converged: bool
    failed: bool = False
    message: str = ""


@dataclass
class ValueScanReport:
    entries: list
    empirical_modulus: float
    local_lipschitz: float
    consecutive_jumps: list
    jump_free: bool
    gradient_consistent: bool

    def as_rows(self):
        return [(e.index, e.perturbation_norm, e.value, e.minimizer_norm) for e in self.entries]


def value_function_scan(perturbations, config, problem, init=None, eps=None):
    """Sample ``v(r) = min over u in the box of J(u + r)`` for each perturbation ``r``.

    Each sample minimizes the plain cost over the shifted box at the smallest
    schedule eps. The report holds the empirical modulus
    ``max |v_i - v_j| / ||r_i - r_j||`` over all pairs and a second continuity
    check bounding each consecutive jump by twice the larger sampled
    gradient norm times the step.
    """
    if problem.lower is None or problem.upper is None:
        raise InvalidInputError("value scan needs a bounded box")
    eps = config.eps_schedule[-1] if eps is None else eps
    lo, hi = problem.lower, problem.upper
    base = problem.system.zero_control() if init is None else init
    entries = []
    for i, r in enumerate(perturbations):
        shifted = problem.with_box(np.asarray(lo) + r.values, np.asarray(hi) + r.values)
        try:
            res = minimize_regularized(eps, base, base + r, config, shifted, prox_weight=0.0)
            gr = _gradient(config, res.control, shifted, eps, base, 0.0, state=res.state)
            entries.append(ValueScanEntry(i, r.norm(), res.value, (res.control - r).norm(),
                                          gr.gradient.norm(), res.converged, message=res.message))
        except NumericalFailure as exc:
            entries.append(ValueScanEntry(i, r.norm(), float("nan"), float("nan"), float("nan"),
                                          False, True, str(exc)))
    ok = [k for k, e in enumerate(entries) if not e.failed]
    modulus = 0.0
    for i, j in itertools.combinations(ok, 2):
        dr = (perturbations[i] - perturbations[j]).norm()
        if dr > 0:
            modulus = max(modulus, abs(entries[i].value - entries[j].value) / dr)
    jumps, jump_free, grad_ok = [], True, True
    lip = 2.0 * max((entries[k].gradient_norm for k in ok), default=0.0)
    for i, j in zip(ok, ok[1:]):
        dr = (perturbations[i] - perturbations[j]).norm()
        dv = abs(entries[i].value - entries[j].value)
        jumps.append({"from": i, "to": j, "step": dr, "jump": dv})
        jump_free &= dv <= modulus * dr * (1 + 1e-12) + 1e-15
        grad_ok &= dv <= lip * dr + 1e-12 * max(abs(entries[i].value), 1.0)
    return ValueScanReport(entries, modulus, lip, jumps, bool(jump_free), bool(grad_ok))
