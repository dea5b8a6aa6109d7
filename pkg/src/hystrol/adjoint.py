"""Backward adjoint solver, reduced gradient and saturation-set diagnostics.

The adjoint pair ``(p, q)`` is marched backward from ``p = q = 0`` at the
final time. Per step, with coefficients frozen at ``(y[n], z[n])``::

    (I + dt A) p[n] = p[n+1] + dt * (Fy* p[n+1] + q[n+1] (Fy* w - A w) + nu[n])
    q[n] (1 + dt/eps psi''(z[n])) = q[n+1] + dt * (<p[n], Fz> + (S Fz) q[n+1])

where ``w`` is the representer of the projection and all adjoints are taken
in the mass inner product. This is a backward-Euler discretization of the
continuous adjoint system, so adjoint identities hold to first order in dt.
"""
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlTrajectory, solve_linearized_regularized, solve_state_regularized, trapezoid_weights
from .errors import InvalidInputError, NumericalFailure
from .hysteresis import ScalarTrajectory, play_apply


@dataclass
class AdjointTrajectory:
    t: np.ndarray
    p: np.ndarray
    q: ScalarTrajectory
    eps: float
    q_source: np.ndarray = field(repr=False, default=None)

    def combined(self, weight):
        """``p + w q`` at every sample."""
        return self.p + self.q.values[:, None, None] * weight


def solve_adjoint_regularized(base, system, eps, residual):
    """March the adjoint system backward along the regularized state ``base``.

    Parameters
    ----------
    base : StateTrajectory
        Output of :func:`solve_state_regularized` at the same ``eps``.
    system : StateSystem
    eps : float
    residual : ndarray, shape (N + 1, m, n + 2)
        Source of the field equation, ``y - y_d`` for the tracking cost.

    Returns
    -------
    AdjointTrajectory
    """
    if not eps > 0:
        raise InvalidInputError("regularization parameter must be positive")
    if residual.shape != base.y.shape:
        raise InvalidInputError(f"residual shape {residual.shape} does not match state {base.y.shape}")
    N, dt, mask, mass = system.steps, system.dt, system.mask, system.mass
    solver = system.op.step_solver(dt)
    S = system.projection
    w = S.representer()
    Aw = system.op.matvec(w)
    model = system.model.regularized(eps)
    curv = system.penalty.curv(base.z.values)
    c = dt / eps

    p = np.zeros_like(base.y)
    q = np.zeros(N + 1)
    src = np.zeros(N + 1)
    for n in range(N - 1, -1, -1):
        yn, zn = base.y[n], base.z.values[n]
        adj_p = model.dy_adjoint(yn, zn, p[n + 1])
        adj_w = model.dy_adjoint(yn, zn, w)
        forcing = adj_p + q[n + 1] * (adj_w - Aw) + residual[n]
        p[n] = solver.solve(p[n + 1] + dt * np.where(mask, forcing, 0.0))
        Fz = np.where(mask, model.dz(yn, zn), 0.0)
        src[n] = np.sum(mass * p[n] * Fz) + S.apply(Fz) * q[n + 1]
        q[n] = (q[n + 1] + dt * src[n]) / (1.0 + c * curv[n])
        if not np.isfinite(q[n]):
            raise NumericalFailure("non-finite adjoint", step=n)
    return AdjointTrajectory(system.t, p, ScalarTrajectory(system.t, q), float(eps), src)


def gradient_field(adjoint, system):
    """Control-space restriction of ``p + w q``."""
    w = system.projection.representer()
    return system.injector.restrict(adjoint.combined(w))


def verify_adjoint_identity(u, system, eps, h, nu, floor=1e-300, base=None):
    """Relative mismatch between ``<nu, zeta(h)>`` and ``<p + w q, B h>``.

    Returns
    -------
    residual, left, right : float
    """
    if base is None:
        base = solve_state_regularized(u, system, eps)
    zeta, _ = solve_linearized_regularized(u, h, base, system, eps)
    left = system.field_inner(nu, zeta)
    adj = solve_adjoint_regularized(base, system, eps, nu)
    right = h.like(gradient_field(adj, system)).inner(h)
    scale = max(abs(left), abs(right), floor)
    return abs(left - right) / scale, left, right


@dataclass
class GradientResult:
    gradient: ControlTrajectory
    state: object
    adjoint: AdjointTrajectory
    cost: float


def reduced_gradient(u, system, eps, target, kappa, u_ref=None, prox_weight=1.0, state=None):
    """Gradient of the regularized cost in the control inner product.

    ``restrict(p + w q) + kappa u + prox_weight (u - u_ref)``; with
    ``prox_weight = 0`` this is the gradient of the plain tracking cost.
    ``state`` may pass a precomputed regularized solve at ``u``.
    """
    from .dynamics import reg_cost_eval

    if u_ref is None:
        u_ref = u.like(np.zeros_like(u.values))
    if state is None:
        state = solve_state_regularized(u, system, eps)
    adj = solve_adjoint_regularized(state, system, eps, state.y - target)
    g = gradient_field(adj, system) + kappa * u.values + prox_weight * (u.values - u_ref.values)
    cost = reg_cost_eval(state, u, target, kappa, u_ref, system, prox_weight)
    return GradientResult(u.like(g), state, adj, cost)


@dataclass
class MeasureDensity:
    t: np.ndarray
    density: np.ndarray
    interval_integrals: list

    def total_variation(self, select=None):
        tw = trapezoid_weights(self.t)
        d = np.abs(self.density) if select is None else np.abs(self.density) * select
        return float(np.sum(tw * d))


def mu_density(adjoint, base, system, eps, partition=None):
    """Sampled density ``psi''(z) q / eps`` and its trapezoid integral per partition interval."""
    if adjoint.q.values.shape != base.z.values.shape:
        raise InvalidInputError("adjoint and state grids differ")
    dens = system.penalty.curv(base.z.values) * adjoint.q.values / eps
    integrals = []
    if partition is not None:
        for iv in partition.intervals:
            i0, i1 = iv.start, min(iv.stop, len(dens) - 1)
            seg = slice(i0, i1 + 1)
            integrals.append(float(np.sum(trapezoid_weights(base.t[seg]) * dens[seg])) if i1 > i0 else 0.0)
    return MeasureDensity(base.t, dens, integrals)


INTERIOR, LOWER, UPPER = 0, -1, 1
_LABEL_NAMES = {INTERIOR: "I0", LOWER: "Ia", UPPER: "Ib"}


@dataclass
class Interval:
    """Maximal run of equally labelled samples ``start..stop-1``.

    It covers ``[t[start], t[stop])``, or ``[t[start], T]`` for the last run.
    """

    kind: int
    start: int
    stop: int
    t_start: float
    t_end: float
    closed: bool

    @property
    def name(self):
        return _LABEL_NAMES[self.kind]


@dataclass
class PartitionReport:
    t: np.ndarray
    labels: np.ndarray
    intervals: list
    switching: list
    tol_z: float
    audits: dict = field(default_factory=dict)

    def on_boundary(self):
        return self.labels != INTERIOR

    def boundary_interior_mask(self, margin):
        """Samples inside boundary runs at least ``margin`` samples away from either end."""
        out = np.zeros(self.labels.shape, dtype=bool)
        for iv in self.intervals:
            if iv.kind != INTERIOR:
                lo, hi = iv.start + margin, iv.stop - margin
                if iv.stop == len(self.labels):
                    hi = iv.stop - 1  # q(T) = 0 by construction; the final sample says nothing
                if hi > lo:
                    out[lo:hi] = True
        return out

    def as_dict(self):
        return {
            "tol_z": self.tol_z,
            "intervals": [
                {"kind": iv.name, "t_start": iv.t_start, "t_end": iv.t_end, "closed": iv.closed}
                for iv in self.intervals
            ],
            "switching": [{"t": t, "kind": k} for t, k in self.switching],
            "audits": self.audits,
        }


def partition_times(z, bounds, tol_z):
    """Split the time axis by whether the memory sits on a bound.

    Samples with ``|z - a| <= tol_z`` or ``|z - b| <= tol_z`` are boundary
    samples; maximal runs of equal labels become half-open intervals, and the
    first sample of a run is a switching time whenever the run changes
    between interior and boundary.
    """
    zv = z.values
    t = z.t
    labels = np.zeros(zv.shape, dtype=int)
    labels[np.abs(zv - bounds.a) <= tol_z] = LOWER
    labels[np.abs(zv - bounds.b) <= tol_z] = UPPER
    change = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], change))
    stops = np.concatenate((change, [labels.size]))
    intervals, switching = [], []
    for k, (s0, s1) in enumerate(zip(starts, stops)):
        last = s1 == labels.size
        t_end = float(t[-1]) if last else float(t[s1])
        intervals.append(Interval(int(labels[s0]), int(s0), int(s1), float(t[s0]), t_end, bool(last)))
        if k > 0:
            before, after = labels[s0 - 1], labels[s0]
            if before == INTERIOR and after != INTERIOR:
                switching.append((float(t[s0]), "(0,d)"))
            elif before != INTERIOR and after == INTERIOR:
                switching.append((float(t[s0]), "(d,0)"))
    return PartitionReport(t, labels, intervals, switching, float(tol_z))


def default_tol_z(eps, Sy, t, floor=1e-6):
    """Ten boundary-layer widths ``sqrt(eps * max|dSy/dt| / 12)``, floored."""
    rate = float(np.max(np.abs(np.diff(Sy) / np.diff(t))))
    return max(10.0 * np.sqrt(eps * rate / 12.0), floor)


def _distance_in_time(t, mask):
    """Time distance from each sample to the nearest sample where ``mask`` holds."""
    if not mask.any():
        return np.full(t.shape, np.inf)
    pts = t[mask]
    idx = np.clip(np.searchsorted(pts, t), 1, len(pts) - 1) if len(pts) > 1 else np.zeros(t.shape, dtype=int)
    left = np.abs(t - pts[np.maximum(idx - 1, 0)])
    right = np.abs(t - pts[idx])
    return np.minimum(left, right)


def limit_diagnostics(states, adjoints, system, partition, regularity_check=True,
                      margin=None, delta=None, jump_threshold=None, jump_window=None,
                      regularity_threshold=0.0):
    """Audit the saturation-set structure of the adjoint along an eps schedule.

    Parameters
    ----------
    states, adjoints : lists
        Regularized states and their adjoints, one pair per eps, on a common grid.
    partition : PartitionReport
        Usually detected from the smallest-eps memory.
    margin : int, optional
        Samples trimmed from each end of a boundary run before taking
        ``sup |q|``; defaults to 2% of the steps.
    delta : float, optional
        Time distance from the boundary set beyond which measure mass counts
        as misplaced; defaults to 5% of the horizon. The penalized memory
        leaves a bound only algebraically after contact ends (release time of
        order ``eps**(1/3)``), so ``delta`` must exceed that release time for
        the audited eps values.

    Returns
    -------
    PartitionReport
        ``partition`` with ``audits`` filled in.
    """
    t = system.t
    N = system.steps
    margin = max(2, int(0.02 * N)) if margin is None else int(margin)
    delta = 0.05 * system.horizon if delta is None else float(delta)
    jump_window = max(2, int(0.02 * N)) if jump_window is None else int(jump_window)
    on_bd = partition.on_boundary()
    inner_bd = partition.boundary_interior_mask(margin)
    far = _distance_in_time(t, on_bd) > delta
    tw = trapezoid_weights(t)
    transitions = np.zeros(N + 1, dtype=bool)
    for iv in partition.intervals[1:]:
        lo, hi = max(iv.start - jump_window, 0), min(iv.start + jump_window + 1, N + 1)
        transitions[lo:hi] = True

    per_eps = []
    for st, adj in zip(states, adjoints):
        q = adj.q.values
        eps = adj.eps
        play = play_apply(st.sy_trajectory(), system.bounds).values
        dplay = np.abs(np.diff(play))
        comp = float(np.sum(dplay * np.abs(q[:-1]) * on_bd[:-1]))
        sup_q = float(np.max(np.abs(q[inner_bd]))) if inner_bd.any() else 0.0
        dens = mu_density(adj, st, system, eps)
        mass_far = float(np.sum(tw * np.abs(dens.density) * far))
        # discrete identity: dt * density[n] = q[n+1] - q[n] + dt * source[n]
        sel = on_bd[:-1]
        lhs = float(np.sum(system.dt * dens.density[:-1] * sel))
        rhs = float(np.sum((q[1:] - q[:-1]) * sel) + np.sum(system.dt * adj.q_source[:-1] * sel))
        identity_gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        absq = np.abs(q)
        thr = jump_threshold if jump_threshold is not None else 10.0 * max(np.median(np.abs(np.diff(absq))), 1e-300)
        grow = absq[:-1] - absq[1:]  # growth of |q| going backward from n+1 to n
        jumps = np.flatnonzero(grow > thr)
        bad = [int(j) for j in jumps if not transitions[j]]
        per_eps.append({
            "eps": eps,
            "complementarity": comp,
            "sup_q_boundary_interior": sup_q,
            "mu_mass_far": mass_far,
            "mu_identity_gap": identity_gap,
            "jump_count": int(jumps.size),
            "jump_violations": len(bad),
            "q_terminal_zero": bool(q[-1] == 0.0),
            "p_terminal_zero": bool(np.all(adj.p[-1] == 0.0)),
        })

    audits = {"per_eps": per_eps, "margin_samples": margin, "delta": delta}
    if regularity_check and on_bd.any():
        st = states[-1]
        rate = np.diff(st.Sy) / np.diff(t)
        sample = inner_bd[:-1]
        outward = np.where(partition.labels[:-1] == UPPER, rate, -rate)[sample]
        worst = float(np.min(outward)) if outward.size else float("nan")
        audits["regularity_min_outward_rate"] = worst
        audits["regularity_ok"] = bool(outward.size and worst > regularity_threshold)
    else:
        audits["regularity_min_outward_rate"] = None
        audits["regularity_ok"] = bool(not on_bd.any())

    def decreasing(key):
        vals = [d[key] for d in per_eps]
        return bool(all(b < a or (a == 0.0 and b == 0.0) for a, b in zip(vals, vals[1:])))

    audits["complementarity_decreasing"] = decreasing("complementarity")
    audits["sup_q_decreasing"] = decreasing("sup_q_boundary_interior")
    audits["mu_mass_far_decreasing"] = decreasing("mu_mass_far")
    audits["terminal_exact"] = all(d["q_terminal_zero"] and d["p_terminal_zero"] for d in per_eps)
    partition.audits = audits
    return partition


def discrete_gradient(u, system, eps, target, kappa, u_ref=None, prox_weight=1.0, state=None):
    """Exact gradient of the discrete regularized cost (adjoint of the forward recursion).

    Unlike :func:`reduced_gradient`, which discretizes the continuous adjoint
    system, this differentiates the time-stepping scheme itself, so it is
    consistent with the cost values a line search compares. The returned
    adjoint holds the discrete multipliers: ``p[n]`` pairs with the control at
    sample ``n + 1``.
    """
    from .dynamics import reg_cost_eval

    if u_ref is None:
        u_ref = u.like(np.zeros_like(u.values))
    if state is None:
        state = solve_state_regularized(u, system, eps)
    N, dt, mask, mass = system.steps, system.dt, system.mask, system.mass
    solver = system.op.step_solver(dt)
    S = system.projection
    w = S.representer()
    model = system.model.regularized(eps)
    damp = 1.0 / (1.0 + (dt / eps) * system.penalty.curv(state.z.values))
    tw = trapezoid_weights(system.t)
    r = state.y - target

    pi = np.zeros_like(state.y)
    mu = np.zeros(N + 1)
    pi[N - 1] = solver.solve(tw[N] * r[N])
    for n in range(N - 1, 0, -1):
        yn, zn = state.y[n], state.z.values[n]
        Fz = np.where(mask, model.dz(yn, zn), 0.0)
        mu[n] = damp[n + 1] * mu[n + 1] + dt * np.sum(mass * Fz * pi[n])
        lam = (tw[n] * r[n] + pi[n] + dt * np.where(mask, model.dy_adjoint(yn, zn, pi[n]), 0.0)
               + w * (damp[n] * mu[n] - damp[n + 1] * mu[n + 1]))
        pi[n - 1] = solver.solve(lam)
        if not np.isfinite(mu[n]):
            raise NumericalFailure("non-finite discrete adjoint", step=n)
    g = np.zeros_like(u.values)
    g[1:] = system.injector.restrict(pi[:-1])
    g += kappa * u.values + prox_weight * (u.values - u_ref.values)
    cost = reg_cost_eval(state, u, target, kappa, u_ref, system, prox_weight)
    adj = AdjointTrajectory(system.t, pi, ScalarTrajectory(system.t, mu), float(eps))
    return GradientResult(u.like(g), state, adj, cost)
