import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hystrol.adjoint import (
    INTERIOR,
    LOWER,
    UPPER,
    default_tol_z,
    discrete_gradient,
    limit_diagnostics,
    mu_density,
    partition_times,
    reduced_gradient,
    solve_adjoint_regularized,
    verify_adjoint_identity,
)
from hystrol.dynamics import random_smooth_field, reg_cost_eval, solve_state_regularized
from hystrol.errors import InvalidInputError
from hystrol.hysteresis import HysteresisBounds, ScalarTrajectory
from hystrol.models import LinearCoupling
from hystrol.problem import build_target, make_system


def smooth_pair(system, seed):
    rng = np.random.default_rng(seed)
    x = system.op.grid.nodes
    h = system.zero_control().like(np.where(system.mask, random_smooth_field(system.t, x, system.op.grid.m, rng), 0.0))
    nu = np.where(system.mask, random_smooth_field(system.t, x, system.op.grid.m, rng), 0.0)
    return h, nu


def test_adjoint_identity_is_first_order_consistent(small_system, sine_control):
    residuals = []
    for steps in (400, 200):
        s = small_system.with_steps(steps)
        h, nu = smooth_pair(s, 5)
        res, left, right = verify_adjoint_identity(sine_control(s), s, 1e-2, h, nu)
        residuals.append(res)
    assert residuals[0] < 2e-2
    assert residuals[1] / residuals[0] > 1.7


def test_adjoint_terminal_values_are_exactly_zero(small_system, sine_control):
    st_ = solve_state_regularized(sine_control(small_system), small_system, 1e-2)
    adj = solve_adjoint_regularized(st_, small_system, 1e-2, st_.y)
    assert adj.q.values[-1] == 0.0 and not adj.p[-1].any()


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([1e-1, 1e-2, 1e-3]))
def test_discrete_gradient_matches_finite_differences(small_system, sine_control, seed, eps):
    s = small_system
    u = sine_control(s)
    target = build_target("sine", s, {"amplitude": [0.5, 0.2]})
    ref = u * 0.5
    h, _ = smooth_pair(s, seed)
    g = discrete_gradient(u, s, eps, target, 1e-2, ref).gradient

    def cost(v):
        return reg_cost_eval(solve_state_regularized(v, s, eps), v, target, 1e-2, ref, s)

    lam = 1e-5 * u.norm() / h.norm()
    fd = (cost(u + lam * h) - cost(u - lam * h)) / (2 * lam)
    assert abs(g.inner(h) - fd) <= 1e-6 * abs(fd)


def test_discrete_gradient_for_boundary_control():
    model = LinearCoupling(coupling=[[-1.0]], amplitude=[1.0], slope=[2.0], shift=[0.0])
    s = make_system(n=12, m=1, steps=150, boundary=[("neumann", "neumann")], model=model,
                    bounds=HysteresisBounds(-0.2, 0.2, 0.0), control="boundary")
    u = s.zero_control().like(np.stack([3 * np.sin(np.pi * s.t), -2 * np.sin(np.pi * s.t)], axis=1))
    h = u.like(np.stack([np.cos(2 * s.t), np.sin(5 * s.t)], axis=1))
    target = build_target("constant", s, {"value": [0.3]})
    g = discrete_gradient(u, s, 1e-2, target, 1e-2).gradient

    def cost(v):
        return reg_cost_eval(solve_state_regularized(v, s, 1e-2), v, target, 1e-2, u * 0.0, s)

    lam = 1e-6
    fd = (cost(u + lam * h) - cost(u - lam * h)) / (2 * lam)
    assert abs(g.inner(h) - fd) <= 1e-6 * abs(fd)


def test_reduced_gradient_agrees_with_discrete_gradient_to_first_order(small_system, sine_control):
    gaps = []
    for steps in (200, 400):
        s = small_system.with_steps(steps)
        u = sine_control(s)
        target = build_target("sine", s, {"amplitude": [0.5, 0.2]})
        h, _ = smooth_pair(s, 2)
        a = reduced_gradient(u, s, 1e-2, target, 1e-2).gradient.inner(h)
        b = discrete_gradient(u, s, 1e-2, target, 1e-2).gradient.inner(h)
        gaps.append(abs(a - b) / abs(b))
    assert gaps[0] < 0.05 and gaps[1] < gaps[0]


def test_partition_of_a_hand_built_memory():
    t = np.linspace(0, 1, 11)
    z = ScalarTrajectory(t, np.array([0, 0.5, 1, 1, 1, 0.2, -1, -1, 0, 0, 1.0]))
    part = partition_times(z, HysteresisBounds(-1, 1, 0), 1e-9)
    assert part.labels.tolist() == [0, 0, 1, 1, 1, 0, -1, -1, 0, 0, 1]
    assert [iv.name for iv in part.intervals] == ["I0", "Ib", "I0", "Ia", "I0", "Ib"]
    assert [k for _, k in part.switching] == ["(0,d)", "(d,0)", "(0,d)", "(d,0)", "(0,d)"]
    assert np.allclose([s for s, _ in part.switching], [0.2, 0.5, 0.6, 0.8, 1.0])
    assert part.intervals[-1].closed and not part.intervals[0].closed
    inner = part.boundary_interior_mask(0)
    assert inner.tolist() == [False, False, True, True, True, False, True, True, False, False, False]
    assert {UPPER, LOWER, INTERIOR} == set(part.labels.tolist())


def test_default_band_width():
    t = np.linspace(0, 1, 101)
    assert np.isclose(default_tol_z(1e-2, 2 * t, t), 10 * np.sqrt(1e-2 * 2 / 12))
    assert default_tol_z(0.0, 2 * t, t) == 1e-6


def test_measure_density_and_limit_audit_structure(small_system, sine_control):
    s = small_system
    u = sine_control(s)
    target = build_target("sine", s, {"amplitude": [0.5, 0.2]})
    eps_values = (1e-2, 1e-3)
    states = [solve_state_regularized(u, s, e) for e in eps_values]
    adjs = [solve_adjoint_regularized(st_, s, e, st_.y - target) for st_, e in zip(states, eps_values)]
    part = partition_times(states[-1].z, s.bounds, 1e-3)
    dens = mu_density(adjs[-1], states[-1], s, 1e-3, part)
    assert len(dens.interval_integrals) == len(part.intervals)
    limit_diagnostics(states, adjs, s, part)
    audits = part.audits
    assert audits["terminal_exact"]
    for row in audits["per_eps"]:
        assert row["mu_identity_gap"] < 1e-12
        assert {"complementarity", "sup_q_boundary_interior", "mu_mass_far", "jump_violations"} <= set(row)


def test_adjoint_rejects_bad_inputs(small_system):
    st_ = solve_state_regularized(small_system.zero_control(), small_system, 1e-2)
    with pytest.raises(InvalidInputError):
        solve_adjoint_regularized(st_, small_system, 0.0, st_.y)
    with pytest.raises(InvalidInputError):
        solve_adjoint_regularized(st_, small_system, 1e-2, st_.y[:-1])
