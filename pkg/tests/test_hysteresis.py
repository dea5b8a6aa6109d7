import numpy as np
import pytest
from hypothesis import given, strategies as st

from hystrol.errors import InvalidInputError
from hystrol.hysteresis import (
    HysteresisBounds,
    PenaltyFunction,
    ScalarTrajectory,
    play_apply,
    reg_stop_apply,
    reg_stop_derivative,
    stop_apply,
    stop_directional_derivative,
)

UNIT = HysteresisBounds(-1.0, 1.0, 0.0)


def traj(values, t=None):
    values = np.asarray(values, dtype=float)
    return ScalarTrajectory(np.linspace(0, 1, values.size) if t is None else t, values)


def test_stop_hand_computed_sequence():
    v = traj([0.0, 0.5, 1.5, 0.5, -2.0, -1.5])
    z = stop_apply(v, UNIT).values
    np.testing.assert_array_equal(z, [0.0, 0.5, 1.0, 0.0, -1.0, -0.5])


def test_play_is_input_minus_stop():
    v = traj([0.0, 0.5, 1.5, 0.5, -2.0, -1.5])
    np.testing.assert_array_equal(play_apply(v, UNIT).values, [0.0, 0.0, 0.5, 0.5, -1.0, -1.0])


def test_stop_starts_from_initial_memory():
    bounds = HysteresisBounds(-1.0, 1.0, 0.75)
    z = stop_apply(traj([3.0, 3.5, 2.0]), bounds).values
    np.testing.assert_array_equal(z, [0.75, 1.0, -0.5])


@pytest.mark.parametrize("a, b, z0", [(1.0, 1.0, 1.0), (1.0, -1.0, 0.0), (-1.0, 1.0, 2.0), (np.nan, 1.0, 0.0)])
def test_bounds_validation(a, b, z0):
    with pytest.raises(InvalidInputError):
        HysteresisBounds(a, b, z0)


def test_trajectory_validation():
    with pytest.raises(InvalidInputError):
        ScalarTrajectory(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(InvalidInputError):
        ScalarTrajectory(np.array([0.0]), np.zeros(1))
    with pytest.raises(InvalidInputError):
        stop_directional_derivative(traj([0, 1]), traj([0, 1, 2]), UNIT)


def test_penalty_closed_forms_at_one_unit_outside():
    pen = PenaltyFunction(UNIT)
    assert pen.value(2.0) == 3.0
    assert pen.grad(2.0) == 8.0
    assert pen.curv(2.0) == 12.0
    assert pen.value(-2.0) == 3.0
    assert pen.grad(-2.0) == -8.0
    assert pen.curv(-2.0) == 12.0
    assert pen.value(3.0) == 16.0 and pen.grad(3.0) == 16.0 and pen.curv(3.0) == 0.0
    assert pen.value(0.3) == pen.grad(0.3) == pen.curv(0.3) == 0.0


def test_penalty_derivatives_match_finite_differences():
    pen = PenaltyFunction(HysteresisBounds(-0.5, 0.5, 0.0))
    x = np.linspace(-3.0, 3.0, 241) + 1e-3
    h = 1e-6
    np.testing.assert_allclose((pen.value(x + h) - pen.value(x - h)) / (2 * h), pen.grad(x), atol=1e-6)
    np.testing.assert_allclose((pen.grad(x + h) - pen.grad(x - h)) / (2 * h), pen.curv(x), atol=1e-6)


@given(st.floats(-1.0, 1.0), st.floats(0.01, 3.0))
def test_penalty_is_convex_and_vanishes_inside(center, width):
    bounds = HysteresisBounds(center - width, center + width, center)
    pen = PenaltyFunction(bounds)
    x = np.linspace(center - 4 * width - 3, center + 4 * width + 3, 101)
    assert np.all(pen.value(x) >= 0) and np.all(pen.curv(x) >= 0)
    inside = (x >= bounds.a) & (x <= bounds.b)
    assert np.all(pen.value(x[inside]) == 0)


def _increments(draw_list):
    return np.concatenate([[0.0], np.cumsum(draw_list)])


increments = st.lists(st.floats(-1.5, 1.5), min_size=1, max_size=60)


@given(increments)
def test_stop_stays_within_bounds(steps):
    z = stop_apply(traj(_increments(steps)), UNIT).values
    assert np.all(z >= -1.0) and np.all(z <= 1.0)


@given(increments, increments)
def test_stop_lipschitz_property(s1, s2):
    n = min(len(s1), len(s2))
    v1, v2 = _increments(s1[:n]), _increments(s2[:n])
    z1, z2 = stop_apply(traj(v1), UNIT).values, stop_apply(traj(v2), UNIT).values
    assert np.max(np.abs(z1 - z2)) <= 2 * np.max(np.abs(v1 - v2)) + 1e-12


@given(increments, st.integers(1, 5))
def test_stop_is_rate_independent(steps, refine):
    v = _increments(steps)
    coarse = stop_apply(traj(v), UNIT).values
    fine_t = np.linspace(0, 1, refine * (v.size - 1) + 1)
    fine_v = np.interp(fine_t, np.linspace(0, 1, v.size), v)
    fine = stop_apply(ScalarTrajectory(fine_t, fine_v), UNIT).values
    np.testing.assert_allclose(fine[::refine], coarse, atol=1e-12)


@given(increments, increments)
def test_stop_semigroup(s1, s2):
    v = _increments(s1 + s2)
    k = len(s1)
    full = stop_apply(traj(v), UNIT).values
    first = stop_apply(traj(v[: k + 1]), UNIT).values
    restarted = HysteresisBounds(-1.0, 1.0, float(first[-1]))
    second = stop_apply(traj(v[k:]), restarted).values
    np.testing.assert_allclose(np.concatenate([first, second[1:]]), full, atol=1e-12)


def test_directional_derivative_matches_difference_quotient_away_from_kinks():
    rng = np.random.default_rng(4)
    t = np.linspace(0, 1, 400)
    v = traj(3 * np.sin(2 * np.pi * t) + 0.1 * rng.normal(size=t.size), t)
    h = traj(np.cos(3 * t), t)
    zeta = stop_directional_derivative(v, h, UNIT).values
    lam = 1e-7
    fd = (stop_apply(v.with_values(v.values + lam * h.values), UNIT).values - stop_apply(v, UNIT).values) / lam
    np.testing.assert_allclose(zeta, fd, atol=1e-6)


def test_directional_derivative_one_sided_at_the_bound():
    v = traj([0.0, 1.0, 1.0])
    up = stop_directional_derivative(v, traj([0.0, 1.0, 1.0]), UNIT).values
    down = stop_directional_derivative(v, traj([0.0, -1.0, -1.0]), UNIT).values
    assert up[1] == 0.0 and down[1] == -1.0


def test_directional_derivative_is_positively_homogeneous():
    rng = np.random.default_rng(1)
    t, vals = np.linspace(0, 1, 200), np.cumsum(rng.normal(scale=0.3, size=200))
    v, h = traj(vals, t), traj(rng.normal(size=200), t)
    a = stop_directional_derivative(v, h, UNIT).values
    b = stop_directional_derivative(v, h.with_values(2.5 * h.values), UNIT).values
    np.testing.assert_allclose(b, 2.5 * a, atol=1e-12)


def test_regularized_stop_step_solves_the_implicit_equation():
    t = np.linspace(0, 1, 301)
    v = traj(3 * np.sin(4 * t), t)
    pen = PenaltyFunction(UNIT)
    eps = 1e-2
    z = reg_stop_apply(v, eps, pen).values
    resid = np.diff(z) - np.diff(v.values) + np.diff(t) / eps * pen.grad(z[1:])
    assert np.max(np.abs(resid)) < 1e-10


def test_regularized_stop_converges_to_stop():
    t = np.linspace(0, 1, 4001)
    v = traj(2.5 * np.sin(2 * np.pi * t), t)
    exact = stop_apply(v, UNIT).values
    pen = PenaltyFunction(UNIT)
    dist = [np.max(np.abs(reg_stop_apply(v, e, pen).values - exact)) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(dist, dist[1:]))
    # quasi-static overshoot past a bound at input rate r: sqrt(eps * r / 12)
    rate = 2.5 * 2 * np.pi
    assert dist[-1] <= 1.1 * np.sqrt(1e-4 * rate / 12)


def test_regularized_stop_derivative_matches_finite_differences():
    t = np.linspace(0, 1, 501)
    v = traj(3 * np.sin(4 * t), t)
    h = traj(np.cos(7 * t), t)
    pen = PenaltyFunction(UNIT)
    eps, lam = 1e-2, 1e-6
    zeta = reg_stop_derivative(v, h, eps, pen).values
    plus = reg_stop_apply(v.with_values(v.values + lam * h.values), eps, pen).values
    minus = reg_stop_apply(v.with_values(v.values - lam * h.values), eps, pen).values
    np.testing.assert_allclose(zeta, (plus - minus) / (2 * lam), atol=1e-7)


def test_regularized_stop_rejects_nonpositive_eps():
    with pytest.raises(InvalidInputError):
        reg_stop_apply(traj([0.0, 1.0]), 0.0, PenaltyFunction(UNIT))
