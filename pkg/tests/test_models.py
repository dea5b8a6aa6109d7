import numpy as np
import pytest
from hypothesis import given, strategies as st

from hystrol.discretization import ComponentBoundaryConfig, SpatialGrid, active_mask, mass_weights
from hystrol.errors import InvalidInputError
from hystrol.models import KinkedActivation, LinearCoupling, ZeroModel, audit_model, build_model

GRID = SpatialGrid(10, 2)
BC = ComponentBoundaryConfig((("dirichlet", "dirichlet"), ("neumann", "neumann")))
MASK, MASS = active_mask(GRID, BC), mass_weights(GRID, BC)


def linear():
    return LinearCoupling(coupling=[[-1.0, 0.5], [0.3, -0.5]], amplitude=[2.0, -1.0], slope=[1.5, 1.0], shift=[0.0, 0.2])


def kinked(smoothing=0.0):
    return KinkedActivation(coupling=[[-1.0, 0.0], [0.0, -1.0]], amplitude=[0.0, 1.0], slope=[1.0, 2.0],
                            shift=[0.0, 0.0], kink_component=0, gain=2.0, threshold=0.1, smoothing=smoothing)


@pytest.mark.parametrize("model", [linear(), kinked(0.05)])
def test_partial_derivatives_match_finite_differences(model):
    rng = np.random.default_rng(0)
    y, dy = rng.normal(size=GRID.shape), rng.normal(size=GRID.shape)
    z, lam = 0.37, 1e-6
    fd_y = (model.f(y + lam * dy, z) - model.f(y - lam * dy, z)) / (2 * lam)
    fd_z = (model.f(y, z + lam) - model.f(y, z - lam)) / (2 * lam)
    np.testing.assert_allclose(model.dy_apply(y, z, dy), fd_y, atol=1e-7)
    np.testing.assert_allclose(model.dz(y, z), fd_z, atol=1e-7)


@given(st.integers(0, 2**32 - 1))
def test_state_adjoint_is_the_transpose(seed):
    rng = np.random.default_rng(seed)
    model = linear()
    # solvers zero inactive nodes, where the nodal mass differs between components
    y, dy, p = (np.where(MASK, rng.normal(size=GRID.shape), 0.0) for _ in range(3))
    lhs = np.sum(MASS * model.dy_apply(y, 0.1, dy) * p)
    rhs = np.sum(MASS * dy * model.dy_adjoint(y, 0.1, p))
    assert np.isclose(lhs, rhs)


def test_kink_one_sided_derivatives():
    model = kinked()
    y = np.zeros(GRID.shape)
    up = model.dir_deriv(y, 0.1, np.zeros(GRID.shape), 1.0)
    down = model.dir_deriv(y, 0.1, np.zeros(GRID.shape), -1.0)
    assert np.allclose(up[0], 2.0) and np.allclose(down[0], 0.0)


@given(st.floats(1e-4, 1.0), st.floats(-3.0, 3.0))
def test_softplus_relaxation_error_is_bounded(eps, z):
    exact, smooth = kinked(), kinked().regularized(eps)
    y = np.zeros(GRID.shape)
    err = np.max(np.abs(smooth.f(y, z) - exact.f(y, z)))
    assert err <= exact.eps_error_constant * eps * (1 + 1e-12)


def test_relaxation_of_smooth_models_is_identity():
    model = linear()
    assert model.regularized(1e-3) is model
    assert ZeroModel(2).regularized(1e-3) == ZeroModel(2)


@pytest.mark.parametrize("model", [linear(), kinked(), ZeroModel(2)])
def test_model_audit_passes_for_builtin_models(model):
    rep = audit_model(model, MASS, MASK, samples=100)
    assert rep.growth_ok and rep.eps_error_ok and rep.lipschitz_ok


def test_registry():
    model = build_model("linear-coupling", 2, {"coupling": [1, 0, 0, 1], "amplitude": [1, 2]})
    assert isinstance(model, LinearCoupling) and model.m == 2
    assert isinstance(build_model("kinked-activation", 2, {"gain": 3.0}), KinkedActivation)
    with pytest.raises(KeyError):
        build_model("cubic", 2)


def test_invalid_model_parameters():
    with pytest.raises(InvalidInputError):
        LinearCoupling(coupling=np.zeros((2, 3)), amplitude=0.0, slope=1.0, shift=0.0)
    with pytest.raises(InvalidInputError):
        kinked().regularized(0.0)
    with pytest.raises(InvalidInputError):
        KinkedActivation(coupling=np.eye(1), amplitude=0.0, slope=1.0, shift=0.0, kink_component=3)
