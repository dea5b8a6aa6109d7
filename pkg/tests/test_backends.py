"""The compiled kernels and the pure-Python fallback must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hystrol import _kernels_py

compiled = pytest.importorskip("hystrol._kernels")

signals = st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=80).map(lambda xs: np.cumsum(xs))


@given(signals, st.floats(-1.0, 1.0))
def test_stop_clamp_identical(v, z0):
    np.testing.assert_array_equal(compiled.stop_clamp(v, -1.0, 1.0, z0), _kernels_py.stop_clamp(v, -1.0, 1.0, z0))


@given(signals)
def test_stop_derivative_identical(v):
    h = np.sin(np.arange(v.size))
    a = compiled.stop_derivative(v, h, -1.0, 1.0, 0.0, 1e-12)
    b = _kernels_py.stop_derivative(v, h, -1.0, 1.0, 0.0, 1e-12)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=50)
@given(signals, st.sampled_from([1e-3, 1e-1, 10.0, 1e3]))
def test_regularized_stop_agrees(v, c_scale):
    c = np.full(v.size - 1, c_scale)
    za, fa = compiled.reg_stop(v, c, -1.0, 1.0, 0.0, 1e-12)
    zb, fb = _kernels_py.reg_stop(v, c, -1.0, 1.0, 0.0, 1e-12)
    assert fa == fb == -1
    np.testing.assert_allclose(za, zb, rtol=0, atol=1e-12)
    np.testing.assert_allclose(compiled.reg_stop_derivative(np.cos(v), za, c, -1.0, 1.0),
                               _kernels_py.reg_stop_derivative(np.cos(v), zb, c, -1.0, 1.0), atol=1e-12)


@given(st.floats(-5, 5))
def test_penalty_scalars_identical(x):
    for name in ("psi", "dpsi", "d2psi"):
        assert getattr(compiled, name)(x, -1.0, 1.0) == getattr(_kernels_py, name)(x, -1.0, 1.0)


def test_thomas_agrees_with_dense_solve():
    rng = np.random.default_rng(0)
    k = 30
    lower = np.ascontiguousarray(rng.uniform(-1, 0, size=(3, k)))
    upper = np.ascontiguousarray(rng.uniform(-1, 0, size=(3, k)))
    diag = np.ascontiguousarray(3.0 + rng.uniform(size=(3, k)))
    rhs = np.ascontiguousarray(rng.normal(size=(3, k)))
    for mod in (compiled, _kernels_py):
        x = mod.thomas_solve(lower, *mod.thomas_factor(lower, diag, upper), rhs)
        for j in range(3):
            A = np.diag(diag[j]) + np.diag(lower[j, 1:], -1) + np.diag(upper[j, :-1], 1)
            np.testing.assert_allclose(A @ x[j], rhs[j], atol=1e-12)


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_backend_selected_by_environment(backend):
    env = dict(os.environ, HYSTROL_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", "import hystrol; print(hystrol.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == backend


def test_forward_solve_agrees_across_backends(tmp_path):
    script = (
        "import numpy as np, sys\n"
        "from hystrol.problem import make_system\n"
        "from hystrol.dynamics import solve_state_regularized\n"
        "s = make_system(n=16, m=2, steps=300)\n"
        "u = s.zero_control(); u = u.like(u.values + 4.0 * s.mask)\n"
        "np.save(sys.argv[1], solve_state_regularized(u, s, 1e-3).z.values)\n"
    )
    results = {}
    for backend in ("python", "cython"):
        path = tmp_path / f"{backend}.npy"
        subprocess.run([sys.executable, "-c", script, str(path)], check=True,
                       env=dict(os.environ, HYSTROL_BACKEND=backend))
        results[backend] = np.load(path)
    np.testing.assert_allclose(results["python"], results["cython"], atol=1e-12)
