"""Scalar stop and play operators on sampled inputs, and their penalty relaxation.

The exact stop uses the catch-up rule ``z[n+1] = clamp(z[n] + dv, a, b)``.
The relaxed stop replaces the hard constraint by the gradient flow of a
convex penalty that vanishes on ``[a, b]`` and is stepped by backward Euler.
"""
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import InvalidInputError, NumericalFailure


@dataclass(frozen=True)
class HysteresisBounds:
    """Admissible interval ``[a, b]`` of the memory and its initial value ``z0``."""

    a: float = -1.0
    b: float = 1.0
    z0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and np.isfinite(self.z0)):
            raise InvalidInputError("hysteresis bounds must be finite")
        if not self.a < self.b:
            raise InvalidInputError(f"need a < b, got a={self.a}, b={self.b}")
        if not self.a <= self.z0 <= self.b:
            raise InvalidInputError(f"initial memory z0={self.z0} outside [{self.a}, {self.b}]")

    def default_kink_tol(self):
        return 1e-12 * max(abs(self.a), abs(self.b), 1.0)


@dataclass(frozen=True)
class ScalarTrajectory:
    """A real function of time sampled on a strictly increasing grid."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.t, dtype=float)
        v = np.ascontiguousarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise InvalidInputError("time grid and values must be 1-D arrays of equal length")
        if t.size < 2:
            raise InvalidInputError("a trajectory needs at least two samples")
        if not np.all(np.diff(t) > 0):
            raise InvalidInputError("time grid must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.t.size

    def same_grid(self, other):
        return self.t.shape == other.t.shape and np.array_equal(self.t, other.t)

    def with_values(self, values):
        return ScalarTrajectory(self.t, values)


@dataclass(frozen=True)
class PenaltyFunction:
    """Convex penalty vanishing on ``[a, b]``.

    Above ``b`` with ``d = x - b`` it is ``d**3 * (4 - d)`` up to ``d = 2`` and
    continues linearly with slope 16; below ``a`` it is mirrored. The second
    derivative is bounded by ``curv_bound = 12`` and ``|psi'(x)| <= 9 |x - a|``
    (``grad_ratio_bound``), the worst ratio being attained at ``d = 1.5``.
    """

    bounds: HysteresisBounds = field(default_factory=HysteresisBounds)
    grad_ratio_bound: float = 9.0
    curv_bound: float = 12.0

    @property
    def a1(self):
        return self.bounds.a - 2.0

    @property
    def b1(self):
        return self.bounds.b + 2.0

    def _excess(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.bounds.a, self.bounds.b
        up = np.where(x > b, x - b, 0.0)
        down = np.where(x < a, a - x, 0.0)
        return up, down

    def value(self, x):
        up, down = self._excess(x)
        d = up + down
        out = np.where(d <= 2.0, d**3 * (4.0 - d), 16.0 * (d - 1.0))
        return out[()] if out.ndim == 0 else out

    def grad(self, x):
        up, down = self._excess(x)
        mag = lambda d: np.where(d <= 2.0, 4.0 * d * d * (3.0 - d), 16.0)
        out = mag(up) - mag(down)
        return out[()] if out.ndim == 0 else out

    def curv(self, x):
        up, down = self._excess(x)
        d = up + down
        out = np.where(d <= 2.0, 12.0 * d * (2.0 - d), 0.0)
        return out[()] if out.ndim == 0 else out


def psi_eval(x, penalty):
    return penalty.value(x)


def psi_grad(x, penalty):
    return penalty.grad(x)


def psi_curv(x, penalty):
    return penalty.curv(x)


def _check_same_grid(*trajs):
    first = trajs[0]
    for other in trajs[1:]:
        if not first.same_grid(other):
            raise InvalidInputError("trajectories are sampled on different time grids")


def stop_apply(v, bounds):
    """Exact time-discrete stop of the sampled input ``v``.

    Parameters
    ----------
    v : ScalarTrajectory
    bounds : HysteresisBounds

    Returns
    -------
    ScalarTrajectory
        Memory ``z`` with ``z[0] = z0`` and values confined to ``[a, b]``.
    """
    if not isinstance(v, ScalarTrajectory):
        raise InvalidInputError("stop_apply expects a ScalarTrajectory")
    z = kernels.stop_clamp(v.values, bounds.a, bounds.b, bounds.z0)
    return v.with_values(z)


def play_apply(v, bounds):
    """Play operator: the input minus its stop."""
    return v.with_values(v.values - stop_apply(v, bounds).values)


def stop_directional_derivative(v, h, bounds, kink_tol=None):
    """Directional derivative of the discrete stop at ``v`` in direction ``h``.

    Interior steps pass the increment of ``h`` through, saturated steps
    return zero, and steps landing within ``kink_tol`` of a bound keep only
    the one-sided part pointing back into the interval.
    """
    _check_same_grid(v, h)
    tol = bounds.default_kink_tol() if kink_tol is None else float(kink_tol)
    zeta = kernels.stop_derivative(v.values, h.values, bounds.a, bounds.b, bounds.z0, tol)
    return v.with_values(zeta)


def _step_ratios(t, eps):
    if not eps > 0:
        raise InvalidInputError(f"regularization parameter must be positive, got {eps}")
    return np.ascontiguousarray(np.diff(t) / eps)


def reg_stop_apply(v, eps, penalty, tol=1e-12):
    """Penalty-relaxed stop, one backward-Euler step per sample.

    Raises
    ------
    NumericalFailure
        If the safeguarded Newton iteration fails; ``step`` names the sample.
    """
    c = _step_ratios(v.t, eps)
    b = penalty.bounds
    z, failed = kernels.reg_stop(v.values, c, b.a, b.b, b.z0, tol)
    if failed >= 0:
        raise NumericalFailure("penalized stop update did not converge", step=int(failed))
    return v.with_values(z)


def reg_stop_derivative(v, h, eps, penalty, z=None):
    """Derivative of :func:`reg_stop_apply` at ``v`` in direction ``h``.

    ``z`` may be passed to reuse an existing relaxed trajectory. The result
    starts at zero, so only increments of ``h`` matter.
    """
    _check_same_grid(v, h)
    if z is None:
        z = reg_stop_apply(v, eps, penalty)
    else:
        _check_same_grid(v, z)
    c = _step_ratios(v.t, eps)
    b = penalty.bounds
    zeta = kernels.reg_stop_derivative(h.values, z.values, c, b.a, b.b)
    return v.with_values(zeta)
