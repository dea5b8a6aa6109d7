"""Built-in reaction terms ``f(y, z)`` coupling the field to the scalar memory.

Every model acts pointwise in space on full-layout fields of shape
``(m, n + 2)``; callers zero the inactive (Dirichlet) nodes afterwards.
Models expose the partial derivatives needed by the linearized and adjoint
solvers, a smooth relaxation ``regularized(eps)``, and the constants their
audits check against.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError


def _couple(C, y):
    return np.einsum("jk,...ki->...ji", C, y)


@dataclass(frozen=True)
class LinearCoupling:
    """``f_j = sum_k C[j, k] y_k + amplitude_j * tanh(slope_j * (z - shift_j))``.

    Continuously differentiable, so its relaxation is itself.
    """

    coupling: np.ndarray
    amplitude: np.ndarray
    slope: np.ndarray
    shift: np.ndarray
    name: str = "linear-coupling"

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        m = C.shape[0]
        if C.shape != (m, m):
            raise InvalidInputError("coupling matrix must be square")
        for attr in ("amplitude", "slope", "shift"):
            vec = np.broadcast_to(np.asarray(getattr(self, attr), dtype=float), (m,)).copy()
            object.__setattr__(self, attr, vec)
        object.__setattr__(self, "coupling", C)

    @property
    def m(self):
        return self.coupling.shape[0]

    def _memory_term(self, z):
        return self.amplitude * np.tanh(self.slope * (z - self.shift))

    def _memory_slope(self, z):
        return self.amplitude * self.slope / np.cosh(self.slope * (z - self.shift)) ** 2

    def f(self, y, z):
        return _couple(self.coupling, y) + self._memory_term(z)[:, None]

    def dy_apply(self, y, z, dy):
        return _couple(self.coupling, dy)

    def dy_adjoint(self, y, z, p):
        return _couple(self.coupling.T, p)

    def dz(self, y, z):
        return np.broadcast_to(self._memory_slope(z)[:, None], np.shape(y)).copy()

    def dir_deriv(self, y, z, dy, dz):
        """Directional derivative in the joint direction ``(dy, dz)``."""
        return self.dy_apply(y, z, dy) + self.dz(y, z) * dz

    def regularized(self, eps):
        return self

    def growth_constant(self, length=1.0):
        """``M`` with ``||f(y, z)|| <= M (1 + ||y|| + |z|)`` in the mass norm."""
        return max(np.linalg.norm(self.coupling, 2), np.linalg.norm(self.amplitude) * np.sqrt(length))

    @property
    def eps_error_constant(self):
        return 0.0


@dataclass(frozen=True)
class KinkedActivation(LinearCoupling):
    """Linear coupling where one component's memory term is ``gain * max(0, z - threshold)``.

    The relaxation replaces the positive part by ``eps * log(1 + exp(x / eps))``,
    which is uniformly within ``eps * log 2`` and keeps the Lipschitz constant.
    """

    kink_component: int = 0
    gain: float = 1.0
    threshold: float = 0.0
    smoothing: float = 0.0
    name: str = "kinked-activation"

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.kink_component < self.m:
            raise InvalidInputError("kink_component out of range")
        if self.smoothing < 0:
            raise InvalidInputError("smoothing must be nonnegative")

    def _kink(self, z):
        s = z - self.threshold
        if self.smoothing > 0:
            return self.gain * self.smoothing * np.logaddexp(0.0, s / self.smoothing)
        return self.gain * max(s, 0.0)

    def _kink_slope(self, z):
        s = z - self.threshold
        if self.smoothing > 0:
            return self.gain * 0.5 * (1.0 + np.tanh(0.5 * s / self.smoothing))
        # one-sided value at the kink is handled by dir_deriv
        return self.gain * float(s > 0)

    def _memory_term(self, z):
        out = super()._memory_term(z)
        out[self.kink_component] = self._kink(z)
        return out

    def _memory_slope(self, z):
        out = super()._memory_slope(z)
        out[self.kink_component] = self._kink_slope(z)
        return out

    def dir_deriv(self, y, z, dy, dz):
        out = super().dir_deriv(y, z, dy, dz)
        if self.smoothing == 0 and z == self.threshold:
            out[self.kink_component] += self.gain * max(dz, 0.0)
        return out

    def regularized(self, eps):
        if not eps > 0:
            raise InvalidInputError("regularization parameter must be positive")
        return replace(self, smoothing=float(eps))

    def growth_constant(self, length=1.0):
        base = super().growth_constant(length)
        memory = np.sqrt(length) * self.gain * (1.0 + abs(self.threshold) + np.log(2.0))
        return base + memory

    @property
    def eps_error_constant(self):
        return self.gain * np.log(2.0)


@dataclass(frozen=True)
class ZeroModel:
    """``f = 0``: the state equation is linear and decoupled from the memory."""

    m: int = 1
    name: str = "zero"

    def f(self, y, z):
        return np.zeros_like(y, dtype=float)

    def dy_apply(self, y, z, dy):
        return np.zeros_like(dy, dtype=float)

    def dy_adjoint(self, y, z, p):
        return np.zeros_like(p, dtype=float)

    def dz(self, y, z):
        return np.zeros_like(y, dtype=float)

    def dir_deriv(self, y, z, dy, dz):
        return np.zeros_like(dy, dtype=float)

    def regularized(self, eps):
        return self

    def growth_constant(self, length=1.0):
        return 0.0

    @property
    def eps_error_constant(self):
        return 0.0


def _linear_kwargs(m, params):
    return dict(
        coupling=np.asarray(params.get("coupling", np.zeros(m * m)), dtype=float).reshape(m, m),
        amplitude=params.get("amplitude", 0.0),
        slope=params.get("slope", 1.0),
        shift=params.get("shift", 0.0),
    )


def _build_linear(m, params):
    return LinearCoupling(**_linear_kwargs(m, params))


def _build_kinked(m, params):
    return KinkedActivation(
        **_linear_kwargs(m, params),
        kink_component=int(params.get("kink_component", 0)),
        gain=float(params.get("gain", 1.0)),
        threshold=float(params.get("threshold", 0.0)),
    )


def _build_zero(m, params):
    return ZeroModel(m)


MODEL_REGISTRY = {
    "linear-coupling": _build_linear,
    "kinked-activation": _build_kinked,
    "zero": _build_zero,
}


def build_model(name, m, params=None):
    """Instantiate a registered model; raises ``KeyError`` for unknown names."""
    if name not in MODEL_REGISTRY:
        raise KeyError(f"unknown nonlinearity model {name!r}; known: {sorted(MODEL_REGISTRY)}")
    return MODEL_REGISTRY[name](m, params or {})


@dataclass
class ModelAuditReport:
    growth_ok: bool
    growth_ratio_max: float
    eps_error: dict = field(default_factory=dict)
    eps_error_ok: bool = True
    lipschitz_ratio: dict = field(default_factory=dict)
    lipschitz_ok: bool = True


def audit_model(model, mass, mask, eps_values=(1e-1, 1e-2, 1e-3), samples=200, seed=0, length=1.0):
    """Spot-check the declared growth, relaxation error and Lipschitz constants.

    Growth: ``||f(y, z)|| <= M (1 + ||y|| + |z|)`` on random fields.
    Relaxation: ``sup |f_eps - f| <= c * eps`` on random memory values.
    Lipschitz: the largest sampled memory slope of ``f_eps`` stays within 5%
    of that of ``f``.
    """
    rng = np.random.default_rng(seed)
    M = model.growth_constant(length)
    norm = lambda v: np.sqrt(np.sum(mass * v * v))
    worst = 0.0
    for _ in range(samples):
        y = np.where(mask, rng.normal(scale=3.0, size=mask.shape), 0.0)
        z = rng.uniform(-4.0, 4.0)
        lhs = norm(np.where(mask, model.f(y, z), 0.0))
        worst = max(worst, lhs / (1.0 + norm(y) + abs(z)))
    report = ModelAuditReport(growth_ok=worst <= M * (1 + 1e-12) + 1e-14, growth_ratio_max=float(worst))

    y0 = np.zeros(mask.shape)
    zs = np.sort(rng.uniform(-4.0, 4.0, size=samples * 5))

    def memory_profile(mod):
        return np.array([mod.f(y0, z)[:, 0] for z in zs])

    base = memory_profile(model)
    base_lip = np.max(np.abs(np.diff(base, axis=0)) / np.diff(zs)[:, None])
    for eps in eps_values:
        reg = model.regularized(eps)
        prof = memory_profile(reg)
        err = float(np.max(np.abs(prof - base)))
        lip = float(np.max(np.abs(np.diff(prof, axis=0)) / np.diff(zs)[:, None]))
        report.eps_error[eps] = err
        report.eps_error_ok &= err <= model.eps_error_constant * eps * (1 + 1e-9) + 1e-15
        ratio = lip / base_lip if base_lip > 0 else 1.0
        report.lipschitz_ratio[eps] = ratio
        report.lipschitz_ok &= abs(ratio - 1.0) <= 0.05
    return report
