"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Signatures and return conventions match exactly so either module can back
:mod:`hystrol._backend`.
"""
import numpy as np

NEWTON_MAXIT = 50


def psi(x, a, b):
    if x > b:
        d = x - b
    elif x < a:
        d = a - x
    else:
        return 0.0
    if d <= 2.0:
        return d * d * d * (4.0 - d)
    return 16.0 * (d - 1.0)


def dpsi(x, a, b):
    if x > b:
        d = x - b
        return 4.0 * d * d * (3.0 - d) if d <= 2.0 else 16.0
    if x < a:
        d = a - x
        return -4.0 * d * d * (3.0 - d) if d <= 2.0 else -16.0
    return 0.0


def d2psi(x, a, b):
    if x > b:
        d = x - b
    elif x < a:
        d = a - x
    else:
        return 0.0
    return 12.0 * d * (2.0 - d) if d <= 2.0 else 0.0


def reg_stop_step(z, dv, c, a, b, tol=1e-12):
    """One backward-Euler step of the penalized stop. Returns (z_new, iterations)."""
    r = z + dv
    if a <= r <= b:
        return r, 0
    lo, hi = (b, r) if r > b else (r, a)
    x = r
    for it in range(NEWTON_MAXIT):
        f = x + c * dpsi(x, a, b) - r
        if abs(f) <= tol:
            return x, it + 1
        if f > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= 4.0e-16 * (1.0 + abs(x)):
            return x, it + 1
        xn = x - f / (1.0 + c * d2psi(x, a, b))
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        x = xn
    return x, -1


def stop_clamp(v, a, b, z0):
    v = np.asarray(v, dtype=float)
    z = np.empty(v.shape[0])
    z[0] = z0
    cur = z0
    dv = np.diff(v)
    for i in range(v.shape[0] - 1):
        cur = min(max(cur + dv[i], a), b)
        z[i + 1] = cur
    return z


def stop_derivative_step(s, trial, a, b, tol):
    if s > b + tol or s < a - tol:
        return 0.0
    if abs(s - b) <= tol:
        return min(trial, 0.0)
    if abs(s - a) <= tol:
        return max(trial, 0.0)
    return trial


def stop_derivative(v, h, a, b, z0, tol):
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    zeta = np.empty(v.shape[0])
    zeta[0] = 0.0
    z = z0
    for i in range(v.shape[0] - 1):
        s = z + (v[i + 1] - v[i])
        zeta[i + 1] = stop_derivative_step(s, zeta[i] + h[i + 1] - h[i], a, b, tol)
        z = min(max(s, a), b)
    return zeta


def reg_stop(v, c, a, b, z0, tol=1e-12):
    """Penalized stop along a trajectory; c[i] = dt_i / eps. Returns (z, failed_step)."""
    v = np.asarray(v, dtype=float)
    z = np.empty(v.shape[0])
    z[0] = z0
    for i in range(v.shape[0] - 1):
        x, it = reg_stop_step(z[i], v[i + 1] - v[i], c[i], a, b, tol)
        if it < 0:
            return z, i + 1
        z[i + 1] = x
    return z, -1


def reg_stop_derivative(h, z, c, a, b):
    h = np.asarray(h, dtype=float)
    zeta = np.empty(h.shape[0])
    zeta[0] = 0.0
    for i in range(h.shape[0] - 1):
        zeta[i + 1] = (zeta[i] + h[i + 1] - h[i]) / (1.0 + c[i] * d2psi(z[i + 1], a, b))
    return zeta


def thomas_factor(lower, diag, upper):
    """LU factors of independent tridiagonal systems, one per row."""
    m, k = diag.shape
    cp = np.zeros((m, k))
    inv = np.zeros((m, k))
    inv[:, 0] = 1.0 / diag[:, 0]
    cp[:, 0] = upper[:, 0] * inv[:, 0]
    for i in range(1, k):
        inv[:, i] = 1.0 / (diag[:, i] - lower[:, i] * cp[:, i - 1])
        cp[:, i] = upper[:, i] * inv[:, i]
    return cp, inv


def thomas_solve(lower, cp, inv, rhs):
    k = rhs.shape[1]
    x = np.empty_like(rhs, dtype=float)
    x[:, 0] = rhs[:, 0] * inv[:, 0]
    for i in range(1, k):
        x[:, i] = (rhs[:, i] - lower[:, i] * x[:, i - 1]) * inv[:, i]
    for i in range(k - 2, -1, -1):
        x[:, i] -= cp[:, i] * x[:, i + 1]
    return x
