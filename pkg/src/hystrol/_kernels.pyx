# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scalar recursions and tridiagonal solves.

Every function here has a twin with the same signature in ``_kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef int NEWTON_MAXIT = 50


cdef inline double _psi(double x, double a, double b) noexcept nogil:
    cdef double d
    if x > b:
        d = x - b
    elif x < a:
        d = a - x
    else:
        return 0.0
    if d <= 2.0:
        return d * d * d * (4.0 - d)
    return 16.0 * (d - 1.0)


cdef inline double _dpsi(double x, double a, double b) noexcept nogil:
    cdef double d
    if x > b:
        d = x - b
        if d <= 2.0:
            return 4.0 * d * d * (3.0 - d)
        return 16.0
    if x < a:
        d = a - x
        if d <= 2.0:
            return -4.0 * d * d * (3.0 - d)
        return -16.0
    return 0.0


cdef inline double _d2psi(double x, double a, double b) noexcept nogil:
    cdef double d
    if x > b:
        d = x - b
    elif x < a:
        d = a - x
    else:
        return 0.0
    if d <= 2.0:
        return 12.0 * d * (2.0 - d)
    return 0.0


def psi(double x, double a, double b):
    return _psi(x, a, b)


def dpsi(double x, double a, double b):
    return _dpsi(x, a, b)


def d2psi(double x, double a, double b):
    return _d2psi(x, a, b)


cdef inline int _reg_step(double z, double dv, double c, double a, double b,
                          double tol, double* out) noexcept nogil:
    """Solve x + c*psi'(x) = z + dv; returns iterations used or -1."""
    cdef double r = z + dv
    cdef double lo, hi, x, f, df, xn
    cdef int it
    if r >= a and r <= b:
        out[0] = r
        return 0
    if r > b:
        lo = b
        hi = r
    else:
        lo = r
        hi = a
    x = r
    for it in range(NEWTON_MAXIT):
        f = x + c * _dpsi(x, a, b) - r
        if fabs(f) <= tol:
            out[0] = x
            return it + 1
        if f > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= 4.0e-16 * (1.0 + fabs(x)):
            out[0] = x
            return it + 1
        df = 1.0 + c * _d2psi(x, a, b)
        xn = x - f / df
        if not (xn > lo and xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    out[0] = x
    return -1


def reg_stop_step(double z, double dv, double c, double a, double b, double tol=1e-12):
    """One backward-Euler step of the penalized stop. Returns (z_new, iterations)."""
    cdef double out = 0.0
    cdef int it = _reg_step(z, dv, c, a, b, tol, &out)
    return out, it


def stop_clamp(const double[::1] v, double a, double b, double z0):
    cdef Py_ssize_t n = v.shape[0], i
    z_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double s
    z[0] = z0
    for i in range(n - 1):
        s = z[i] + (v[i + 1] - v[i])
        if s > b:
            s = b
        elif s < a:
            s = a
        z[i + 1] = s
    return z_arr


cdef inline double _dd_step(double s, double trial, double a, double b, double tol) noexcept nogil:
    if s > b + tol or s < a - tol:
        return 0.0
    if fabs(s - b) <= tol:
        return trial if trial < 0.0 else 0.0
    if fabs(s - a) <= tol:
        return trial if trial > 0.0 else 0.0
    return trial


def stop_derivative_step(double s, double trial, double a, double b, double tol):
    return _dd_step(s, trial, a, b, tol)


def stop_derivative(const double[::1] v, const double[::1] h, double a, double b,
                    double z0, double tol):
    cdef Py_ssize_t n = v.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] zeta = out_arr
    cdef double z = z0, s
    zeta[0] = 0.0
    for i in range(n - 1):
        s = z + (v[i + 1] - v[i])
        zeta[i + 1] = _dd_step(s, zeta[i] + h[i + 1] - h[i], a, b, tol)
        if s > b:
            s = b
        elif s < a:
            s = a
        z = s
    return out_arr


def reg_stop(const double[::1] v, const double[::1] c, double a, double b,
             double z0, double tol=1e-12):
    """Penalized stop along a trajectory; c[i] = dt_i / eps. Returns (z, failed_step)."""
    cdef Py_ssize_t n = v.shape[0], i
    z_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double out = 0.0
    z[0] = z0
    for i in range(n - 1):
        if _reg_step(z[i], v[i + 1] - v[i], c[i], a, b, tol, &out) < 0:
            return z_arr, i + 1
        z[i + 1] = out
    return z_arr, -1


def reg_stop_derivative(const double[::1] h, const double[::1] z, const double[::1] c,
                        double a, double b):
    cdef Py_ssize_t n = h.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] zeta = out_arr
    zeta[0] = 0.0
    for i in range(n - 1):
        zeta[i + 1] = (zeta[i] + h[i + 1] - h[i]) / (1.0 + c[i] * _d2psi(z[i + 1], a, b))
    return out_arr


def thomas_factor(const double[:, ::1] lower, const double[:, ::1] diag,
                  const double[:, ::1] upper):
    """LU factors of independent tridiagonal systems, one per row."""
    cdef Py_ssize_t m = diag.shape[0], k = diag.shape[1], j, i
    cp_arr = np.zeros((m, k), dtype=np.float64)
    inv_arr = np.zeros((m, k), dtype=np.float64)
    cdef double[:, ::1] cp = cp_arr
    cdef double[:, ::1] inv = inv_arr
    cdef double den
    for j in range(m):
        den = diag[j, 0]
        inv[j, 0] = 1.0 / den
        cp[j, 0] = upper[j, 0] * inv[j, 0]
        for i in range(1, k):
            den = diag[j, i] - lower[j, i] * cp[j, i - 1]
            inv[j, i] = 1.0 / den
            cp[j, i] = upper[j, i] * inv[j, i]
    return cp_arr, inv_arr


def thomas_solve(const double[:, ::1] lower, const double[:, ::1] cp,
                 const double[:, ::1] inv, const double[:, ::1] rhs):
    cdef Py_ssize_t m = rhs.shape[0], k = rhs.shape[1], j, i
    x_arr = np.empty((m, k), dtype=np.float64)
    cdef double[:, ::1] x = x_arr
    with nogil:
        for j in range(m):
            x[j, 0] = rhs[j, 0] * inv[j, 0]
            for i in range(1, k):
                x[j, i] = (rhs[j, i] - lower[j, i] * x[j, i - 1]) * inv[j, i]
            for i in range(k - 2, -1, -1):
                x[j, i] = x[j, i] - cp[j, i] * x[j, i + 1]
    return x_arr
