"""Independent reference solutions assembled densely with numpy."""
import numpy as np


def lq_dense_minimizer(n, steps, kappa, target_interior, horizon=1.0, length=1.0):
    """Minimizer of the time-discrete tracking problem without reaction or memory feedback.

    One component, homogeneous Dirichlet ends, distributed control, zero
    initial state, backward-Euler diffusion. The cost is

        1/2 sum_k tau_k h |y_k - d_k|^2 + kappa/2 sum_{k>=1} dt h |u_k|^2

    with trapezoid weights ``tau`` and ``y_k = sum_{j<=k} dt R^(k-j+1) u_j``,
    ``R = (I + dt L)^-1``. Returns the control at samples ``1..N`` as an
    ``(N, n)`` array, plus the matrix square root of the control Gram matrix.
    """
    h, dt = length / (n + 1), horizon / steps
    lap = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    R = np.linalg.inv(np.eye(n) + dt * lap)
    powers = [np.eye(n)]
    for _ in range(steps + 1):
        powers.append(R @ powers[-1])
    G = np.zeros((steps * n, steps * n))
    for k in range(1, steps + 1):
        for j in range(1, k + 1):
            G[(k - 1) * n:k * n, (j - 1) * n:j * n] = dt * powers[k - j + 1]
    tau = np.full(steps, dt)
    tau[-1] = dt / 2
    W = np.kron(np.diag(tau), h * np.eye(n))
    C = dt * h * np.eye(steps * n)
    d = np.asarray(target_interior, dtype=float).reshape(-1)
    u = np.linalg.solve(G.T @ W @ G + kappa * C, G.T @ W @ d)
    return u.reshape(steps, n), np.sqrt(dt * h)
