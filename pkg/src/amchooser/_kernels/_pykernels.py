"""Pure-Python kernels, used when the compiled extension is unavailable."""

import numpy as np

_PIVOT_FLOOR = 1e-300


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system; returns ``(x, status)``.

    ``lower[0]`` and ``upper[-1]`` are ignored. ``status`` is -1 on
    success, otherwise the row of the first pivot below 1e-300.
    """
    a = lower.tolist()
    b = diag.tolist()
    c = upper.tolist()
    d = rhs.tolist()
    n = len(b)
    if n == 0:
        return np.empty(0), -1
    cp = [0.0] * n
    x = [0.0] * n
    piv = b[0]
    if abs(piv) < _PIVOT_FLOOR:
        return np.empty(n), 0
    cp[0] = c[0] / piv if n > 1 else 0.0
    x[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i] * cp[i - 1]
        if abs(piv) < _PIVOT_FLOOR:
            return np.empty(n), i
        cp[i] = c[i] / piv if i < n - 1 else 0.0
        x[i] = (d[i] - a[i] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return np.array(x), -1


def psor(lower, diag, upper, rhs, obstacle, x0, omega, tol, max_iter):
    """Projected SOR for the tridiagonal LCP; returns ``(x, iters, last_delta)``."""
    a = lower.tolist()
    b = diag.tolist()
    c = upper.tolist()
    f = rhs.tolist()
    g = obstacle.tolist()
    x = [max(xi, gi) for xi, gi in zip(x0.tolist(), g)]
    n = len(b)
    it = 0
    delta = 0.0
    while it < max_iter:
        it += 1
        delta = 0.0
        for i in range(n):
            gs = f[i]
            if i > 0:
                gs -= a[i] * x[i - 1]
            if i < n - 1:
                gs -= c[i] * x[i + 1]
            gs /= b[i]
            new = x[i] + omega * (gs - x[i])
            if new < g[i]:
                new = g[i]
            dd = abs(new - x[i])
            if dd > delta:
                delta = dd
            x[i] = new
        if delta <= tol:
            break
    return np.array(x), it, delta
