"""Independent reference solutions used by the tests."""

import math

import mpmath as mp
import numpy as np


def outlet_concentration_1d(times, Pe, length):
    """c(L, t) for c_t + c_x = c_xx / Pe on (0, L), c(0, t) = 1, c_x(L, t) = 0, c(x, 0) = 0.

    Laplace transform solution inverted numerically (Talbot contour).
    """
    D = mp.mpf(1) / Pe
    L = mp.mpf(length)

    def cbar(s):
        root = mp.sqrt(1 + 4 * D * s)
        r1 = (1 + root) / (2 * D)
        r2 = (1 - root) / (2 * D)
        return (r2 - r1) / (s * (r2 * mp.exp(-r1 * L) - r1 * mp.exp(-r2 * L)))

    with mp.workdps(40):
        return np.array([float(mp.invertlaplace(cbar, t, method="talbot")) if t > 0 else 0.0 for t in times])


def outlet_concentration_fd(times, Pe, length, nx=4000):
    """Same problem by second-order finite differences in x and Crank-Nicolson in t."""
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    dx = length / nx
    D = 1.0 / Pe
    n = nx  # unknowns at x_1..x_nx, ghost node mirrors x_{nx-1}
    main = np.full(n, -2 * D / dx**2)
    up = np.full(n - 1, D / dx**2 - 1 / (2 * dx))
    lo = np.full(n - 1, D / dx**2 + 1 / (2 * dx))
    lo[-1] = 2 * D / dx**2  # zero-gradient outlet via ghost point
    A = sp.diags([lo, main, up], [-1, 0, 1], format="csc")
    b = np.zeros(n)
    b[0] = D / dx**2 + 1 / (2 * dx)
    dt = min(0.01, dx)
    I = sp.identity(n, format="csc")
    lu = spla.splu((I - 0.5 * dt * A).tocsc())
    B = I + 0.5 * dt * A
    c = np.zeros(n)
    out, t = [], 0.0
    targets = sorted(times)
    k = 0
    nsteps = int(round(max(targets) / dt))
    for step in range(1, nsteps + 1):
        c = lu.solve(B @ c + dt * b)
        t = step * dt
        while k < len(targets) and math.isclose(targets[k], t, abs_tol=dt / 2):
            out.append(c[-1])
            k += 1
    return np.array(out)
