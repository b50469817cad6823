"""Independent numerical oracles built only from state overlaps."""

import numpy as np


def _fidelity_metric(state, theta, v, eps):
    a = state(theta - 0.5 * eps * v)
    b = state(theta + 0.5 * eps * v)
    return (1 - abs(np.vdot(a, b)) ** 2) / eps**2


def overlap_fit_metric(state, theta, eps=2e-3):
    """Metric fitted from infinitesimal fidelity loss along axis and diagonal directions."""
    n = theta.size
    est = lambda v: (4 * _fidelity_metric(state, theta, v, eps / 2) - _fidelity_metric(state, theta, v, eps)) / 3
    g = np.empty((n, n))
    for i in range(n):
        g[i, i] = est(np.eye(n)[i])
    for i in range(n):
        for j in range(i + 1, n):
            g[i, j] = g[j, i] = 0.5 * (est(np.eye(n)[i] + np.eye(n)[j]) - g[i, i] - g[j, j])
    return g


def loop_curvature(state, theta, i, j, eps=2e-3):
    """``F_ij`` from the Bargmann phase of a small square loop, Richardson-extrapolated."""

    def F(e):
        ei, ej = np.eye(theta.size)[i] * e / 2, np.eye(theta.size)[j] * e / 2
        pts = [theta - ei - ej, theta + ei - ej, theta + ei + ej, theta - ei + ej]
        vs = [state(p) for p in pts]
        prod = np.prod([np.vdot(vs[k], vs[(k + 1) % 4]) for k in range(4)])
        return -np.angle(prod) / e**2

    return (4 * F(eps / 2) - F(eps)) / 3
