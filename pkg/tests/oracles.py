"""Independent reference computations used by the tests.

Nothing here goes through the jet arithmetic beyond reading plain metric
values, so agreement with the package is a genuine cross-check.
"""

import math

import numpy as np

from qgeom import jets as J


def fd_weights(order, accuracy=6):
    """Central finite-difference stencil for the ``order``-th derivative."""
    r = (order + accuracy - 1) // 2
    offs = np.arange(-r, r + 1, dtype=float)
    A = np.vander(offs, increasing=True).T
    b = np.zeros(len(offs))
    b[order] = math.factorial(order)
    return offs, np.linalg.solve(A, b)


def fd_partial(f, x, alpha, h=0.05, accuracy=6):
    """``d^alpha f(x)`` by a tensor product of one-dimensional stencils."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    stencils = [fd_weights(a, accuracy) if a else (np.zeros(1), np.ones(1)) for a in alpha]
    for idx in np.ndindex(*[len(s[0]) for s in stencils]):
        w = np.prod([s[1][i] for s, i in zip(stencils, idx)])
        if w == 0.0:
            continue
        p = x + h * np.array([s[0][i] for s, i in zip(stencils, idx)])
        total += w * f(p)
    return total / h ** sum(alpha)


def metric_values(model, pts):
    """Plain metric matrices at the points, read off degree-0 jets."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return np.asarray(model.metric_jets(J.variables(pts, 0)).value)


def _dmetric(model, x, h):
    """All first partials ``d_k g_ij`` (index order k, i, j) by a 4th-order stencil."""
    n = model.dim
    out = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        pts = np.array([x - 2 * e, x - e, x + e, x + 2 * e])
        g = metric_values(model, pts)
        out[k] = (g[0] - 8 * g[1] + 8 * g[2] - g[3]) / (12 * h)
    return out


def christoffel(model, x, h=1e-3):
    """``Gamma^k_ij`` as an array indexed ``[k, i, j]``."""
    x = np.asarray(x, dtype=float)
    g = metric_values(model, x[None])[0]
    dg = _dmetric(model, x, h)
    low = 0.5 * (np.einsum("jil->lij", dg) + np.einsum("ijl->lij", dg) - dg)  # [l, i, j]
    return np.einsum("kl,lij->kij", np.linalg.inv(g), low)


def scalar_curvature(model, x, h=1e-3):
    """Scalar curvature from nested finite differences of the metric."""
    x = np.asarray(x, dtype=float)
    n = model.dim
    gam = christoffel(model, x, h)
    dgam = np.empty((n, n, n, n))  # [m, k, i, j] = d_m Gamma^k_ij
    for m in range(n):
        e = np.zeros(n)
        e[m] = 10 * h
        vals = [christoffel(model, x + s * e, h) for s in (-2, -1, 1, 2)]
        dgam[m] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (120 * h)
    # Ric_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik
    ric = (np.einsum("kkij->ij", dgam) - np.einsum("jkik->ij", dgam)
           + np.einsum("kkl,lij->ij", gam, gam) - np.einsum("kjl,lik->ij", gam, gam))
    g_inv = np.linalg.inv(metric_values(model, x[None])[0])
    return float(np.einsum("ij,ij->", g_inv, ric))


def sphere_q(n, radius=1.0):
    return n * (n - 2) * (n + 2) / 8.0 / radius ** 4


def family_q(t):
    return (48.0 + 7.0 * t * t - 3.0 * t ** 4) / 50.0


def family_volume_ratio(t):
    return 1.0 / (1.0 - t ** 4)


def sphere_volume(n, radius=1.0):
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2) * radius ** n
