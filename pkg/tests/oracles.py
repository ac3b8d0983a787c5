"""Independent reference computations used by the tests.

Nothing here calls into the package's basis or quadrature code: the basis is
written out with explicit sin/cos, integrals use Gauss-Legendre nodes rather
than the midpoint rule, and constants come from mpmath's zeta.
"""
import math

import mpmath
import numpy as np


def phi(j, x):
    x = np.asarray(x, dtype=float)
    if j == 0:
        return np.ones_like(x)
    k = (j + 1) // 2
    if j % 2:
        return math.sqrt(2.0) * np.sin(2 * math.pi * k * x)
    return math.sqrt(2.0) * np.cos(2 * math.pi * k * x)


def weight(j):
    return 0 if j == 0 else 2 * ((j + 1) // 2)


def gauss_legendre(m):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def log_partition(theta, m=400):
    """``log int_0^1 exp(sum_{j>=1} theta_j phi_j)`` by Gauss-Legendre."""
    x, w = gauss_legendre(m)
    eta = sum(t * phi(j, x) for j, t in enumerate(theta) if j >= 1 and t != 0.0)
    eta = np.zeros_like(x) + eta
    top = eta.max()
    return float(top + math.log(np.dot(w, np.exp(eta - top))))


def A_const(p):
    """``sum_{j>=1} v_j^{-2p} = 2^{1-2p} zeta(2p)`` in high precision."""
    return float(mpmath.mpf(2) ** (1 - 2 * p) * mpmath.zeta(2 * p))


def density_on(theta, x, m=400):
    x = np.asarray(x, dtype=float)
    eta = sum(t * phi(j, x) for j, t in enumerate(theta) if j >= 1)
    return np.exp(np.zeros_like(x) + eta - log_partition(theta, m))


def dense_posterior_mean(samples, p, Q, x, grid_size=161, sigma2=1.0, m=200):
    """Exact two-coefficient posterior mean density at points ``x``.

    Prior: independent centred normals with variances ``sigma2 v_j^{-(2p+1)}``
    on ``(theta_1, theta_2)``, restricted to ``sum v_j^{2p} theta_j^2 < Q``.
    The posterior is tabulated on a ``grid_size``-squared lattice covering the
    ellipsoid and the mean of ``f_theta(x)`` is the weighted lattice average.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    s1 = float(np.sum(phi(1, samples)))
    s2 = float(np.sum(phi(2, samples)))
    v = 2.0
    r = math.sqrt(Q) / v**p
    ax = np.linspace(-r, r, grid_size)
    T1, T2 = np.meshgrid(ax, ax, indexing="ij")
    t1, t2 = T1.ravel(), T2.ravel()
    inside = v ** (2 * p) * (t1**2 + t2**2) < Q
    t1, t2 = t1[inside], t2[inside]

    gx, gw = gauss_legendre(m)
    e1, e2 = phi(1, gx), phi(2, gx)
    eta = np.outer(t1, e1) + np.outer(t2, e2)
    top = eta.max(axis=1, keepdims=True)
    psi = top[:, 0] + np.log(np.exp(eta - top) @ gw)

    prec = v ** (2 * p + 1) / sigma2
    logpost = t1 * s1 + t2 * s2 - n * psi - 0.5 * prec * (t1**2 + t2**2)
    w = np.exp(logpost - logpost.max())
    w /= w.sum()

    x = np.asarray(x, dtype=float)
    fx = np.exp(np.outer(t1, phi(1, x)) + np.outer(t2, phi(2, x)) - psi[:, None])
    return w @ fx


def midpoint(G):
    return (np.arange(G) + 0.5) / G


def hellinger_grid(f, g):
    return math.sqrt(float(np.mean((np.sqrt(f) - np.sqrt(g)) ** 2)))


def random_ellipsoid_point(rng, p, Q, J=None):
    """Coefficient vector with ``sum v_j^{2p} theta_j^2 = r Q``, ``r ~ U(0, 1)``."""
    J = J or int(rng.integers(1, 21))
    u = rng.standard_normal(J)
    v = np.array([weight(j) for j in range(1, J + 1)], dtype=float)
    theta = u / v**p
    norm = float(np.sum(v ** (2 * p) * theta**2))
    theta *= math.sqrt(rng.random() * Q / norm)
    return np.concatenate(([0.0], theta))
