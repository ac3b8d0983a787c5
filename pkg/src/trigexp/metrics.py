"""Distances between grid densities and coefficient-space bounds on them."""
import math

import numpy as np

from .expfam import as_theta, in_ellipsoid


def _pair(f, g):
    a = np.asarray(getattr(f, "values", f), dtype=float)
    b = np.asarray(getattr(g, "values", g), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.size} vs {b.size} points")
    return a, b


def hellinger(f, g):
    """``{int (sqrt f - sqrt g)^2}^{1/2}`` on the shared grid."""
    a, b = _pair(f, g)
    return math.sqrt(float(np.mean((np.sqrt(a) - np.sqrt(b)) ** 2)))


def kl(f, g):
    """``int f log(f / g)``; ``g`` is assumed strictly positive."""
    a, b = _pair(f, g)
    return float(np.mean(a * (np.log(a) - np.log(b))))


def l2(f, g):
    a, b = _pair(f, g)
    return math.sqrt(float(np.mean((a - b) ** 2)))


def sup_ratio(f, g):
    """``sup_x f(x) / g(x)`` over the grid."""
    a, b = _pair(f, g)
    return float(np.max(a / b))


def _coef_sq_dist(theta1, theta2):
    t1, t2 = as_theta(theta1), as_theta(theta2)
    J = max(t1.size, t2.size)
    d = np.zeros(J)
    d[: t1.size] += t1
    d[: t2.size] -= t2
    return float(np.sum(d[1:] ** 2))


def kl_coefficient_bound(theta1, theta2, cfg):
    """``1/2 e^{4B} sum_{j >= 1} (theta1_j - theta2_j)^2``, an upper bound on KL.

    Both vectors must lie in the ellipsoid ``E_p(Q)`` of ``cfg``.
    """
    for t in (theta1, theta2):
        if not in_ellipsoid(t, cfg):
            raise ValueError("coefficient vector outside the ellipsoid E_p(Q)")
    return 0.5 * math.exp(4.0 * cfg.B) * _coef_sq_dist(theta1, theta2)


def hellinger_ratio_bound(theta1, theta2, cfg):
    """``1/2 e^{8B} sum (theta1_j - theta2_j)^2``; bounds ``d_H^2 * sup(f1/f2)``."""
    for t in (theta1, theta2):
        if not in_ellipsoid(t, cfg):
            raise ValueError("coefficient vector outside the ellipsoid E_p(Q)")
    return 0.5 * math.exp(8.0 * cfg.B) * _coef_sq_dist(theta1, theta2)
