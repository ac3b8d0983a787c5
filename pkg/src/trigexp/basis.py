"""Orthonormal trigonometric system on [0, 1] and Sobolev ellipsoid weights.

Indexing follows the usual convention: ``phi_0 = 1`` and for ``k >= 1``
``phi_{2k-1}(x) = sqrt(2) sin(2 pi k x)``, ``phi_{2k}(x) = sqrt(2) cos(2 pi k x)``.
Vectorized helpers return columns for ``j = 1..J`` only, since the constant
term never affects a density.
"""
import math
from functools import lru_cache

import numpy as np

SQRT2 = math.sqrt(2.0)

# Bernoulli numbers B_2, B_4, B_6 for the Euler-Maclaurin tail.
_BERNOULLI = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0)


def eval_basis(j, x):
    """Evaluate ``phi_j(x)`` for a single index and a point of [0, 1]."""
    if j < 0:
        raise ValueError(f"basis index must be nonnegative, got {j}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x!r} lies outside [0, 1]")
    if j == 0:
        return 1.0
    k = (j + 1) // 2
    if j % 2:
        return SQRT2 * math.sin(2.0 * math.pi * k * x)
    return SQRT2 * math.cos(2.0 * math.pi * k * x)


def sobolev_weight(j):
    """``v_0 = 0``; ``v_j = j + 1`` for odd j and ``v_j = j`` for even j."""
    if j < 0:
        raise ValueError(f"basis index must be nonnegative, got {j}")
    if j == 0:
        return 0
    return j + 1 if j % 2 else j


def frequencies(J):
    """Integer frequency ``k`` of ``phi_j`` for ``j = 1..J``."""
    return (np.arange(1, J + 1) + 1) // 2


def sobolev_weights(J):
    """Array ``(v_1, ..., v_J)`` as floats."""
    return 2.0 * frequencies(J)


def basis_matrix(x, J):
    """Matrix of shape ``(len(x), J)`` holding ``phi_j(x_i)`` for j = 1..J."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if J == 0:
        return np.empty((x.size, 0))
    k = frequencies(J)
    arg = 2.0 * np.pi * np.outer(x, k)
    is_sin = (np.arange(1, J + 1) % 2).astype(bool)
    out = np.where(is_sin, np.sin(arg), np.cos(arg))
    out *= SQRT2
    return out


def midpoint_grid(G):
    """Uniform midpoint grid ``x_i = (i + 1/2) / G`` on [0, 1]."""
    return (np.arange(G) + 0.5) / G


@lru_cache(maxsize=64)
def grid_basis(G, J):
    """Cached, read-only ``basis_matrix`` on the ``G``-point midpoint grid."""
    out = basis_matrix(midpoint_grid(G), J)
    out.setflags(write=False)
    return out


def _tail_sum(s, K, scale):
    """Euler-Maclaurin value of ``sum_{k >= K} scale * (2k)^{-s}``.

    Returns the tail and a bound on the truncation remainder.
    """
    c = scale * 2.0 ** (-s)

    def deriv(m):
        # m-th derivative of c * x^{-s} at K
        coef = c
        for i in range(m):
            coef *= -(s + i)
        return coef * K ** (-s - m)

    tail = c * K ** (1.0 - s) / (s - 1.0) + 0.5 * deriv(0)
    for i, b in enumerate(_BERNOULLI[:2], start=1):
        tail -= b / math.factorial(2 * i) * deriv(2 * i - 1)
    remainder = abs(_BERNOULLI[2] / math.factorial(6) * deriv(5))
    return tail, remainder


def sobolev_tail_sum(p, tol=1e-15):
    """``A = sum_{j >= 1} v_j^{-2p} = 2 sum_{k >= 1} (2k)^{-2p}``.

    Direct partial sum up to ``K - 1`` plus an Euler-Maclaurin tail; ``K``
    doubles until the tail remainder bound is below ``tol``.
    """
    s = 2.0 * p
    K = 8
    while True:
        tail, rem = _tail_sum(s, K, 2.0)
        if rem < tol:
            break
        K *= 2
    k = np.arange(K - 1, 0, -1, dtype=float)  # smallest terms first
    head = 2.0 * math.fsum((2.0 * k) ** (-s))
    return float(head + tail)


def tail_constants(p, Q):
    """Return ``(A, B, B1_sq)`` with ``B = sqrt(2 Q A)`` and ``B1_sq = exp(-8 B)``."""
    if int(p) != p or p < 1:
        raise ValueError(f"smoothness p must be an integer >= 1, got {p}")
    if not Q > 0:
        raise ValueError(f"ellipsoid radius Q must be positive, got {Q}")
    A = sobolev_tail_sum(int(p))
    B = math.sqrt(2.0 * Q * A)
    return A, B, math.exp(-8.0 * B)


# ---------------------------------------------------------------------------
# spectral helpers: products phi_j phi_l are trig functions of frequency k +- l,
# so second moments and quadratic forms reduce to one FFT on the midpoint grid


def _pair_index(N):
    j = np.arange(1, N + 1)
    k = (j + 1) // 2
    is_sin = (j % 2).astype(bool)
    D = k[:, None] - k[None, :]
    S = k[:, None] + k[None, :]
    ss = is_sin[:, None] & is_sin[None, :]
    cc = ~is_sin[:, None] & ~is_sin[None, :]
    sc = is_sin[:, None] & ~is_sin[None, :]
    return k, is_sin, D, S, ss, cc, sc


def grid_moments(values, N):
    """Mean vector and second-moment matrix of ``phi_1..phi_N`` under a grid density.

    ``values`` are density values on the midpoint grid (mean one). Returns
    ``(E[phi_j], E[phi_j phi_l])`` equal to the midpoint-rule averages, computed
    from the grid Fourier transform; requires ``N < G``.
    """
    f = np.asarray(values, dtype=float)
    G = f.size
    if N >= G:
        raise ValueError(f"need N < G, got N={N}, G={G}")
    K = (N + 1) // 2
    m = np.arange(2 * K + 1)
    # c_m = mean f(x_i) exp(+2 pi i m x_i) with x_i = (i + 1/2) / G
    c = np.conj(np.fft.fft(f)[: 2 * K + 1]) * np.exp(1j * np.pi * m / G) / G
    ec, es = c.real, c.imag
    k, is_sin, D, S, ss, cc, sc = _pair_index(N)
    ecD, esD = ec[np.abs(D)], np.sign(D) * es[np.abs(D)]
    ecS, esS = ec[S], es[S]
    second = np.where(ss, ecD - ecS,
                      np.where(cc, ecD + ecS,
                               np.where(sc, esS + esD, esS - esD)))
    mean = math.sqrt(2.0) * np.where(is_sin, es[k], ec[k])
    return mean, second


def grid_quadratic_form(M, G):
    """``x -> sum_{j,l} M_jl phi_j(x) phi_l(x)`` on the ``G``-point midpoint grid."""
    M = np.asarray(M, dtype=float)
    N = M.shape[0]
    if N >= G:
        raise ValueError(f"need N < G, got N={N}, G={G}")
    K = (N + 1) // 2
    k, is_sin, D, S, ss, cc, sc = _pair_index(N)
    alpha = np.zeros(2 * K + 1)
    beta = np.zeros(2 * K + 1)
    aD = np.abs(D).ravel()
    sgn = np.sign(D).ravel()
    Mf = M.ravel()
    for mask, a_d, a_s, b_d, b_s in [
        (cc.ravel(), 1.0, 1.0, 0.0, 0.0),
        (ss.ravel(), 1.0, -1.0, 0.0, 0.0),
        (sc.ravel(), 0.0, 0.0, 1.0, 1.0),
        ((~is_sin[:, None] & is_sin[None, :]).ravel(), 0.0, 0.0, -1.0, 1.0),
    ]:
        w = Mf[mask]
        if a_d:
            alpha += np.bincount(aD[mask], a_d * w, 2 * K + 1)
            alpha += np.bincount(S.ravel()[mask], a_s * w, 2 * K + 1)
        else:
            beta += np.bincount(aD[mask], b_d * sgn[mask] * w, 2 * K + 1)
            beta += np.bincount(S.ravel()[mask], b_s * w, 2 * K + 1)
    z = np.zeros(G, dtype=complex)
    m = np.arange(2 * K + 1)
    z[: 2 * K + 1] = (alpha - 1j * beta) * np.exp(1j * np.pi * m / G)
    return (np.fft.ifft(z) * G).real
