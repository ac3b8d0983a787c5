"""The exponential family ``f_theta = exp(theta . phi - psi(theta))`` on [0, 1].

Coefficient vectors are plain 1-D float arrays indexed from 0, so
``theta[0]`` is the (irrelevant) constant term and ``theta[j]`` multiplies
``phi_j``. Entries past the end of the array are implicitly zero.
"""
import io
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import basis


def as_theta(theta):
    """Coerce to a 1-D float coefficient array with at least the theta_0 slot."""
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.ndim != 1:
        raise ValueError("coefficient vector must be one-dimensional")
    if arr.size == 0:
        arr = np.zeros(1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("coefficient vector has non-finite entries")
    return arr


def support_dim(theta):
    """Largest ``j`` with ``theta_j != 0`` (0 for a constant log-density)."""
    nz = np.flatnonzero(as_theta(theta)[1:])
    return int(nz[-1]) + 1 if nz.size else 0


@dataclass(frozen=True)
class ModelConfig:
    """Smoothness ``p``, ellipsoid radius ``Q`` and quadrature resolution."""

    p: int = 2
    Q: float = 1.0
    quad_points: int = 4096
    sigma2: float = 1.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be an integer >= 1, got {self.p}")
        if not (self.Q > 0 and math.isfinite(self.Q)):
            raise ValueError(f"Q must be positive and finite, got {self.Q}")
        G = self.quad_points
        if int(G) != G or G < 256 or (G & (G - 1)):
            raise ValueError(f"quad_points must be a power of two >= 256, got {G}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "quad_points", int(G))

    @cached_property
    def _constants(self):
        return basis.tail_constants(self.p, self.Q)

    @property
    def A(self):
        return self._constants[0]

    @property
    def B(self):
        return self._constants[1]

    @property
    def B1_sq(self):
        return self._constants[2]

    @property
    def grid(self):
        return basis.midpoint_grid(self.quad_points)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {"p": self.p, "Q": self.Q, "quad_points": self.quad_points, "sigma2": self.sigma2}


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density values at the midpoints ``(i + 1/2) / G`` of a uniform grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("density values must be a nonempty 1-D array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def quad_points(self):
        return self.values.size

    @property
    def grid(self):
        return basis.midpoint_grid(self.quad_points)

    def integral(self):
        return float(np.mean(self.values))

    def normalized(self):
        return GridDensity(self.values / np.mean(self.values))

    def to_csv(self, fh=None):
        """Write ``x,f`` rows using shortest round-trip floats."""
        buf = fh if fh is not None else io.StringIO()
        buf.write("x,f\n")
        for x, f in zip(self.grid.tolist(), self.values.tolist()):
            buf.write(f"{x!r},{f!r}\n")
        if fh is None:
            return buf.getvalue()
        return None

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].replace(" ", "") != "x,f":
            raise ValueError("density CSV must start with header 'x,f'")
        vals = [float(ln.split(",")[1]) for ln in lines[1:]]
        return cls(np.array(vals))


@dataclass(frozen=True, eq=False)
class Dataset:
    samples: np.ndarray
    seed: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).reshape(-1)
        if s.size and (s.min() < 0.0 or s.max() > 1.0 or not np.all(np.isfinite(s))):
            raise ValueError("samples must lie in [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self):
        return self.samples.size


def _log_potential(theta, G):
    """``sum_{j >= 1} theta_j phi_j`` on the midpoint grid (theta_0 excluded)."""
    theta = as_theta(theta)
    J = theta.size - 1
    if J == 0:
        return np.zeros(G)
    return basis.grid_basis(G, J) @ theta[1:]


def _log_mean_exp(eta):
    m = float(np.max(eta))
    return m + math.log(float(np.mean(np.exp(eta - m))))


def log_normalizer(theta, cfg):
    """``psi(theta)`` by midpoint quadrature with max-subtraction."""
    theta = as_theta(theta)
    return theta[0] + _log_mean_exp(_log_potential(theta, cfg.quad_points))


def density_eval(theta, cfg):
    """``f_theta`` on the quadrature grid; independent of ``theta_0`` by construction."""
    eta = _log_potential(theta, cfg.quad_points)
    return GridDensity(np.exp(eta - _log_mean_exp(eta)))


def ellipsoid_norm(theta, p):
    """``sum_j v_j^{2p} theta_j^2``."""
    theta = as_theta(theta)
    v = basis.sobolev_weights(theta.size - 1)
    return float(np.sum(v ** (2 * p) * theta[1:] ** 2))


def in_ellipsoid(theta, cfg):
    """Strict membership ``sum_j v_j^{2p} theta_j^2 < Q``."""
    return ellipsoid_norm(theta, cfg.p) < cfg.Q


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_density(density, n, rng):
    """Inverse-CDF draws from a grid density.

    The density is treated as constant on each grid cell, so the CDF is
    piecewise linear and inverted exactly within the located cell.
    """
    rng = _as_rng(rng)
    f = np.asarray(density.values if isinstance(density, GridDensity) else density, dtype=float)
    G = f.size
    cdf = np.concatenate(([0.0], np.cumsum(f)))
    cdf /= cdf[-1]
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right") - 1
    idx = np.clip(idx, 0, G - 1)
    width = cdf[idx + 1] - cdf[idx]
    frac = np.divide(u - cdf[idx], width, out=np.full(n, 0.5), where=width > 0)
    return np.clip((idx + frac) / G, 0.0, 1.0)


def sample(theta, n, cfg, seed=None):
    """Draw ``n`` i.i.d. observations from ``f_theta``."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    x = sample_density(density_eval(theta, cfg), n, _as_rng(seed))
    return Dataset(x, seed=seed if not isinstance(seed, np.random.Generator) else None)


_CHUNK = 4096


def empirical_coeffs(data, J):
    """``phi_bar_j = n^{-1} sum_i phi_j(X_i)`` for j = 1..J.

    Samples are sorted first so the result depends on the data only as a
    multiset (bit-identical under reordering).
    """
    x = data.samples if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if x.size == 0:
        raise ValueError("empirical coefficients need a nonempty dataset")
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    x = np.sort(x)
    total = np.zeros(J)
    for start in range(0, x.size, _CHUNK):
        total += basis.basis_matrix(x[start:start + _CHUNK], J).sum(axis=0)
    return total / x.size
