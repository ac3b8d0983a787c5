"""Gaussian, sieve, truncated and smoothness-mixture priors on coefficients.

Every sampler draws from the unrestricted product (or mixture) measure and
then keeps only draws inside the relevant Sobolev ellipsoid, which is how
the restricted priors are defined.
"""
import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from . import basis
from .expfam import as_theta

log = logging.getLogger(__name__)

MAX_REJECTIONS = 10**6


class PriorVariant(str, Enum):
    GAUSSIAN_INFINITE = "gaussian_infinite"
    SIEVE = "sieve"
    TRUNCATED_FIXED = "truncated_fixed"
    TRUNCATED_SIEVE = "truncated_sieve"
    ADAPTIVE_MIXTURE = "adaptive_mixture"


class PriorRejectionError(RuntimeError):
    """Too many consecutive draws fell outside the ellipsoid."""


def ceil_root(n, d):
    """Smallest integer ``m >= 1`` with ``m**d >= n`` (exact ``ceil(n^{1/d})``)."""
    n = int(n)
    m = max(1, math.ceil(n ** (1.0 / d)))
    while m > 1 and (m - 1) ** d >= n:
        m -= 1
    while m**d < n:
        m += 1
    return m


def dimension_N(kind, p, Q, n, B1_sq, eps=None):
    """Truncation point of the coefficient series.

    ``kind`` selects the rule:

    * ``"infinite"``: ``ceil((8Q / (B1^2 eps^2))^{1/(2p)})`` with
      ``eps = n^{-p/(2p+1)}`` (infinite Gaussian prior);
    * ``"truncated"``: ``ceil((2Q / B1^2)^{1/(2p)} n^{1/(2p+1)})``;
    * ``"adaptive"``: ``ceil(n^{1/(2p+1)})``.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    if kind == "adaptive":
        return ceil_root(n, 2 * p + 1)
    if kind == "truncated":
        return max(1, math.ceil((2.0 * Q / B1_sq) ** (1.0 / (2 * p)) * n ** (1.0 / (2 * p + 1))))
    if kind == "infinite":
        if eps is None:
            eps = n ** (-p / (2.0 * p + 1.0))
        return max(1, math.ceil((8.0 * Q / (B1_sq * eps**2)) ** (1.0 / (2 * p))))
    raise ValueError(f"unknown truncation rule {kind!r}")


def prior_variance(j, kind, p, N, alpha=1.0, sigma2=1.0):
    """Variance ``tau_j^2`` of coordinate ``j``.

    ``kind="infinite"`` uses ``v_j^{-(2p+1)}`` up to ``N`` and
    ``v_j^{-(4p+2 alpha)}`` beyond; any other kind is degenerate past ``N``.
    """
    if j == 0:
        return 0.0
    v = basis.sobolev_weight(j)
    if j <= N:
        return sigma2 * float(v) ** (-(2 * p + 1))
    if kind == "infinite":
        return sigma2 * float(v) ** (-(4 * p + 2 * alpha))
    return 0.0


def sieve_weights(gamma, N=None):
    """Dimension weights proportional to ``exp(-gamma k)``.

    With ``N`` given, returns the normalized array ``lambda_n(1..N)``;
    otherwise a function ``k -> (1 - e^{-gamma}) e^{-gamma (k - 1)}`` on k >= 1.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if N is None:
        q = -math.expm1(-gamma)

        def lam(k):
            k = np.asarray(k)
            return q * np.exp(-gamma * (k - 1))

        return lam
    logw = -gamma * np.arange(1, N + 1)
    w = np.exp(logw - logw[0])
    return w / w.sum()


def normalize_weights(weights):
    """Exact rational normalization, so rescaling all weights is bit-invariant."""
    fr = [Fraction(float(w)) for w in weights]
    if any(f <= 0 for f in fr):
        raise ValueError("model weights must be strictly positive")
    total = sum(fr)
    return np.array([float(f / total) for f in fr])


@dataclass(frozen=True)
class PriorSpec:
    """Which prior, plus its hyperparameters.

    ``p`` and ``Q`` come from the accompanying ``ModelConfig``; the
    smoothness mixture uses ``smoothness_grid`` instead of ``p``.
    """

    variant: PriorVariant
    n: int = 1
    alpha: float = 1.0
    gamma: float = 0.1
    sieve_scale: float = None
    J_max: int = None
    N: int = None
    smoothness_grid: tuple = ()
    weights: tuple = ()
    restrict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", PriorVariant(self.variant))
        object.__setattr__(self, "smoothness_grid", tuple(int(p) for p in self.smoothness_grid))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.alpha > 0.5:
            raise ValueError(f"alpha must exceed 1/2, got {self.alpha}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.sieve_scale is not None:
            if not self.sieve_scale > 0:
                raise ValueError("sieve_scale must be positive")
            # lambda(k) = (e^gamma - 1) e^{-gamma k} must dominate A e^{-gamma k}
            if self.sieve_scale > math.expm1(self.gamma):
                raise ValueError("sieve weights violate lambda(k) >= A exp(-gamma k)")
        if self.variant is PriorVariant.ADAPTIVE_MIXTURE:
            grid = self.smoothness_grid
            if not grid:
                raise ValueError("adaptive mixture needs a nonempty smoothness grid")
            if any(p < 1 for p in grid) or list(grid) != sorted(set(grid)):
                raise ValueError("smoothness grid must be strictly increasing integers >= 1")
            if not self.weights:
                object.__setattr__(self, "weights", (1.0,) * len(grid))
            if len(self.weights) != len(grid) or any(w <= 0 for w in self.weights):
                raise ValueError("need one positive weight per smoothness value")

    def truncation(self, cfg, p=None):
        p = cfg.p if p is None else p
        if self.N is not None:
            return int(self.N)
        v = self.variant
        if v is PriorVariant.GAUSSIAN_INFINITE:
            return dimension_N("infinite", p, cfg.Q, self.n, cfg.B1_sq)
        if v is PriorVariant.ADAPTIVE_MIXTURE:
            return dimension_N("adaptive", p, cfg.Q, self.n, cfg.B1_sq)
        return dimension_N("truncated", p, cfg.Q, self.n, cfg.B1_sq)

    def to_dict(self):
        d = asdict(self)
        d["variant"] = self.variant.value
        d["smoothness_grid"] = list(self.smoothness_grid)
        d["weights"] = list(self.weights)
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown prior keys: {sorted(extra)}")
        return cls(**d)


def _gaussian_block(rng, m, sd):
    return rng.standard_normal((m, sd.size)) * sd


def _draw_unrestricted(spec, cfg, rng, m):
    """``m`` draws from the unrestricted measure plus the ellipsoid exponent of each."""
    v = spec.variant
    s2 = cfg.sigma2
    if v is PriorVariant.GAUSSIAN_INFINITE:
        N = spec.truncation(cfg)
        J = spec.J_max or 4 * N
        sd = np.sqrt([prior_variance(j, "infinite", cfg.p, N, spec.alpha, s2) for j in range(1, J + 1)])
        return _gaussian_block(rng, m, sd), np.full(m, cfg.p)
    if v is PriorVariant.TRUNCATED_FIXED:
        N = spec.truncation(cfg)
        sd = np.sqrt(s2 * basis.sobolev_weights(N) ** (-(2 * cfg.p + 1)))
        return _gaussian_block(rng, m, sd), np.full(m, cfg.p)
    if v in (PriorVariant.SIEVE, PriorVariant.TRUNCATED_SIEVE):
        if v is PriorVariant.SIEVE:
            k = rng.geometric(-math.expm1(-spec.gamma), size=m)
        else:
            N = spec.truncation(cfg)
            k = rng.choice(np.arange(1, N + 1), size=m, p=sieve_weights(spec.gamma, N))
        J = int(k.max())
        sd = np.sqrt(s2 * basis.sobolev_weights(J) ** (-(2 * cfg.p + 1)))
        th = _gaussian_block(rng, m, sd)
        th[np.arange(1, J + 1)[None, :] > k[:, None]] = 0.0
        return th, np.full(m, cfg.p)
    if v is PriorVariant.ADAPTIVE_MIXTURE:
        grid = np.array(spec.smoothness_grid)
        w = normalize_weights(spec.weights)
        idx = rng.choice(grid.size, size=m, p=w)
        Ns = [spec.truncation(cfg, p=int(p)) for p in grid]
        J = max(Ns)
        th = np.zeros((m, J))
        z = rng.standard_normal((m, J))
        vw = basis.sobolev_weights(J)
        for i, (p, N) in enumerate(zip(grid, Ns)):
            rows = idx == i
            sd = np.sqrt(s2 * vw[:N] ** (-(2 * int(p) + 1)))
            th[rows, :N] = z[rows, :N] * sd
        return th, grid[idx]
    raise ValueError(f"unsupported prior variant {v}")


def sample_prior(spec, cfg, seed=None, size=None, max_rejections=MAX_REJECTIONS):
    """Draw from the ellipsoid-restricted prior by rejection.

    Returns a coefficient vector (``theta_0 = 0``), or a ``(size, J + 1)``
    array when ``size`` is given. Raises ``PriorRejectionError`` after
    ``max_rejections`` consecutive rejections.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    want = 1 if size is None else int(size)
    if spec.variant is PriorVariant.GAUSSIAN_INFINITE:
        _log_tail_bound(spec, cfg)
    kept, n_kept, streak = [], 0, 0
    batch = min(max(256, 2 * want), 65536)
    while n_kept < want:
        th, ps = _draw_unrestricted(spec, cfg, rng, batch)
        vw = basis.sobolev_weights(th.shape[1])
        if spec.restrict:
            norm = np.sum(vw[None, :] ** (2 * ps[:, None]) * th**2, axis=1)
            ok = norm < cfg.Q
        else:
            ok = np.ones(batch, dtype=bool)
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            streak += batch
        else:
            streak = batch - 1 - int(hits[-1])
            kept.append(th[hits])
            n_kept += hits.size
        if streak >= max_rejections:
            raise PriorRejectionError(
                f"{streak} consecutive prior draws fell outside the ellipsoid; "
                f"Q={cfg.Q} is too small for the {spec.variant.value} variance schedule"
            )
    J = max(t.shape[1] for t in kept)
    out = np.zeros((n_kept, J + 1))
    row = 0
    for t in kept:
        out[row:row + t.shape[0], 1:t.shape[1] + 1] = t
        row += t.shape[0]
    out = out[:want]
    if size is None:
        th = out[0]
        last = np.flatnonzero(th)
        return th[: (last[-1] + 1 if last.size else 1)].copy()
    return out


def _log_tail_bound(spec, cfg):
    N = spec.truncation(cfg)
    J = spec.J_max or 4 * N
    expo = 4 * cfg.p + 2 * spec.alpha
    # sum_{j > J} v_j^{-expo} <= 2 * int_{J/2}^inf (2x)^{-expo} dx
    k0 = J / 2.0
    bound = 2.0 * (2.0 ** -expo) * k0 ** (1.0 - expo) / (expo - 1.0)
    log.debug("infinite Gaussian prior truncated at J=%d; omitted tail sd <= %.3g",
              J, math.sqrt(cfg.sigma2 * bound))


def prior_mass_condition_check(spec, cfg, theta0, c1, c2, n_draws=100_000, seed=None, eps=None):
    """Monte Carlo check of the small-ball prior mass condition.

    Estimates ``pi_n({theta : sum_{j>=1} (theta_j - theta0_j)^2 <= B1^2 eps^2})``
    from restricted-prior draws and returns ``(mass, threshold)`` with
    ``threshold = c2 exp(-c1 n eps^2)``.
    """
    n = spec.n
    if eps is None:
        eps = n ** (-cfg.p / (2.0 * cfg.p + 1.0))
    theta0 = as_theta(theta0)
    draws = sample_prior(spec, cfg, seed, size=n_draws)
    J = max(draws.shape[1], theta0.size)
    diff = np.zeros((draws.shape[0], J))
    diff[:, : draws.shape[1]] = draws
    diff[:, : theta0.size] -= theta0
    dist2 = np.sum(diff[:, 1:] ** 2, axis=1)
    mass = float(np.mean(dist2 <= cfg.B1_sq * eps**2))
    threshold = c2 * math.exp(-c1 * n * eps**2)
    return mass, threshold
