"""Monte Carlo experiments: the n = 500 sine example, rate studies,
adaptation studies, posterior contraction trends and the summability
diagnostics for the true density's Fourier moments.

Every replication draws from its own stream ``SeedSequence(seed,
spawn_key=(i_n, r))``; results are gathered in a fixed order, so reports are
a pure function of the configuration and seed whatever the thread count.
"""
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import basis
from .estimators import estimate_adaptive, estimate_fixed, estimate_laplace, estimate_sieve
from .expfam import Dataset, GridDensity, as_theta, density_eval, sample_density
from .metrics import hellinger, kl, l2
from .posterior import MCMCParams, contraction_diagnostic, rw_metropolis
from .priors import dimension_N

THREADS_ENV = "TRIGEXP_THREADS"


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _map(fn, items, threads):
    threads = threads or default_threads()
    if threads == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@lru_cache(maxsize=16)
def _logsine_normalizer(G):
    x = basis.midpoint_grid(G)
    return float(np.mean(np.exp(np.sin(np.pi * x))))


@dataclass(frozen=True)
class TargetDensity:
    """True density: ``logsine`` (``exp(sin pi x)`` normalized) or ``finite_theta``."""

    kind: str = "logsine"
    theta: tuple = ()

    def __post_init__(self):
        if self.kind not in ("logsine", "finite_theta"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))

    @classmethod
    def parse(cls, text):
        """``logsine``, ``uniform`` or ``theta:t0,t1,...``."""
        text = text.strip()
        if text == "logsine":
            return cls("logsine")
        if text == "uniform":
            return cls("finite_theta", (0.0,))
        if text.startswith("theta:"):
            return cls("finite_theta", tuple(float(t) for t in text[6:].split(",") if t.strip()))
        raise ValueError(f"unrecognized target {text!r}")

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {"kind", "theta"}
        if extra:
            raise ValueError(f"unknown target keys: {sorted(extra)}")
        return cls(d.get("kind", "logsine"), tuple(d.get("theta", ())))

    def to_dict(self):
        return {"kind": self.kind, "theta": list(self.theta)}

    def density(self, cfg):
        if self.kind == "finite_theta":
            return density_eval(as_theta(self.theta), cfg)
        f = np.exp(np.sin(np.pi * cfg.grid))
        return GridDensity(f / f.mean())

    def pdf(self, x, resolution=1 << 16):
        """Pointwise density; the normalizer uses a ``resolution``-point midpoint rule."""
        x = np.asarray(x, dtype=float)
        if self.kind == "finite_theta":
            th = as_theta(self.theta)
            J = th.size - 1
            grid_eta = basis.grid_basis(resolution, J) @ th[1:] if J else np.zeros(resolution)
            eta = basis.basis_matrix(x.reshape(-1), J) @ th[1:] if J else np.zeros(x.size)
            m = grid_eta.max()
            return (np.exp(eta - m) / np.mean(np.exp(grid_eta - m))).reshape(x.shape)
        return np.exp(np.sin(np.pi * x)) / _logsine_normalizer(resolution)

    def sample(self, n, cfg, rng):
        return Dataset(sample_density(self.density(cfg), n, rng))


def _distances(truth, est):
    return {"hellinger": hellinger(truth, est), "l2": l2(truth, est), "kl": kl(truth, est)}


# ---------------------------------------------------------------------------
# condition diagnostics


_MOMENT_FLOOR = 1e-13


def condition_diagnostics(target, p0, cfg, j_max=1024, rtol=1e-8):
    """Partial sums of ``sum v_j^{2 p0} E0[phi_j]^2`` and ``sum V0[phi_j]``.

    Moments are quadrature integrals against the target on ``cfg``'s grid,
    for ``j <= j_max``. A sum counts as converged when its relative
    increment over the last doubling ``j_max/2 -> j_max`` is below ``rtol``.
    That rule misses slowly convergent series, so the fitted decay exponent
    ``a`` of the per-frequency terms (``term_k ~ k^{-a}`` over the upper half
    of the frequencies) is reported too; ``a > 1`` indicates summability.
    """
    if 2 * ((j_max + 1) // 2) >= cfg.quad_points // 2:
        raise ValueError("j_max too large for the quadrature grid")
    f = target.density(cfg).values if isinstance(target, TargetDensity) else target.values
    Phi = basis.grid_basis(cfg.quad_points, j_max)
    mean = (f @ Phi) / f.size
    mean[np.abs(mean) < _MOMENT_FLOOR] = 0.0  # quadrature rounding, not signal
    second = (f @ Phi**2) / f.size
    var = second - mean**2
    v = basis.sobolev_weights(j_max)
    s11 = np.cumsum(v ** (2 * p0) * mean**2)
    s12 = np.cumsum(var)

    def tail_exponent(terms):
        K = terms.size // 2
        per_k = terms[: 2 * K].reshape(K, 2).sum(axis=1)
        k = np.arange(1, K + 1)
        sel = (k > K // 4) & (per_k > 0)
        if sel.sum() < 2:
            return None  # terms vanish: trivially summable
        return float(-np.polyfit(np.log(k[sel]), np.log(per_k[sel]), 1)[0])

    def plateau(partial):
        full, half = partial[-1], partial[j_max // 2 - 1]
        if full == 0.0:
            return True
        return abs(full - half) / abs(full) < rtol

    return {
        "p0": p0,
        "j_max": j_max,
        "S11": float(s11[-1]),
        "S12": float(s12[-1]),
        "S11_converged": bool(plateau(s11)),
        "S12_converged": bool(plateau(s12)),
        "S11_tail_exponent": tail_exponent(v ** (2 * p0) * mean**2),
        "S12_tail_exponent": tail_exponent(var),
        "max_abs_mean": float(np.max(np.abs(mean))),
        "max_var": float(np.max(var)),
        "S11_partial": s11,
        "S12_partial": s12,
    }


# ---------------------------------------------------------------------------
# n = 500 sine-density example


@dataclass
class Figure1Result:
    truth: GridDensity
    est9: object
    est10: object
    distances: dict
    seed: int
    n: int

    def to_csv(self):
        buf = io.StringIO()
        buf.write("x,truth,est9,est10\n")
        cols = zip(self.truth.grid.tolist(), self.truth.values.tolist(),
                   self.est9.density.values.tolist(), self.est10.density.values.tolist())
        for row in cols:
            buf.write(",".join(repr(v) for v in row) + "\n")
        return buf.getvalue()


def figure1_replication(seed=0, cfg=None, n=500, gamma=0.1, n_terms=None):
    """Fixed and sieve estimates from ``n`` draws of the sine log-density."""
    from .expfam import ModelConfig

    cfg = cfg or ModelConfig(p=2, Q=1.0)
    target = TargetDensity("logsine")
    truth = target.density(cfg)
    data = target.sample(n, cfg, stream(seed, 0, 0))
    est9 = estimate_fixed(data, cfg, n_terms)
    est10 = estimate_sieve(data, cfg, gamma, n_terms)
    distances = {
        "est9_truth": _distances(truth, est9.density),
        "est10_truth": _distances(truth, est10.density),
        "est9_est10": _distances(est9.density, est10.density),
    }
    return Figure1Result(truth, est9, est10, distances, seed, n)


# ---------------------------------------------------------------------------
# rate study


@dataclass
class RateStudyReport:
    n_grid: list
    risk_mean: list
    risk_se: list
    kl_mean: list
    l2_mean: list
    slope: float
    slope_se: float
    intercept: float
    residuals: list
    reference_slope: float
    replications: int
    seed: int
    monotone_within_2se: bool
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema": 1,
            "n_grid": self.n_grid,
            "risk_mean": self.risk_mean,
            "risk_se": self.risk_se,
            "kl_mean": self.kl_mean,
            "l2_sq_mean": self.l2_mean,
            "slope": self.slope,
            "slope_se": self.slope_se,
            "intercept": self.intercept,
            "residuals": self.residuals,
            "reference_slope": self.reference_slope,
            "replications": self.replications,
            "seed": self.seed,
            "monotone_within_2se": self.monotone_within_2se,
            "config": self.config,
        }

    def to_csv(self):
        buf = io.StringIO()
        buf.write("n,risk_mean,risk_se,kl_mean,l2_sq_mean,residual\n")
        for row in zip(self.n_grid, self.risk_mean, self.risk_se, self.kl_mean,
                       self.l2_mean, self.residuals):
            buf.write(",".join(repr(v) for v in row) + "\n")
        return buf.getvalue()


def _fit(estimator, data, cfg, gamma, smoothness_grid=None, weights=None):
    if estimator == "fixed":
        return estimate_fixed(data, cfg)
    if estimator == "sieve":
        return estimate_sieve(data, cfg, gamma)
    if estimator == "laplace":
        return estimate_laplace(data, cfg)
    if estimator == "adaptive":
        return estimate_adaptive(data, smoothness_grid or (cfg.p,), weights, cfg)
    raise ValueError(f"unknown estimator {estimator!r}")


def _check_grid(n_grid, replications):
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3:
        raise ValueError("n_grid needs at least 3 sample sizes")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])) or n_grid[0] < 1:
        raise ValueError("n_grid must be strictly increasing positive integers")
    if math.log10(n_grid[-1] / n_grid[0]) < 1.5 - 1e-12:
        raise ValueError("n_grid must span at least 1.5 decades")
    if replications < 50:
        raise ValueError("at least 50 replications are required")
    return n_grid


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _strictly_decreasing(means, ses):
    return all(b < a + 2.0 * math.hypot(sa, sb)
               for a, b, sa, sb in zip(means, means[1:], ses, ses[1:]))


def rate_study(target, cfg, estimator="fixed", n_grid=None, replications=100, seed=0,
               gamma=0.1, threads=None):
    """Squared-Hellinger risk over ``n_grid`` and its fitted log-log slope."""
    n_grid = _check_grid(n_grid or [256, 512, 1024, 2048, 4096, 8192, 16384], replications)
    truth = target.density(cfg)

    def one(job):
        i, r = job
        data = target.sample(n_grid[i], cfg, stream(seed, i, r))
        est = _fit(estimator, data, cfg, gamma).density
        return hellinger(truth, est) ** 2, kl(truth, est), l2(truth, est) ** 2

    jobs = [(i, r) for i in range(len(n_grid)) for r in range(replications)]
    out = np.array(_map(one, jobs, threads)).reshape(len(n_grid), replications, 3)
    risk = [_mean_se(out[i, :, 0]) for i in range(len(n_grid))]
    means = [m for m, _ in risk]
    ses = [s for _, s in risk]
    reg = stats.linregress(np.log(n_grid), np.log(means))
    resid = np.log(means) - (reg.intercept + reg.slope * np.log(n_grid))
    return RateStudyReport(
        n_grid=n_grid,
        risk_mean=means,
        risk_se=ses,
        kl_mean=[float(np.mean(out[i, :, 1])) for i in range(len(n_grid))],
        l2_mean=[float(np.mean(out[i, :, 2])) for i in range(len(n_grid))],
        slope=float(reg.slope),
        slope_se=float(reg.stderr),
        intercept=float(reg.intercept),
        residuals=resid.tolist(),
        reference_slope=reference_slope(cfg.p),
        replications=replications,
        seed=seed,
        monotone_within_2se=_strictly_decreasing(means, ses),
        config={"target": target.to_dict(), "model": cfg.to_dict(), "estimator": estimator,
                "gamma": gamma},
    )


def reference_slope(p):
    """Minimax exponent of the squared-Hellinger risk, ``-2p / (2p + 1)``."""
    return -2.0 * p / (2.0 * p + 1.0)


# ---------------------------------------------------------------------------
# adaptation study


def adaptive_study(target, smoothness_grid, n_grid, replications, cfg, seed=0, weights=None,
                   p0=2, threads=None):
    """Posterior smoothness weights and adaptive vs known-smoothness risk.

    The known-smoothness comparator is ``estimate_fixed`` at ``p0`` truncated at
    ``ceil(n^{1/(2 p0 + 1)})``, i.e. the adaptive hierarchy's own ``p0`` component.
    """
    grid = tuple(int(p) for p in smoothness_grid)
    n_grid = [int(n) for n in n_grid]
    weights = tuple(weights) if weights is not None else (1.0,) * len(grid)
    truth = target.density(cfg)
    cfg0 = cfg.replace(p=p0)

    def one(job):
        i, r = job
        n = n_grid[i]
        data = target.sample(n, cfg, stream(seed, i, r))
        ad = estimate_adaptive(data, grid, weights, cfg)
        orc = estimate_fixed(data, cfg0, dimension_N("adaptive", p0, cfg0.Q, n, cfg0.B1_sq))
        return ad.model_weights, hellinger(truth, ad.density) ** 2, hellinger(truth, orc.density) ** 2

    jobs = [(i, r) for i in range(len(n_grid)) for r in range(replications)]
    res = _map(one, jobs, threads)
    rows = []
    coarse = [k for k, p in enumerate(grid) if p < p0]
    for i, n in enumerate(n_grid):
        chunk = res[i * replications:(i + 1) * replications]
        W = np.array([c[0] for c in chunk])
        ad_m, ad_se = _mean_se([c[1] for c in chunk]) if replications > 1 else (chunk[0][1], 0.0)
        or_m, or_se = _mean_se([c[2] for c in chunk]) if replications > 1 else (chunk[0][2], 0.0)
        rows.append({
            "n": n,
            "mean_model_weights": W.mean(axis=0).tolist(),
            "coarse_weight": float(W[:, coarse].sum(axis=1).mean()) if coarse else 0.0,
            "adaptive_risk": ad_m,
            "adaptive_risk_se": ad_se,
            "oracle_risk": or_m,
            "oracle_risk_se": or_se,
            "risk_ratio": ad_m / or_m,
        })
    cw = [r["coarse_weight"] for r in rows]
    return {
        "schema": 1,
        "smoothness_grid": list(grid),
        "prior_weights": list(weights),
        "p0": p0,
        "replications": replications,
        "seed": seed,
        "rows": rows,
        "coarse_weight_nonincreasing": all(b <= a for a, b in zip(cw, cw[1:])),
        "config": {"target": target.to_dict(), "model": cfg.to_dict()},
    }


# ---------------------------------------------------------------------------
# contraction study


def contraction_study(target, cfg, n_grid, M=5.0, replications=5, mcmc=None, seed=0,
                      radius=None, threads=None):
    """Posterior mass outside Hellinger balls of radius ``M n^{-p/(2p+1)}``.

    For each ``n``, ``replications`` independent datasets each get one chain
    on the truncated posterior with ``N`` from the truncated-prior rule.
    """
    mcmc = mcmc or MCMCParams()
    n_grid = [int(n) for n in n_grid]
    truth = target.density(cfg)

    def one(job):
        i, r = job
        n = n_grid[i]
        rng = stream(seed, i, r)
        data = target.sample(n, cfg, rng)
        N = dimension_N("truncated", cfg.p, cfg.Q, n, cfg.B1_sq)
        chain = rw_metropolis(data, cfg, N, mcmc, seed=int(rng.integers(2**63)))
        rad = radius if radius is not None else M * n ** (-cfg.p / (2.0 * cfg.p + 1.0))
        return contraction_diagnostic(chain, truth, rad, cfg), chain.acceptance_rate, N, rad

    jobs = [(i, r) for i in range(len(n_grid)) for r in range(replications)]
    res = _map(one, jobs, threads)
    rows = []
    for i, n in enumerate(n_grid):
        chunk = res[i * replications:(i + 1) * replications]
        fr = np.array([c[0] for c in chunk])
        se = float(np.std(fr, ddof=1) / math.sqrt(fr.size)) if fr.size > 1 else 0.0
        rows.append({
            "n": n,
            "N": chunk[0][2],
            "radius": chunk[0][3],
            "fraction_mean": float(fr.mean()),
            "fraction_se": se,
            "fractions": fr.tolist(),
            "acceptance_rates": [c[1] for c in chunk],
        })
    ok = all(b["fraction_mean"] <= a["fraction_mean"] + 2.0 * math.hypot(a["fraction_se"], b["fraction_se"])
             for a, b in zip(rows, rows[1:]))
    return {
        "schema": 1,
        "M": M,
        "replications": replications,
        "seed": seed,
        "rows": rows,
        "nonincreasing_within_2se": ok,
        "config": {"target": target.to_dict(), "model": cfg.to_dict(), "mcmc": mcmc.to_dict()},
    }


def dumps(obj):
    """Deterministic JSON with shortest round-trip floats."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
