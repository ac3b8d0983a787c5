import json
import math

import numpy as np
import pytest
from scipy.stats import chi2

from trigexp import Dataset, ModelConfig, density_eval, estimate_adaptive, estimate_fixed
from trigexp import dimension_N, estimate_laplace, estimate_sieve, hellinger, sample
from trigexp import basis
from trigexp.estimators import (
    fixed_exponent,
    hellinger_ball_estimate,
    log_marginal_from_coeffs,
    posterior_mode,
    posterior_model_weights,
    premise_lower_bound,
    sieve_rho,
)
from trigexp.expfam import empirical_coeffs

import oracles

CFG = ModelConfig(p=2, Q=1.0, quad_points=1024)


@pytest.fixture(scope="module")
def data():
    return sample([0.0, 0.3, -0.2, 0.1], 400, CFG, seed=21)


def test_fixed_exponent_formula(data):
    N = 5
    pb = np.array([np.mean(oracles.phi(j, data.samples)) for j in range(1, N + 1)])
    x = CFG.grid
    want = np.zeros_like(x)
    for j in range(1, N + 1):
        d = oracles.weight(j) ** 5 + data.n + 1
        want += 0.5 * (oracles.phi(j, x) ** 2 + 2 * data.n * pb[j - 1] * oracles.phi(j, x)) / d
    got = fixed_exponent(pb, data.n, 2, CFG.quad_points)
    assert np.max(np.abs(got - want)) < 1e-12


@pytest.mark.parametrize("est", ["fixed", "sieve", "laplace"])
def test_estimates_are_normalized(data, est):
    fn = {"fixed": estimate_fixed, "sieve": estimate_sieve, "laplace": estimate_laplace}[est]
    res = fn(data, CFG)
    assert res.density.integral() == pytest.approx(1.0, abs=1e-12)
    assert res.variant == est
    assert res.N_used == dimension_N("truncated", 2, 1.0, data.n, CFG.B1_sq)
    assert np.all(res.density.values > 0)


def test_sieve_with_one_term_equals_fixed(data):
    a = estimate_fixed(data, CFG, n_terms=1).density.values
    b = estimate_sieve(data, CFG, gamma=0.3, n_terms=1).density.values
    assert np.max(np.abs(a - b)) < 1e-12


def test_sieve_rho():
    want = (1 + 11 * 2.0**-5) ** -0.5 * (1 + 11 * 2.0**-5) ** -0.5 * (1 + 11 * 4.0**-5) ** -0.5
    assert sieve_rho(10, 2, 3) == pytest.approx(want)


def test_sieve_concentrates_on_small_models_for_large_gamma(data):
    a = estimate_fixed(data, CFG, n_terms=1).density
    b = estimate_sieve(data, CFG, gamma=60.0, n_terms=8).density
    assert hellinger(a, b) < 1e-6


def test_normalizer_is_consistent(data):
    res = estimate_fixed(data, CFG)
    expo = fixed_exponent(empirical_coeffs(data, res.N_used), data.n, 2, CFG.quad_points)
    assert np.allclose(res.normalizer * np.exp(expo), res.density.values, rtol=1e-12)
    side = json.loads(res.sidecar_json())
    assert set(side) == {"variant", "N_used", "model_weights", "smoothness_grid",
                         "normalizer", "log_normalizer"}


def _laplace_direct(data, cfg, N):
    """Reference evaluation with dense grid moments and an explicit inverse."""
    n = data.n
    G = cfg.quad_points
    x = oracles.midpoint(G)
    Phi = np.column_stack([oracles.phi(j, x) for j in range(1, N + 1)])
    pb = np.array([np.mean(oracles.phi(j, data.samples)) for j in range(1, N + 1)])
    P = np.diag([oracles.weight(j) ** (2 * cfg.p + 1) for j in range(1, N + 1)]).astype(float)
    th = np.zeros(N)
    for _ in range(100):
        eta = Phi @ th
        f = np.exp(eta - eta.max())
        f /= f.mean()
        m = f @ Phi / G
        C = (Phi * f[:, None]).T @ Phi / G - np.outer(m, m)
        step = np.linalg.solve(n * C + P, n * pb - n * m - P @ th)
        th += step
        if np.max(np.abs(step)) < 1e-13:
            break
    eta = Phi @ th
    f = np.exp(eta - eta.max())
    f /= f.mean()
    m = f @ Phi / G
    C = (Phi * f[:, None]).T @ Phi / G - np.outer(m, m)
    D = Phi - m
    q = np.einsum("ij,jk,ik->i", D, np.linalg.inv((n + 1) * C + P), D)
    e = Phi @ th + 0.5 * q
    g = np.exp(e - e.max())
    return g / g.mean()


@pytest.mark.parametrize("N", [1, 2, 7, 30])
def test_laplace_matches_direct_evaluation(data, N):
    got = estimate_laplace(data, CFG, n_terms=N).density.values
    want = _laplace_direct(data, CFG, N)
    assert np.max(np.abs(got - want)) < 1e-10


def test_posterior_mode_is_stationary(data):
    N = 9
    pb = empirical_coeffs(data, N)
    th, m, C = posterior_mode(pb, data.n, 2, CFG.quad_points)
    prec = basis.sobolev_weights(N) ** 5
    f = density_eval(np.concatenate(([0.0], th)), CFG).values
    mean = f @ basis.grid_basis(CFG.quad_points, N) / CFG.quad_points
    assert np.allclose(mean, m, atol=1e-12)
    assert np.max(np.abs(data.n * (pb - mean) - prec * th)) < 1e-8


def test_laplace_reduces_to_fixed_at_uniform_data():
    # symmetric data with phi_bar ~ 0: the mode is ~0 and both expansions coincide
    x = (np.arange(4000) + 0.5) / 4000
    d = Dataset(x)
    a = estimate_fixed(d, CFG, n_terms=6).density
    b = estimate_laplace(d, CFG, n_terms=6).density
    assert hellinger(a, b) < 1e-8


def test_laplace_is_consistent_where_fixed_is_biased():
    cfg = ModelConfig(p=2, Q=1.0)
    theta = [0.0, 0.0, -0.9, 0.0, 0.2]
    truth = density_eval(theta, cfg)
    d = sample(theta, 20000, cfg, seed=2)
    lap = hellinger(truth, estimate_laplace(d, cfg, n_terms=4).density)
    fix = hellinger(truth, estimate_fixed(d, cfg, n_terms=4).density)
    assert lap < 0.02
    assert fix > 2 * lap


def test_log_marginal_formula():
    pb = np.array([0.1, -0.05, 0.02])
    n, p = 300, 1
    want = 0.0
    for j, b in enumerate(pb, start=1):
        prec = oracles.weight(j) ** 3
        want += -0.5 * math.log(1 + n / prec) + (n * b) ** 2 / (2 * (n + prec))
    assert log_marginal_from_coeffs(pb, n, p) == pytest.approx(want, rel=1e-13)


def test_posterior_model_weights():
    w = posterior_model_weights([0.0, math.log(3.0)], [1.0, 1.0])
    assert w.tolist() == pytest.approx([0.25, 0.75])
    w = posterior_model_weights([-1e5, 0.0, -1e5], [1.0, 1.0, 1.0])
    assert w[1] == 1.0 and np.all(np.isfinite(w))


def test_adaptive_singleton_equals_fixed(data):
    cfg = CFG.replace(p=2)
    ad = estimate_adaptive(data, [2], cfg=cfg)
    fx = estimate_fixed(data, cfg, n_terms=ad.N_used)
    assert np.array_equal(ad.density.values, fx.density.values)
    assert ad.model_weights.tolist() == [1.0]


def test_adaptive_weight_rescaling_is_bit_exact(data):
    a = estimate_adaptive(data, [1, 2, 3], weights=[1.0, 2.0, 5.0], cfg=CFG)
    b = estimate_adaptive(data, [1, 2, 3], weights=[4.0, 8.0, 20.0], cfg=CFG)
    assert np.array_equal(a.model_weights, b.model_weights)
    assert np.array_equal(a.density.values, b.density.values)


def test_adaptive_log_marginal_override(data):
    res = estimate_adaptive(data, [1, 2], cfg=CFG, log_marginals=[0.0, -50.0])
    only = estimate_adaptive(data, [1], cfg=CFG)
    assert res.model_weights[0] == pytest.approx(1.0)
    assert hellinger(res.density, only.density) < 1e-10


def test_adaptive_validation(data):
    with pytest.raises(ValueError):
        estimate_adaptive(data, [], cfg=CFG)
    with pytest.raises(ValueError):
        estimate_adaptive(data, [1, 2], weights=[1.0], cfg=CFG)


def test_premise_lower_bound():
    assert premise_lower_bound(2, ModelConfig(Q=1.0)) == pytest.approx(chi2.cdf(1.0, 2))


def test_n_terms_validation(data):
    with pytest.raises(ValueError):
        estimate_fixed(data, CFG, n_terms=0)


def test_hellinger_ball_estimate():
    rng = np.random.default_rng(0)
    center = np.array([0.0, 0.2, -0.1])
    draws = center + np.concatenate([np.zeros((150, 1)), 0.01 * rng.standard_normal((150, 2))], axis=1)
    outliers = np.array([[0.0, 1.5, 1.5]] * 30)
    th, delta = hellinger_ball_estimate(np.vstack([draws, outliers]), CFG, n=1000)
    assert np.max(np.abs(th - center)) < 0.03
    assert 0.0 < delta < 0.05
    with pytest.raises(ValueError):
        hellinger_ball_estimate(draws[:50], CFG, n=10)
