import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import i0

from trigexp import Dataset, GridDensity, ModelConfig, density_eval, empirical_coeffs
from trigexp import in_ellipsoid, log_normalizer, sample
from trigexp.expfam import as_theta, ellipsoid_norm, sample_density, support_dim

import oracles

CFG = ModelConfig()


def test_model_config_validation():
    for bad in [dict(p=0), dict(p=1.5), dict(Q=0.0), dict(Q=math.inf),
                dict(quad_points=1000), dict(quad_points=128), dict(sigma2=0.0)]:
        with pytest.raises(ValueError):
            ModelConfig(**bad)


def test_model_config_roundtrip():
    cfg = ModelConfig(p=3, Q=0.5, quad_points=512)
    assert ModelConfig(**cfg.to_dict()) == cfg
    assert cfg.replace(p=1).p == 1


def test_as_theta_and_support():
    assert as_theta([]).tolist() == [0.0]
    assert support_dim([0.0, 0.0, 0.3, 0.0]) == 2
    assert support_dim([5.0]) == 0
    with pytest.raises(ValueError):
        as_theta([[1.0]])
    with pytest.raises(ValueError):
        as_theta([0.0, math.nan])


def test_log_normalizer_bessel():
    # int exp(sqrt2 sin 2 pi x) dx = I0(sqrt2)
    assert log_normalizer([0.0, 1.0], CFG) == pytest.approx(math.log(i0(math.sqrt(2))), abs=1e-12)
    assert log_normalizer([0.0, 1.0], CFG) == pytest.approx(0.448578, abs=1e-6)


def test_density_at_quarter():
    # f(1/4) = exp(sqrt2 - log I0(sqrt2)); 0.25 is not a grid point, so use the oracle directly
    assert oracles.density_on([0.0, 1.0], [0.25])[0] == pytest.approx(2.62646, abs=1e-5)
    cfg = ModelConfig(quad_points=256)
    f = density_eval([0.0, 1.0], cfg)
    want = oracles.density_on([0.0, 1.0], cfg.grid)
    assert np.max(np.abs(f.values - want)) < 1e-12


def test_uniform_and_theta0_invariance():
    assert log_normalizer([0.0], CFG) == 0.0
    assert np.all(density_eval([0.0], CFG).values == 1.0)
    a = density_eval([0.0, 0.2, -0.1], CFG).values
    b = density_eval([7.0, 0.2, -0.1], CFG).values
    assert np.array_equal(a, b)
    assert log_normalizer([7.0, 0.2, -0.1], CFG) == pytest.approx(7.0 + log_normalizer([0, 0.2, -0.1], CFG))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5), min_size=1, max_size=12))
def test_log_normalizer_matches_gauss_legendre(coefs):
    theta = [0.0] + coefs
    assert log_normalizer(theta, CFG) == pytest.approx(oracles.log_partition(theta), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=12))
def test_density_integrates_to_one(coefs):
    assert density_eval([0.0] + coefs, CFG).integral() == pytest.approx(1.0, abs=1e-12)


def test_log_normalizer_no_overflow():
    psi = log_normalizer([0.0, 400.0], CFG)
    assert math.isfinite(psi) and psi > 400.0


def test_ellipsoid_membership_is_strict():
    cfg = ModelConfig(p=1, Q=4.0)
    assert ellipsoid_norm([0.0, 1.0], 1) == 4.0
    assert not in_ellipsoid([0.0, 1.0], cfg)
    assert in_ellipsoid([0.0, 0.999], cfg)
    assert in_ellipsoid([123.0], cfg)


def test_grid_density_csv_roundtrip():
    f = density_eval([0.0, 0.3, 0.1], ModelConfig(quad_points=256))
    text = f.to_csv()
    assert text.splitlines()[0] == "x,f"
    back = GridDensity.from_csv(text)
    assert np.array_equal(back.values, f.values)
    with pytest.raises(ValueError):
        GridDensity.from_csv("a,b\n1,2\n")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([0.5, 1.2]))
    with pytest.raises(ValueError):
        Dataset(np.array([0.5, math.nan]))
    assert Dataset(np.array([0.0, 1.0])).n == 2


def test_sample_is_seeded_and_in_range():
    a = sample([0.0, 0.5], 1000, CFG, seed=3)
    b = sample([0.0, 0.5], 1000, CFG, seed=3)
    assert np.array_equal(a.samples, b.samples)
    assert a.samples.min() >= 0.0 and a.samples.max() <= 1.0
    with pytest.raises(ValueError):
        sample([0.0], 0, CFG, seed=1)


def test_sampler_matches_target_cdf():
    theta = [0.0, 0.8, -0.4, 0.2]
    data = sample(theta, 20000, CFG, seed=11)
    xs = np.linspace(0, 1, 2001)
    pdf = oracles.density_on(theta, xs)
    cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(xs))))
    res = stats.kstest(data.samples, lambda q: np.interp(q, xs, cdf))
    assert res.pvalue > 1e-3


def test_sample_density_uniform_cells():
    rng = np.random.default_rng(0)
    x = sample_density(np.array([0.0, 2.0, 0.0, 2.0]), 4000, rng)
    cells = np.floor(x * 4).astype(int)
    assert set(cells.tolist()) <= {1, 3}


def test_empirical_coeffs():
    x = np.array([0.1, 0.35, 0.8])
    got = empirical_coeffs(Dataset(x), 4)
    want = [np.mean(oracles.phi(j, x)) for j in range(1, 5)]
    assert np.allclose(got, want, atol=1e-15)
    with pytest.raises(ValueError):
        empirical_coeffs(Dataset(np.array([])), 3)
    with pytest.raises(ValueError):
        empirical_coeffs(Dataset(x), 0)


def test_empirical_coeffs_order_invariant():
    x = np.random.default_rng(5).random(9000)
    a = empirical_coeffs(Dataset(x), 10)
    b = empirical_coeffs(Dataset(x[::-1].copy()), 10)
    assert np.array_equal(a, b)
