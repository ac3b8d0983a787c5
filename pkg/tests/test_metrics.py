import math

import numpy as np
import pytest

from trigexp import GridDensity, ModelConfig, density_eval, hellinger, kl, l2
from trigexp.metrics import hellinger_ratio_bound, kl_coefficient_bound, sup_ratio

import oracles

CFG = ModelConfig(quad_points=1024)


def test_identical_densities():
    f = density_eval([0.0, 0.4, -0.2], CFG)
    assert hellinger(f, f) == 0.0
    assert kl(f, f) == pytest.approx(0.0, abs=1e-15)
    assert l2(f, f) == 0.0
    assert sup_ratio(f, f) == pytest.approx(1.0)


def test_hellinger_of_disjoint_supports():
    a = np.zeros(1024)
    b = np.zeros(1024)
    a[:512] = 2.0
    b[512:] = 2.0
    assert hellinger(GridDensity(a), GridDensity(b)) == pytest.approx(math.sqrt(2.0))


def test_grid_mismatch():
    with pytest.raises(ValueError):
        hellinger(GridDensity(np.ones(256)), GridDensity(np.ones(512)))


def test_kl_closed_form_one_coefficient():
    # KL(f_a || f_0) = a * E_a[phi_1] - psi(a), with psi(a) = log I0(sqrt2 a)
    from scipy.special import i0, i1
    a = 0.7
    f = density_eval([0.0, a], CFG)
    g = density_eval([0.0], CFG)
    mean_phi = math.sqrt(2) * i1(math.sqrt(2) * a) / i0(math.sqrt(2) * a)
    want = a * mean_phi - math.log(i0(math.sqrt(2) * a))
    assert kl(f, g) == pytest.approx(want, abs=1e-12)


def test_hellinger_bounded_by_kl_on_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(200):
        t1 = oracles.random_ellipsoid_point(rng, 2, 1.0)
        t2 = oracles.random_ellipsoid_point(rng, 2, 1.0)
        f, g = density_eval(t1, CFG), density_eval(t2, CFG)
        assert hellinger(f, g) ** 2 <= kl(f, g) + 1e-12


def test_bounds_reject_points_outside():
    cfg = ModelConfig(p=1, Q=0.5)
    inside = [0.0, 0.1]
    outside = [0.0, 1.0]
    with pytest.raises(ValueError):
        kl_coefficient_bound(inside, outside, cfg)
    with pytest.raises(ValueError):
        hellinger_ratio_bound(outside, inside, cfg)


def test_bound_values():
    cfg = ModelConfig(p=2, Q=1.0)
    t1, t2 = [0.0, 0.1, 0.0], [0.0, 0.0, 0.05]
    ss = 0.1**2 + 0.05**2
    assert kl_coefficient_bound(t1, t2, cfg) == pytest.approx(0.5 * math.exp(4 * cfg.B) * ss)
    assert hellinger_ratio_bound(t1, t2, cfg) == pytest.approx(0.5 * math.exp(8 * cfg.B) * ss)
