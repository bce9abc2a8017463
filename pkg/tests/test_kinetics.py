import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hsclusters import kinetics
from hsclusters.clusters import rate_statistic
from hsclusters.initial import rng_stream
from hsclusters.kinetics import (EquilibriumParams, collision_rate_maxwellian,
                                 equilibrium_mean_free_time, maxwell_fn_mass, maxwell_mean_K,
                                 mean_collision_rate, scaling_map, yule_sample_K,
                                 yule_sample_many)


def test_params():
    assert EquilibriumParams(3).energy == pytest.approx(0.5)
    assert EquilibriumParams.from_energy(2.0).beta == pytest.approx(0.75)
    with pytest.raises(ValueError):
        EquilibriumParams(0)


def test_mass_examples():
    assert maxwell_fn_mass(0, 0.0) == 1.0
    assert maxwell_fn_mass(3, 0.0) == 0.0
    assert maxwell_fn_mass(1, math.log(2)) == pytest.approx(0.25, rel=1e-15)
    with pytest.raises(ValueError):
        maxwell_fn_mass(-1, 1.0)


def test_mean_examples():
    assert maxwell_mean_K(0.0) == 0.0
    assert maxwell_mean_K(1.0) == pytest.approx(1.718282, abs=1e-6)


@pytest.mark.parametrize("t", [0.01, 0.5, 1.0, 2.5, 5.0])
def test_mass_tail_bound(t):
    n_star = 500
    head = math.fsum(maxwell_fn_mass(n, t) for n in range(n_star + 1))
    tail = (1 - math.exp(-t)) ** (n_star + 1)
    assert 1 - head <= tail + 1e-14
    assert 1 - head == pytest.approx(tail, abs=1e-13)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0])
def test_mean_from_masses(t):
    s = math.fsum(n * maxwell_fn_mass(n, t) for n in range(2000))
    assert s == pytest.approx(maxwell_mean_K(t), abs=1e-10)


def test_mean_truncated_at_200():
    s = math.fsum(n * maxwell_fn_mass(n, 2.0) for n in range(201))
    assert s == pytest.approx(maxwell_mean_K(2.0), abs=1e-10)


def test_yule_zero_time():
    rng = rng_stream(0)
    assert all(yule_sample_K(0.0, rng) == 0 for _ in range(100))
    assert np.all(yule_sample_many(0.0, 1000, rng) == 0)


def _chi_square(ks, t):
    p = 1 - math.exp(-t)
    kmax = int(math.log(5 / len(ks)) / math.log(p)) if p > 0 else 0  # expected >= 5 per bin
    obs = np.bincount(np.minimum(ks, kmax), minlength=kmax + 1)
    exp = np.array([maxwell_fn_mass(k, t) for k in range(kmax)] + [p ** kmax]) * len(ks)
    return stats.chisquare(obs, exp).pvalue


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_yule_chi_square(t):
    ks = yule_sample_many(t, 100_000, rng_stream(17, int(t * 10)))
    assert _chi_square(ks, t) > 0.01


def test_scalar_sampler_same_law():
    rng = rng_stream(3)
    ks = np.array([yule_sample_K(1.0, rng) for _ in range(20_000)])
    assert _chi_square(ks, 1.0) > 0.01


def test_yule_cap(monkeypatch):
    monkeypatch.setattr(kinetics, "YULE_POPULATION_CAP", 50)
    with pytest.raises(OverflowError):
        yule_sample_K(20.0, rng_stream(0))
    with pytest.raises(OverflowError):
        yule_sample_many(20.0, 10, rng_stream(0))


def test_mean_free_time_values():
    assert equilibrium_mean_free_time(0.5) == pytest.approx(1 / (4 * math.sqrt(math.pi / 3)))
    # 0.24430 and 0.12215; the quoted figures 0.2444 and 0.1222 are rounded
    assert equilibrium_mean_free_time(0.5) == pytest.approx(0.2444, abs=2e-4)
    assert equilibrium_mean_free_time(2.0) == pytest.approx(0.1222, abs=1e-4)
    assert equilibrium_mean_free_time(0.5, n_eps2=2) == equilibrium_mean_free_time(2.0)
    with pytest.raises(ValueError):
        equilibrium_mean_free_time(0.0)


def test_rate_at_rest_closed_form():
    assert collision_rate_maxwellian([0, 0, 0], 3.0) == pytest.approx(
        math.pi * math.sqrt(8 / (3 * math.pi)), rel=1e-10)


def test_rate_at_rest_monte_carlo():
    # independent estimate of pi E|V| with 10^7 Gaussian draws
    rng = rng_stream(123)
    total, total2, n = 0.0, 0.0, 0
    for _ in range(10):
        s = np.linalg.norm(rng.normal(0, math.sqrt(1 / 3), size=(1_000_000, 3)), axis=1)
        total += s.sum()
        total2 += (s * s).sum()
        n += s.size
    mean = total / n
    se = math.sqrt(total2 / n - mean ** 2) / math.sqrt(n)
    assert abs(collision_rate_maxwellian([0, 0, 0], 3.0) - math.pi * mean) < 3 * math.pi * se


def test_rate_monte_carlo_moving_particle():
    rng = rng_stream(8)
    v = np.array([0.7, -0.2, 0.4])
    V = rng.normal(0, math.sqrt(1 / 3), size=(2_000_000, 3))
    d = np.linalg.norm(V - v, axis=1)
    assert collision_rate_maxwellian(v, 3.0) == pytest.approx(
        math.pi * d.mean(), abs=3 * math.pi * d.std() / math.sqrt(d.size))


@settings(max_examples=40, deadline=None)
@given(st.tuples(*[st.floats(-3, 3)] * 3))
def test_rate_even_and_rotation_invariant(v):
    v = np.array(v)
    r = collision_rate_maxwellian(v, 3.0)
    assert collision_rate_maxwellian(-v, 3.0) == r
    assert collision_rate_maxwellian(v[[2, 0, 1]], 3.0) == pytest.approx(r, rel=1e-12)


def test_rate_monotone_and_asymptotic():
    sigma = math.sqrt(1 / 3)
    speeds = np.linspace(0, 10 * sigma, 60)
    rs = [collision_rate_maxwellian([s, 0, 0], 3.0) for s in speeds]
    assert np.all(np.diff(rs) >= 0)
    big = 50 * sigma
    ratio = collision_rate_maxwellian([0, big, 0], 3.0) / (math.pi * big)
    assert 0.99 <= ratio <= 1.01


def test_mean_rate_inverts_mean_free_time():
    for beta in (3.0, 0.75, 1.9):
        tau = equilibrium_mean_free_time(1.5 / beta)
        assert mean_collision_rate(beta) == pytest.approx(1 / tau, rel=1e-8)


def test_scaling_map():
    ident = scaling_map(maxwell_mean_K, 1.0)
    for t in (0.1, 1.0, 3.0):
        assert ident(t) == maxwell_mean_K(t)
    fast = scaling_map(maxwell_mean_K, 2.0)
    for t in (0.1, 0.7, 2.0):
        assert fast(t) == pytest.approx(math.exp(2 * t) - 1)
        assert rate_statistic(fast(t), t) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        scaling_map(maxwell_mean_K, 0.0)
