from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special, stats

from fracdrift.drift import constant_field, rotational_field
from fracdrift.fractional import StableParams
from fracdrift.geometry import Domain
from fracdrift.montecarlo import (EstimatorError, PathConfig, SurvivalCurve, estimate_lambda,
                                  exit_profile, exit_times, fit_decay, positive_stable,
                                  sample_stable_increment, simulate_survival)

from oracles import DISK_EIGENVALUE

P = StableParams(1.5)
N = 200_000


@pytest.mark.parametrize("beta", [0.6, 0.75, 0.9])
@pytest.mark.parametrize("u", [0.5, 1.0, 2.0])
def test_positive_stable_laplace_transform(beta, u):
    s = positive_stable(beta, N, np.random.default_rng(11))
    assert np.all(s > 0)
    v = np.exp(-u * s)
    se = v.std() / math.sqrt(N)
    assert abs(v.mean() - math.exp(-u**beta)) < 4 * se


@pytest.mark.parametrize("xi", [(0.7, 0.0), (0.0, 1.2), (0.5, 0.5), (-1.5, 0.8)])
def test_increment_characteristic_function(xi):
    dy = sample_stable_increment(1.0, 1.5, np.random.default_rng(3), N)
    c = np.cos(dy @ np.asarray(xi))
    se = c.std() / math.sqrt(N)
    assert abs(c.mean() - math.exp(-math.hypot(*xi) ** 1.5)) < 4 * se


def test_increments_are_isotropic():
    dy = sample_stable_increment(1.0, 1.5, np.random.default_rng(5), 50_000)
    angle = np.arctan2(dy[:, 1], dy[:, 0])
    assert stats.kstest(angle, stats.uniform(-math.pi, 2 * math.pi).cdf).pvalue > 1e-3


def test_increment_self_similarity():
    rng = np.random.default_rng(7)
    m1 = np.median(np.hypot(*sample_stable_increment(1.0, 1.5, rng, N).T))
    m16 = np.median(np.hypot(*sample_stable_increment(16.0, 1.5, rng, N).T))
    assert m16 / m1 == pytest.approx(16 ** (1 / 1.5), rel=0.02)


def test_bad_sampler_arguments():
    with pytest.raises(ValueError):
        positive_stable(1.0, 10, np.random.default_rng())
    with pytest.raises(ValueError):
        sample_stable_increment(0.0, 1.5, np.random.default_rng())
    assert sample_stable_increment(1.0, 1.5, np.random.default_rng()).shape == (2,)


def test_seeded_runs_are_identical():
    cfg = PathConfig(dt=2e-3, t_max=0.5, n_paths=5000, seed=42)
    a = simulate_survival(Domain.disk(), rotational_field(), 10.0, P, cfg)
    b = simulate_survival(Domain.disk(), rotational_field(), 10.0, P, cfg)
    assert np.array_equal(a.alive, b.alive)
    c = simulate_survival(Domain.disk(), rotational_field(), 10.0, P,
                          PathConfig(dt=2e-3, t_max=0.5, n_paths=5000, seed=43))
    assert not np.array_equal(a.alive, c.alive)


def test_decay_fit_recovers_known_rate():
    rng = np.random.default_rng(0)
    lam, dt, n = 3.0, 1e-3, 200_000
    alive = [n]
    for _ in range(3000):
        alive.append(alive[-1] - rng.binomial(alive[-1], 1 - math.exp(-lam * dt)))
    curve = SurvivalCurve(dt * np.arange(3001), np.array(alive), n, dt, 0)
    fit_decay(curve)
    assert abs(curve.lambda_hat - lam) < 4 * curve.stderr
    assert curve.stderr < 0.05
    assert curve.window[0] == pytest.approx(0.2 * curve.window[1], abs=dt)


def test_decay_fit_needs_survivors():
    curve = SurvivalCurve(np.arange(5) * 1e-3, np.array([100, 50, 20, 5, 0]), 100, 1e-3, 0)
    with pytest.raises(EstimatorError):
        fit_decay(curve)


def test_drift_step_guard():
    cfg = PathConfig(dt=1e-2, t_max=1.0, n_paths=10, h_eff=0.05)
    with pytest.raises(ValueError):
        simulate_survival(Domain.disk(), constant_field(), 40.0, P, cfg)


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(t_max=1e-4), dict(n_paths=0),
                                dict(seed=-1), dict(window_start=1.0), dict(start="corner")])
def test_path_config_validation(kw):
    with pytest.raises(ValueError):
        PathConfig(**kw)


def test_start_outside_domain():
    with pytest.raises(ValueError):
        simulate_survival(Domain.disk(), None, 0.0, P,
                          PathConfig(n_paths=10, t_max=0.01, start=(2.0, 0.0)))


def test_mean_exit_time_from_centre():
    exact = 1 / (2**1.5 * special.gamma(1.75) ** 2)
    tau = exit_times(Domain.disk(), (0.0, 0.0), P, 20_000, 1e-3, np.random.default_rng(1))
    # discrete monitoring misses some excursions, so the bias is upward
    assert tau.mean() == pytest.approx(exact, rel=0.03)
    assert tau.mean() > exact


def test_exit_time_profile_slope():
    prof = exit_profile(Domain.disk(), P, n_paths=5000, seed=2)
    assert prof.slope == pytest.approx(0.75, abs=0.1)
    assert np.all(np.diff(prof.mean) > 0)


def test_free_decay_rate_near_continuum_value():
    cfg = PathConfig(dt=1e-3, t_max=3.0, n_paths=40_000, seed=9)
    curve = estimate_lambda(Domain.disk(), None, 0.0, P, cfg)
    assert abs(curve.lambda_hat - DISK_EIGENVALUE[1.5]) < 4 * curve.stderr + 0.02
    summary = curve.summary()
    assert summary["n_paths"] == 40_000 and summary["seed"] == 9


def test_uniform_starts_stay_in_domain():
    cfg = PathConfig(dt=1e-3, t_max=0.01, n_paths=1000, start="uniform")
    curve = simulate_survival(Domain.annulus(0.4, 1.0), None, 0.0, P, cfg)
    assert curve.alive[0] == 1000
