from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from geogame.equilibria import closed_loop_profile
from geogame.model import GameParams, ParameterError, StrategyProfile, UtilityConvention, aggregate_coeffs
from geogame.simulation import (
    EnsembleTooLargeError,
    TimeGrid,
    aggregate_path_stats,
    default_horizon,
    default_workers,
    empirical_measure,
    estimate_payoff_mc,
    horizon_for_tolerance,
    sample_paths,
    tail_bound,
)
from geogame.verification import analytic_payoff, transversality_along_paths

from helpers import baseline, random_params

INC = UtilityConvention.INCLUSIVE


def test_noise_free_paths_are_exponential():
    p = baseline(3, mu=0.0, nu=0.0)
    ens = sample_paths(p, StrategyProfile((0.05,) * 3), TimeGrid(10.0, 50), 4, seed=0)
    np.testing.assert_allclose(ens.states[:, -1, :], math.exp(0.5), rtol=1e-14)


def test_same_seed_same_paths_across_workers():
    p = random_params(np.random.default_rng(0), 3, 3)
    prof = closed_loop_profile(p)
    grid = TimeGrid(2.0, 16)
    runs = [sample_paths(p, prof, grid, 1000, seed=42, workers=w).log_states for w in (1, 4, 16)]
    assert all(np.array_equal(runs[0], r) for r in runs[1:])


def test_chunked_generation_matches_single_run():
    p = baseline(2)
    prof = closed_loop_profile(p)
    grid = TimeGrid(1.0, 8)
    whole = sample_paths(p, prof, grid, 700, seed=3).log_states
    parts = [sample_paths(p, prof, grid, k, seed=3, path_offset=s).log_states for s, k in ((0, 300), (300, 257), (557, 143))]
    assert np.array_equal(whole, np.concatenate(parts))


def test_path_stream_is_philox_counter():
    p = baseline(2)
    prof = StrategyProfile((0.05, 0.05))
    grid = TimeGrid(1.0, 4)
    ens = sample_paths(p, prof, grid, 5, seed=11)
    for path in (0, 4):
        gen = np.random.Generator(np.random.Philox(key=11, counter=path << 192))
        z = gen.standard_normal((4, 3)) * math.sqrt(grid.dt)
        inc = ens.params.gammas - 0.05 - 0.5 * 0.05 + 0 * z[:, 1:]
        inc = inc * grid.dt + 0.1 * z[:, :1] + 0.2 * z[:, 1:]
        np.testing.assert_allclose(ens.log_states[path, 1:], np.cumsum(inc, axis=0), rtol=1e-13, atol=1e-15)


def test_different_seeds_differ():
    p = baseline(2)
    prof = closed_loop_profile(p)
    a = sample_paths(p, prof, TimeGrid(1.0, 4), 10, seed=1).log_states
    b = sample_paths(p, prof, TimeGrid(1.0, 4), 10, seed=2).log_states
    assert not np.array_equal(a, b)


def test_terminal_law_exact_under_grid_refinement():
    p = GameParams.homogeneous(2, 0.05, gamma=0.1, mu=0.3, nu=0.2, theta=1.0, eta=0.5, q0=2.0)
    prof = StrategyProfile((0.04, 0.04))
    t = 3.0
    mean = math.log(2.0) + (0.1 - 0.04 - 0.5 * 0.13) * t
    sd = math.sqrt(0.13 * t)
    coarse = sample_paths(p, prof, TimeGrid(t, 1), 20_000, seed=5).log_states[:, -1, 0]
    fine = sample_paths(p, prof, TimeGrid(t, 64), 20_000, seed=6).log_states[:, -1, 0]
    assert stats.kstest(coarse, "norm", args=(mean, sd)).pvalue > 1e-3
    assert stats.kstest(fine, "norm", args=(mean, sd)).pvalue > 1e-3
    assert stats.ks_2samp(coarse, fine).pvalue > 1e-3


def test_common_noise_correlates_agents():
    p = GameParams.homogeneous(2, 0.05, gamma=0.1, mu=0.1, nu=0.3, theta=1.0, eta=0.5)
    ens = sample_paths(p, StrategyProfile((0.05, 0.05)), TimeGrid(1.0, 1), 50_000, seed=9)
    x = ens.log_states[:, -1, :]
    assert np.corrcoef(x.T)[0, 1] == pytest.approx(0.09 / 0.10, abs=0.01)


def test_euler_converges_to_exact():
    p = baseline(1)
    prof = StrategyProfile((0.05,))
    exact = sample_paths(p, prof, TimeGrid(1.0, 1000), 200, seed=4).log_states[:, -1, 0]
    euler = sample_paths(p, prof, TimeGrid(1.0, 1000), 200, seed=4, method="euler").log_states[:, -1, 0]
    assert np.max(np.abs(exact - euler)) < 5e-3


def test_antithetic_pairs_mirror():
    p = baseline(2, mu=0.3, nu=0.1)
    prof = StrategyProfile((0.05, 0.05))
    ens = sample_paths(p, prof, TimeGrid(1.0, 4), 6, seed=2, antithetic=True)
    mean_path = math.log(1.0) + (0.1 - 0.05 - 0.05) * ens.grid.times
    dev = ens.log_states[:, :, 0] - mean_path
    np.testing.assert_allclose(dev[0], -dev[1], atol=1e-14)


def test_input_validation():
    p = baseline(2)
    with pytest.raises(ParameterError):
        sample_paths(p, StrategyProfile((0.05,)), TimeGrid(1.0, 4), 10, seed=0)
    with pytest.raises(ParameterError):
        sample_paths(p, closed_loop_profile(p), TimeGrid(1.0, 4), 0, seed=0)
    with pytest.raises(ParameterError):
        sample_paths(p, closed_loop_profile(p), TimeGrid(1.0, 4), 1, seed=-1)
    with pytest.raises(ParameterError):
        TimeGrid(0.0, 4)
    with pytest.raises(EnsembleTooLargeError):
        sample_paths(baseline(1000), closed_loop_profile(baseline(1000)), TimeGrid(1.0, 1000), 1000, seed=0)


def test_workers_env(monkeypatch):
    monkeypatch.setenv("GEOGAME_THREADS", "8")
    assert default_workers() == 8
    monkeypatch.setenv("GEOGAME_THREADS", "bogus")
    assert default_workers() == 1


def test_noise_free_payoff_example():
    p = GameParams.homogeneous(1, 0.1, gamma=0.1, mu=0.0, nu=0.0, theta=1.0, eta=0.0)
    prof = StrategyProfile((0.05,))
    exact = analytic_payoff(0, prof, p)
    assert exact == pytest.approx(-19.957323, abs=5e-7)
    t = default_horizon(0, prof, p, INC, rel_tol=1e-8)
    est = estimate_payoff_mc(0, sample_paths(p, prof, TimeGrid(t, 4000), 2, seed=0), p)
    assert est.standard_error == 0.0
    assert abs(est.estimate - est.quadrature_bias - exact) <= est.truncation_bound + 1e-9


def test_payoff_rejects_foreign_profile():
    p = baseline(2)
    ens = sample_paths(p, closed_loop_profile(p), TimeGrid(1.0, 4), 3, seed=0)
    with pytest.raises(ParameterError):
        estimate_payoff_mc(0, ens, p, INC, StrategyProfile((0.01, 0.01)))


def test_horizon_meets_tolerance():
    for a, b in ((-30.0, 0.5), (2.0, -0.1), (0.0, 1.0)):
        t = horizon_for_tolerance(a, b, 0.05, 1e-6)
        assert tail_bound(a, b, 0.05, t) <= 1e-6
        assert tail_bound(a, b, 0.05, 0.99 * t) > 1e-6


def test_tail_bound_dominates_exact_tail():
    a, b, rho, t = -3.0, 0.2, 0.1, 40.0
    exact = math.exp(-rho * t) * (a / rho + b * (t / rho + 1 / rho**2))
    assert abs(exact) <= tail_bound(a, b, rho, t)


def test_aggregate_stats_large_population():
    n = 100
    p = GameParams.homogeneous(n, 0.05, gamma=0.1, mu=0.2, nu=0.1, theta=1.0, eta=0.5)
    prof = closed_loop_profile(p)
    agg = aggregate_coeffs(0, prof, p)
    assert agg.xi_hat**2 == pytest.approx((n - 1) * 0.04 / n**2, rel=1e-14)
    ens = sample_paths(p, prof, TimeGrid(1.0, 5), 20_000, seed=12)
    st = aggregate_path_stats(0, ens, p)
    assert abs(st.mean_slope - agg.g_hat) <= 4 * st.mean_slope_se
    assert abs(st.variance_slope - agg.variance_rate) <= 4 * st.variance_slope_se


def test_empirical_measure_examples():
    p = baseline(1)
    from geogame.simulation import PathEnsemble

    logs = np.array([0.0, 1.0, 2.0]).reshape(3, 1, 1)
    ens = PathEnsemble(logs, TimeGrid(1.0, 1), 0, StrategyProfile((0.05,)), p)
    m = empirical_measure(ens, 0)
    np.testing.assert_allclose(m.weights, 1 / 3, rtol=1e-15)
    assert m.mean_log() == pytest.approx(1.0, rel=1e-15)
    start = empirical_measure(sample_paths(baseline(3, q0=2.0), closed_loop_profile(baseline(3)), TimeGrid(1.0, 2), 4, 0), 0)
    np.testing.assert_allclose(start.points, 2.0, rtol=1e-15)


def test_transversality_along_paths():
    p = baseline(3)
    ens = sample_paths(p, closed_loop_profile(p), TimeGrid(200 / p.rho, 50), 20, seed=1)
    tv = transversality_along_paths(0, ens, p)
    # Q Y = phi exactly, so the product is e^{-rho t} phi on every path
    np.testing.assert_allclose(tv[:, 0], 40.0, rtol=1e-13)
    assert np.all(tv[:, -1] < 1e-80)
