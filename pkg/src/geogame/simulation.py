"""Exact path simulation under constant strategy profiles.

Under a constant profile every ``Q_i`` is a geometric Brownian motion, so

    ln Q_i(t) = ln q0_i + (gamma_i - alpha_i - (mu_i**2 + nu_i**2)/2) t
                + nu_i B(t) + mu_i W_i(t)

is sampled exactly on the grid.  Randomness is counter based: path ``p``
owns the Philox stream with key ``seed`` and counter ``p << 192``, and the
normal variate for step ``k`` and noise source ``s`` (0 = common, 1..N =
idiosyncratic) is entry ``(k, s)`` of that stream.  Results therefore do
not depend on how paths are split across workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .measures import DiscreteMeasure
from .model import (
    GameParams,
    ParameterError,
    StrategyProfile,
    UtilityConvention,
    drift_rates,
    log_weights,
    planner_log_weights,
)

MAX_ENSEMBLE_FLOATS = 200_000_000  # about 1.6 GB of float64
_BLOCK = 256
_SEED_MAX = 2**64

PLANNER = "planner"
Target = Union[int, str]


class EnsembleTooLargeError(MemoryError):
    pass


def default_workers() -> int:
    """Worker cap from ``GEOGAME_THREADS`` (defaults to 1)."""
    raw = os.environ.get("GEOGAME_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ParameterError("t_max must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError("n_steps must be a positive integer")

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_steps + 1)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """``log_states[p, k, j] = ln Q_j(t_k)`` on path ``p``."""

    log_states: np.ndarray
    grid: TimeGrid
    seed: int
    profile: StrategyProfile
    params: GameParams
    path_offset: int = 0
    method: str = "exact"
    antithetic: bool = False

    @property
    def n_paths(self) -> int:
        return self.log_states.shape[0]

    @property
    def states(self) -> np.ndarray:
        return np.exp(self.log_states)


class _PathStreams:
    """Philox streams keyed by ``seed``; path ``p`` starts at counter ``p << 192``."""

    def __init__(self, seed: int) -> None:
        self._bitgen = np.random.Philox(key=seed)
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state

    def normals(self, p: int, shape: tuple[int, ...]) -> np.ndarray:
        state = self._state
        state["state"]["counter"] = np.array([0, 0, 0, p], dtype=np.uint64)
        state["buffer_pos"] = 4  # empty output buffer
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self._gen.standard_normal(shape)


def _fill_block(
    out: np.ndarray,
    start: int,
    first_path: int,
    seed: int,
    drift: np.ndarray,
    mus: np.ndarray,
    nus: np.ndarray,
    log_q0: np.ndarray,
    dt: float,
    method: str,
    antithetic: bool,
    growth: np.ndarray,
) -> None:
    n_block, n_times, n = out.shape
    n_steps = n_times - 1
    streams = _PathStreams(seed)
    z = np.empty((n_block, n_steps, n + 1))
    for b in range(n_block):
        p = first_path + start + b
        if antithetic:
            z[b] = streams.normals(p // 2, (n_steps, n + 1))
            if p % 2:
                z[b] *= -1.0
        else:
            z[b] = streams.normals(p, (n_steps, n + 1))
    z *= math.sqrt(dt)
    dB = z[:, :, :1]
    dW = z[:, :, 1:]
    if method == "exact":
        inc = drift * dt + nus * dB + mus * dW
    else:
        factor = 1.0 + growth * dt + mus * dW + nus * dB
        if np.any(factor <= 0):
            raise ParameterError("Euler step left the positive orthant; refine the grid")
        inc = np.log(factor)
    out[:, 0] = log_q0
    np.cumsum(inc, axis=1, out=out[:, 1:])
    out[:, 1:] += log_q0


def sample_paths(
    params: GameParams,
    profile: StrategyProfile,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    *,
    workers: Optional[int] = None,
    path_offset: int = 0,
    method: str = "exact",
    antithetic: bool = False,
) -> PathEnsemble:
    """Simulate ``n_paths`` trajectories of all N log-states.

    ``method="euler"`` runs an Euler-Maruyama scheme on ``Q`` driven by the
    same increments; it exists only as a cross-check of the exact sampler.
    ``path_offset`` selects the global index of the first path so that an
    ensemble can be generated in chunks.
    """
    if len(profile) != params.n:
        raise ParameterError(f"profile has {len(profile)} rates for N={params.n} agents")
    if int(n_paths) != n_paths or n_paths < 1:
        raise ParameterError("n_paths must be a positive integer")
    if not (0 <= int(seed) < _SEED_MAX):
        raise ParameterError("seed must be an integer in [0, 2**64)")
    if method not in ("exact", "euler"):
        raise ParameterError(f"unknown method {method!r}")
    n = params.n
    size = n_paths * (grid.n_steps + 1) * n
    if size > MAX_ENSEMBLE_FLOATS:
        raise EnsembleTooLargeError(
            f"ensemble of {size} floats exceeds the limit of {MAX_ENSEMBLE_FLOATS}; generate it in chunks"
        )
    workers = default_workers() if workers is None else max(1, int(workers))
    out = np.empty((n_paths, grid.n_steps + 1, n))
    rates = profile.as_array()
    args = dict(
        seed=int(seed),
        drift=drift_rates(profile, params),
        mus=params.mus,
        nus=params.nus,
        log_q0=np.log(params.q0s),
        dt=grid.dt,
        method=method,
        antithetic=antithetic,
        growth=params.gammas - rates,
    )
    starts = range(0, n_paths, _BLOCK)

    def run(start: int) -> None:
        stop = min(start + _BLOCK, n_paths)
        _fill_block(out[start:stop], start, path_offset, **args)

    if workers == 1 or len(starts) == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return PathEnsemble(
        log_states=out,
        grid=grid,
        seed=int(seed),
        profile=profile,
        params=params,
        path_offset=path_offset,
        method=method,
        antithetic=antithetic,
    )


# --- payoff estimation ------------------------------------------------------


class PayoffEstimate(NamedTuple):
    estimate: float
    standard_error: float
    truncation_bound: float
    quadrature_bias: float  # trapezoid minus exact integral of the mean utility line


def _target_weights(target: Target, profile: StrategyProfile, params: GameParams, conv) -> tuple[float, np.ndarray]:
    """``(log-alpha term, log-state weights)`` of the running utility."""
    if target == PLANNER:
        return float(np.mean(np.log(profile.as_array()))), planner_log_weights(params)
    i = params.check_index(int(target))
    return math.log(profile[i]), log_weights(i, params, conv)


def mean_utility_line(
    target: Target, profile: StrategyProfile, params: GameParams, conv: UtilityConvention
) -> tuple[float, float]:
    """``(A, B)`` with ``E[U(t)] = A + B t`` under a constant profile."""
    la, w = _target_weights(target, profile, params, conv)
    a = la + float(w @ np.log(params.q0s))
    b = float(w @ drift_rates(profile, params))
    return a, b


def tail_bound(a: float, b: float, rho: float, t_max: float) -> float:
    """``int_{t_max}^inf e^{-rho t} (|A| + |B| t) dt``."""
    return math.exp(-rho * t_max) * (abs(a) / rho + abs(b) * (t_max / rho + 1.0 / rho**2))


def horizon_for_tolerance(a: float, b: float, rho: float, eps: float) -> float:
    """Smallest horizon (to 1e-9 relative) whose tail bound is at most ``eps``."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    lo, hi = 0.0, 1.0 / rho
    while tail_bound(a, b, rho, hi) > eps:
        lo, hi = hi, 2.0 * hi
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if tail_bound(a, b, rho, mid) > eps:
            lo = mid
        else:
            hi = mid
    return hi


def default_horizon(
    target: Target,
    profile: StrategyProfile,
    params: GameParams,
    conv: UtilityConvention,
    rel_tol: float = 1e-6,
) -> float:
    """Horizon whose tail bound is ``rel_tol`` times the expected payoff size."""
    a, b = mean_utility_line(target, profile, params, conv)
    rho = params.rho
    scale = abs(a / rho + b / rho**2)
    if scale == 0.0:
        scale = abs(a) / rho + abs(b) / rho**2 or 1.0
    return horizon_for_tolerance(a, b, rho, rel_tol * scale)


def _trapezoid_weights(grid: TimeGrid, rho: float) -> np.ndarray:
    w = np.exp(-rho * grid.times) * grid.dt
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def payoff_samples(
    target: Target,
    ensemble: PathEnsemble,
    params: GameParams,
    conv: UtilityConvention = UtilityConvention.INCLUSIVE,
) -> np.ndarray:
    """Trapezoid-rule discounted payoff over the ensemble horizon, one value per path."""
    if ensemble.params.n != params.n:
        raise ParameterError("ensemble and params disagree on N")
    la, w = _target_weights(target, ensemble.profile, params, conv)
    tw = _trapezoid_weights(ensemble.grid, params.rho)
    return la * tw.sum() + np.einsum("pkj,j,k->p", ensemble.log_states, w, tw)


def payoff_bias_terms(
    target: Target, profile: StrategyProfile, params: GameParams, conv: UtilityConvention, grid: TimeGrid
) -> tuple[float, float]:
    """``(truncation bound, quadrature bias)`` of the trapezoid estimator on ``grid``.

    The quadrature bias is exact because ``E[U(t)]`` is affine in ``t``.
    """
    rho = params.rho
    a, b = mean_utility_line(target, profile, params, conv)
    t = grid.t_max
    e = math.exp(-rho * t)
    exact = a * (1.0 - e) / rho + b * (1.0 - e * (1.0 + rho * t)) / rho**2
    trap = float(np.dot(_trapezoid_weights(grid, rho), a + b * grid.times))
    return tail_bound(a, b, rho, t), trap - exact


def summarize_payoff(samples: np.ndarray, truncation: float, quad_bias: float) -> PayoffEstimate:
    n = samples.size
    est = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return PayoffEstimate(est, se, truncation, quad_bias)


def estimate_payoff_mc(
    target: Target,
    ensemble: PathEnsemble,
    params: GameParams,
    conv: UtilityConvention = UtilityConvention.INCLUSIVE,
    profile: Optional[StrategyProfile] = None,
) -> PayoffEstimate:
    """Monte Carlo estimate of the discounted payoff over the ensemble horizon.

    ``target`` is an agent index or ``"planner"``.  If ``profile`` is given
    it must match the profile the ensemble was generated under.
    """
    if profile is not None and tuple(profile.rates) != tuple(ensemble.profile.rates):
        raise ParameterError("ensemble was generated under a different profile")
    samples = payoff_samples(target, ensemble, params, conv)
    trunc, bias = payoff_bias_terms(target, ensemble.profile, params, conv, ensemble.grid)
    return summarize_payoff(samples, trunc, bias)


# --- aggregate statistics ---------------------------------------------------


class AggregateStats(NamedTuple):
    mean_slope: float
    variance_slope: float
    mean_slope_se: float
    variance_slope_se: float


def _ols_slope(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Slope of ``y`` on ``t`` along the last axis, with intercept."""
    tc = t - t.mean()
    return (y - y.mean(axis=-1, keepdims=True)) @ tc / (tc @ tc)


def others_log_aggregate(i: int, ensemble: PathEnsemble) -> np.ndarray:
    """``ln Q^_{-i}(t_k)`` per path, shape ``(n_paths, n_steps + 1)``."""
    n = ensemble.params.n
    ensemble.params.check_index(i)
    total = ensemble.log_states.sum(axis=2) - ensemble.log_states[:, :, i]
    return total / n


def aggregate_path_stats(i: int, ensemble: PathEnsemble, params: GameParams, n_batches: int = 50) -> AggregateStats:
    """Regression slopes of the mean and variance of ``ln Q^_{-i}`` against time.

    The mean slope's standard error uses per-path slopes; the variance
    slope's uses batch means over ``n_batches`` contiguous path batches.
    """
    if ensemble.params.n != params.n:
        raise ParameterError("ensemble and params disagree on N")
    y = others_log_aggregate(i, ensemble)
    t = ensemble.grid.times
    if t.size < 2:
        raise ParameterError("need at least two time points")
    per_path = _ols_slope(t, y)
    n = y.shape[0]
    mean_slope = float(per_path.mean())
    mean_se = float(per_path.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    var_slope = float(_ols_slope(t, y.var(axis=0, ddof=1))) if n > 1 else math.nan
    var_se = math.nan
    nb = min(n_batches, n // 2)
    if nb >= 2:
        batches = np.array_split(y, nb, axis=0)
        bs = np.array([_ols_slope(t, yb.var(axis=0, ddof=1)) for yb in batches])
        var_se = float(bs.std(ddof=1) / math.sqrt(nb))
    return AggregateStats(mean_slope, var_slope, mean_se, var_se)


def empirical_measure(
    ensemble: PathEnsemble, t_index: int, agents: Optional[Sequence[int]] = None
) -> DiscreteMeasure:
    """Equal-weight atoms at every sampled ``Q_j(t_k)``, over paths and ``agents``."""
    if agents is None:
        agents = range(ensemble.params.n)
    logs = ensemble.log_states[:, t_index, list(agents)].ravel()
    return DiscreteMeasure.from_log_points(logs)
