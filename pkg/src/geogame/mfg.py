"""Mean-field limit: master equation, projected N-player values, convergence.

Everything here is for identical agents without common noise; only the
representative agent's ``gamma, mu, theta, eta`` and ``rho`` are used, and
``nu`` is ignored.

The N-player value being projected is the one of the Nash system with own
log-weight ``1 + theta`` (utility ``ln alpha + (1 + theta) ln q_i + eta ln q^``),
whose feedback is ``1/a = rho/(1 + theta)``; the others' aggregate drift in its
constant is evaluated at that rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .equilibria import MASTER, ValueCoefficients, mfg_value_coefficients
from .measures import DiscreteMeasure
from .model import AgentParams, GameParams, ParameterError, StrategyProfile
from .simulation import TimeGrid, empirical_measure, sample_paths


def _representative(params: GameParams) -> AgentParams:
    if not params.is_homogeneous():
        raise ParameterError("mean-field objects require homogeneous agents")
    return params.agents[0]


def master_value_U(q: float, m: DiscreteMeasure, coeffs: ValueCoefficients) -> float:
    """``a ln q + b <ln q, m> + c``."""
    if coeffs.kind != MASTER:
        raise ParameterError("master value needs master coefficients")
    if not q > 0:
        raise ParameterError("q must be positive")
    return coeffs.a * math.log(q) + coeffs.b * m.mean_log() + coeffs.c


def master_residual(q: float, m: DiscreteMeasure, coeffs: ValueCoefficients, params: GameParams) -> float:
    """Left minus right side of the master equation at ``(q, m)``.

    Uses ``D_m U(v) = b/v`` and ``d/dv D_m U(v) = -b/v**2`` integrated over the
    atoms of ``m``, with the optimal rate ``1/(q dU/dq)``.
    """
    if coeffs.kind != MASTER:
        raise ParameterError("master residual needs master coefficients")
    if not q > 0:
        raise ParameterError("q must be positive")
    if len(m) == 0:
        raise ParameterError("empty measure")
    ag = _representative(params)
    rho, mu2 = params.rho, ag.mu**2
    a, b = coeffs.a, coeffs.b
    v = m.points
    u = master_value_U(q, m, coeffs)
    u_q, u_qq = a / q, -a / q**2
    d_m = b / v
    d_m_v = -b / v**2
    alpha = 1.0 / (q * u_q)
    lhs = (
        rho * u
        - 0.5 * mu2 * q**2 * u_qq
        - 0.5 * mu2 * m.integrate(v**2 * d_m_v)
        - (ag.gamma - alpha) * q * u_q
        - m.integrate((ag.gamma - alpha) * v * d_m)
    )
    rhs = math.log(alpha) + (1.0 + ag.theta) * math.log(q) + ag.eta * m.mean_log()
    return lhs - rhs


@dataclass(frozen=True)
class NashSystemCoeffs:
    a: float
    b: float
    c_tilde: float
    g_hat: float


def nash_system_coeffs(n: int, params: GameParams) -> NashSystemCoeffs:
    """Coefficients of ``w_i = a ln q + b ln q^ + c~`` for the N-player Nash system."""
    if int(n) != n or n < 1:
        raise ParameterError("N must be a positive integer")
    ag = _representative(params)
    rho, theta, eta, gamma, mu2 = params.rho, ag.theta, ag.eta, ag.gamma, ag.mu**2
    a = (1.0 + theta) / rho
    b = eta / rho
    g_hat = (n - 1) / n * (gamma - 1.0 / a - 0.5 * mu2)
    c_tilde = (
        -math.log(1.0 + theta) / rho
        + math.log(rho) / rho
        - 1.0 / rho
        + gamma * (1.0 + theta) / rho**2
        - (1.0 + theta) * mu2 / (2.0 * rho**2)
        + eta * g_hat / rho**2
    )
    return NashSystemCoeffs(a, b, c_tilde, g_hat)


def nash_system_value(q: float, q_hat: float, n: int, params: GameParams) -> float:
    k = nash_system_coeffs(n, params)
    return k.a * math.log(q) + k.b * math.log(q_hat) + k.c_tilde


def projected_value_wNi(q: float, m: DiscreteMeasure, n: int, params: GameParams) -> float:
    """N-player value with every opponent's state integrated against ``m``.

    Closed form ``a ln q + c~ + b (N-1)/N <ln q, m>``.
    """
    if not q > 0:
        raise ParameterError("q must be positive")
    k = nash_system_coeffs(n, params)
    return k.a * math.log(q) + k.c_tilde + k.b * (n - 1) / n * m.mean_log()


def convergence_gap(m: DiscreteMeasure, n: int, params: GameParams) -> float:
    """``int |w^{N,i}(q, m) - U(q, m)| m(dq)``, summed over the atoms of ``m``."""
    coeffs = mfg_value_coefficients(params)
    k = nash_system_coeffs(n, params)
    logs = np.log(m.points)
    mean_log = m.mean_log()
    w = k.a * logs + k.c_tilde + k.b * (n - 1) / n * mean_log
    u = coeffs.a * logs + coeffs.b * mean_log + coeffs.c
    return m.integrate(np.abs(w - u))


def convergence_offset(params: GameParams) -> float:
    """``K = eta rho^-2 (gamma - rho/(1 + theta) - mu^2/2)``.

    The gap is exactly ``|K + b <ln q, m>| / N``.
    """
    ag = _representative(params)
    rho = params.rho
    return ag.eta / rho**2 * (ag.gamma - rho / (1.0 + ag.theta) - 0.5 * ag.mu**2)


def convergence_identity(m: DiscreteMeasure, n: int, params: GameParams) -> float:
    """Closed-form value of :func:`convergence_gap`."""
    b = mfg_value_coefficients(params).b
    return abs(convergence_offset(params) + b * m.mean_log()) / n


def convergence_constant(params: GameParams) -> float:
    """``C`` with ``gap <= C/N (1 + |<ln q, m>|)`` for every measure."""
    return max(abs(convergence_offset(params)), mfg_value_coefficients(params).b)


@dataclass(frozen=True)
class SweepResult:
    ns: tuple[int, ...]
    gaps: tuple[float, ...]
    slope: float
    mean_logs: tuple[float, ...]


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``ln y`` against ``ln x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))


def convergence_sweep(
    ns: Sequence[int],
    m: Optional[DiscreteMeasure],
    params: GameParams,
    measure_for: Optional[Callable[[int], DiscreteMeasure]] = None,
) -> SweepResult:
    """Gaps for every N in ``ns`` and the fitted log-log slope.

    Either a fixed measure ``m`` or a per-N factory ``measure_for`` (such as
    :func:`empirical_population_measure`) must be given.
    """
    if (m is None) == (measure_for is None):
        raise ParameterError("give exactly one of m and measure_for")
    if len(ns) < 2:
        raise ParameterError("need at least two values of N")
    gaps, logs = [], []
    for n in ns:
        mn = m if m is not None else measure_for(n)
        gaps.append(convergence_gap(mn, n, params))
        logs.append(mn.mean_log())
    return SweepResult(tuple(int(n) for n in ns), tuple(gaps), loglog_slope(ns, gaps), tuple(logs))


def empirical_population_measure(
    n: int, params: GameParams, t: float, seed: int, n_steps: int = 1
) -> DiscreteMeasure:
    """Empirical measure of ``n`` identical agents at time ``t`` on one path.

    Agents play the mean-field rate and the common noise is switched off.
    """
    ag = _representative(params)
    pop = GameParams.homogeneous(
        n, params.rho, gamma=ag.gamma, mu=ag.mu, nu=0.0, theta=ag.theta, eta=ag.eta, q0=ag.q0
    )
    alpha = params.rho / (1.0 + ag.theta)
    ens = sample_paths(pop, StrategyProfile((alpha,) * n), TimeGrid(t, n_steps), 1, seed)
    return empirical_measure(ens, n_steps)


def mean_field_log_mean(params: GameParams, t: float) -> float:
    """``E ln Q(t)`` for the representative agent at the mean-field rate."""
    ag = _representative(params)
    return math.log(ag.q0) + (ag.gamma - params.rho / (1.0 + ag.theta) - 0.5 * ag.mu**2) * t
