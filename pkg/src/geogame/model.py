"""Model parameters, utility conventions and the geometric-mean aggregate.

Every location ``i`` carries an environmental asset ``Q_i`` following

    dQ_i = (gamma_i - alpha_i) Q_i dt + mu_i Q_i dW_i + nu_i Q_i dB

and the player maximises the discounted log utility

    ln(alpha_i) + (1 + theta_i) ln Q_i + eta_i ln Q~,

where ``Q~`` is the geometric mean of all the assets.  Multiplicative
quantities are combined in log space throughout.

Agents are indexed from 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class ParameterError(ValueError):
    """Raised when a model object violates one of its invariants."""


class UtilityConvention(str, enum.Enum):
    """How a player's own state enters the global aggregate.

    ``INCLUSIVE``: the geometric mean runs over all N locations, so the own
    log-state weight is ``1 + theta + eta/N``.  ``EXCLUSIVE``: the aggregate
    term only sums the others, ``(eta/N) sum_{j != i} ln Q_j``, giving own
    weight ``1 + theta``.
    """

    INCLUSIVE = "inclusive"
    EXCLUSIVE = "exclusive"


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive, got {value!r}")


def _nonnegative(name: str, value: float) -> None:
    if not (value >= 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be nonnegative, got {value!r}")


@dataclass(frozen=True)
class AgentParams:
    """Parameters of a single location."""

    gamma: float  # regeneration rate
    mu: float  # idiosyncratic volatility
    nu: float  # common-noise loading
    theta: float  # local preference weight
    eta: float  # global preference weight, 0 allowed
    q0: float = 1.0  # initial asset level

    def __post_init__(self) -> None:
        self.check()

    def check(self) -> None:
        _positive("gamma", self.gamma)
        _nonnegative("mu", self.mu)
        _nonnegative("nu", self.nu)
        _positive("theta", self.theta)
        _nonnegative("eta", self.eta)
        _positive("q0", self.q0)

    @property
    def sigma2(self) -> float:
        """Total instantaneous variance ``mu**2 + nu**2``."""
        return self.mu**2 + self.nu**2


@dataclass(frozen=True)
class GameParams:
    """All agents plus the common discount rate."""

    agents: tuple[AgentParams, ...]
    rho: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        validate_params(self)

    @classmethod
    def homogeneous(cls, n: int, rho: float, **agent: float) -> "GameParams":
        """``n`` identical agents built from the keyword arguments."""
        a = AgentParams(**agent)
        return cls(agents=(a,) * n, rho=rho)

    @property
    def n(self) -> int:
        return len(self.agents)

    @cached_property
    def gammas(self) -> np.ndarray:
        return np.array([a.gamma for a in self.agents])

    @cached_property
    def mus(self) -> np.ndarray:
        return np.array([a.mu for a in self.agents])

    @cached_property
    def nus(self) -> np.ndarray:
        return np.array([a.nu for a in self.agents])

    @cached_property
    def thetas(self) -> np.ndarray:
        return np.array([a.theta for a in self.agents])

    @cached_property
    def etas(self) -> np.ndarray:
        return np.array([a.eta for a in self.agents])

    @cached_property
    def q0s(self) -> np.ndarray:
        return np.array([a.q0 for a in self.agents])

    @cached_property
    def sigma2s(self) -> np.ndarray:
        return self.mus**2 + self.nus**2

    @property
    def eta_bar(self) -> float:
        """Average global preference weight."""
        return float(np.mean(self.etas))

    def is_homogeneous(self, q0: bool = False) -> bool:
        """True when theta, eta, mu, nu (and gamma) agree across agents.

        ``q0=True`` additionally requires identical initial levels.
        """
        first = self.agents[0]
        keys = ["gamma", "mu", "nu", "theta", "eta"] + (["q0"] if q0 else [])
        return all(getattr(a, k) == getattr(first, k) for a in self.agents for k in keys)

    def check_index(self, i: int) -> int:
        if not (0 <= i < self.n):
            raise IndexError(f"agent index {i} out of range for N={self.n}")
        return i


def validate_params(params: GameParams) -> GameParams:
    """Return ``params`` unchanged if every invariant holds.

    Raises :class:`ParameterError` naming the first violated invariant and,
    for per-agent fields, the agent index.
    """
    if len(params.agents) < 1:
        raise ParameterError("at least one agent is required")
    _positive("rho", params.rho)
    for k, agent in enumerate(params.agents):
        if not isinstance(agent, AgentParams):
            raise ParameterError(f"agent {k}: expected AgentParams, got {type(agent).__name__}")
        try:
            agent.check()
        except ParameterError as exc:
            raise ParameterError(f"agent {k}: {exc}") from None
    return params


@dataclass(frozen=True)
class StrategyProfile:
    """Constant depletion rates, one per agent."""

    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        rates = tuple(float(r) for r in self.rates)
        for k, r in enumerate(rates):
            if not (r > 0 and math.isfinite(r)):
                raise ParameterError(f"agent {k}: rate must be positive, got {r!r}")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_iter(cls, rates: Iterable[float]) -> "StrategyProfile":
        return cls(tuple(rates))

    def __len__(self) -> int:
        return len(self.rates)

    def __getitem__(self, i: int) -> float:
        return self.rates[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)

    def replace(self, i: int, rate: float) -> "StrategyProfile":
        """Profile with agent ``i`` switched to ``rate``."""
        rates = list(self.rates)
        rates[i] = rate
        return StrategyProfile(tuple(rates))


@dataclass(frozen=True)
class AggregateCoeffs:
    """Log-dynamics of the others' aggregate ``Q^_{-i} = (prod_{j != i} Q_j)^(1/N)``.

    ``d ln Q^ = g_hat dt + nu_hat dB + xi_hat dZ``.
    """

    g_hat: float
    nu_hat: float
    xi_hat: float

    @property
    def variance_rate(self) -> float:
        return self.nu_hat**2 + self.xi_hat**2


def _check_profile(profile: StrategyProfile, params: GameParams) -> None:
    if len(profile) != params.n:
        raise ParameterError(f"profile has {len(profile)} rates for N={params.n} agents")


def effective_weight(i: int, params: GameParams, conv: UtilityConvention) -> float:
    """Exponent on the player's own ``ln Q_i``."""
    a = params.agents[params.check_index(i)]
    if UtilityConvention(conv) is UtilityConvention.INCLUSIVE:
        return 1.0 + a.theta + a.eta / params.n
    return 1.0 + a.theta


def geometric_mean_index(q: Sequence[float] | np.ndarray) -> float:
    """Geometric mean of positive levels, evaluated as ``exp(mean(ln q))``."""
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        raise ParameterError("geometric mean of an empty vector")
    if np.any(~(q > 0)):
        raise ParameterError("all levels must be positive")
    return float(np.exp(np.mean(np.log(q))))


def running_utility(
    i: int,
    alpha: float,
    q: Sequence[float] | np.ndarray,
    params: GameParams,
    conv: UtilityConvention,
) -> float:
    """Instantaneous utility of player ``i`` at state ``q`` and rate ``alpha``."""
    a = params.agents[params.check_index(i)]
    q = np.asarray(q, dtype=float)
    if q.shape != (params.n,):
        raise ParameterError(f"state must have length {params.n}")
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if np.any(~(q > 0)):
        raise ParameterError("all levels must be positive")
    logq = np.log(q)
    own = (1.0 + a.theta) * logq[i]
    if UtilityConvention(conv) is UtilityConvention.INCLUSIVE:
        social = a.eta * float(np.mean(logq))
    else:
        social = a.eta / params.n * (float(np.sum(logq)) - logq[i])
    return math.log(alpha) + own + social


def log_weights(i: int, params: GameParams, conv: UtilityConvention) -> np.ndarray:
    """Coefficients ``c_j`` with ``U_i = ln(alpha_i) + sum_j c_j ln q_j``."""
    params.check_index(i)
    a = params.agents[i]
    w = np.full(params.n, a.eta / params.n)
    if UtilityConvention(conv) is UtilityConvention.EXCLUSIVE:
        w[i] = 0.0
    w[i] += 1.0 + a.theta
    return w


def planner_log_weights(params: GameParams) -> np.ndarray:
    """Coefficients of ``ln q_j`` in the planner's average utility."""
    return (1.0 + params.thetas + params.eta_bar) / params.n


def drift_rates(profile: StrategyProfile, params: GameParams) -> np.ndarray:
    """Drift of ``ln Q_j``: ``gamma_j - alpha_j - (mu_j**2 + nu_j**2)/2``."""
    _check_profile(profile, params)
    return params.gammas - profile.as_array() - 0.5 * params.sigma2s


def aggregate_coeffs(i: int, profile: StrategyProfile, params: GameParams) -> AggregateCoeffs:
    """Coefficients of the exact log-dynamics of the others' aggregate.

    For N = 1 there are no others and all coefficients are zero.
    """
    params.check_index(i)
    _check_profile(profile, params)
    n = params.n
    if n == 1:
        return AggregateCoeffs(0.0, 0.0, 0.0)
    mask = np.ones(n, dtype=bool)
    mask[i] = False
    d = drift_rates(profile, params)
    return AggregateCoeffs(
        g_hat=float(np.sum(d[mask]) / n),
        nu_hat=float(np.sum(params.nus[mask]) / n),
        xi_hat=float(math.sqrt(np.sum(params.mus[mask] ** 2)) / n),
    )
