"""Closed-form equilibrium objects.

Rates, taxes and growth rates for the closed-loop, open-loop, planner and
taxed games, the Price of Anarchy, and the coefficients (a, b, c) of the
log-linear value functions.

Value-function constants are computed as the unique constant that zeroes
the constant part of the corresponding HJB / master-equation residual (the
log coefficients vanish by the choice of a and b).  The reference closed-form
constant is carried alongside so that any mismatch can be reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (
    GameParams,
    ParameterError,
    StrategyProfile,
    aggregate_coeffs,
)

GAME = "game_i"
PLANNER = "planner"
MASTER = "master"


@dataclass(frozen=True)
class ValueCoefficients:
    """Log-linear value ``a ln q + b (ln q^ | <ln q, m>) + c``.

    For ``kind="planner"``, ``a`` is a tuple (one coefficient per agent) and
    ``b`` is unused (0).
    """

    a: float | tuple[float, ...]
    b: float
    c: float
    kind: str
    reference_c: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in (GAME, PLANNER, MASTER):
            raise ParameterError(f"unknown coefficient kind {self.kind!r}")
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if np.any(~(a > 0)):
            raise ParameterError("a must be positive")
        if not self.b >= 0:
            raise ParameterError("b must be nonnegative")
        if self.kind == PLANNER:
            object.__setattr__(self, "a", tuple(float(x) for x in a))

    @property
    def c_deviation(self) -> Optional[float]:
        """``c - reference_c`` when a reference constant is known."""
        if self.reference_c is None:
            return None
        return self.c - self.reference_c


def closed_loop_rate(i: int, params: GameParams) -> float:
    a = params.agents[params.check_index(i)]
    return params.rho / (1.0 + a.theta + a.eta / params.n)


def open_loop_rate(i: int, params: GameParams) -> float:
    a = params.agents[params.check_index(i)]
    return params.rho / (1.0 + a.theta)


def social_planner_rate(i: int, params: GameParams) -> float:
    a = params.agents[params.check_index(i)]
    return params.rho / (1.0 + a.theta + params.eta_bar)


def pigouvian_tax(i: int, params: GameParams) -> float:
    """Tax that moves the closed-loop rate onto the planner rate."""
    a = params.agents[params.check_index(i)]
    return (params.eta_bar - a.eta / params.n) / params.rho


def taxed_closed_loop_rate(i: int, tau: float, params: GameParams) -> float:
    if not tau >= 0:
        raise ParameterError(f"tau must be nonnegative, got {tau!r}")
    a = params.agents[params.check_index(i)]
    return 1.0 / (tau + (1.0 + a.theta + a.eta / params.n) / params.rho)


def expected_growth_rate(i: int, alpha: float, params: GameParams) -> float:
    """Expected log growth ``gamma_i - alpha - (mu_i**2 + nu_i**2)/2``."""
    a = params.agents[params.check_index(i)]
    return a.gamma - alpha - 0.5 * a.sigma2


def closed_loop_profile(params: GameParams) -> StrategyProfile:
    return StrategyProfile(tuple(closed_loop_rate(i, params) for i in range(params.n)))


def open_loop_profile(params: GameParams) -> StrategyProfile:
    return StrategyProfile(tuple(open_loop_rate(i, params) for i in range(params.n)))


def planner_profile(params: GameParams) -> StrategyProfile:
    return StrategyProfile(tuple(social_planner_rate(i, params) for i in range(params.n)))


def _require_homogeneous(params: GameParams, what: str) -> None:
    if not params.is_homogeneous():
        raise ParameterError(f"{what} requires homogeneous agents")


def poa_ratio(theta: float, eta: float, n: float) -> float:
    """``(1 + theta + eta) / (1 + theta + eta/n)``; ``n=inf`` gives the limit."""
    return (1.0 + theta + eta) / (1.0 + theta + eta / n)


def _poa_from_ratio(x: float, rho: float) -> float:
    # x - ln x - 1 with log1p to keep accuracy when x is close to 1
    y = x - 1.0
    return (y - math.log1p(y)) / rho


def price_of_anarchy(params: GameParams) -> float:
    """Planner welfare minus closed-loop welfare at unit initial levels."""
    _require_homogeneous(params, "price of anarchy")
    a = params.agents[0]
    return _poa_from_ratio(poa_ratio(a.theta, a.eta, params.n), params.rho)


def price_of_anarchy_limit(params: GameParams) -> float:
    """Large-N limit of :func:`price_of_anarchy`."""
    _require_homogeneous(params, "price of anarchy")
    a = params.agents[0]
    return _poa_from_ratio(poa_ratio(a.theta, a.eta, math.inf), params.rho)


@dataclass(frozen=True)
class EquilibriumReport:
    alpha_cl: tuple[float, ...]
    alpha_ol: tuple[float, ...]
    alpha_sp: tuple[float, ...]
    tau: tuple[float, ...]
    growth: tuple[float, ...]
    poa: Optional[float] = None
    ordering_ok: tuple[bool, ...] = field(default=())


def equilibrium_report(params: GameParams) -> EquilibriumReport:
    """Every closed-form equilibrium object for ``params``.

    ``growth`` is evaluated at the closed-loop rate.  ``ordering_ok[i]``
    checks OL > CL > SP wherever the strict ordering is implied.
    """
    n = params.n
    cl = tuple(closed_loop_rate(i, params) for i in range(n))
    ol = tuple(open_loop_rate(i, params) for i in range(n))
    sp = tuple(social_planner_rate(i, params) for i in range(n))
    ordering = []
    for i, a in enumerate(params.agents):
        ok = True
        if n >= 2 and a.eta > 0:
            ok = ok and ol[i] > cl[i]
        if n >= 2 and params.eta_bar > a.eta / n:
            ok = ok and cl[i] > sp[i]
        ordering.append(ok)
    return EquilibriumReport(
        alpha_cl=cl,
        alpha_ol=ol,
        alpha_sp=sp,
        tau=tuple(pigouvian_tax(i, params) for i in range(n)),
        growth=tuple(expected_growth_rate(i, cl[i], params) for i in range(n)),
        poa=price_of_anarchy(params) if params.is_homogeneous() else None,
        ordering_ok=tuple(ordering),
    )


# --- value-function coefficients -------------------------------------------


def _others_profile(i: int, params: GameParams, others: Optional[StrategyProfile]) -> StrategyProfile:
    if others is None:
        return closed_loop_profile(params)
    if len(others) == params.n:
        return others
    if len(others) == params.n - 1:
        rates = list(others.rates)
        rates.insert(i, closed_loop_rate(i, params))
        return StrategyProfile(tuple(rates))
    raise ParameterError(
        f"others' profile must have N-1={params.n - 1} or N={params.n} rates, got {len(others)}"
    )


def game_value_coefficients(
    i: int, params: GameParams, others: Optional[StrategyProfile] = None
) -> ValueCoefficients:
    """Coefficients of player ``i``'s value ``a ln q + b ln q^ + c``.

    ``others`` holds the opponents' rates (length N-1, or a full profile
    whose i-th entry is ignored); by default the closed-loop profile.
    """
    params.check_index(i)
    ag = params.agents[i]
    rho = params.rho
    w = 1.0 + ag.theta + ag.eta / params.n
    a = w / rho
    b = ag.eta / rho
    agg = aggregate_coeffs(i, _others_profile(i, params, others), params)
    var_hat = agg.variance_rate
    # constant part of the HJB residual: rho*c + k0 = 0
    k0 = (
        0.5 * ag.sigma2 * a
        + 0.5 * var_hat * b
        - b * (agg.g_hat + 0.5 * var_hat)
        - ag.gamma * a
        + math.log(a)
        + 1.0
    )
    c = -k0 / rho
    reference = (
        -math.log(w) / rho
        + math.log(rho) / rho
        - 1.0 / rho
        + ag.gamma * w / rho**2
        - w / rho**2 * ag.sigma2 / 2.0
        + ag.eta * agg.g_hat / rho**2
    )
    return ValueCoefficients(a=a, b=b, c=c, kind=GAME, reference_c=reference)


def planner_value_coefficients(params: GameParams) -> ValueCoefficients:
    """Coefficients of the planner value ``sum_j a_j ln q_j + c``.

    ``reference_c`` is the sum of the per-agent constants ``b_j`` of the
    reference closed form, which does not zero the residual (see
    ``c_deviation``).
    """
    n, rho = params.n, params.rho
    w = 1.0 + params.thetas + params.eta_bar
    a = w / (n * rho)
    # optimal rates 1/(N a_j); sup of the Hamiltonian is
    # (1/N) sum ln(1/(N a_j)) + sum a_j-weighted logs - 1
    k0 = float(
        np.sum(0.5 * params.sigma2s * a)
        - np.sum(params.gammas * a)
        + np.mean(np.log(n * a))
        + 1.0
    )
    c = -k0 / rho
    b_ref = (-0.5 * params.sigma2s * a + params.gammas * a - 1.0 - np.log(a)) / rho
    return ValueCoefficients(a=tuple(a), b=0.0, c=c, kind=PLANNER, reference_c=float(np.sum(b_ref)))


def mfg_value_coefficients(params: GameParams) -> ValueCoefficients:
    """Coefficients of the master-equation solution ``a ln q + b <ln q, m> + c``.

    Homogeneous agents only; the common-noise loading ``nu`` is ignored.
    The mean-field equilibrium rate is ``1/a``.
    """
    _require_homogeneous(params, "mean-field coefficients")
    ag = params.agents[0]
    rho, theta, eta, gamma, mu2 = params.rho, ag.theta, ag.eta, ag.gamma, ag.mu**2
    a = (1.0 + theta) / rho
    b = eta / rho
    alpha = 1.0 / a
    # constant part of the master-equation residual at alpha = 1/a
    k0 = 0.5 * mu2 * (a + b) - (gamma - alpha) * (a + b) - math.log(alpha)
    c = -k0 / rho
    reference = (
        -math.log(1.0 + theta) / rho
        + math.log(rho) / rho
        - 1.0 / rho
        + gamma * (1.0 + theta) / rho**2
        - (1.0 + theta) * mu2 / (2.0 * rho**2)
        + gamma * eta / rho**2
        - eta / ((1.0 + theta) * rho)
        - eta * mu2 / (2.0 * rho**2)
    )
    return ValueCoefficients(a=a, b=b, c=c, kind=MASTER, reference_c=reference)


def mfg_equilibrium_rate(params: GameParams) -> float:
    """Mean-field Nash rate ``rho / (1 + theta)``."""
    return 1.0 / float(mfg_value_coefficients(params).a)


def game_value(coeffs: ValueCoefficients, q: float, q_hat: float) -> float:
    if coeffs.kind != GAME:
        raise ParameterError("game_value needs game coefficients")
    return coeffs.a * math.log(q) + coeffs.b * math.log(q_hat) + coeffs.c


def planner_value(coeffs: ValueCoefficients, q) -> float:
    if coeffs.kind != PLANNER:
        raise ParameterError("planner_value needs planner coefficients")
    return float(np.dot(coeffs.a, np.log(np.asarray(q, dtype=float)))) + coeffs.c


__all__ = [
    "EquilibriumReport",
    "ValueCoefficients",
    "closed_loop_profile",
    "closed_loop_rate",
    "equilibrium_report",
    "expected_growth_rate",
    "game_value",
    "game_value_coefficients",
    "mfg_equilibrium_rate",
    "mfg_value_coefficients",
    "open_loop_profile",
    "open_loop_rate",
    "pigouvian_tax",
    "planner_profile",
    "planner_value",
    "planner_value_coefficients",
    "price_of_anarchy",
    "price_of_anarchy_limit",
    "social_planner_rate",
    "taxed_closed_loop_rate",
]
