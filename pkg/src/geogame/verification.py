"""Independent oracles and residual checks.

The analytic payoff of a constant profile is the backbone: with
``E ln Q_j(t) = ln q0_j + d_j t`` every payoff is a closed-form expression,
so Nash certification reduces to one-dimensional calculus and never touches
the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .equilibria import (
    GAME,
    PLANNER,
    ValueCoefficients,
    closed_loop_profile,
)
from .measures import DiscreteMeasure
from .model import (
    GameParams,
    ParameterError,
    StrategyProfile,
    UtilityConvention,
    aggregate_coeffs,
    effective_weight,
)
from .simulation import PathEnsemble

Target = Union[int, str]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NoMaximizerError(ValueError):
    """The Hamiltonian has no interior maximiser (nonpositive costate)."""


class BracketError(RuntimeError):
    """Golden-section search ended on the edge of its bracket."""


def _full_profile(params: GameParams, profile: StrategyProfile) -> StrategyProfile:
    if len(profile) != params.n:
        raise ParameterError(f"profile has {len(profile)} rates for N={params.n} agents")
    return profile


def analytic_payoff(
    target: Target,
    profile: StrategyProfile,
    params: GameParams,
    conv: UtilityConvention = UtilityConvention.INCLUSIVE,
) -> float:
    """Exact discounted payoff of a constant profile.

    ``target`` is an agent index or ``"planner"``; the planner objective is
    the average of the inclusive utilities.
    """
    _full_profile(params, profile)
    rho = params.rho
    alpha = profile.as_array()
    d = params.gammas - alpha - 0.5 * (params.mus**2 + params.nus**2)
    lq = np.log(params.q0s)
    if target == PLANNER:
        w = 1.0 + params.thetas + params.eta_bar
        return float(
            (np.mean(np.log(alpha)) + np.mean(w * lq)) / rho + np.mean(w * d) / rho**2
        )
    i = params.check_index(int(target))
    ag = params.agents[i]
    if UtilityConvention(conv) is UtilityConvention.INCLUSIVE:
        social_lq, social_d = lq.sum(), d.sum()
    else:
        social_lq, social_d = lq.sum() - lq[i], d.sum() - d[i]
    k = ag.eta / params.n
    return float(
        (math.log(alpha[i]) + (1.0 + ag.theta) * lq[i] + k * social_lq) / rho
        + ((1.0 + ag.theta) * d[i] + k * social_d) / rho**2
    )


def payoff_difference(
    i: int, new_rate: float, old_rate: float, params: GameParams, conv: UtilityConvention
) -> float:
    """``J_i(new) - J_i(old)`` when only player ``i``'s rate changes.

    Algebraically identical to differencing :func:`analytic_payoff`, but the
    rate-independent terms cancel exactly, so tiny differences keep full
    relative precision.
    """
    if not (new_rate > 0 and old_rate > 0):
        raise ParameterError("rates must be positive")
    rho = params.rho
    w = effective_weight(i, params, conv)
    h = (new_rate - old_rate) / old_rate
    return math.log1p(h) / rho - w * (new_rate - old_rate) / rho**2


def best_response(
    i: int,
    others: Optional[StrategyProfile],
    params: GameParams,
    conv: UtilityConvention = UtilityConvention.INCLUSIVE,
    tol: float = 1e-10,
) -> float:
    """Golden-section maximiser of player ``i``'s analytic payoff over constant rates.

    The payoff is separable in the opponents' rates, so ``others`` only has to
    be a valid profile (length N or N-1) and does not move the optimum.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    params.check_index(i)
    if others is not None and len(others) not in (params.n, params.n - 1):
        raise ParameterError("others' profile has the wrong length")
    center = params.rho / effective_weight(i, params, conv)
    lo0, hi0 = center / 10.0, center * 10.0
    lo, hi = lo0, hi0
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    while hi - lo > tol * 0.5 * (hi + lo):
        if payoff_difference(i, x1, x2, params, conv) > 0:
            hi, x2 = x2, x1
            x1 = hi - _INV_PHI * (hi - lo)
        else:
            lo, x1 = x1, x2
            x2 = lo + _INV_PHI * (hi - lo)
    x = 0.5 * (lo + hi)
    if x - lo0 <= 2 * tol * x or hi0 - x <= 2 * tol * x:
        raise BracketError(f"maximiser for agent {i} hit the bracket edge at {x!r}")
    return x


@dataclass(frozen=True)
class NashGapReport:
    best_rates: tuple[float, ...]
    gains: tuple[float, ...]  # J_i(best response) - J_i(candidate)
    rel_deviations: tuple[float, ...]
    convention: UtilityConvention

    @property
    def max_gain(self) -> float:
        return max(self.gains)

    @property
    def max_rel_deviation(self) -> float:
        return max(self.rel_deviations)

    def certified(self, tol: float = 1e-8) -> bool:
        return self.max_gain <= tol and self.max_rel_deviation <= tol


def nash_gap(
    profile: StrategyProfile,
    params: GameParams,
    conv: UtilityConvention = UtilityConvention.INCLUSIVE,
    tol: float = 1e-10,
) -> NashGapReport:
    """Per-agent best constant deviation from ``profile`` and what it gains."""
    _full_profile(params, profile)
    best, gains, devs = [], [], []
    for i in range(params.n):
        br = best_response(i, profile, params, conv, tol)
        best.append(br)
        gains.append(payoff_difference(i, br, profile[i], params, conv))
        devs.append(abs(br - profile[i]) / profile[i])
    return NashGapReport(tuple(best), tuple(gains), tuple(devs), UtilityConvention(conv))


# --- Hamiltonian and HJB residuals ------------------------------------------


def hamiltonian_argmax(p: float, q: float) -> float:
    """Maximiser of ``ln(alpha) - alpha q p`` over alpha > 0."""
    if not q > 0:
        raise ParameterError("state must be positive")
    if not p > 0:
        raise NoMaximizerError("no maximiser for a nonpositive costate")
    return 1.0 / (q * p)


def hamiltonian_second_derivative(alpha: float) -> float:
    """``d^2/d alpha^2`` of ``ln(alpha) - alpha q p``."""
    return -1.0 / alpha**2


def hjb_residual(
    kind: str,
    point: Sequence[float],
    coeffs: ValueCoefficients,
    params: GameParams,
    i: int = 0,
    others: Optional[StrategyProfile] = None,
) -> float:
    """Signed left-hand side of the HJB equation for a log-linear candidate.

    ``kind="game_i"``: ``point = (q, q_hat)`` and the aggregate dynamics come
    from ``others`` (closed-loop profile by default).  ``kind="planner"``:
    ``point`` is the full state vector.  Derivatives are exact.
    """
    pt = np.asarray(point, dtype=float)
    if np.any(~(pt > 0)):
        raise ParameterError("point must be strictly positive")
    rho = params.rho
    if kind == GAME:
        if coeffs.kind != GAME:
            raise ParameterError("game residual needs game coefficients")
        q, qh = pt
        ag = params.agents[params.check_index(i)]
        profile = closed_loop_profile(params) if others is None else others
        if len(profile) == params.n - 1:
            profile = StrategyProfile(tuple(profile.rates[:i]) + (1.0,) + tuple(profile.rates[i:]))
        agg = aggregate_coeffs(i, profile, params)
        var_hat = agg.variance_rate
        a, b, c = coeffs.a, coeffs.b, coeffs.c
        v = a * math.log(q) + b * math.log(qh) + c
        vq, vqq = a / q, -a / q**2
        vh, vhh = b / qh, -b / qh**2
        vqh = 0.0
        alpha = hamiltonian_argmax(vq, q)
        h_sup = (
            math.log(alpha)
            + (1.0 + ag.theta + ag.eta / params.n) * math.log(q)
            + ag.eta * math.log(qh)
            - alpha * q * vq
        )
        return (
            rho * v
            - 0.5 * var_hat * qh**2 * vhh
            - 0.5 * ag.sigma2 * q**2 * vqq
            - qh * vh * (agg.g_hat + 0.5 * var_hat)
            - ag.gamma * q * vq
            - h_sup
            - ag.nu * agg.nu_hat * q * qh * vqh
        )
    if kind == PLANNER:
        if coeffs.kind != PLANNER:
            raise ParameterError("planner residual needs planner coefficients")
        n = params.n
        if pt.shape != (n,):
            raise ParameterError(f"planner point must have length {n}")
        a = np.asarray(coeffs.a)
        v = float(a @ np.log(pt)) + coeffs.c
        vq = a / pt
        hess = np.diag(-a / pt**2)  # cross derivatives vanish
        cov = np.outer(params.nus, params.nus) + np.diag(params.mus**2)
        diffusion = 0.5 * float(np.sum(cov * np.outer(pt, pt) * hess))
        alpha = 1.0 / (n * pt * vq)
        w = 1.0 + params.thetas + params.eta_bar
        h_sup = float(np.mean(np.log(alpha) + w * np.log(pt)) - np.sum(alpha * pt * vq))
        return rho * v - diffusion - float(np.sum(params.gammas * pt * vq)) - h_sup
    raise ParameterError(f"unknown residual kind {kind!r}")


# --- open-loop adjoint ansatz -----------------------------------------------


@dataclass(frozen=True)
class PontryaginReport:
    phi: np.ndarray  # own costate coefficient per player
    psi: np.ndarray  # psi[i, j], coefficient of 1/Q_j in Y^{i,j}, j != i
    ode_residuals: np.ndarray
    psi_residuals: np.ndarray
    coupling_residual: float
    drift_residual: float
    rates: np.ndarray
    transversality: bool

    @property
    def max_residual(self) -> float:
        return float(
            max(
                np.max(np.abs(self.ode_residuals)),
                np.max(np.abs(self.psi_residuals)),
                self.coupling_residual,
                self.drift_residual,
            )
        )


def pontryagin_ansatz_check(params: GameParams, n_states: int = 64, seed: int = 0) -> PontryaginReport:
    """Check the stationary adjoint ansatz ``Y^{i,j} = phi_i/Q_i [i=j] + psi_ij/Q_j [i!=j]``.

    Verifies the coefficient ODEs, the coupling condition, and that the Ito
    drift of the ansatz matches the backward equation's driver at
    ``n_states`` random states (``Z`` read off from the Ito expansion).
    """
    n, rho = params.n, params.rho
    theta, eta = params.thetas, params.etas
    phi = (1.0 + theta) / rho
    psi = np.repeat((eta / (n * rho))[:, None], n, axis=1)
    np.fill_diagonal(psi, 0.0)
    ode = rho * phi - (1.0 + theta)
    psi_res = rho * psi - np.where(np.eye(n, dtype=bool), 0.0, (eta / n)[:, None])
    rates = 1.0 / phi

    rng = np.random.default_rng(seed)
    states = np.exp(rng.uniform(-3.0, 3.0, size=(n_states, n)))
    coef = psi.copy()
    np.fill_diagonal(coef, phi)  # Y^{i,j} = coef[i, j] / Q_j
    growth = params.gammas - rates
    sig2 = params.mus**2 + params.nus**2
    coupling, drift = 0.0, 0.0
    for Q in states:
        Y = coef / Q[None, :]
        coupling = max(coupling, float(np.max(np.abs(-Q * np.diag(Y) + 1.0 / rates))))
        z_idio = -Y * params.mus[None, :]
        z_common = -Y * params.nus[None, :]
        ito = Y * (-growth[None, :] + sig2[None, :])
        own = np.diag((1.0 + theta) / Q)
        cross = np.where(np.eye(n, dtype=bool), 0.0, (eta / n)[:, None] / Q[None, :])
        driver = rho * Y - (
            growth[None, :] * Y + own + cross + z_idio * params.mus[None, :] + z_common * params.nus[None, :]
        )
        scale = np.maximum(np.abs(ito), np.abs(driver)).max()
        drift = max(drift, float(np.max(np.abs(ito - driver)) / max(scale, 1.0)))
    horizon = 200.0 / rho
    transversal = bool(np.all(np.exp(-rho * horizon) * phi < 1e-12 * np.maximum(phi, 1.0)))
    return PontryaginReport(phi, psi, ode, psi_res, coupling, drift, rates, transversal)


def transversality_along_paths(i: int, ensemble: PathEnsemble, params: GameParams) -> np.ndarray:
    """``e^{-rho t} Q_i(t) Y^{i,i}(t)`` on every path, shape ``(n_paths, n_times)``."""
    phi = (1.0 + params.agents[params.check_index(i)].theta) / params.rho
    q = np.exp(ensemble.log_states[:, :, i])
    y = phi / q
    return np.exp(-params.rho * ensemble.grid.times)[None, :] * q * y


def ll_monotonicity_form(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    """``int (F(m1) - F(m2)) d(m1 - m2)`` for the scalar interaction ``F(m) = <ln q, m>``."""
    return (m1.mean_log() - m2.mean_log()) * (m1.mass - m2.mass)


__all__ = [
    "BracketError",
    "NashGapReport",
    "NoMaximizerError",
    "PontryaginReport",
    "analytic_payoff",
    "best_response",
    "hamiltonian_argmax",
    "hamiltonian_second_derivative",
    "hjb_residual",
    "ll_monotonicity_form",
    "nash_gap",
    "payoff_difference",
    "pontryagin_ansatz_check",
    "transversality_along_paths",
]
