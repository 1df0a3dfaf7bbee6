"""Stochastic differential games of log-utility consumption of geometrically growing resources."""

from __future__ import annotations

__version__ = "0.1.0"

from .model import (
    AgentParams,
    GameParams,
    ParameterError,
    StrategyProfile,
    UtilityConvention,
    aggregate_coeffs,
)
from .equilibria import (
    closed_loop_rate,
    equilibrium_report,
    open_loop_rate,
    pigouvian_tax,
    price_of_anarchy,
    social_planner_rate,
)
from .measures import DiscreteMeasure
from .simulation import TimeGrid, sample_paths, estimate_payoff_mc
from .verification import analytic_payoff, best_response, nash_gap
from .mfg import convergence_gap, convergence_sweep

__all__ = [
    "AgentParams",
    "DiscreteMeasure",
    "GameParams",
    "ParameterError",
    "StrategyProfile",
    "TimeGrid",
    "UtilityConvention",
    "aggregate_coeffs",
    "analytic_payoff",
    "best_response",
    "closed_loop_rate",
    "convergence_gap",
    "convergence_sweep",
    "equilibrium_report",
    "estimate_payoff_mc",
    "nash_gap",
    "open_loop_rate",
    "pigouvian_tax",
    "price_of_anarchy",
    "sample_paths",
    "social_planner_rate",
]
