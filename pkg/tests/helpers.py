from __future__ import annotations

import numpy as np

from geogame.model import AgentParams, GameParams


def random_agent(rng: np.random.Generator, eta_min: float = 0.01) -> AgentParams:
    return AgentParams(
        gamma=float(rng.uniform(0.01, 0.3)),
        mu=float(rng.uniform(0.0, 0.5)),
        nu=float(rng.uniform(0.0, 0.3)),
        theta=float(rng.uniform(0.1, 3.0)),
        eta=float(rng.uniform(eta_min, 2.0)),
        q0=float(np.exp(rng.uniform(-1.0, 1.0))),
    )


def random_params(rng: np.random.Generator, n_min: int = 2, n_max: int = 200, eta_min: float = 0.01) -> GameParams:
    n = int(rng.integers(n_min, n_max + 1))
    return GameParams(
        agents=tuple(random_agent(rng, eta_min) for _ in range(n)),
        rho=float(rng.uniform(0.02, 0.2)),
    )


def baseline(n: int = 10, **over) -> GameParams:
    agent = dict(gamma=0.1, mu=0.2, nu=0.1, theta=1.0, eta=0.5, q0=1.0)
    agent.update(over)
    return GameParams.homogeneous(n, 0.05, **agent)
