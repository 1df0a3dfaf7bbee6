"""Monte Carlo payoff estimates against the analytic oracle over random draws."""

from __future__ import annotations

import argparse
import time

import numpy as np

from geogame.model import AgentParams, GameParams, StrategyProfile, UtilityConvention
from geogame.simulation import TimeGrid, default_horizon, estimate_payoff_mc, sample_paths
from geogame.verification import analytic_payoff


def draw(rng: np.random.Generator, n_max: int) -> GameParams:
    n = int(rng.integers(1, n_max + 1))
    agents = tuple(
        AgentParams(
            gamma=float(rng.uniform(0.01, 0.3)),
            mu=float(rng.uniform(0.0, 0.5)),
            nu=float(rng.uniform(0.0, 0.3)),
            theta=float(rng.uniform(0.1, 3.0)),
            eta=float(rng.uniform(0.01, 2.0)),
            q0=float(np.exp(rng.uniform(-1, 1))),
        )
        for _ in range(n)
    )
    return GameParams(agents=agents, rho=float(rng.uniform(0.02, 0.2)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--draws", type=int, default=100)
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--n-max", type=int, default=5)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    z_scores, hits = [], 0
    for d in range(args.draws):
        p = draw(rng, args.n_max)
        prof = StrategyProfile(tuple(float(r) for r in rng.uniform(0.2, 2.0, p.n) * p.rho))
        target = "planner" if rng.random() < 0.2 else int(rng.integers(p.n))
        conv = UtilityConvention.INCLUSIVE if rng.random() < 0.5 else UtilityConvention.EXCLUSIVE
        exact = analytic_payoff(target, prof, p, conv)
        t_max = default_horizon(target, prof, p, conv, rel_tol=0.5e-4)
        est = estimate_payoff_mc(target, sample_paths(p, prof, TimeGrid(t_max, args.steps), args.paths, args.seed * 100_000 + d), p, conv)
        err = est.estimate - est.quadrature_bias - exact
        hits += abs(err) <= 3 * est.standard_error + est.truncation_bound
        z_scores.append(err / est.standard_error)
    z = np.array(z_scores)
    print(f"{hits}/{args.draws} within 3 SE + truncation bound")
    print(f"z-scores: mean {z.mean():+.3f}, sd {z.std(ddof=1):.3f}, max |z| {np.abs(z).max():.2f}")
    print(f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
