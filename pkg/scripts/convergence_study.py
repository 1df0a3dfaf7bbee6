"""Mean-field convergence gap against N, for a Dirac measure and for empirical measures."""

from __future__ import annotations

import argparse

import numpy as np

from geogame.measures import DiscreteMeasure
from geogame.mfg import convergence_sweep, empirical_population_measure
from geogame.model import GameParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--Ns", type=int, nargs="+", default=[10, 100, 1000, 10_000])
    ap.add_argument("--t", type=float, default=0.25, help="time at which the population is observed")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    p = GameParams.homogeneous(2, 0.1, gamma=0.1, mu=0.2, nu=0.0, theta=1.0, eta=0.5)

    dirac = convergence_sweep(args.Ns, DiscreteMeasure.dirac(1.0), p)
    print("dirac at 1")
    for n, g in zip(dirac.ns, dirac.gaps):
        print(f"  N={n:<7d} gap={g:.17g}")
    print(f"  slope {dirac.slope:.12f}")

    slopes = []
    for seed in range(args.seeds):
        sweep = convergence_sweep(
            args.Ns, None, p, measure_for=lambda n: empirical_population_measure(n, p, args.t, seed)
        )
        slopes.append(sweep.slope)
    slopes = np.array(slopes)
    print(f"empirical measures at t={args.t}, {args.seeds} seeds")
    print(f"  slope mean {slopes.mean():.4f} sd {slopes.std(ddof=1):.4f} range [{slopes.min():.4f}, {slopes.max():.4f}]")


if __name__ == "__main__":
    main()
