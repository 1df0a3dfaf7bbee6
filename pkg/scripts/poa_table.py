"""Price of Anarchy against N, with its large-N limit and the 1/N slope."""

from __future__ import annotations

import argparse

from geogame.equilibria import price_of_anarchy, price_of_anarchy_limit
from geogame.mfg import loglog_slope
from geogame.model import GameParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", type=float, default=0.05)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--eta", type=float, default=0.5)
    ap.add_argument("--Ns", type=int, nargs="+", default=[2, 5, 10, 100, 1000, 10_000, 100_000])
    args = ap.parse_args()

    def params(n):
        return GameParams.homogeneous(n, args.rho, gamma=0.1, mu=0.2, nu=0.1, theta=args.theta, eta=args.eta)

    limit = price_of_anarchy_limit(params(1))
    print(f"{'N':>8} {'PoA':>22} {'limit - PoA':>22}")
    gaps = []
    for n in args.Ns:
        poa = price_of_anarchy(params(n))
        gaps.append(limit - poa)
        print(f"{n:>8} {poa:>22.17g} {gaps[-1]:>22.17g}")
    print(f"limit {limit:.17g}")
    tail = [(n, g) for n, g in zip(args.Ns, gaps) if n >= 100]
    if len(tail) >= 2:
        print(f"log-log slope of limit - PoA (N >= 100): {loglog_slope(*zip(*tail)):.6f}")


if __name__ == "__main__":
    main()
