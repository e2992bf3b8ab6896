"""Grid sweep of cluster observables over (u, T), as in the phase-plane heat maps.

The full grid [0.1, 3] x [0.1, 6] with spacing 0.1, N = 50 and 100 replicates
is long (hours on one core); --quick runs a coarse grid with N = 30.
"""
import argparse
import sys

from frilab.cli import execute
from frilab.config import parse_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--N", type=int, default=None)
    ap.add_argument("--reps", type=int, default=None)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="figures/fig5_8")
    args = ap.parse_args()
    over = dict(command="sweep", seed=args.seed, out=args.out, u_min=0.1, u_max=3.0, u_step=0.1,
                T_min=0.1, T_max=6.0, T_step=0.1, N=50, reps=100)
    if args.quick:
        over.update(N=30, reps=10, u_step=0.3, T_step=0.5)
    for k in ("N", "reps", "workers"):
        if getattr(args, k) is not None:
            over[k] = getattr(args, k)
    sys.exit(execute(parse_config(overrides=over)))


if __name__ == "__main__":
    main()
