"""Hill-climb traces of the critical curve and log-log fits of the marked points.

Runs the climb for each eps, writes climb_eps*.csv and SVGs, and prints the
fitted slope.  The default is N = 50, step 0.01 (a few minutes per eps).
"""
import argparse
from pathlib import Path

from frilab import io as fio
from frilab import rng as R
from frilab.lattice import Box
from frilab.phase import ClimbConfig, fit_loglog, hill_climb
from frilab.sampler import FriConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=50)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.3, 0.5])
    ap.add_argument("--T-max", type=float, default=20.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="figures/fig9_10")
    args = ap.parse_args()
    out = Path(args.out)
    for eps in args.eps:
        climb = ClimbConfig(N=args.N, dT=args.step, du=args.step, eps=eps, T_max=args.T_max)
        template = FriConfig(3, 1.0, 1.0, Box.cube(3, args.N), master_seed=args.seed)
        path = hill_climb(climb, template, R.RngStream(args.seed, (R.CLIMB, 0, 0)))
        path.check_staircase()
        rows = [(s.n, s.u, s.T, s.diameter, s.decision, s.marked) for s in path.steps]
        fio.atomic_write(out / f"climb_eps{eps}.csv",
                         fio.csv_text(fio.SCHEMAS["climb.csv"], rows).encode())
        fit = fit_loglog(path.marked)
        mu, mT = zip(*path.marked)
        fio.write_svg(out, f"climb_eps{eps}.svg", fio.scatter_svg(
            [s.u for s in path.steps], [s.T for s in path.steps], [s.marked for s in path.steps],
            title=f"eps={eps}"))
        fio.write_svg(out, f"loglog_eps{eps}.svg", fio.scatter_svg(
            mu, mT, [True] * len(mu), log=True, line=(fit.slope, fit.intercept),
            title=f"eps={eps}, slope {fit.slope:.3f}"))
        flag = " (truncated at T_max)" if path.truncated else ""
        print(f"eps={eps}: {len(path.steps)} steps{flag}, {len(path.marked)} marked, "
              f"slope {fit.slope:.3f}, r2 {fit.r2:.3f}")


if __name__ == "__main__":
    main()
