"""Largest and second-largest clusters at (u, T) = (1/6, 1.4) and (1/6, 2.2) in [0, 50]^3.

Writes one SVG per T with the two clusters projected on the first two axes and
prints their sizes and bounding-box diameters.
"""
import argparse
from pathlib import Path

import numpy as np

from frilab import io as fio
from frilab import rng as R
from frilab.clusters import _ranked, connected_components
from frilab.lattice import Box
from frilab.sampler import FriConfig, sample_fri


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=50)
    ap.add_argument("--u", type=float, default=1 / 6)
    ap.add_argument("--T", type=float, nargs="+", default=[1.4, 2.2])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="figures/fig1")
    args = ap.parse_args()
    out = Path(args.out)
    box = Box.cube(3, args.N)
    for iT, T in enumerate(args.T):
        config = FriConfig(3, args.u, T, box, master_seed=args.seed)
        sample = sample_fri(config, R.RngStream(args.seed, (R.FRI, 0, iT)).state(0))
        comp = connected_components(sample.edges)
        order = _ranked(comp)[:2]
        xs, ys, marks = [], [], []
        for rank, c in enumerate(order):
            st = comp.stats(int(c))
            print(f"T={T}: cluster {rank + 1} size {st.size_vertices} diameter {st.bbox_diameter:.1f}")
            pts = np.array([box.point(int(v)) for v in comp.members(int(c))])
            xs += list(pts[:, 0])
            ys += list(pts[:, 1])
            marks += [rank == 0] * len(pts)
        if xs:
            svg = fio.scatter_svg(xs, ys, marks, xlabel="x1", ylabel="x2",
                                  title=f"u={args.u:.4g}, T={T}: largest (circles), second (dots)")
            fio.write_svg(out, f"clusters_T{T}.svg", svg)


if __name__ == "__main__":
    main()
