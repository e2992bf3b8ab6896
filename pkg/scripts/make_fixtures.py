"""Regenerate the frozen oracle values used by the test suite.

The exact inputs come from a fixed-point solve of the killed hitting problem,
the large-T inputs from plain numpy walks with numpy's own generator.  Neither
path touches the numba kernels.  The T = 50 and T = 500 runs take a few
minutes each at n = 10^6.
"""
import argparse
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from oracles import edge_inputs_exact, numpy_killed_hits  # noqa: E402


def mc_inputs(d, T, n, seeds):
    x1 = (1,) + (0,) * (d - 1)
    K = [(0,) * d, x1]
    starts = [(-1,) + (0,) * (d - 1), (0, 1) + (0,) * (d - 2), (0,) * d]
    out = {}
    for name, start, seed in zip(("E1", "E2", "Es"), starts, seeds):
        hit, H = numpy_killed_hits(d, T, K, start, n, seed)
        esc = 1.0 - hit
        out[name] = (esc.mean(), esc.std(ddof=1) / math.sqrt(n))
        if name == "Es":
            h = np.where(hit, H, 0).astype(float)
            out["return_moment"] = (h.mean(), h.std(ddof=1) / math.sqrt(n))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--skip-mc", action="store_true")
    args = ap.parse_args()
    for T, R in ((2.0, 60), (5.0, 70)):
        print(f"exact d=3 T={T}:", edge_inputs_exact(3, T, R))
    if not args.skip_mc:
        for T, seeds in ((50.0, (101, 102, 103)), (500.0, (201, 202, 203))):
            print(f"numpy d=3 T={T} n={args.n}:", mc_inputs(3, T, args.n, seeds))


if __name__ == "__main__":
    main()
