"""Empirical interpolation constants and their refinement stability."""

import argparse
from collections import defaultdict

import numpy as np

from wallenergy.inequalities import cosine_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-profiles", type=int, default=200)
    ap.add_argument("--cells", type=int, nargs="+", default=[256, 512])
    args = ap.parse_args()
    runs = [cosine_sweep(args.n_profiles, n) for n in args.cells]
    print("name,n_cells,max_ratio,max_rel_change_vs_coarser")
    for i, (n, run) in enumerate(zip(args.cells, runs)):
        by = defaultdict(list)
        for s in run:
            by[s.name].append(s.ratio)
        prev = None
        if i:
            prev = defaultdict(list)
            for s in runs[i - 1]:
                prev[s.name].append(s.ratio)
        for name, vals in by.items():
            vals = np.array(vals)
            change = "" if prev is None else f"{np.max(np.abs(vals - prev[name]) / prev[name]):.2e}"
            print(f"{name},{n},{vals.max():.6f},{change}")


if __name__ == "__main__":
    main()
