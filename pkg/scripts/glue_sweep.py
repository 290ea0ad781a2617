"""Connector sweep; also prints the extreme directions of the C_k quadratic form."""

import argparse
import sys

import numpy as np

from wallenergy.glue import GlueSpec, glue_bound_ratio, glue_csv, random_specs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    specs = random_specs(args.n, args.seed)
    sys.stdout.write(glue_csv(specs))
    # the ratio only sees the direction theta of (A, m T); scan it on T = 1
    theta = np.linspace(0, np.pi, 181)
    for k in (0, 2):
        r = np.array([glue_bound_ratio(GlueSpec(np.cos(t), np.sin(t), 1.0), k) for t in theta])
        print(f"# k={k}: ratio over directions in [{r.min():.4g}, {r.max():.4g}], "
              f"max/min {r.max() / r.min():.1f}")


if __name__ == "__main__":
    main()
