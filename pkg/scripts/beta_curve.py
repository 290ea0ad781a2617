"""beta(t) on both routes, with the truncation check at a longer half-line."""

import argparse
import sys

from wallenergy.constants import ConstantsConfig, beta_csv, beta_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-min", type=float, default=-2.0)
    ap.add_argument("--t-max", type=float, default=2.0)
    ap.add_argument("--steps", type=int, default=41)
    ap.add_argument("--l-max", type=float, nargs="+", default=[12.0])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    for L in args.l_max:
        cfg = ConstantsConfig(l_max=L)
        pts = beta_curve(args.t_min, args.t_max, args.steps, cfg,
                         warm_start=args.workers == 1, workers=args.workers)
        sys.stdout.write(beta_csv(pts, [f"L_max = {L}"]))
        worst = max((p.route_gap for p in pts if p.beta_psi > 0), default=0.0)
        print(f"# worst route gap {worst:.2e}")


if __name__ == "__main__":
    main()
