"""Wall constants at several resolutions: alpha, c_fm, first-order value."""

import argparse
import csv
import sys

from wallenergy.constants import ConstantsConfig, constants_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--l-max", type=float, default=12.0)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("n_cells", "alpha", "c_fm", "c_fm_half", "first_order", "rel_gap_c_2alpha"))
    for n in args.cells:
        r = constants_report(ConstantsConfig(n_cells=n, cells_per_unit=n // 8, l_max=args.l_max))
        w.writerow((n, repr(r.alpha), repr(r.c_fm), repr(r.c_fm_half), repr(r.first_order),
                    f"{abs(r.c_fm - 2 * r.alpha) / r.c_fm:.3e}"))
        sys.stdout.flush()


if __name__ == "__main__":
    main()
