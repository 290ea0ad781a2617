"""Run a convergence study from a config file and summarize the pincer."""

import argparse
import sys
from pathlib import Path

from wallenergy.cli import parse_config, spec_from_config
from wallenergy.experiments import convergence_study, normalization_verdict, study_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?", default=str(Path(__file__).parent / "configs" / "pincer.cfg"))
    ap.add_argument("--dump-dir", default=None)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    spec = spec_from_config(parse_config(Path(args.config).read_text()))
    spec.dump_dir = args.dump_dir
    spec.workers = args.workers
    recs = convergence_study(spec)
    sys.stdout.write(study_csv(recs, [f"config = {args.config}"]))
    for r in recs:
        print(f"# eps={r.eps:g} n_cells={r.n_cells} limit={r.inferred} lp_dist={r.lp_distance:.4f} "
              f"normalization={r.matching_normalization} {r.error}")
    print(f"# verdict: {normalization_verdict(recs)}")


if __name__ == "__main__":
    main()
