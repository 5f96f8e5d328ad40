"""Regenerate the bundled fluctuation-test critical-value table.

    python scripts/generate_cv_table.py [--paths 100000] [--seed 20100501]
"""

import argparse
from pathlib import Path

from emospread.fluctuation import TABLE_N, simulate_critical_values, write_cv_table

OUT = Path(__file__).resolve().parents[1] / "src" / "emospread" / "data" / "fluctuation_cv.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20100501)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    rows = []
    for n in TABLE_N:
        rows.extend(simulate_critical_values(n, n_paths=args.paths, seed=args.seed + n))
        print(f"n={n} done")
    header = [
        "two-sided critical values for sup_j |F_j| under iid N(0,1) loss differentials",
        f"generator: emospread.fluctuation.simulate_critical_values, seed = {args.seed} + n, paths = {args.paths}",
        "finite n: sigma from Newey-West HAC with bandwidth floor(1.3 n^(1/3)); n = 10000: known sigma (asymptotic row)",
        "window m = round(mu * n)",
    ]
    write_cv_table(args.out, rows, header)


if __name__ == "__main__":
    main()
