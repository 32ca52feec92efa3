"""Closest approach of the explicit bidisc geodesics to the origin, against the crossing formula."""

import argparse
import csv
import sys

from kobalab import geodesics as geo
from kobalab import visibility as vis


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=20, help="r_k = 1 - 2^-k for k = 1..kmax")
    ap.add_argument("--csv", default=None, help="optional output CSV")
    args = ap.parse_args()
    rows = []
    for k in range(1, args.kmax + 1):
        r = 1 - 2.0 ** -k
        c, t = vis.closest_approach_argmin(geo.bidisc_example_segment(r), [0, 0])
        oracle = vis.example_crossing_value(r)
        rows.append([k, r, c, t, oracle, abs(c - oracle)])
        print(f"k={k:2d} r={r:.8f} closest={c:.10f} oracle={oracle:.10f} argmin_t={t:.6f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "r", "closest_approach", "argmin_t", "oracle", "error"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
