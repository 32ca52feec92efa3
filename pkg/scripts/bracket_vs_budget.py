"""Distance bracket on the 64-facet ball hull as the budget grows."""

import argparse
import math
import sys
import time

from kobalab import domains as dm
from kobalab import metric


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, default=0.75, help="second point is (r, 0)")
    ap.add_argument("--budgets", type=int, nargs="+", default=[1000, 2000, 5000, 10_000])
    args = ap.parse_args()
    hull = dm.symmetric_ball_hull()
    print(f"ball value arctanh r = {math.atanh(args.r):.10f}")
    for b in args.budgets:
        t0 = time.perf_counter()
        br = metric.kobayashi_distance(hull, [0, 0], [args.r, 0], budget=b)
        print(f"budget {b:6d}: [{br.lo:.10f}, {br.hi:.10f}] gap {br.gap:.2e}  {time.perf_counter() - t0:.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
