"""Run every config in configs/ through the CLI, one output directory each."""

import argparse
import sys
import time
from pathlib import Path

from kobalab import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "runs"), help="parent output directory")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        t0 = time.perf_counter()
        code = cli.main(["run", "--config", str(cfg), "--out", str(Path(args.out) / cfg.stem),
                         "--jobs", str(args.jobs), "--quiet"])
        print(f"{cfg.stem:32s} exit {code}  {time.perf_counter() - t0:6.2f} s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
