"""Mean ergodic deviation and castle pass rate across Følner scales on a Z cylinder section.

    python3 scripts/ergodic_trend.py --seeds 30 --window 100000
"""

import argparse
import csv
import sys

import numpy as np

from xsection.group import BoxSet, Zd
from xsection.section import (castle_ergodic_check, from_orbit_window, interval, mean_ergodic_deviation,
                              tiling_castle, trend_test)
from xsection.systems import Bernoulli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--window", type=int, default=100_000)
    ap.add_argument("--scales", default="10,100,1000,10000")
    ap.add_argument("--tol", type=float, default=0.1)
    args = ap.parse_args()
    scales = [int(v) for v in args.scales.split(",")]
    system = Bernoulli((0.25,) * 4)
    rows = []
    for seed in range(args.seeds):
        s = from_orbit_window(system, BoxSet(Zd(1), args.window), "symbol:0,1", seed)
        h = (s.labels == 0).astype(float)
        for n in scales:
            dev = mean_ergodic_deviation(s, h, interval(-n, n), args.tol)
            castle = tiling_castle(s, interval(0, n - 1), args.tol)
            rows.append((n, seed, dev, castle_ergodic_check(s, castle, h, args.tol).ok))
    out = csv.writer(sys.stdout)
    out.writerow(["scale", "mean_deviation", "castle_pass_rate"])
    for n in scales:
        sel = [r for r in rows if r[0] == n]
        out.writerow([n, f"{np.mean([r[2] for r in sel]):.6g}", f"{np.mean([r[3] for r in sel]):.3f}"])
    x = [r[0] for r in rows]
    print("# deviation trend (decreasing):", trend_test(x, [r[2] for r in rows], "decreasing"), file=sys.stderr)
    print("# pass-rate trend (increasing):", trend_test(x, [float(r[3]) for r in rows], "increasing"),
          file=sys.stderr)


if __name__ == "__main__":
    main()
