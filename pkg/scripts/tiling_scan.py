"""Coverage and runtime of the multi-scale tiling over seeds and window sizes.

    python3 scripts/tiling_scan.py --group z2 --windows 40,80,158 --seeds 20
"""

import argparse
import csv
import sys
import time

from xsection.group import parse_group
from xsection.tiling import make_instance, params_for, quasi_tile, verify_tiling


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--group", default="z2")
    ap.add_argument("--windows", default="40,80,158")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--density", type=float, default=0.3)
    args = ap.parse_args()
    G = parse_group(args.group)
    params = params_for(args.delta)
    out = csv.writer(sys.stdout)
    out.writerow(["group", "window", "seed", "points", "ladder", "coverage", "verified", "seconds"])
    for w in (int(v) for v in args.windows.split(",")):
        for seed in range(args.seeds):
            t0 = time.perf_counter()
            inst = make_instance(G, w, args.density, seed, params)
            res = quasi_tile(inst, params)
            ok = verify_tiling(inst, params, res).ok
            out.writerow([G.name, w, seed, len(inst.A), "/".join(map(str, inst.meta["ladder"])),
                          f"{res.coverage:.6f}", ok, f"{time.perf_counter() - t0:.3f}"])


if __name__ == "__main__":
    main()
