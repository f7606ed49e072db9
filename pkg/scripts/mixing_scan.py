"""Mixing defect against the exact matrix-power value for a two-state Markov chain.

    python3 scripts/mixing_scan.py --stay 0.9 --gaps 1-30 --samples 1000000
"""

import argparse
import csv
import sys

from xsection.cli import _parse_scales
from xsection.mixing import mixing_scan
from xsection.systems import periodic, symmetric_markov


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--stay", type=float, default=0.9)
    ap.add_argument("--gaps", default="1-30")
    ap.add_argument("--family-size", type=int, default=2)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--periodic", type=int, help="use the rotation of this period instead")
    args = ap.parse_args()
    system = periodic(args.periodic) if args.periodic else symmetric_markov(args.stay)
    radii = [g - 1 for g in _parse_scales(args.gaps)]
    out = csv.writer(sys.stdout)
    out.writerow(["gap", "defect", "stderr", "oracle_defect", "z"])
    for r in mixing_scan(system, None, radii, args.family_size, args.samples, args.seed):
        z = (r.signed_defect - r.oracle_defect) / r.stderr if r.stderr > 1e-12 else float("nan")
        out.writerow([r.K_radius + 1, f"{r.defect:.6g}", f"{r.stderr:.3g}", f"{abs(r.oracle_defect):.6g}", f"{z:.2f}"])


if __name__ == "__main__":
    main()
