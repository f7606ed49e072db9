"""Block-entropy, Abramov and Kac estimates next to their closed forms.

    python3 scripts/entropy_table.py --samples 1000000
"""

import argparse
import csv
import sys

from xsection.entropy import abramov_check, block_entropy
from xsection.section import interval
from xsection.systems import Bernoulli, analytic_entropy, suspend, symmetric_markov


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    systems = {"bernoulli(0.5)": Bernoulli((0.5, 0.5)), "bernoulli(0.3)": Bernoulli((0.3, 0.7)),
               "markov(0.9)": symmetric_markov(0.9)}
    out = csv.writer(sys.stdout)
    out.writerow(["system", "quantity", "estimate", "stderr", "target"])
    for name, s in systems.items():
        est = block_entropy(s, interval(0, 9), args.samples, args.seed)
        out.writerow([name, "entropy rate", f"{est.estimate:.6f}", f"{est.stderr:.2g}", f"{analytic_entropy(s):.6f}"])
        rep = abramov_check(s, [0], args.samples, args.seed)
        out.writerow([name, "induced on x0=0", f"{rep['estimate']:.6f}", f"{rep['stderr']:.2g}", f"{rep['target']:.6f}"])
        out.writerow([name, "mean return time", f"{rep['kac_mean']:.6f}", f"{rep['kac_stderr']:.2g}",
                      f"{rep['kac_target']:.6f}"])
    base = Bernoulli((0.5, 0.5))
    rep = abramov_check(base, suspend(base, (1, 3)), args.samples, args.seed, window=8)
    out.writerow(["tower(bernoulli(0.5), roof 1/3)", "entropy rate", f"{rep['estimate']:.6f}",
                  f"{rep['stderr']:.2g}", f"{rep['target']:.6f}"])


if __name__ == "__main__":
    main()
