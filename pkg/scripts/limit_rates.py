"""Finite-n convergence of the joint KL and joint Fisher matrix.

Prints CSV with columns ``n, kl_rate_dev, fisher_rate_dev`` where
``kl_rate_dev = |KL_n / n - D|`` (non-stationary initial laws) and
``fisher_rate_dev = max |G^(n) / n - G|`` (stationary initial law).
Both columns should halve as ``n`` doubles.

    python scripts/limit_rates.py --seed 7 --states 3 > limits.csv
"""

import argparse
import csv
import sys

import numpy as np

from markov_infogeo import Distribution, divergence_rate, fisher_direct, joint_fisher, kl_joint
from markov_infogeo.rng import Xorshift64Star, random_family, random_graph, random_kernel, random_theta


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--states", type=int, default=3)
    ap.add_argument("--max-power", type=int, default=9, help="largest n is 2**max_power")
    args = ap.parse_args(argv)

    rng = Xorshift64Star(args.seed)
    g = random_graph(rng, args.states, "complete")
    w1, w2 = random_kernel(rng, g), random_kernel(rng, g)
    skew = np.arange(1.0, args.states + 1)
    q1 = Distribution(g, skew / skew.sum())
    q2 = Distribution(g, np.full(args.states, 1.0 / args.states))
    D = divergence_rate(w1, w2)
    d = min(2, g.n_edges - g.n_states)
    fam = random_family(rng, g, d)
    th = random_theta(rng, d)
    G = fisher_direct(fam, th).g

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["n", "kl_rate_dev", "fisher_rate_dev"])
    for k in range(1, args.max_power + 1):
        n = 2**k
        kl_dev = abs(kl_joint(w1, w2, q1, q2, n) / n - D)
        g_dev = float(np.max(np.abs(joint_fisher(fam, th, n) / n - G)))
        out.writerow([n, "%.17g" % kl_dev, "%.17g" % g_dev])


if __name__ == "__main__":
    main()
