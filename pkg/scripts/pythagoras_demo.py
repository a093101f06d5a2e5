"""Pythagorean relation on random triples and at an m-projection.

Each row compares ``D12 + D23 - D13`` with the dual-coordinate pairing
``(eta1 - eta2) . (theta3 - theta2)``. Rows labelled ``foot`` take ``w2`` as
the m-projection of ``w1`` onto a subfamily containing ``w3``; both sides
then vanish.

    python scripts/pythagoras_demo.py --triples 20 > pythagoras.csv
"""

import argparse
import csv
import sys

from markov_infogeo import edge_measure, fit_mle, kernel_at, pythagorean_sides
from markov_infogeo.rng import Xorshift64Star, random_family, random_graph, random_theta


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--states", type=int, default=4)
    ap.add_argument("--triples", type=int, default=10)
    args = ap.parse_args(argv)

    rng = Xorshift64Star(args.seed)
    g = random_graph(rng, args.states, "complete")
    d = min(4, g.n_edges - g.n_states)
    fam = random_family(rng, g, d)
    sub = fam.subfamily(range(max(1, d // 2)))

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["case", "index", "lhs", "rhs", "gap"])
    for i in range(args.triples):
        ws = [kernel_at(fam, random_theta(rng, d)).kernel for _ in range(3)]
        lhs, rhs = pythagorean_sides(*ws, fam)
        out.writerow(["random", i, "%.17g" % lhs, "%.17g" % rhs, "%.17g" % (lhs - rhs)])
    for i in range(args.triples):
        w1 = kernel_at(fam, random_theta(rng, d)).kernel
        foot = kernel_at(sub, fit_mle(sub, edge_measure(w1))).kernel
        w3 = kernel_at(sub, random_theta(rng, sub.dim)).kernel
        lhs, rhs = pythagorean_sides(w1, foot, w3, fam)
        out.writerow(["foot", i, "%.17g" % lhs, "%.17g" % rhs, "%.17g" % (lhs - rhs)])


if __name__ == "__main__":
    main()
