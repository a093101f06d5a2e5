"""Kernel entries and divergences along the e- and m-geodesics.

Prints CSV with columns ``kind, t, from, to, p, divergence_from_w0``. The
default pair is the two-state example (uniform kernel and ``a = b = 1/3``);
pass two kernel documents to use other endpoints.

    python scripts/geodesic_curves.py --points 11 > curves.csv
    python scripts/geodesic_curves.py w0.json w1.json
"""

import argparse
import csv
import json
import sys

import numpy as np

from markov_infogeo import KernelGraph, MarkovKernel, divergence_rate, e_geodesic_point, m_geodesic_point
from markov_infogeo.io import kernel_from_doc


def load(path):
    with open(path, encoding="utf-8") as fh:
        return kernel_from_doc(json.load(fh))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("kernels", nargs="*", help="two kernel documents (optional)")
    ap.add_argument("--points", type=int, default=11)
    args = ap.parse_args(argv)
    if args.kernels and len(args.kernels) != 2:
        ap.error("give either zero or two kernel documents")

    if args.kernels:
        w0, w1 = (load(p) for p in args.kernels)
    else:
        g = KernelGraph.complete(2)
        w0 = MarkovKernel(g, [0.5, 0.5, 0.5, 0.5])
        w1 = MarkovKernel(g, [2 / 3, 1 / 3, 1 / 3, 2 / 3])

    g = w0.graph
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["kind", "t", "from", "to", "p", "divergence_from_w0"])
    for kind, curve in (("e", e_geodesic_point), ("m", m_geodesic_point)):
        for t in np.linspace(0.0, 1.0, args.points):
            w = curve(w0, w1, float(t))
            dv = divergence_rate(w0, w)
            for k in range(g.n_edges):
                x, y = g.states[g.src[k]], g.states[g.dst[k]]
                out.writerow([kind, "%.17g" % t, x, y, "%.17g" % w.probs[k], "%.17g" % dv])


if __name__ == "__main__":
    main()
