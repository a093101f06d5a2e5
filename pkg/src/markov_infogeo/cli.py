"""Command-line front end: ``markov-infogeo <subcommand> ...``.

Every subcommand writes one result envelope::

    {"command": ..., "inputs": [{"path", "sha256"}], "result": ..., "diagnostics": ...}

as deterministic JSON, or the subcommand's table as CSV with ``--format csv``.
Wall-clock time is added to the diagnostics only under ``--timing`` so that
default output is byte-identical across runs.

Exit codes: 0 success, 1 domain error (the error object ``{code, message,
context}`` is written instead of the envelope) or failed verification,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .dual_geometry import dual_potential, expectation_param, fisher_direct, fisher_hessian, solve_theta
from .errors import MarkovGeometryError
from .exp_family import kernel_at
from .function_space import decompose
from .geodesy import (
    divergence,
    e_geodesic_point,
    empirical_edge_measure,
    fit_mle,
    kl_joint,
    m_geodesic_point,
)
from .kernel_graph import edge_measure, stationary_distribution
from .pf_normalizer import delta_map, gamma_normalize
from .verify import run_verification, verify_inputs


class UsageError(Exception):
    pass


class Inputs:
    """Loads input files and remembers their content hashes."""

    def __init__(self) -> None:
        self.records: list[dict] = []

    def doc(self, path) -> dict:
        p = Path(path)
        if not p.is_file():
            raise io.InvalidDocument(f"{path}: no such file", path=str(path))
        self.records.append({"path": str(path), "sha256": io.sha256_file(p)})
        return io.load_json(p)

    def lines(self, path) -> list[str]:
        p = Path(path)
        if not p.is_file():
            raise io.InvalidDocument(f"{path}: no such file", path=str(path))
        self.records.append({"path": str(path), "sha256": io.sha256_file(p)})
        return io.read_trajectory(p)


def float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return vals


def _check_dim(vec, family, name: str) -> np.ndarray:
    if len(vec) != family.dim:
        raise UsageError(f"--{name} has {len(vec)} entries but the family has dimension {family.dim}")
    return np.asarray(vec, dtype=float)


def _edge_rows(graph, **columns) -> list[list]:
    rows = []
    for k, (x, y) in enumerate(graph.edge_labels()):
        rows.append([x, y] + [float(col[k]) for col in columns.values()])
    return rows


def _kernel_table(w):
    return ["from", "to", "p"], _edge_rows(w.graph, p=w.probs)


# subcommand handlers return (result, diagnostics, (header, rows))


def cmd_normalize(args, inp: Inputs):
    f = io.edge_function_from_doc(inp.doc(args.function))
    res = delta_map(f) if args.log else gamma_normalize(f)
    result = {
        "kernel": io.kernel_to_doc(res.kernel),
        "log_perron": res.log_perron,
        "potential": io.potential_to_doc(res.potential.gauged()),
    }
    return result, {"iterations": res.iterations, "residual": res.residual}, _kernel_table(res.kernel)


def cmd_stationary(args, inp: Inputs):
    w = io.kernel_from_doc(inp.doc(args.kernel))
    p = stationary_distribution(w)
    resid = float(np.max(np.abs(p.probs @ w.matrix() - p.probs)))
    table = ["state", "p"], [[s, float(v)] for s, v in zip(w.graph.states, p.probs)]
    return io.distribution_to_doc(p), {"residual": resid}, table


def cmd_edge_measure(args, inp: Inputs):
    w = io.kernel_from_doc(inp.doc(args.kernel))
    m = edge_measure(w)
    table = ["from", "to", "p"], _edge_rows(w.graph, p=m.probs)
    return io.edge_measure_to_doc(m), {"shift_residual": m.shift_residual()}, table


def cmd_decompose(args, inp: Inputs):
    f = io.edge_function_from_doc(inp.doc(args.function))
    dec = decompose(f)
    result = {
        "shift_part": io.edge_function_to_doc(dec.shift_part),
        "anti_part": io.edge_function_to_doc(dec.anti_part),
        "potential": io.potential_to_doc(dec.potential),
    }
    resid = float(np.max(np.abs(dec.shift_part.values + dec.anti_part.values - f.values)))
    table = ["from", "to", "v", "shift", "anti"], _edge_rows(
        f.graph, v=f.values, s=dec.shift_part.values, a=dec.anti_part.values
    )
    return result, {"reconstruction_residual": resid}, table


def cmd_eval_family(args, inp: Inputs):
    fam = io.family_from_doc(inp.doc(args.family))
    theta = _check_dim(args.theta, fam, "theta")
    pt = kernel_at(fam, theta)
    result = {"theta": theta.tolist(), "kernel": io.kernel_to_doc(pt.kernel), "psi": pt.psi, "kappa": io.potential_to_doc(pt.kappa)}
    return result, {}, _kernel_table(pt.kernel)


def cmd_fisher(args, inp: Inputs):
    fam = io.family_from_doc(inp.doc(args.family))
    theta = _check_dim(args.theta, fam, "theta")
    G = fisher_direct(fam, theta)
    H = fisher_hessian(fam, theta)
    disc = float(np.max(np.abs(G.g - H.g))) if fam.dim else 0.0
    result = {
        "theta": theta.tolist(),
        "direct": G.g.tolist(),
        "hessian": H.g.tolist(),
        "discrepancy": disc,
        "eigenvalues": G.eigenvalues.tolist(),
        "positive_definite": G.is_positive_definite,
    }
    rows = [[i, j, float(G.g[i, j]), float(H.g[i, j])] for i in range(fam.dim) for j in range(fam.dim)]
    return result, {"asymmetry": G.asymmetry}, (["i", "j", "direct", "hessian"], rows)


def cmd_coords(args, inp: Inputs):
    fam = io.family_from_doc(inp.doc(args.family))
    diag = {}
    if args.theta is not None:
        theta = _check_dim(args.theta, fam, "theta")
        eta = expectation_param(fam, theta)
    else:
        eta = _check_dim(args.eta, fam, "eta")
        sol = solve_theta(fam, eta)
        theta = sol.theta
        diag = {"iterations": sol.iterations, "residual": sol.residual}
    psi = kernel_at(fam, theta).psi
    result = {"theta": theta.tolist(), "eta": np.asarray(eta).tolist(), "psi": psi, "phi": dual_potential(fam, theta)}
    rows = [[i, float(theta[i]), float(eta[i])] for i in range(fam.dim)]
    return result, diag, (["i", "theta", "eta"], rows)


def cmd_geodesic(args, inp: Inputs):
    w0 = io.kernel_from_doc(inp.doc(args.w0))
    w1 = io.kernel_from_doc(inp.doc(args.w1))
    point = e_geodesic_point if args.kind == "e" else m_geodesic_point
    points, rows = [], []
    for t in args.t:
        w = point(w0, w1, t)
        points.append({"t": t, "kernel": io.kernel_to_doc(w)})
        rows += [[t] + r for r in _kernel_table(w)[1]]
    return {"kind": args.kind, "points": points}, {}, (["t", "from", "to", "p"], rows)


def cmd_divergence(args, inp: Inputs):
    w1 = io.kernel_from_doc(inp.doc(args.w1))
    w2 = io.kernel_from_doc(inp.doc(args.w2))
    fam = io.family_from_doc(inp.doc(args.family)) if args.family else None
    rep = divergence(w1, w2, fam)
    result = {"value": rep.value, "form": rep.form}
    diag = {}
    if fam is not None:
        result["bregman"] = rep.bregman
        diag["residual"] = rep.residual
    row = [rep.value, rep.bregman if rep.bregman is not None else ""]
    return result, diag, (["value", "bregman"], [row])


def cmd_kl_joint(args, inp: Inputs):
    w1 = io.kernel_from_doc(inp.doc(args.w1))
    w2 = io.kernel_from_doc(inp.doc(args.w2))
    q1 = io.distribution_from_doc(inp.doc(args.q1), w1.graph) if args.q1 else stationary_distribution(w1)
    q2 = io.distribution_from_doc(inp.doc(args.q2), w2.graph) if args.q2 else stationary_distribution(w2)
    if any(n < 1 for n in args.n):
        raise UsageError("--n values must be positive")
    rate = divergence(w1, w2).value
    values = [{"n": n, "kl": kl_joint(w1, w2, q1, q2, n)} for n in args.n]
    for v in values:
        v["kl_per_step"] = v["kl"] / v["n"]
    rows = [[v["n"], v["kl"], v["kl_per_step"]] for v in values]
    return {"rate": rate, "values": values}, {}, (["n", "kl", "kl_per_step"], rows)


def cmd_fit(args, inp: Inputs):
    fam = io.family_from_doc(inp.doc(args.family))
    if args.trajectory:
        traj = inp.lines(args.trajectory)
        target = empirical_edge_measure(fam.graph, traj)
        diag = {"transitions": len(traj) - 1}
    else:
        target = io.edge_measure_from_doc(inp.doc(args.edge_measure))
        diag = {}
    theta = fit_mle(fam, target)
    pt = kernel_at(fam, theta)
    eta = fam.basis_matrix @ target.probs
    diag["moment_residual"] = float(np.max(np.abs(expectation_param(fam, theta) - eta))) if fam.dim else 0.0
    result = {"theta": theta.tolist(), "eta": eta.tolist(), "kernel": io.kernel_to_doc(pt.kernel)}
    rows = [[i, float(theta[i]), float(eta[i])] for i in range(fam.dim)]
    return result, diag, (["i", "theta", "eta"], rows)


def cmd_verify(args, inp: Inputs):
    if args.kernels or args.family:
        kernels = [io.kernel_from_doc(inp.doc(k)) for k in args.kernels]
        fam = io.family_from_doc(inp.doc(args.family)) if args.family else None
        theta = _check_dim(args.theta, fam, "theta") if (fam is not None and args.theta is not None) else None
        report = verify_inputs(kernels, fam, theta)
    else:
        if any(s < 2 for s in args.sizes):
            raise UsageError("--sizes must be at least 2")
        if args.instances < 1 or args.workers < 1:
            raise UsageError("--instances and --workers must be positive")
        report = run_verification(args.seed, args.sizes, args.instances, args.workers)
    rows = [
        [name, f["module"], f["checks"], f["failures"], f["max_error"], f["tolerance"], f["passed"]]
        for name, f in report["families"].items()
    ]
    header = ["family", "module", "checks", "failures", "max_error", "tolerance", "passed"]
    return report, {}, (header, rows)


COMMANDS = {
    "normalize": cmd_normalize,
    "stationary": cmd_stationary,
    "edge-measure": cmd_edge_measure,
    "decompose": cmd_decompose,
    "eval-family": cmd_eval_family,
    "fisher": cmd_fisher,
    "coords": cmd_coords,
    "geodesic": cmd_geodesic,
    "divergence": cmd_divergence,
    "kl-joint": cmd_kl_joint,
    "fit": cmd_fit,
    "verify": cmd_verify,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-o", "--output", help="write to this file instead of stdout")
    common.add_argument("--timing", action="store_true", help="add wall-clock seconds to the diagnostics")

    parser = _Parser(prog="markov-infogeo", description="Information geometry of Markov kernels on a graph.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("normalize", parents=[common], help="Perron normalization of an edge function")
    p.add_argument("function")
    p.add_argument("--log", action="store_true", help="treat values as logarithms (apply exp first)")
    sub.add_parser("stationary", parents=[common], help="stationary law of a kernel").add_argument("kernel")
    sub.add_parser("edge-measure", parents=[common], help="stationary edge measure p(x) w(y|x)").add_argument("kernel")
    sub.add_parser("decompose", parents=[common], help="split an edge function into F_S and F_A parts").add_argument("function")

    helps = {"eval-family": "kernel, psi and kappa at theta", "fisher": "Fisher metric by two methods"}
    for name in ("eval-family", "fisher"):
        p = sub.add_parser(name, parents=[common], help=helps[name])
        p.add_argument("family")
        p.add_argument("--theta", type=float_list, required=True)
    p = sub.add_parser("coords", parents=[common], help="convert between theta and eta")
    p.add_argument("family")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta", type=float_list)
    g.add_argument("--eta", type=float_list)

    p = sub.add_parser("geodesic", parents=[common], help="points on the e- or m-geodesic")
    p.add_argument("--kind", choices=("e", "m"), required=True)
    p.add_argument("--t", type=float_list, required=True)
    p.add_argument("w0")
    p.add_argument("w1")

    p = sub.add_parser("divergence", parents=[common], help="KL divergence rate D(w1 || w2)")
    p.add_argument("w1")
    p.add_argument("w2")
    p.add_argument("--family")

    p = sub.add_parser("kl-joint", parents=[common], help="KL divergence of n-step path laws")
    p.add_argument("w1")
    p.add_argument("w2")
    p.add_argument("--n", type=int_list, required=True)
    p.add_argument("--q1", help="initial law of the first chain (default: stationary)")
    p.add_argument("--q2", help="initial law of the second chain (default: stationary)")

    p = sub.add_parser("fit", parents=[common], help="maximum likelihood fit in a family")
    p.add_argument("family")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--trajectory")
    g.add_argument("--edge-measure")

    p = sub.add_parser("verify", parents=[common], help="run the invariant checks")
    p.add_argument("kernels", nargs="*", help="kernel files to check instead of random instances")
    p.add_argument("--family")
    p.add_argument("--theta", type=float_list)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=int_list, default=[2, 3, 4, 5, 6])
    p.add_argument("--instances", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _csv_text(header, rows) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["%.17g" % v if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 2
    inp = Inputs()
    start = time.perf_counter()
    try:
        result, diag, (header, rows) = COMMANDS[args.command](args, inp)
    except UsageError as exc:
        sys.stderr.write(f"markov-infogeo {args.command}: {exc}\n")
        return 2
    except MarkovGeometryError as exc:
        _emit(io.dumps({"error": exc.to_dict()}), args.output)
        return 1
    except ValueError as exc:
        _emit(io.dumps({"error": {"code": "invalid_value", "message": str(exc), "context": {}}}), args.output)
        return 1
    if args.timing:
        diag["wall_clock_seconds"] = time.perf_counter() - start
    if args.format == "csv":
        _emit(_csv_text(header, rows), args.output)
    else:
        envelope = {"command": args.command, "inputs": inp.records, "result": result, "diagnostics": diag}
        _emit(io.dumps(envelope), args.output)
    if args.command == "verify" and not result["all_passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
