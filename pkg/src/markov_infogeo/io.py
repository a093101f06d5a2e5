"""JSON documents for graphs, kernels, edge functions, families; trajectory files.

Output is deterministic: keys sorted, floats written with ``%.17g`` so that
every value re-parses to the identical double.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import MarkovGeometryError
from .exp_family import ExponentialFamily
from .function_space import EdgeFunction, StatePotential
from .kernel_graph import Distribution, EdgeMeasure, KernelGraph, MarkovKernel


class InvalidDocument(MarkovGeometryError):
    code = "invalid_document"


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return "%.17g" % x


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON with ``%.17g`` floats and sorted keys."""
    return _dump(obj, indent, 0) + "\n"


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(obj[k], indent, level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return _dump(obj.tolist(), indent, level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidDocument(f"{path}: not valid JSON ({exc.msg})", line=exc.lineno) from None


def _check_keys(doc: dict, required: set, optional: set = frozenset(), where: str = "document") -> None:
    if not isinstance(doc, dict):
        raise InvalidDocument(f"{where} must be a JSON object")
    missing = required - doc.keys()
    unknown = doc.keys() - required - set(optional)
    if missing:
        raise InvalidDocument(f"{where} lacks fields", missing=sorted(missing))
    if unknown:
        raise InvalidDocument(f"{where} has unknown fields", unknown=sorted(unknown))


def _edge_entries(doc: dict, value_key: str | None, where: str):
    _check_keys(doc, {"states", "edges"}, where=where)
    pairs, values = [], []
    for i, e in enumerate(doc["edges"]):
        req = {"from", "to"} | ({value_key} if value_key else set())
        _check_keys(e, req, where=f"{where} edge {i}")
        pairs.append((str(e["from"]), str(e["to"])))
        if value_key:
            values.append(float(e[value_key]))
    graph = KernelGraph(doc["states"], pairs)
    if not value_key:
        return graph, None
    ordered = np.empty(graph.n_edges)
    for (x, y), v in zip(pairs, values):
        ordered[graph.edge_index(graph.state_index(x), graph.state_index(y))] = v
    return graph, ordered


def _edges_doc(graph: KernelGraph, key: str | None = None, values=None) -> dict:
    edges = []
    for k, (x, y) in enumerate(graph.edge_labels()):
        e = {"from": x, "to": y}
        if key is not None:
            e[key] = float(values[k])
        edges.append(e)
    return {"states": list(graph.states), "edges": edges}


def graph_to_doc(graph: KernelGraph) -> dict:
    return _edges_doc(graph)


def graph_from_doc(doc: dict) -> KernelGraph:
    return _edge_entries(doc, None, "graph")[0]


def kernel_to_doc(w: MarkovKernel) -> dict:
    return _edges_doc(w.graph, "p", w.probs)


def kernel_from_doc(doc: dict) -> MarkovKernel:
    graph, p = _edge_entries(doc, "p", "kernel")
    return MarkovKernel(graph, p)


def edge_measure_to_doc(m: EdgeMeasure) -> dict:
    return _edges_doc(m.graph, "p", m.probs)


def edge_measure_from_doc(doc: dict) -> EdgeMeasure:
    graph, p = _edge_entries(doc, "p", "edge measure")
    return EdgeMeasure(graph, p)


def edge_function_to_doc(f: EdgeFunction) -> dict:
    return _edges_doc(f.graph, "v", f.values)


def edge_function_from_doc(doc: dict) -> EdgeFunction:
    graph, v = _edge_entries(doc, "v", "edge function")
    return EdgeFunction(graph, v)


def potential_to_doc(kappa: StatePotential) -> dict:
    return {s: float(v) for s, v in zip(kappa.graph.states, kappa.values)}


def distribution_to_doc(q: Distribution) -> dict:
    return {"states": list(q.graph.states), "p": [float(v) for v in q.probs]}


def distribution_from_doc(doc: dict, graph: KernelGraph) -> Distribution:
    _check_keys(doc, {"states", "p"}, where="distribution")
    states = [str(s) for s in doc["states"]]
    if sorted(states) != sorted(graph.states) or len(states) != len(doc["p"]):
        raise InvalidDocument("distribution states do not match the kernel's states")
    probs = np.empty(graph.n_states)
    for s, v in zip(states, doc["p"]):
        probs[graph.state_index(s)] = float(v)
    return Distribution(graph, probs)


def family_to_doc(family: ExponentialFamily) -> dict:
    """Per-edge arrays follow the canonical edge order listed in ``graph``."""
    return {
        "graph": graph_to_doc(family.graph),
        "carrier": [float(v) for v in family.carrier.values],
        "basis": [[float(v) for v in b.values] for b in family.basis],
    }


def family_from_doc(doc: dict) -> ExponentialFamily:
    _check_keys(doc, {"graph", "carrier", "basis"}, where="family")
    gdoc = doc["graph"]
    _check_keys(gdoc, {"states", "edges"}, where="family graph")
    pairs = []
    for i, e in enumerate(gdoc["edges"]):
        _check_keys(e, {"from", "to"}, where=f"family graph edge {i}")
        pairs.append((str(e["from"]), str(e["to"])))
    graph = KernelGraph(gdoc["states"], pairs)
    # arrays are given in the order edges are listed; map them to canonical order
    perm = [graph.edge_index(graph.state_index(x), graph.state_index(y)) for x, y in pairs]

    def reorder(values, what):
        if len(values) != graph.n_edges:
            raise InvalidDocument(f"{what} must have one entry per edge", length=len(values))
        out = np.empty(graph.n_edges)
        out[perm] = np.asarray(values, dtype=float)
        return out

    carrier = reorder(doc["carrier"], "carrier")
    basis = [reorder(b, f"basis[{i}]") for i, b in enumerate(doc["basis"])]
    return ExponentialFamily.from_arrays(graph, carrier, basis)


def read_trajectory(path) -> list[str]:
    """One state identifier per line (UTF-8); blank lines are ignored."""
    text = Path(path).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def write_trajectory(path, states) -> None:
    Path(path).write_text("".join(f"{s}\n" for s in states), encoding="utf-8")
