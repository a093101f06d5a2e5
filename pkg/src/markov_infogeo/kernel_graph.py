"""State spaces, edge sets, Markov kernels and their stationary laws.

Everything here is immutable: arrays handed out by the value types are
read-only views, so the objects can be shared across threads freely.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConvergenceFailure,
    GraphMismatch,
    InvalidDistribution,
    InvalidGraph,
    InvalidKernel,
    NotPositive,
    NotShiftInvariant,
    NotStronglyConnected,
    ZeroRow,
)

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-12
SHIFT_INVARIANCE_TOL = 1e-10


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class KernelGraph:
    """Finite state set ``X`` with a directed edge set ``E``.

    States are identified by strings; edges are stored as pairs of dense
    state indices, sorted lexicographically so that every vector indexed by
    edges has a reproducible layout.

    Parameters
    ----------
    states : sequence
        State identifiers (converted with ``str``), at least two, distinct.
    edges : iterable of pairs
        ``(x, y)`` pairs of state identifiers.
    strict : bool
        If true (default) the graph must be strongly connected. Pass
        ``False`` only to inspect arbitrary digraphs with
        :func:`check_strong_connectivity`.
    """

    def __init__(self, states: Sequence, edges: Iterable, *, strict: bool = True) -> None:
        states = tuple(str(s) for s in states)
        if len(states) < 2:
            raise InvalidGraph("need at least two states", n_states=len(states))
        if len(set(states)) != len(states):
            raise InvalidGraph("duplicate state identifiers", states=list(states))
        index = {s: i for i, s in enumerate(states)}

        pairs = []
        for x, y in edges:
            x, y = str(x), str(y)
            if x not in index or y not in index:
                raise InvalidGraph("edge refers to unknown state", edge=[x, y])
            pairs.append((index[x], index[y]))
        if not pairs:
            raise InvalidGraph("need at least one edge")
        if len(set(pairs)) != len(pairs):
            raise InvalidGraph("duplicate edges")
        pairs.sort()

        self._states = states
        self._state_index = index
        self._edges = tuple(pairs)
        self._edge_index = {e: k for k, e in enumerate(pairs)}
        self._src = _frozen([e[0] for e in pairs], dtype=np.intp)
        self._dst = _frozen([e[1] for e in pairs], dtype=np.intp)

        if strict and not check_strong_connectivity(self):
            raise NotStronglyConnected("graph is not strongly connected", states=list(states))

    @classmethod
    def complete(cls, n: int) -> "KernelGraph":
        return cls(range(n), [(i, j) for i in range(n) for j in range(n)])

    @classmethod
    def cycle(cls, n: int) -> "KernelGraph":
        return cls(range(n), [(i, (i + 1) % n) for i in range(n)])

    @property
    def states(self) -> tuple:
        return self._states

    @property
    def edges(self) -> tuple:
        """Edges as sorted ``(source index, target index)`` pairs."""
        return self._edges

    @property
    def n_states(self) -> int:
        return len(self._states)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def src(self) -> np.ndarray:
        return self._src

    @property
    def dst(self) -> np.ndarray:
        return self._dst

    def state_index(self, state) -> int:
        return self._state_index[str(state)]

    def edge_index(self, x: int, y: int) -> int:
        """Position of edge ``(x, y)`` (dense indices); ``KeyError`` if absent."""
        return self._edge_index[(x, y)]

    def has_edge(self, x: int, y: int) -> bool:
        return (x, y) in self._edge_index

    def edge_labels(self) -> list:
        return [(self._states[x], self._states[y]) for x, y in self._edges]

    def to_matrix(self, values: np.ndarray) -> np.ndarray:
        """Arrange a per-edge vector as an ``|X| x |X|`` matrix, zero off ``E``."""
        m = np.zeros((self.n_states, self.n_states))
        m[self._src, self._dst] = values
        return m

    def from_matrix(self, m: np.ndarray) -> np.ndarray:
        return np.asarray(m, dtype=float)[self._src, self._dst]

    def __eq__(self, other) -> bool:
        if not isinstance(other, KernelGraph):
            return NotImplemented
        return self._states == other._states and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._states, self._edges))

    def __repr__(self) -> str:
        return f"KernelGraph(n_states={self.n_states}, n_edges={self.n_edges})"


def require_same_graph(*graphs: KernelGraph) -> KernelGraph:
    first = graphs[0]
    for g in graphs[1:]:
        if g != first:
            raise GraphMismatch("objects live on different graphs")
    return first


def check_strong_connectivity(graph: KernelGraph) -> bool:
    """True iff every ordered pair of states is joined by a directed path.

    Runs a BFS from state 0 along ``E`` and along the reversed edges; the
    graph is strongly connected exactly when both searches reach everything.
    """
    n = graph.n_states
    fwd = [[] for _ in range(n)]
    bwd = [[] for _ in range(n)]
    for x, y in graph.edges:
        fwd[x].append(y)
        bwd[y].append(x)

    def reaches_all(adj) -> bool:
        seen = [False] * n
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return all(seen)

    return reaches_all(fwd) and reaches_all(bwd)


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector on the states of a graph."""

    graph: KernelGraph
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = _frozen(self.probs)
        if p.shape != (self.graph.n_states,):
            raise InvalidDistribution("length must equal number of states", length=p.shape)
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidDistribution("entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > ROW_SUM_TOL:
            raise InvalidDistribution("entries must sum to 1", total=float(p.sum()))
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, graph: KernelGraph) -> "Distribution":
        return cls(graph, np.full(graph.n_states, 1.0 / graph.n_states))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """Row-stochastic transition function supported exactly on ``E``.

    ``probs[k]`` is ``w(y|x)`` for the ``k``-th edge ``(x, y)``.
    """

    graph: KernelGraph
    probs: np.ndarray

    def __post_init__(self) -> None:
        w = _frozen(self.probs)
        g = self.graph
        if w.shape != (g.n_edges,):
            raise InvalidKernel("need one probability per edge", length=w.shape)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidKernel("probabilities must be strictly positive on every edge")
        rows = np.bincount(g.src, weights=w, minlength=g.n_states)
        worst = float(np.max(np.abs(rows - 1.0)))
        if worst > ROW_SUM_TOL:
            raise InvalidKernel("rows must sum to 1", max_row_error=worst)
        object.__setattr__(self, "probs", w)

    @classmethod
    def from_weights(cls, graph: KernelGraph, weights) -> "MarkovKernel":
        """Row-normalize positive per-edge weights."""
        w = np.asarray(weights, dtype=float)
        rows = np.bincount(graph.src, weights=w, minlength=graph.n_states)
        return cls(graph, w / rows[graph.src])

    @classmethod
    def uniform(cls, graph: KernelGraph) -> "MarkovKernel":
        return cls.from_weights(graph, np.ones(graph.n_edges))

    def matrix(self) -> np.ndarray:
        return self.graph.to_matrix(self.probs)

    def log_probs(self) -> np.ndarray:
        return np.log(self.probs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkovKernel):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.probs, other.probs)

    def __repr__(self) -> str:
        return f"MarkovKernel({self.graph!r}, probs={np.array2string(self.probs, precision=6)})"


@dataclass(frozen=True, eq=False)
class EdgeMeasure:
    """Probability distribution on the edges of a graph."""

    graph: KernelGraph
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = _frozen(self.probs)
        if p.shape != (self.graph.n_edges,):
            raise InvalidDistribution("need one mass per edge", length=p.shape)
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistribution("edge masses must be finite and nonnegative")
        if abs(p.sum() - 1.0) > ROW_SUM_TOL:
            raise InvalidDistribution("edge masses must sum to 1", total=float(p.sum()))
        object.__setattr__(self, "probs", p)

    def shift_residual(self) -> float:
        """``max_x |p(x,+) - p(+,x)|``; zero for measures of stationary chains."""
        return _shift_residual(self.graph, self.probs)

    def expect(self, f) -> float:
        return float(np.dot(self.probs, np.asarray(f, dtype=float)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeMeasure):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.probs, other.probs)


def _shift_residual(graph: KernelGraph, values: np.ndarray) -> float:
    out = np.bincount(graph.src, weights=values, minlength=graph.n_states)
    inn = np.bincount(graph.dst, weights=values, minlength=graph.n_states)
    return float(np.max(np.abs(out - inn)))


def gth_solve(P: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix (GTH elimination).

    Only off-diagonal entries are used and no subtraction occurs, so the
    result is accurate to rounding regardless of periodicity.
    """
    A = np.array(P, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0.0:
            raise ConvergenceFailure("GTH pivot vanished; kernel is not irreducible", step=k)
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def stationary_distribution(w: MarkovKernel) -> Distribution:
    P = w.matrix()
    p = gth_solve(P)
    residual = float(np.max(np.abs(p @ P - p)))
    if residual > STATIONARY_TOL:
        raise ConvergenceFailure("stationary residual above tolerance", residual=residual)
    return Distribution(w.graph, p)


def edge_measure(w: MarkovKernel) -> EdgeMeasure:
    """Joint law ``p_w(x) w(y|x)`` of one stationary transition."""
    p = stationary_distribution(w).probs
    return EdgeMeasure(w.graph, p[w.graph.src] * w.probs)


def kernel_from_edge_measure(p2: EdgeMeasure, tol: float = SHIFT_INVARIANCE_TOL) -> MarkovKernel:
    """Inverse of :func:`edge_measure`: condition the edge law on its source."""
    g = p2.graph
    residual = p2.shift_residual()
    if residual > tol:
        raise NotShiftInvariant("edge measure is not shift-invariant", residual=residual)
    rows = np.bincount(g.src, weights=p2.probs, minlength=g.n_states)
    if np.any(rows <= 0):
        raise ZeroRow("some state carries no outgoing mass", states=[g.states[i] for i in np.flatnonzero(rows <= 0)])
    if np.any(p2.probs <= 0):
        raise NotPositive("edge measure must be strictly positive on E")
    return MarkovKernel(g, p2.probs / rows[g.src])
