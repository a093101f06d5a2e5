"""Edge functions and the orthogonal split into shift- and anti-shift-invariant parts."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernel_graph import KernelGraph, _frozen, require_same_graph


@dataclass(frozen=True, eq=False)
class EdgeFunction:
    """Real-valued function on ``E``, one value per edge in canonical order."""

    graph: KernelGraph
    values: np.ndarray

    def __post_init__(self) -> None:
        v = _frozen(self.values)
        if v.shape != (self.graph.n_edges,):
            raise ValueError(f"expected {self.graph.n_edges} edge values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, graph: KernelGraph) -> "EdgeFunction":
        return cls(graph, np.zeros(graph.n_edges))

    @classmethod
    def indicator(cls, graph: KernelGraph, x, y) -> "EdgeFunction":
        """``delta_{(x,y)}`` for state identifiers ``x``, ``y``."""
        v = np.zeros(graph.n_edges)
        v[graph.edge_index(graph.state_index(x), graph.state_index(y))] = 1.0
        return cls(graph, v)

    def _other(self, other) -> np.ndarray:
        if isinstance(other, EdgeFunction):
            require_same_graph(self.graph, other.graph)
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other) -> "EdgeFunction":
        return EdgeFunction(self.graph, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> "EdgeFunction":
        return EdgeFunction(self.graph, self.values - self._other(other))

    def __neg__(self) -> "EdgeFunction":
        return EdgeFunction(self.graph, -self.values)

    def __mul__(self, c: float) -> "EdgeFunction":
        return EdgeFunction(self.graph, float(c) * self.values)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeFunction):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class StatePotential:
    """Real-valued function ``kappa`` on the states."""

    graph: KernelGraph
    values: np.ndarray

    def __post_init__(self) -> None:
        v = _frozen(self.values)
        if v.shape != (self.graph.n_states,):
            raise ValueError(f"expected {self.graph.n_states} state values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def gauged(self) -> "StatePotential":
        """Shift so the first state has potential 0."""
        return StatePotential(self.graph, self.values - self.values[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, StatePotential):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class Decomposition:
    shift_part: EdgeFunction
    anti_part: EdgeFunction
    potential: StatePotential


def marginals(f: EdgeFunction) -> tuple[StatePotential, StatePotential]:
    """In- and out-marginals ``(f(+, .), f(., +))``."""
    g = f.graph
    inn = np.bincount(g.dst, weights=f.values, minlength=g.n_states)
    out = np.bincount(g.src, weights=f.values, minlength=g.n_states)
    return StatePotential(g, inn), StatePotential(g, out)


def inner_product(f1: EdgeFunction, f2: EdgeFunction) -> float:
    require_same_graph(f1.graph, f2.graph)
    return float(np.dot(f1.values, f2.values))


def anti_shift_from_potential(kappa: StatePotential) -> EdgeFunction:
    g = kappa.graph
    return EdgeFunction(g, kappa.values[g.dst] - kappa.values[g.src])


def anti_shift_matrix(graph: KernelGraph) -> np.ndarray:
    """``|E| x (|X|-1)`` matrix whose column ``x-1`` is ``kappa = delta_x`` mapped to ``F_A``.

    The first state is dropped to pin the additive constant of ``kappa``.
    """
    return _anti_shift_matrix(graph).copy()


@lru_cache(maxsize=256)
def _anti_shift_matrix(graph: KernelGraph) -> np.ndarray:
    n = graph.n_states
    B = np.zeros((graph.n_edges, n))
    rows = np.arange(graph.n_edges)
    B[rows, graph.dst] += 1.0
    B[rows, graph.src] -= 1.0
    B = B[:, 1:]
    B.setflags(write=False)
    return B


@lru_cache(maxsize=256)
def _quotient_basis(graph: KernelGraph) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of ``F_A + constants``.

    This complement equals ``F_S`` intersected with the orthogonal complement
    of the constant function; it has dimension ``|E| - |X|``.
    """
    n, m = graph.n_states, graph.n_edges
    M = np.hstack([_anti_shift_matrix(graph), np.ones((m, 1)), np.eye(m)])
    Q, _ = np.linalg.qr(M)
    Q = np.ascontiguousarray(Q[:, n:m])
    Q.setflags(write=False)
    return Q


def quotient_basis(graph: KernelGraph) -> np.ndarray:
    return _quotient_basis(graph).copy()


def quotient_component(graph: KernelGraph, values: np.ndarray) -> np.ndarray:
    """Orthogonal projection of edge values onto the complement of ``F_A + R``.

    Two edge functions define the same kernel under ``exp`` + Perron
    normalization iff their difference has zero quotient component.
    """
    Q = _quotient_basis(graph)
    return Q @ (Q.T @ np.asarray(values, dtype=float))


def decompose(f: EdgeFunction) -> Decomposition:
    """Split ``f = f_S + f_A`` with ``f_A`` generated by a gauge-fixed potential.

    ``f_A`` is the least-squares projection of ``f`` onto the span of the
    potential-difference functions; the residual is shift-invariant because
    ``F_S`` is the orthogonal complement of ``F_A``.
    """
    g = f.graph
    B = _anti_shift_matrix(g)
    coef, *_ = np.linalg.lstsq(B, f.values, rcond=None)
    kappa = StatePotential(g, np.concatenate([[0.0], coef]))
    anti = anti_shift_from_potential(kappa)
    shift = EdgeFunction(g, f.values - anti.values)
    return Decomposition(shift, anti, kappa)


def subspace_dimensions(graph: KernelGraph) -> tuple[int, int]:
    """``(dim F_S, dim F_A)``, cross-checked against the rank of the ``F_A`` basis."""
    dim_fa = graph.n_states - 1
    dim_fs = graph.n_edges - graph.n_states + 1
    rank_fa = int(np.linalg.matrix_rank(_anti_shift_matrix(graph)))
    if rank_fa != dim_fa:
        raise AssertionError(f"F_A basis has rank {rank_fa}, expected {dim_fa}")
    return dim_fs, dim_fa


def shift_invariant_basis(graph: KernelGraph) -> np.ndarray:
    """Orthonormal basis (columns) of ``F_S``, the null space of the marginal map."""
    B = _anti_shift_matrix(graph)
    m = graph.n_edges
    Q, _ = np.linalg.qr(np.hstack([B, np.eye(m)]))
    return Q[:, B.shape[1] : m]
