"""Exponential families of Markov kernels.

A family is given by a carrier ``C`` and basis functions ``F_1..F_d`` on the
edges; the point with natural parameter ``theta`` is the kernel obtained by
Perron-normalizing ``exp(C + sum_i theta_i F_i)``. The state term ``K_theta``
and the log-partition ``psi(theta)`` fall out of the normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import IdenticalKernels
from .function_space import EdgeFunction, StatePotential, quotient_basis, quotient_component
from .kernel_graph import KernelGraph, MarkovKernel, require_same_graph
from .pf_normalizer import delta_map, quotient_equal

RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ExponentialFamily:
    graph: KernelGraph
    carrier: EdgeFunction
    basis: tuple = field(default=())

    def __post_init__(self) -> None:
        basis = tuple(self.basis)
        require_same_graph(self.graph, self.carrier.graph, *(b.graph for b in basis))
        object.__setattr__(self, "basis", basis)
        F = np.array([b.values for b in basis]).reshape(len(basis), self.graph.n_edges)
        F.setflags(write=False)
        object.__setattr__(self, "_F", F)

    @classmethod
    def from_arrays(cls, graph: KernelGraph, carrier, basis) -> "ExponentialFamily":
        return cls(
            graph,
            EdgeFunction(graph, carrier),
            tuple(EdgeFunction(graph, b) for b in basis),
        )

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def basis_matrix(self) -> np.ndarray:
        """``d x |E|`` array, row ``i`` holding ``F_i``."""
        return self._F

    def log_weights(self, theta) -> np.ndarray:
        theta = _as_theta(theta, self.dim)
        return self.carrier.values + theta @ self._F

    def subfamily(self, indices: Sequence[int]) -> "ExponentialFamily":
        """Same carrier, keeping only the listed basis functions."""
        return ExponentialFamily(self.graph, self.carrier, tuple(self.basis[i] for i in indices))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExponentialFamily):
            return NotImplemented
        return self.carrier == other.carrier and self.basis == other.basis


@dataclass(frozen=True)
class FamilyPoint:
    theta: np.ndarray
    kernel: MarkovKernel
    psi: float
    kappa: StatePotential


def _as_theta(theta, d: int) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float)) if d else np.zeros(0)
    if theta.shape != (d,):
        raise ValueError(f"natural parameter must have length {d}, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("natural parameter must be finite")
    return theta


def kernel_at(family: ExponentialFamily, theta) -> FamilyPoint:
    theta = _as_theta(theta, family.dim)
    res = delta_map(EdgeFunction(family.graph, family.log_weights(theta)))
    theta = theta.copy()
    theta.setflags(write=False)
    return FamilyPoint(theta, res.kernel, res.log_perron, res.potential)


def log_partition(family: ExponentialFamily, theta) -> float:
    return kernel_at(family, theta).psi


def effective_dimension(family: ExponentialFamily) -> int:
    """Rank of the basis in ``F / (F_A + constants)``.

    Singular values of the projected basis are compared with ``RANK_TOL``
    times the largest singular value of the unprojected basis, so a basis
    lying entirely in ``F_A + R`` has rank 0.
    """
    if family.dim == 0:
        return 0
    F = family.basis_matrix
    scale = np.linalg.norm(F, 2)
    if scale == 0:
        return 0
    P = np.array([quotient_component(family.graph, row) for row in F])
    sv = np.linalg.svd(P, compute_uv=False)
    return int(np.sum(sv > RANK_TOL * scale))


def is_minimal(family: ExponentialFamily) -> bool:
    return effective_dimension(family) == family.dim


def full_family(graph: KernelGraph) -> ExponentialFamily:
    """The whole of ``W(X, E)`` as an exponential family of dimension ``|E| - |X|``.

    Carrier zero; basis an orthonormal frame of the complement of
    ``F_A + constants`` (QR in canonical edge order).
    """
    Q = quotient_basis(graph)
    return ExponentialFamily.from_arrays(graph, np.zeros(graph.n_edges), Q.T)


def one_dim_family_through(w0: MarkovKernel, w1: MarkovKernel) -> ExponentialFamily:
    """e-geodesic family ``t -> Gamma(w1^t w0^(1-t))`` with ``t`` as natural parameter."""
    g = require_same_graph(w0.graph, w1.graph)
    c = EdgeFunction(g, w0.log_probs())
    top = EdgeFunction(g, w1.log_probs())
    if quotient_equal(c, top):
        raise IdenticalKernels("endpoints coincide; no 1-dimensional family through them")
    return ExponentialFamily(g, c, (top - c,))

