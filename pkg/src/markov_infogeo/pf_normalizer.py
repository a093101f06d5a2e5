"""Perron-Frobenius normalization of positive edge functions into Markov kernels.

``gamma_normalize`` maps a positive ``f`` on ``E`` to the unique kernel
``w(y|x) = f(x,y) gamma(y) / (Z gamma(x))`` where ``Z`` is the Perron root
of ``f`` arranged as a matrix and ``gamma`` its right Perron vector.
``delta_map`` is the same map precomposed with ``exp``, which is how every
exponential family in this package is evaluated.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, NotPositive, Overflow
from .function_space import EdgeFunction, StatePotential, quotient_component
from .kernel_graph import KernelGraph, MarkovKernel, require_same_graph

POWER_TOL = 1e-14
RESIDUAL_TOL = 1e-12
DEFAULT_MAX_ITERS = 100_000
QUOTIENT_TOL = 1e-10
MAX_SQUARINGS = 64
MAX_BALANCE_ROUNDS = 8
BALANCE_TOL = 1e-14


def max_iterations() -> int:
    env = os.environ.get("MARKOV_INFOGEO_MAX_ITERS")
    return int(env) if env else DEFAULT_MAX_ITERS


@dataclass(frozen=True)
class NormalizationResult:
    kernel: MarkovKernel
    log_perron: float
    potential: StatePotential
    iterations: int = 0
    residual: float = 0.0

    @property
    def perron_root(self) -> float:
        return float(np.exp(self.log_perron))

    @property
    def gamma(self) -> np.ndarray:
        return np.exp(self.potential.values)


def _power_vector(B: np.ndarray, max_iters: int) -> tuple[np.ndarray, int]:
    """Dominant eigenvector of the positive-shifted matrix ``B`` (sum-normalized).

    The iteration ``v <- B v`` is run in doubling blocks first (``B`` squared
    repeatedly with renormalization), which reaches the fixed point in
    ``O(log)`` matrix products; the plain iteration then polishes ``v`` until
    successive iterates differ by less than ``POWER_TOL``. Squarings and
    plain steps both count against ``max_iters``.
    """
    n = B.shape[0]
    M = B / B.sum()
    used = 0
    for _ in range(min(MAX_SQUARINGS, max_iters)):
        M2 = M @ M
        M2 /= M2.sum()
        used += 1
        done = np.max(np.abs(M2 - M)) <= POWER_TOL
        M = M2
        if done:
            break
    v = M @ np.ones(n)
    v /= v.sum()
    diff = np.inf
    for it in range(1, max_iters - used + 1):
        u = B @ v
        u /= u.sum()
        diff = np.max(np.abs(u - v))
        v = u
        if diff <= POWER_TOL * np.max(v):
            return v, used + it
    raise ConvergenceFailure("power iteration did not converge", iterations=max_iters, last_step=float(diff))


def perron_root_and_vectors(A: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, int]:
    """Perron root ``Z``, right vector ``gamma`` (``gamma[0] = 1``) and left vector.

    ``A`` must be nonnegative and irreducible. Each round balances ``A`` by
    the current estimate of ``gamma`` (``A'[x,y] = A[x,y] gamma(y) / gamma(x)``)
    and runs the shifted power iteration on ``A' + c I`` with ``c`` the max
    row sum of ``A'``. Balancing keeps the shift comparable to the Perron
    root, so badly scaled inputs do not lose their spectral gap to rounding.
    The root is the two-sided Rayleigh quotient ``l A' v / l v``.
    """
    n = A.shape[0]
    cap = max_iterations()
    gamma = np.ones(n)
    iters = 0
    for _ in range(MAX_BALANCE_ROUNDS):
        Ab = A * gamma[None, :] / gamma[:, None]
        c = float(Ab.sum(axis=1).max())
        v, it = _power_vector(Ab + c * np.eye(n), cap)
        iters += it
        if np.any(v <= 0):
            raise ConvergenceFailure("Perron vector has nonpositive entries; matrix is reducible")
        gamma = gamma * (v / v[0])
        if np.max(np.abs(v / v.mean() - 1.0)) <= BALANCE_TOL:
            break
    Ab = A * gamma[None, :] / gamma[:, None]
    c = float(Ab.sum(axis=1).max())
    left_b, it = _power_vector((Ab + c * np.eye(n)).T.copy(), cap)
    iters += it
    if np.any(left_b <= 0):
        raise ConvergenceFailure("left Perron vector has nonpositive entries; matrix is reducible")
    rows = Ab.sum(axis=1)
    Z = float(left_b @ rows / left_b.sum())
    left = left_b / gamma
    return Z, gamma / gamma[0], left / left.sum(), iters


def gamma_normalize(f: EdgeFunction) -> NormalizationResult:
    """Normalize a strictly positive edge function into a Markov kernel."""
    if np.any(f.values <= 0) or not np.all(np.isfinite(f.values)):
        raise NotPositive("edge function must be finite and strictly positive")
    return _normalize(f.graph, f.values, log_shift=0.0)


def _normalize(graph: KernelGraph, values: np.ndarray, log_shift: float) -> NormalizationResult:
    A = graph.to_matrix(values)
    Z, gamma, _, iters = perron_root_and_vectors(A)
    # componentwise relative residual: it bounds the row-sum error of w
    residual = float(np.max(np.abs(A @ gamma / (Z * gamma) - 1.0)))
    if residual > RESIDUAL_TOL:
        raise ConvergenceFailure("Perron eigen-residual above tolerance", residual=residual, iterations=iters)
    src, dst = graph.src, graph.dst
    w = values * gamma[dst]
    # dividing by (A gamma)(x) instead of Z gamma(x) makes rows sum to 1 to rounding
    w = w / (A @ gamma)[src]
    kernel = MarkovKernel(graph, w)
    potential = StatePotential(graph, np.log(gamma))
    return NormalizationResult(kernel, float(np.log(Z)) + log_shift, potential, iters, residual)


def delta_map(f: EdgeFunction) -> NormalizationResult:
    """``gamma_normalize(exp(f))``; ``log w = f + kappa(y) - kappa(x) - psi``.

    ``max(f)`` is subtracted before exponentiating and added back to ``psi``.
    """
    v = f.values
    if not np.all(np.isfinite(v)):
        raise Overflow("edge function has non-finite entries")
    top = float(v.max())
    expv = np.exp(v - top)
    if np.any(expv <= 0):
        raise Overflow("exp(f - max f) underflows to zero; rescale the function", spread=float(top - v.min()))
    return _normalize(f.graph, expv, log_shift=top)


def quotient_equal(f1: EdgeFunction, f2: EdgeFunction, tol: float = QUOTIENT_TOL) -> bool:
    """True iff ``f1 - f2`` lies in ``F_A + constants`` (same kernel under :func:`delta_map`)."""
    g = require_same_graph(f1.graph, f2.graph)
    rest = quotient_component(g, f1.values - f2.values)
    return bool(np.max(np.abs(rest)) <= tol)
