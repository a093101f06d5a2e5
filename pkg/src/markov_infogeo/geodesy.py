"""Geodesics, the canonical divergence, and moment-matching fits.

The divergence between two kernels on the same graph is the KL divergence
rate of the corresponding stationary chains. Inside an exponential family it
coincides with the Bregman divergence of the log-partition, which is what
makes the Pythagorean relation and the m-projection work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dual_geometry import edge_law, hessian_fd, solve_theta
from .errors import (
    MarkovGeometryError,
    NotInFamily,
    NotPositive,
    NotShiftInvariant,
    UnsupportedTransition,
)
from .exp_family import ExponentialFamily, kernel_at
from .function_space import EdgeFunction, decompose
from .kernel_graph import (
    Distribution,
    EdgeMeasure,
    KernelGraph,
    MarkovKernel,
    edge_measure,
    kernel_from_edge_measure,
    require_same_graph,
    stationary_distribution,
)
from .pf_normalizer import delta_map

MLE_SHIFT_TOL = 1e-8
IN_FAMILY_TOL = 1e-8
COORD_TOL = 1e-13


@dataclass(frozen=True)
class DivergenceReport:
    value: float
    form: str = "direct"
    residual: float | None = None
    bregman: float | None = None


def e_geodesic_point(w0: MarkovKernel, w1: MarkovKernel, t: float) -> MarkovKernel:
    """Perron normalization of ``w1^t w0^(1-t)``; defined for every real ``t``."""
    g = require_same_graph(w0.graph, w1.graph)
    t = float(t)
    logs = t * w1.log_probs() + (1.0 - t) * w0.log_probs()
    return delta_map(EdgeFunction(g, logs)).kernel


def m_geodesic_point(w0: MarkovKernel, w1: MarkovKernel, t: float) -> MarkovKernel:
    """Kernel whose edge measure is ``t p2(w1) + (1-t) p2(w0)``."""
    g = require_same_graph(w0.graph, w1.graph)
    t = float(t)
    mix = t * edge_measure(w1).probs + (1.0 - t) * edge_measure(w0).probs
    if np.any(mix <= 0):
        raise NotPositive("mixed edge measure leaves the simplex; t is too far outside [0, 1]", t=t)
    mix = mix / mix.sum()
    return kernel_from_edge_measure(EdgeMeasure(g, mix))


def _row_kl(w1: MarkovKernel, w2: MarkovKernel) -> np.ndarray:
    """``KL(w1(.|x) || w2(.|x))`` per state, as a sum of nonnegative terms.

    ``w1 log(w1/w2)`` is rewritten as ``w1 (expm1(a) - a)`` with
    ``a = log(w2/w1)``; the added ``w2 - w1`` terms cancel over each row,
    and every summand is nonnegative, so the result never dips below zero.
    """
    g = w1.graph
    a = w2.log_probs() - w1.log_probs()
    terms = w1.probs * (np.expm1(a) - a)
    return np.bincount(g.src, weights=terms, minlength=g.n_states)


def _kl(q1: np.ndarray, q2: np.ndarray) -> float:
    a = np.log(q2) - np.log(q1)
    return float(np.sum(q1 * (np.expm1(a) - a)))


def divergence_rate(w1: MarkovKernel, w2: MarkovKernel) -> float:
    require_same_graph(w1.graph, w2.graph)
    return float(stationary_distribution(w1).probs @ _row_kl(w1, w2))


def family_coordinates(family: ExponentialFamily, w: MarkovKernel, theta0=None) -> np.ndarray:
    """Natural parameter of a kernel that belongs to ``family``.

    Moment matching gives the m-projection of ``w``; it is accepted only if
    it reproduces ``w`` to ``IN_FAMILY_TOL``.
    """
    require_same_graph(family.graph, w.graph)
    eta = family.basis_matrix @ edge_measure(w).probs
    try:
        theta = solve_theta(family, eta, theta0, tol=COORD_TOL).theta
    except MarkovGeometryError as exc:
        raise NotInFamily("could not recover coordinates", reason=exc.code) from exc
    gap = float(np.max(np.abs(kernel_at(family, theta).kernel.probs - w.probs)))
    if gap > IN_FAMILY_TOL:
        raise NotInFamily("kernel does not lie in the family", gap=gap)
    return theta


def bregman_divergence(family: ExponentialFamily, theta1, theta2) -> float:
    """``phi(theta1) + psi(theta2) - eta(theta1) . theta2``."""
    p1 = kernel_at(family, theta1)
    eta1 = family.basis_matrix @ edge_law(p1)
    psi2 = kernel_at(family, theta2).psi
    phi1 = float(np.dot(theta1, eta1) - p1.psi)
    return float(phi1 + psi2 - eta1 @ np.asarray(theta2, dtype=float))


def divergence(w1: MarkovKernel, w2: MarkovKernel, family: ExponentialFamily | None = None) -> DivergenceReport:
    """KL divergence rate ``sum_E p2(w1) log(w1/w2)`` in nats.

    With ``family`` the Bregman form is evaluated at the recovered natural
    parameters and the gap between the two forms is reported as ``residual``.
    """
    value = divergence_rate(w1, w2)
    if family is None:
        return DivergenceReport(value)
    t1 = family_coordinates(family, w1)
    t2 = family_coordinates(family, w2, theta0=t1)
    breg = bregman_divergence(family, t1, t2)
    return DivergenceReport(value, "bregman", abs(value - breg), breg)


def kl_joint(w1: MarkovKernel, w2: MarkovKernel, q1: Distribution, q2: Distribution, n: int) -> float:
    """KL divergence between the laws of ``(x_1..x_n)`` under ``(q1, w1)`` and ``(q2, w2)``.

    Chain rule: ``KL(q1||q2) + sum_{t=1}^{n-1} m_t . rowKL``, with ``m_t`` the
    marginal of ``x_t`` under ``(q1, w1)``.
    """
    require_same_graph(w1.graph, w2.graph, q1.graph, q2.graph)
    if n < 1:
        raise ValueError("n must be at least 1")
    if np.any(q1.probs <= 0) or np.any(q2.probs <= 0):
        raise NotPositive("initial distributions must be strictly positive")
    r = _row_kl(w1, w2)
    P = w1.matrix()
    total = _kl(q1.probs, q2.probs)
    m = q1.probs.copy()
    for _ in range(n - 1):
        total += m @ r
        m = m @ P
    return float(total)


def joint_fisher(family: ExponentialFamily, theta, n: int) -> np.ndarray:
    """Fisher matrix of the ``n``-step joint law with stationary initial law.

    Computed as the Hessian in ``theta'`` at ``theta' = theta`` of
    ``kl_joint(w_theta, w_theta', p_theta, p_theta', n)``.
    """
    theta = np.asarray(theta, dtype=float)
    w = kernel_at(family, theta).kernel
    p = stationary_distribution(w)

    def kl(t2):
        w2 = kernel_at(family, t2).kernel
        return kl_joint(w, w2, p, stationary_distribution(w2), n)

    H = hessian_fd(kl, theta)
    return 0.5 * (H + H.T)


def pythagorean_sides(w1: MarkovKernel, w2: MarkovKernel, w3: MarkovKernel, family: ExponentialFamily) -> tuple[float, float]:
    """``(D12 + D23 - D13, (eta1 - eta2) . (theta3 - theta2))``."""
    lhs = divergence_rate(w1, w2) + divergence_rate(w2, w3) - divergence_rate(w1, w3)
    F = family.basis_matrix
    t2 = family_coordinates(family, w2)
    t3 = family_coordinates(family, w3, theta0=t2)
    # membership check only: raises NotInFamily; w1 then enters through eta alone
    family_coordinates(family, w1, theta0=t2)
    eta1 = F @ edge_measure(w1).probs
    eta2 = F @ edge_measure(w2).probs
    rhs = float((eta1 - eta2) @ (t3 - t2))
    return float(lhs), rhs


def pythagorean_gap(w1: MarkovKernel, w2: MarkovKernel, w3: MarkovKernel, family: ExponentialFamily) -> float:
    lhs, rhs = pythagorean_sides(w1, w2, w3, family)
    return lhs - rhs


def fit_mle(family: ExponentialFamily, target: EdgeMeasure, theta0=None) -> np.ndarray:
    """m-projection of ``target`` onto ``family`` by moment matching."""
    require_same_graph(family.graph, target.graph)
    residual = target.shift_residual()
    if residual > MLE_SHIFT_TOL:
        raise NotShiftInvariant("target edge measure is not shift-invariant", residual=residual)
    if np.any(target.probs < 0):
        raise NotPositive("target edge measure has negative mass")
    eta = family.basis_matrix @ target.probs
    return solve_theta(family, eta, theta0).theta


def empirical_edge_measure(graph: KernelGraph, trajectory: Sequence, max_rounds: int = 100) -> EdgeMeasure:
    """Transition-pair frequencies made shift-invariant.

    Raw frequencies violate shift-invariance at the two endpoints. The
    ``F_A`` component is removed by least squares, negatives are clipped and
    the result renormalized; clip and projection alternate until the shift
    residual is at rounding level (one round unless clipping was needed).
    """
    if len(trajectory) < 2:
        raise ValueError("trajectory needs at least two states")
    try:
        idx = [graph.state_index(s) for s in trajectory]
    except KeyError as exc:
        raise UnsupportedTransition("trajectory visits an unknown state", state=str(exc.args[0])) from None
    counts = np.zeros(graph.n_edges)
    for x, y in zip(idx[:-1], idx[1:]):
        if not graph.has_edge(x, y):
            raise UnsupportedTransition("transition not in E", pair=[graph.states[x], graph.states[y]])
        counts[graph.edge_index(x, y)] += 1.0
    v = counts / counts.sum()
    for _ in range(max_rounds):
        v = decompose(EdgeFunction(graph, v)).shift_part.values
        v = np.clip(v, 0.0, None)
        v = v / v.sum()
        if EdgeMeasure(graph, v).shift_residual() <= 1e-14:
            break
    return EdgeMeasure(graph, v)


def sample_trajectory(w: MarkovKernel, n: int, rng, start: int | None = None) -> list[str]:
    """``n`` states of the chain driven by ``w``; starts from the stationary law by default."""
    g = w.graph
    targets, cums = [], []
    for x in range(g.n_states):
        ks = np.flatnonzero(g.src == x)
        c = np.cumsum(w.probs[ks])
        c[-1] = 1.0
        targets.append(g.dst[ks])
        cums.append(c)
    if start is None:
        pc = np.cumsum(stationary_distribution(w).probs)
        pc[-1] = 1.0
        x = int(np.searchsorted(pc, rng.random(), side="right"))
    else:
        x = int(start)
    u = np.asarray(rng.random(size=n - 1)).ravel()
    path = [x]
    for k in range(n - 1):
        x = int(targets[x][np.searchsorted(cums[x], u[k], side="right")])
        path.append(x)
    return [g.states[i] for i in path]
