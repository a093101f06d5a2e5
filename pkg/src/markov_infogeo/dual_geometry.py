"""Fisher metric, expectation coordinates, Legendre duality and connections.

Derivatives are central finite differences with steps relative to the
coordinate magnitude. They are deliberately independent of the closed-form
identities (Hessian of ``psi``, ``eta = grad psi`` ...) so that each one can
be checked against the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import MarkovGeometryError, NoConvergence, NotMinimal
from .exp_family import ExponentialFamily, FamilyPoint, _as_theta, is_minimal, kernel_at
from .kernel_graph import edge_measure

GRAD_STEP = 1e-5
HESS_STEP = 1e-4
CONNECTION_STEP = 1e-4
NEWTON_TOL = 1e-10
NEWTON_MAX_ITERS = 200
INITIAL_RADIUS = 2.0
MAX_RADIUS = 1e3
MIN_RADIUS = 1e-14


@dataclass(frozen=True)
class FisherMatrix:
    g: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.g + self.g.T))

    @property
    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.g - self.g.T))) if self.g.size else 0.0

    @property
    def is_positive_definite(self) -> bool:
        """False for degenerate metrics (non-minimal families)."""
        if self.g.size == 0:
            return True
        ev = self.eigenvalues
        return bool(ev[0] > 1e-9 * max(1.0, ev[-1]))

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.g)


@dataclass(frozen=True)
class NewtonResult:
    theta: np.ndarray
    iterations: int
    residual: float


def _steps(x: np.ndarray, rel: float) -> np.ndarray:
    return rel * (1.0 + np.abs(x))


def edge_law(point: FamilyPoint) -> np.ndarray:
    return edge_measure(point.kernel).probs


def expectation_param(family: ExponentialFamily, theta) -> np.ndarray:
    """``eta_i = E[F_i]`` under the edge measure of ``w_theta``."""
    return family.basis_matrix @ edge_law(kernel_at(family, theta))


def dual_potential(family: ExponentialFamily, theta) -> float:
    """``phi = theta . eta - psi``, the Legendre conjugate of ``psi``."""
    theta = _as_theta(theta, family.dim)
    pt = kernel_at(family, theta)
    eta = family.basis_matrix @ edge_law(pt)
    return float(theta @ eta - pt.psi)


def score_matrix(family: ExponentialFamily, theta) -> np.ndarray:
    """``d x |E|`` central-difference derivatives of ``log w_theta`` on each edge."""
    theta = _as_theta(theta, family.dim)
    h = _steps(theta, GRAD_STEP)
    J = np.empty((family.dim, family.graph.n_edges))
    for i in range(family.dim):
        e = np.zeros(family.dim)
        e[i] = h[i]
        up = kernel_at(family, theta + e).kernel.log_probs()
        down = kernel_at(family, theta - e).kernel.log_probs()
        J[i] = (up - down) / (2 * h[i])
    return J


def fisher_direct(family: ExponentialFamily, theta, p2: np.ndarray | None = None) -> FisherMatrix:
    """Stationary second moment of the scores, ``sum_E p2 * d_i log w * d_j log w``."""
    if p2 is None:
        p2 = edge_law(kernel_at(family, theta))
    J = score_matrix(family, theta)
    g = (J * p2) @ J.T
    return FisherMatrix(0.5 * (g + g.T))


def hessian_fd(fun: Callable[[np.ndarray], float], x, rel_step: float = HESS_STEP) -> np.ndarray:
    """Central second differences with one Richardson level (``(4 D(h/2) - D(h)) / 3``)."""
    x = np.asarray(x, dtype=float)
    d = x.size
    h = _steps(x, rel_step)
    cache: dict = {}

    def f(offsets: tuple) -> float:
        if offsets not in cache:
            cache[offsets] = fun(x + np.array(offsets) * h)
        return cache[offsets]

    def level(s: float) -> np.ndarray:
        H = np.empty((d, d))
        zero = (0.0,) * d
        for i in range(d):
            for j in range(i, d):
                if i == j:
                    up = list(zero)
                    up[i] = s
                    dn = list(zero)
                    dn[i] = -s
                    H[i, i] = (f(tuple(up)) - 2 * f(zero) + f(tuple(dn))) / (s * h[i]) ** 2
                else:
                    vals = []
                    for si, sj in ((s, s), (s, -s), (-s, s), (-s, -s)):
                        o = list(zero)
                        o[i], o[j] = si, sj
                        vals.append(f(tuple(o)))
                    H[i, j] = H[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * s * s * h[i] * h[j])
        return H

    return (4 * level(0.5) - level(1.0)) / 3


def jacobian_fd(
    fun: Callable[[np.ndarray], np.ndarray],
    x,
    rel_step: float = GRAD_STEP,
    richardson: bool = False,
) -> np.ndarray:
    """``J[a, b] = d fun_a / d x_b`` by central differences.

    With ``richardson`` the estimates at ``h`` and ``h/2`` are combined to
    cancel the ``O(h^2)`` term, for maps with large third derivatives.
    """
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)

    def central(scale: float) -> np.ndarray:
        cols = []
        for b in range(x.size):
            e = np.zeros(x.size)
            e[b] = scale * h[b]
            cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * scale * h[b]))
        return np.array(cols).T

    if not richardson:
        return central(1.0)
    return (4 * central(0.5) - central(1.0)) / 3


def fisher_hessian(family: ExponentialFamily, theta) -> FisherMatrix:
    """Hessian of the log-partition ``psi`` at ``theta``."""
    theta = _as_theta(theta, family.dim)
    H = hessian_fd(lambda t: kernel_at(family, t).psi, theta)
    return FisherMatrix(0.5 * (H + H.T))


def _trust_step(evals: np.ndarray, evecs: np.ndarray, grad: np.ndarray, radius: float) -> np.ndarray:
    """Minimizer of ``grad . s + s G s / 2`` over ``|s| <= radius`` (``G = V diag(evals) V^T``).

    Solves the secular equation ``|(G + mu I)^-1 grad| = radius`` for the
    Levenberg-Marquardt shift ``mu`` by bisection on ``log mu``.
    """
    gv = evecs.T @ grad
    lo = max(0.0, -float(evals[0])) + 1e-300

    def step(mu):
        return -(evecs @ (gv / (evals + mu)))

    if evals[0] > 0:
        s = step(0.0)
        if np.linalg.norm(s) <= radius:
            return s
    hi = max(lo, 1.0)
    while np.linalg.norm(step(hi)) > radius:
        hi *= 4.0
    for _ in range(200):
        mid = np.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        if np.linalg.norm(step(mid)) > radius:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return step(hi)


def solve_theta(
    family: ExponentialFamily,
    eta,
    theta0=None,
    tol: float = NEWTON_TOL,
    max_iters: int = NEWTON_MAX_ITERS,
) -> NewtonResult:
    """Trust-region Newton iteration for ``eta(theta) = eta``.

    Minimizes the convex function ``psi(theta) - theta . eta`` whose gradient
    is ``eta(theta) - eta`` and Hessian the Fisher matrix. Steps are confined
    to a Euclidean ball whose radius adapts to how well the quadratic model
    predicted the decrease; near-null directions of an ill-conditioned metric
    therefore cannot swamp the step, and a step is never taken into a region
    where the normalization fails.
    """
    if not is_minimal(family):
        raise NotMinimal("family basis is degenerate modulo F_A + constants", dim=family.dim)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (family.dim,):
        raise ValueError(f"expectation parameter must have length {family.dim}")
    F = family.basis_matrix
    theta = np.zeros(family.dim) if theta0 is None else _as_theta(theta0, family.dim).copy()

    pt = kernel_at(family, theta)
    p2 = edge_law(pt)
    radius = INITIAL_RADIUS
    for it in range(max_iters + 1):
        resid = F @ p2 - eta
        err = float(np.max(np.abs(resid))) if resid.size else 0.0
        if err <= tol:
            return _polish(family, eta, theta, p2, it, err)
        if it == max_iters or radius < MIN_RADIUS:
            break
        try:
            G = fisher_direct(family, theta, p2).g
        except MarkovGeometryError:
            # iterate has run off to where the normalization breaks down
            break
        evals, evecs = np.linalg.eigh(0.5 * (G + G.T))
        obj = pt.psi - theta @ eta
        while radius >= MIN_RADIUS:
            step = _trust_step(evals, evecs, resid, radius)
            predicted = -float(resid @ step + 0.5 * step @ G @ step)
            cand = theta + step
            try:
                cpt = kernel_at(family, cand)
            except MarkovGeometryError:
                radius *= 0.25
                continue
            actual = obj - (cpt.psi - cand @ eta)
            slack = 1e-13 * (1.0 + abs(obj))
            if predicted <= slack:
                # model decrease at rounding level: judge by the moment residual
                cp2 = edge_law(cpt)
                ok = float(np.max(np.abs(F @ cp2 - eta))) < err
                ratio = 1.0 if ok else 0.0
            else:
                ratio = actual / predicted
                ok = ratio > 1e-4
            size = float(np.linalg.norm(step))
            if ratio < 0.25:
                radius = 0.25 * size
            elif ratio > 0.75 and size >= 0.99 * radius:
                radius = min(2.0 * radius, MAX_RADIUS)
            if ok:
                theta, pt = cand, cpt
                p2 = edge_law(pt)
                break
    raise NoConvergence(
        "Newton iteration for theta(eta) did not converge",
        theta=theta.tolist(),
        residual=err,
        iterations=it,
    )


def _polish(family, eta, theta, p2, it, err) -> NewtonResult:
    # one extra undamped step: the stopping rule bounds the eta residual, but
    # theta errors scale with 1/lambda_min(G) so converged iterates are refined
    try:
        G = fisher_direct(family, theta, p2).g
        cand = theta - np.linalg.solve(G, family.basis_matrix @ p2 - eta)
        cerr = float(np.max(np.abs(family.basis_matrix @ edge_law(kernel_at(family, cand)) - eta)))
    except (MarkovGeometryError, np.linalg.LinAlgError):
        return NewtonResult(theta, it, err)
    if cerr <= err:
        return NewtonResult(cand, it + 1, cerr)
    return NewtonResult(theta, it, err)


def theta_from_eta(family: ExponentialFamily, eta, theta0=None, tol: float = NEWTON_TOL) -> np.ndarray:
    return solve_theta(family, eta, theta0, tol).theta


def fisher_derivative(family: ExponentialFamily, theta) -> np.ndarray:
    """``D[k, i, j] = d_k g_ij`` by central differences of :func:`fisher_direct`."""
    theta = _as_theta(theta, family.dim)
    h = _steps(theta, CONNECTION_STEP)
    d = family.dim
    D = np.empty((d, d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h[k]
        D[k] = (fisher_direct(family, theta + e).g - fisher_direct(family, theta - e).g) / (2 * h[k])
    return D


def connection_coefficients(family: ExponentialFamily, theta, which: str, coords: str = "theta") -> np.ndarray:
    """``Gamma_{ij,k}`` of the e- or m-connection in theta or eta coordinates.

    e: ``sum_E d_i d_j log w * d_k p2``;  m: ``sum_E d_i d_j p2 * d_k log w``.
    Returned array is indexed ``[i, j, k]``.
    """
    if which not in ("e", "m"):
        raise ValueError("which must be 'e' or 'm'")
    if coords not in ("theta", "eta"):
        raise ValueError("coords must be 'theta' or 'eta'")
    theta = _as_theta(theta, family.dim)
    d = family.dim

    if coords == "theta":
        xi0 = theta

        def to_theta(xi):
            return xi
    else:
        xi0 = expectation_param(family, theta)

        def to_theta(xi):
            return solve_theta(family, xi, theta0=theta, tol=1e-13).theta

    h = _steps(xi0, CONNECTION_STEP)
    cache: dict = {}

    def at(offsets: tuple) -> tuple[np.ndarray, np.ndarray]:
        if offsets not in cache:
            pt = kernel_at(family, to_theta(xi0 + np.array(offsets) * h))
            cache[offsets] = (pt.kernel.log_probs(), edge_law(pt))
        return cache[offsets]

    zero = (0,) * d

    def shifted(**moves) -> tuple:
        o = list(zero)
        for idx, s in moves.values():
            o[idx] += s
        return tuple(o)

    first_logw, first_p2 = [], []
    for k in range(d):
        (lu, pu), (ld, pd) = at(shifted(a=(k, 1))), at(shifted(a=(k, -1)))
        first_logw.append((lu - ld) / (2 * h[k]))
        first_p2.append((pu - pd) / (2 * h[k]))

    second_logw = np.empty((d, d, family.graph.n_edges))
    second_p2 = np.empty_like(second_logw)
    l0, p0 = at(zero)
    for i in range(d):
        for j in range(i, d):
            if i == j:
                (lu, pu), (ld, pd) = at(shifted(a=(i, 1))), at(shifted(a=(i, -1)))
                sl = (lu - 2 * l0 + ld) / h[i] ** 2
                sp = (pu - 2 * p0 + pd) / h[i] ** 2
            else:
                corners = [at(shifted(a=(i, si), b=(j, sj))) for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
                denom = 4 * h[i] * h[j]
                sl = (corners[0][0] - corners[1][0] - corners[2][0] + corners[3][0]) / denom
                sp = (corners[0][1] - corners[1][1] - corners[2][1] + corners[3][1]) / denom
            second_logw[i, j] = second_logw[j, i] = sl
            second_p2[i, j] = second_p2[j, i] = sp

    if which == "e":
        return np.einsum("ije,ke->ijk", second_logw, np.array(first_p2))
    return np.einsum("ije,ke->ijk", second_p2, np.array(first_logw))
