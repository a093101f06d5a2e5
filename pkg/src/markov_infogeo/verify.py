"""Randomized invariant suite behind the ``verify`` subcommand.

Each instance draws a graph, kernels and a family from its own
:class:`~markov_infogeo.rng.Xorshift64Star` stream (seeded from the run seed,
the size and the instance number), so reports do not depend on the number
of worker threads.
"""

from __future__ import annotations

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dual_geometry import (
    connection_coefficients,
    dual_potential,
    expectation_param,
    fisher_derivative,
    fisher_direct,
    fisher_hessian,
    jacobian_fd,
    solve_theta,
)
from .errors import NotInFamily
from .exp_family import effective_dimension, full_family, kernel_at, log_partition, one_dim_family_through
from .function_space import (
    EdgeFunction,
    StatePotential,
    anti_shift_from_potential,
    anti_shift_matrix,
    decompose,
    inner_product,
    marginals,
    subspace_dimensions,
)
from .geodesy import (
    divergence,
    divergence_rate,
    e_geodesic_point,
    fit_mle,
    kl_joint,
    m_geodesic_point,
    pythagorean_sides,
)
from .kernel_graph import Distribution, MarkovKernel, edge_measure, kernel_from_edge_measure, stationary_distribution
from .pf_normalizer import delta_map, gamma_normalize, quotient_equal
from .rng import Xorshift64Star, random_family, random_graph, random_kernel, random_theta

# (module, tolerance) per invariant family; errors are compared with <=
TOLERANCES = OrderedDict(
    [
        ("stationary_residual", ("kernel_graph", 1e-12)),
        ("edge_measure_shift_invariance", ("kernel_graph", 1e-12)),
        ("edge_measure_roundtrip", ("kernel_graph", 1e-10)),
        ("stationary_vs_power_limit", ("kernel_graph", 1e-8)),
        ("decomposition_orthogonality", ("function_space", 1e-12)),
        ("decomposition_linearity", ("function_space", 1e-12)),
        ("summation_by_parts", ("function_space", 1e-12)),
        ("subspace_dimensions", ("function_space", 0.0)),
        ("gamma_idempotence", ("pf_normalizer", 1e-12)),
        ("gamma_scale_equivariance", ("pf_normalizer", 1e-12)),
        ("delta_gauge_equivariance", ("pf_normalizer", 1e-10)),
        ("gamma_reconstruction", ("pf_normalizer", 1e-10)),
        ("quotient_consistency", ("pf_normalizer", 0.0)),
        ("family_point_identity", ("exp_family", 1e-10)),
        ("full_family_dimension", ("exp_family", 0.0)),
        ("full_family_surjectivity", ("exp_family", 1e-8)),
        ("psi_convexity", ("exp_family", 1e-10)),
        ("fisher_cross_oracle", ("dual_geometry", 1e-5)),
        ("eta_is_grad_psi", ("dual_geometry", 1e-6)),
        ("eta_jacobian_is_fisher", ("dual_geometry", 1e-5)),
        ("theta_jacobian_is_inverse_fisher", ("dual_geometry", 1e-4)),
        ("theta_is_grad_phi", ("dual_geometry", 1e-4)),
        ("newton_roundtrip", ("dual_geometry", 1e-8)),
        ("e_flatness_theta", ("dual_geometry", 2e-4)),
        ("m_flatness_eta", ("dual_geometry", 2e-4)),
        ("connection_duality", ("dual_geometry", 2e-4)),
        ("geodesic_endpoints", ("geodesy", 1e-12)),
        ("e_geodesic_in_family", ("geodesy", 1e-10)),
        ("divergence_forms", ("geodesy", 1e-9)),
        ("divergence_nonnegative", ("geodesy", 0.0)),
        ("kl_joint_stationary", ("geodesy", 1e-12)),
        ("pythagorean_gap", ("geodesy", 1e-8)),
        ("mle_recovery", ("geodesy", 1e-8)),
        ("mle_stationarity", ("geodesy", 1e-6)),
    ]
)

MAX_CONNECTION_DIM = 3
# smallest Fisher eigenvalue for finite-difference checks in eta-coordinates
CONNECTION_MIN_EIG = 1e-3
# theta is fixed by eta only to ~eps / lambda_min(G); below this a 1e-8 round trip is unattainable
ROUNDTRIP_MIN_EIG = 1e-5


def conditioned_point(family, theta, floor: float = CONNECTION_MIN_EIG):
    """``(family, theta)`` with ``lambda_min(G) >= floor``, falling back to ``theta = 0``.

    Finite differences in eta-coordinates step by ``~1e-4``; near the boundary
    of the moment set (where ``G`` degenerates) such steps leave the set of
    realizable moments. Returns ``(None, None)`` if neither point qualifies.
    """
    for t in (np.asarray(theta, dtype=float)[: family.dim], np.zeros(family.dim)):
        if fisher_direct(family, t).eigenvalues[0] >= floor:
            return family, t
    return None, None


def instance_rng(seed: int, size: int, index: int) -> Xorshift64Star:
    return Xorshift64Star((seed * 1_000_003 + size) * 1_000_003 + index)


def _max(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def check_instance(seed: int, size: int, index: int) -> dict:
    """Run every invariant once on a random instance; returns ``{name: error}``."""
    rng = instance_rng(seed, size, index)
    kind = "complete" if index % 2 == 0 else "sparse"
    g = random_graph(rng, size, kind)
    out: dict = {}

    # kernel_graph
    w = random_kernel(rng, g)
    w2 = random_kernel(rng, g)
    p = stationary_distribution(w).probs
    out["stationary_residual"] = _max(p @ w.matrix() - p)
    p2 = edge_measure(w)
    out["edge_measure_shift_invariance"] = max(p2.shift_residual(), abs(p2.probs.sum() - 1))
    out["edge_measure_roundtrip"] = _max(kernel_from_edge_measure(p2).probs - w.probs)
    if kind == "complete":
        Pn = np.linalg.matrix_power(w.matrix(), 4096)
        out["stationary_vs_power_limit"] = _max(Pn - p[None, :])

    # function_space
    f = EdgeFunction(g, rng.normal(size=g.n_edges))
    h = EdgeFunction(g, rng.normal(size=g.n_edges))
    dec = decompose(f)
    norm2 = inner_product(f, f)
    out["decomposition_orthogonality"] = abs(inner_product(dec.shift_part, dec.anti_part)) / norm2
    a, b = rng.normal(), rng.normal()
    dec_h = decompose(h)
    comb = decompose(f * a + h * b)
    out["decomposition_linearity"] = _max(comb.shift_part.values - (a * dec.shift_part.values + b * dec_h.shift_part.values))
    kappa = StatePotential(g, rng.normal(size=g.n_states))
    inn, outm = marginals(f)
    lhs = inner_product(f, anti_shift_from_potential(kappa))
    rhs = float((inn.values - outm.values) @ kappa.values)
    out["summation_by_parts"] = abs(lhs - rhs) / max(1.0, abs(lhs))
    dfs, dfa = subspace_dimensions(g)
    rank = np.linalg.matrix_rank(anti_shift_matrix(g))
    out["subspace_dimensions"] = float(
        (dfs, dfa) != (g.n_edges - g.n_states + 1, g.n_states - 1) or rank != g.n_states - 1
    )

    # pf_normalizer
    fpos = EdgeFunction(g, np.exp(rng.normal(size=g.n_edges)))
    r = gamma_normalize(fpos)
    out["gamma_idempotence"] = _max(gamma_normalize(EdgeFunction(g, r.kernel.probs)).kernel.probs - r.kernel.probs)
    c = float(np.exp(rng.normal()))
    rc = gamma_normalize(fpos * c)
    out["gamma_scale_equivariance"] = max(
        _max(rc.kernel.probs - r.kernel.probs), abs(rc.log_perron - r.log_perron - np.log(c))
    )
    shift = float(rng.normal())
    rd, rg = delta_map(f), delta_map(f + anti_shift_from_potential(kappa) + shift)
    out["delta_gauge_equivariance"] = max(
        _max(rd.kernel.probs - rg.kernel.probs), abs(rg.log_perron - rd.log_perron - shift)
    )
    gam = r.gamma
    rebuilt = fpos.values * gam[g.dst] / (r.perron_root * gam[g.src])
    out["gamma_reconstruction"] = _max(rebuilt / r.kernel.probs - 1)
    same = quotient_equal(f, f + anti_shift_from_potential(kappa) + shift)
    kernels_equal = _max(delta_map(f).kernel.probs - delta_map(h).kernel.probs) <= 1e-8
    out["quotient_consistency"] = float(not same or quotient_equal(f, h) != kernels_equal)

    # exp_family
    full = full_family(g)
    out["full_family_dimension"] = float(effective_dimension(full) != g.n_edges - g.n_states or full.dim != g.n_edges - g.n_states)
    if full.dim:
        theta_w = solve_theta(full, full.basis_matrix @ p2.probs).theta
        out["full_family_surjectivity"] = _max(kernel_at(full, theta_w).kernel.probs - w.probs)

    d = min(full.dim, 4)
    if d:
        fam = random_family(rng, g, d)
        th = random_theta(rng, d)
        pt = kernel_at(fam, th)
        recon = fam.log_weights(th) + pt.kappa.values[g.dst] - pt.kappa.values[g.src] - pt.psi
        out["family_point_identity"] = _max(recon - pt.kernel.log_probs())
        th2 = random_theta(rng, d)
        out["psi_convexity"] = max(
            0.0, log_partition(fam, (th + th2) / 2) - (log_partition(fam, th) + log_partition(fam, th2)) / 2
        )
        G = fisher_direct(fam, th)
        H = fisher_hessian(fam, th)
        out["fisher_cross_oracle"] = _max(G.g - H.g) + (0.0 if G.is_positive_definite else 1.0)
        psi_grad = jacobian_fd(lambda t: np.array([log_partition(fam, t)]), th)[0]
        eta = expectation_param(fam, th)
        out["eta_is_grad_psi"] = _max(psi_grad - eta)
        out["eta_jacobian_is_fisher"] = _max(jacobian_fd(lambda t: expectation_param(fam, t), th) - G.g)
        lfam, lth = conditioned_point(fam, th)
        if lfam is not None:
            leta = expectation_param(lfam, lth)
            to_theta = lambda e: solve_theta(lfam, e, theta0=lth, tol=1e-13).theta  # noqa: E731
            Ginv = np.linalg.inv(fisher_direct(lfam, lth).g)
            out["theta_jacobian_is_inverse_fisher"] = _max(jacobian_fd(to_theta, leta, richardson=True) - Ginv)
            phi_grad = jacobian_fd(lambda e: np.array([dual_potential(lfam, to_theta(e))]), leta, richardson=True)[0]
            out["theta_is_grad_phi"] = _max(phi_grad - lth)
        rfam, rth = conditioned_point(fam, th, ROUNDTRIP_MIN_EIG)
        if rfam is not None:
            out["newton_roundtrip"] = _max(solve_theta(rfam, expectation_param(rfam, rth)).theta - rth)
        cfam, cth = conditioned_point(fam.subfamily(range(min(d, MAX_CONNECTION_DIM))), th)
        if cfam is not None:
            ge = connection_coefficients(cfam, cth, "e")
            gm = connection_coefficients(cfam, cth, "m")
            out["e_flatness_theta"] = _max(ge)
            out["m_flatness_eta"] = _max(connection_coefficients(cfam, cth, "m", coords="eta"))
            dg = fisher_derivative(cfam, cth)
            out["connection_duality"] = _max(dg - (ge + np.transpose(gm, (0, 2, 1))))

    # geodesy
    ends = [
        e_geodesic_point(w, w2, 0.0).probs - w.probs,
        e_geodesic_point(w, w2, 1.0).probs - w2.probs,
        m_geodesic_point(w, w2, 0.0).probs - w.probs,
        m_geodesic_point(w, w2, 1.0).probs - w2.probs,
    ]
    out["geodesic_endpoints"] = max(_max(e) for e in ends)
    if not quotient_equal(EdgeFunction(g, w.log_probs()), EdgeFunction(g, w2.log_probs())):
        t = float(rng.normal())
        line = one_dim_family_through(w, w2)
        out["e_geodesic_in_family"] = _max(e_geodesic_point(w, w2, t).probs - kernel_at(line, [t]).kernel.probs)
    D12 = divergence_rate(w, w2)
    identical = _max(w.probs - w2.probs) <= 1e-12
    out["divergence_nonnegative"] = float(D12 < 0 or divergence_rate(w, w) != 0.0 or (D12 == 0.0) != identical)
    if full.dim:
        out["divergence_forms"] = divergence(w, w2, full).residual
        w3 = random_kernel(rng, g)
        lhs, rhs = pythagorean_sides(w, w2, w3, full)
        out["pythagorean_gap"] = abs(lhs - rhs)
    q2 = Distribution(g, np.full(g.n_states, 1.0 / g.n_states))
    n = 32
    out["kl_joint_stationary"] = abs(
        kl_joint(w, w2, stationary_distribution(w), q2, n) - (kl_joint(w, w2, stationary_distribution(w), q2, 1) + (n - 1) * D12)
    )
    if d:
        if rfam is not None:
            th_hat = fit_mle(rfam, edge_measure(kernel_at(rfam, rth).kernel))
            out["mle_recovery"] = _max(th_hat - rth)
        target = edge_measure(w)
        th_fit = fit_mle(fam, target)
        grad = jacobian_fd(lambda t: np.array([divergence_rate(w, kernel_at(fam, t).kernel)]), th_fit)[0]
        out["mle_stationarity"] = _max(grad)
    return out


def check_inputs(kernels, family=None, theta=None) -> dict:
    """Invariants that apply to user-supplied kernels and an optional family.

    Pairs of kernels are checked in the order given; family checks run at
    ``theta`` (zero by default) and, for in-family kernels, at their coordinates.
    """
    out: dict = {}

    def put(name, err):
        out[name] = max(out.get(name, 0.0), float(err))

    for w in kernels:
        g = w.graph
        p = stationary_distribution(w).probs
        put("stationary_residual", _max(p @ w.matrix() - p))
        p2 = edge_measure(w)
        put("edge_measure_shift_invariance", max(p2.shift_residual(), abs(p2.probs.sum() - 1)))
        put("edge_measure_roundtrip", _max(kernel_from_edge_measure(p2).probs - w.probs))
        put("gamma_idempotence", _max(gamma_normalize(EdgeFunction(g, w.probs)).kernel.probs - w.probs))
        put("divergence_nonnegative", float(divergence_rate(w, w) != 0.0))
        if family is not None and family.dim and family.graph == g:
            th = fit_mle(family, p2)
            grad = jacobian_fd(lambda t: np.array([divergence_rate(w, kernel_at(family, t).kernel)]), th)[0]
            put("mle_stationarity", _max(grad))
    for w, w2 in zip(kernels[:-1], kernels[1:]):
        ends = [
            e_geodesic_point(w, w2, 0.0).probs - w.probs,
            e_geodesic_point(w, w2, 1.0).probs - w2.probs,
            m_geodesic_point(w, w2, 0.0).probs - w.probs,
            m_geodesic_point(w, w2, 1.0).probs - w2.probs,
        ]
        put("geodesic_endpoints", max(_max(e) for e in ends))
        D12 = divergence_rate(w, w2)
        identical = _max(w.probs - w2.probs) <= 1e-12
        put("divergence_nonnegative", float(D12 < 0 or (D12 == 0.0) != identical))
        if family is not None and family.dim:
            try:
                put("divergence_forms", divergence(w, w2, family).residual)
            except NotInFamily:
                pass
    if family is not None and family.dim:
        th = np.zeros(family.dim) if theta is None else np.asarray(theta, dtype=float)
        G = fisher_direct(family, th)
        H = fisher_hessian(family, th)
        put("fisher_cross_oracle", _max(G.g - H.g) + (0.0 if G.is_positive_definite else 1.0))
        eta = expectation_param(family, th)
        psi_grad = jacobian_fd(lambda t: np.array([log_partition(family, t)]), th)[0]
        put("eta_is_grad_psi", _max(psi_grad - eta))
        put("eta_jacobian_is_fisher", _max(jacobian_fd(lambda t: expectation_param(family, t), th) - G.g))
        put("newton_roundtrip", _max(solve_theta(family, eta).theta - th))
        pt = kernel_at(family, th)
        put("mle_recovery", _max(fit_mle(family, edge_measure(pt.kernel)) - th))
    return out


def _aggregate(results: list, header: dict) -> dict:
    families = OrderedDict()
    for name, (module, tol) in TOLERANCES.items():
        errs = [res[name] for res in results if name in res]
        failures = sum(1 for e in errs if not e <= tol)
        families[name] = {
            "module": module,
            "tolerance": tol,
            "checks": len(errs),
            "failures": failures,
            "max_error": max(errs) if errs else 0.0,
            "passed": failures == 0 and len(errs) > 0,
        }
    ran = [f for f in families.values() if f["checks"]]
    return {**header, "families": families, "all_passed": bool(ran) and all(f["passed"] for f in ran)}


def run_verification(seed: int, sizes, instances: int = 2, workers: int = 1) -> dict:
    """Aggregate :func:`check_instance` over ``sizes x range(instances)``."""
    jobs = [(seed, int(s), i) for s in sizes for i in range(instances)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: check_instance(*job), jobs))
    else:
        results = [check_instance(*job) for job in jobs]
    report = _aggregate(results, {"seed": seed, "sizes": [int(s) for s in sizes], "instances_per_size": instances})
    # the random suite exercises every family
    report["all_passed"] = all(f["passed"] for f in report["families"].values())
    return report


def verify_inputs(kernels, family=None, theta=None) -> dict:
    """:func:`check_inputs` in the report format of :func:`run_verification`."""
    report = _aggregate([check_inputs(list(kernels), family, theta)], {"inputs": len(kernels)})
    # families that do not apply to the given inputs are left out
    report["families"] = OrderedDict((k, v) for k, v in report["families"].items() if v["checks"])
    return report
