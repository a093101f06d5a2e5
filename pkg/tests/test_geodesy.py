import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import k2_kernel
from markov_infogeo import (
    Distribution,
    EdgeMeasure,
    ExponentialFamily,
    GraphMismatch,
    KernelGraph,
    MarkovKernel,
    NotInFamily,
    NotPositive,
    NotShiftInvariant,
    UnsupportedTransition,
    bregman_divergence,
    divergence,
    divergence_rate,
    e_geodesic_point,
    edge_measure,
    empirical_edge_measure,
    expectation_param,
    fisher_direct,
    fit_mle,
    full_family,
    joint_fisher,
    kernel_at,
    kl_joint,
    m_geodesic_point,
    one_dim_family_through,
    pythagorean_gap,
    pythagorean_sides,
    sample_trajectory,
    stationary_distribution,
)
from markov_infogeo.dual_geometry import jacobian_fd
from markov_infogeo.geodesy import family_coordinates
from markov_infogeo.rng import Xorshift64Star, random_family, random_graph, random_kernel, random_theta


def brute_force_kl(w1, w2, q1, q2, n):
    """Sum over every path in X^n of P1 log(P1 / P2)."""
    P1, P2 = w1.matrix(), w2.matrix()
    total = 0.0
    for path in itertools.product(range(w1.graph.n_states), repeat=n):
        a, b = q1.probs[path[0]], q2.probs[path[0]]
        for x, y in zip(path[:-1], path[1:]):
            a *= P1[x, y]
            b *= P2[x, y]
        if a > 0:
            total += a * math.log(a / b)
    return total


def test_geodesic_endpoints(k2_pair):
    w0, w1 = k2_pair
    for point in (e_geodesic_point, m_geodesic_point):
        np.testing.assert_allclose(point(w0, w1, 0.0).probs, w0.probs, atol=1e-15)
        np.testing.assert_allclose(point(w0, w1, 1.0).probs, w1.probs, atol=1e-15)


def test_geodesic_midpoints(k2_pair):
    w0, w1 = k2_pair
    assert e_geodesic_point(w0, w1, 0.5).probs[1] == pytest.approx(1 / (1 + math.sqrt(2)), abs=1e-14)
    assert m_geodesic_point(w0, w1, 0.5).probs[1] == pytest.approx(5 / 12, abs=1e-15)


@given(st.integers(0, 10_000), st.floats(-2, 3))
def test_e_geodesic_is_one_dim_family(seed, t):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, 4, "sparse")
    w0, w1 = random_kernel(rng, g), random_kernel(rng, g)
    fam = one_dim_family_through(w0, w1)
    np.testing.assert_allclose(e_geodesic_point(w0, w1, t).probs, kernel_at(fam, [t]).kernel.probs, atol=1e-10)


@given(st.integers(0, 10_000), st.floats(0, 1))
def test_m_geodesic_mixes_edge_measures(seed, t):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, 5, "complete")
    w0, w1 = random_kernel(rng, g), random_kernel(rng, g)
    mix = t * edge_measure(w1).probs + (1 - t) * edge_measure(w0).probs
    np.testing.assert_allclose(edge_measure(m_geodesic_point(w0, w1, t)).probs, mix, atol=1e-12)


def test_m_geodesic_extrapolation_error(k2_pair):
    w0, w1 = k2_pair
    with pytest.raises(NotPositive):
        m_geodesic_point(w0, w1, 10.0)


def test_divergence_k2(k2_pair):
    w0, w1 = k2_pair
    assert divergence(w0, w1).value == pytest.approx(0.5 * math.log(9 / 8), abs=1e-15)
    assert divergence(w0, w0).value == 0.0


def test_divergence_graph_mismatch(k2):
    with pytest.raises(GraphMismatch):
        divergence(MarkovKernel.uniform(k2), MarkovKernel.uniform(KernelGraph.complete(3)))


@given(st.integers(0, 10_000), st.integers(2, 6), st.sampled_from(["complete", "sparse"]))
def test_divergence_properties(seed, n, kind):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, n, kind)
    w1, w2 = random_kernel(rng, g), random_kernel(rng, g)
    d12, d21 = divergence_rate(w1, w2), divergence_rate(w2, w1)
    assert d12 >= 0 and d21 >= 0
    assert divergence_rate(w1, w1) == 0.0
    if g.n_edges > g.n_states:
        assert d12 > 0
        assert abs(d12 - d21) > 1e-12


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_divergence_matches_bregman(seed, n):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, n, "complete")
    fam = full_family(g)
    w1, w2 = random_kernel(rng, g), random_kernel(rng, g)
    rep = divergence(w1, w2, fam)
    assert rep.residual <= 1e-9
    t1, t2 = family_coordinates(fam, w1), family_coordinates(fam, w2)
    assert bregman_divergence(fam, t1, t2) == pytest.approx(rep.value, abs=1e-9)


def test_family_coordinates_rejects_outsider(k2_family, k2):
    w = k2_kernel(0.2, 0.7)
    with pytest.raises(NotInFamily):
        family_coordinates(k2_family, w)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_kl_joint_brute_force(n):
    rng = Xorshift64Star(17)
    g = random_graph(rng, 3, "sparse")
    w1, w2 = random_kernel(rng, g), random_kernel(rng, g)
    q1 = Distribution(g, [0.2, 0.3, 0.5])
    q2 = Distribution(g, [0.6, 0.1, 0.3])
    assert kl_joint(w1, w2, q1, q2, n) == pytest.approx(brute_force_kl(w1, w2, q1, q2, n), abs=1e-13)


def test_kl_joint_one_step_is_initial_kl(k2_pair):
    w0, w1 = k2_pair
    q1 = Distribution(w0.graph, [0.3, 0.7])
    q2 = Distribution(w0.graph, [0.5, 0.5])
    expect = 0.3 * math.log(0.3 / 0.5) + 0.7 * math.log(0.7 / 0.5)
    assert kl_joint(w0, w1, q1, q2, 1) == pytest.approx(expect, abs=1e-15)


@given(st.integers(0, 10_000), st.integers(1, 200))
def test_kl_joint_stationary_identity(seed, n):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, 4, "complete")
    w1, w2 = random_kernel(rng, g), random_kernel(rng, g)
    p1 = stationary_distribution(w1)
    q2 = Distribution.uniform(g)
    expect = kl_joint(w1, w2, p1, q2, 1) + (n - 1) * divergence_rate(w1, w2)
    assert kl_joint(w1, w2, p1, q2, n) == pytest.approx(expect, abs=1e-12 * max(1, n))


def test_kl_joint_rate_converges_like_one_over_n():
    rng = Xorshift64Star(5)
    g = random_graph(rng, 4, "complete")
    w1, w2 = random_kernel(rng, g), random_kernel(rng, g)
    q1 = Distribution(g, [0.7, 0.1, 0.1, 0.1])
    q2 = Distribution.uniform(g)
    D = divergence_rate(w1, w2)
    dev = [abs(kl_joint(w1, w2, q1, q2, n) / n - D) for n in (64, 128, 256)]
    assert dev[1] <= 0.55 * dev[0]
    assert dev[2] <= 0.55 * dev[1]


def test_joint_fisher_rate():
    rng = Xorshift64Star(9)
    g = random_graph(rng, 3, "complete")
    fam = random_family(rng, g, 2)
    th = random_theta(rng, 2)
    G = fisher_direct(fam, th).g
    dev = [np.max(np.abs(joint_fisher(fam, th, n) / n - G)) for n in (64, 128, 256)]
    assert dev[1] <= 0.55 * dev[0]
    assert dev[2] <= 0.55 * dev[1]


def test_pythagorean_trivial(k2):
    fam = full_family(k2)
    w1 = k2_kernel(0.3, 0.6)
    w3 = k2_kernel(0.7, 0.2)
    lhs, rhs = pythagorean_sides(w1, w1, w3, fam)
    assert abs(lhs) <= 1e-14 and abs(rhs) <= 1e-14


@given(st.integers(0, 10_000))
def test_pythagorean_full_family_k2(seed):
    rng = Xorshift64Star(seed)
    g = KernelGraph.complete(2)
    ws = [random_kernel(rng, g, spread=1.5) for _ in range(3)]
    assert abs(pythagorean_gap(*ws, full_family(g))) <= 1e-8


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_orthogonal_foot(seed):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, 4, "complete")
    fam = random_family(rng, g, 4)
    sub = fam.subfamily([0, 1])
    w1 = kernel_at(fam, random_theta(rng, 4)).kernel
    # m-projection of w1 onto the e-flat subfamily, and a third point in it
    foot = kernel_at(sub, fit_mle(sub, edge_measure(w1))).kernel
    w3 = kernel_at(sub, random_theta(rng, 2)).kernel
    lhs, rhs = pythagorean_sides(w1, foot, w3, fam)
    assert abs(lhs) <= 1e-8
    assert abs(rhs) <= 1e-8


@given(st.integers(0, 10_000), st.integers(2, 5), st.sampled_from(["complete", "sparse"]))
def test_fit_exact_recovery(seed, n, kind):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, n, kind)
    d = min(g.n_edges - n, 3)
    if d == 0:
        return
    fam = random_family(rng, g, d)
    th = random_theta(rng, d)
    target = edge_measure(kernel_at(fam, th).kernel)
    np.testing.assert_allclose(fit_mle(fam, target), th, atol=1e-8)


@given(st.integers(0, 10_000), st.integers(2, 5))
def test_fit_full_family_reproduces_kernel(seed, n):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, n, "complete")
    w = random_kernel(rng, g)
    fam = full_family(g)
    np.testing.assert_allclose(kernel_at(fam, fit_mle(fam, edge_measure(w))).kernel.probs, w.probs, atol=1e-8)


def test_fit_minimizes_divergence():
    rng = Xorshift64Star(23)
    g = KernelGraph.complete(3)
    fam = random_family(rng, g, 2)
    w_true = kernel_at(fam, random_theta(rng, 2)).kernel
    # leave the family by perturbing the edge law, then make it shift-invariant again
    noisy = edge_measure(w_true).probs * (1 + 1e-3 * np.asarray(rng.normal(size=g.n_edges)))
    w_star = MarkovKernel.from_weights(g, noisy)
    th_hat = fit_mle(fam, edge_measure(w_star))
    best = divergence_rate(w_star, kernel_at(fam, th_hat).kernel)
    for _ in range(100):
        probe = th_hat + 0.5 * np.asarray(rng.normal(size=2))
        assert best <= divergence_rate(w_star, kernel_at(fam, probe).kernel)
    grad = jacobian_fd(lambda t: np.array([divergence_rate(w_star, kernel_at(fam, t).kernel)]), th_hat)[0]
    assert np.max(np.abs(grad)) <= 1e-6


def test_fit_rejects_bad_targets(k2_family, k2):
    with pytest.raises(NotShiftInvariant):
        fit_mle(k2_family, EdgeMeasure(k2, [0.25, 0.5, 0.0, 0.25]))


def test_empirical_alternating_path(k2):
    m = empirical_edge_measure(k2, ["0", "1", "0", "1", "0"])
    np.testing.assert_allclose(m.probs, [0, 0.5, 0.5, 0], atol=1e-15)


def test_empirical_projection_of_open_path(k2):
    m = empirical_edge_measure(k2, ["0", "0", "1"])
    assert m.shift_residual() <= 1e-14
    assert np.all(m.probs >= 0)
    assert m.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_empirical_unsupported_transition():
    g = KernelGraph.cycle(3)
    with pytest.raises(UnsupportedTransition) as info:
        empirical_edge_measure(g, ["0", "1", "0"])
    assert info.value.context["pair"] == ["1", "0"]
    with pytest.raises(UnsupportedTransition):
        empirical_edge_measure(g, ["0", "7"])


def test_long_trajectory_converges():
    rng = Xorshift64Star(2024)
    g = random_graph(rng, 4, "sparse")
    w = random_kernel(rng, g)
    traj = sample_trajectory(w, 100_000, Xorshift64Star(1))
    m = empirical_edge_measure(g, traj)
    assert np.max(np.abs(m.probs - edge_measure(w).probs)) <= 0.01


def test_sample_trajectory_is_reproducible():
    g = KernelGraph.complete(3)
    w = random_kernel(Xorshift64Star(0), g)
    a = sample_trajectory(w, 500, Xorshift64Star(42))
    b = sample_trajectory(w, 500, Xorshift64Star(42))
    assert a == b
    assert sample_trajectory(w, 5, Xorshift64Star(1), start=2)[0] == "2"


def test_fit_zero_mass_edges_allowed():
    # a trajectory that never uses an edge still gives a valid target for a full family
    g = KernelGraph.complete(2)
    fam = ExponentialFamily.from_arrays(g, np.zeros(4), [[0.0, 1.0, 0.0, 0.0]])
    m = empirical_edge_measure(g, ["0", "0", "1", "1", "0", "0", "1", "1", "0"])
    th = fit_mle(fam, m)
    assert expectation_param(fam, th)[0] == pytest.approx(m.probs[1], abs=1e-9)
