"""Seeded, platform-independent randomness for verification runs.

``Xorshift64Star`` is Vigna's xorshift64* generator: shifts (12, 25, 27) and
output multiplier ``0x2545F4914F6CDD1D``. Seeds are expanded with one step
of splitmix64 (increment ``0x9E3779B97F4A7C15``, multipliers
``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``) so that small integer
seeds give well-mixed nonzero states. Only integer arithmetic is involved,
so streams are identical across platforms.

The instance builders accept either this generator or a
``numpy.random.Generator``; both expose ``random``, ``normal`` and
``integers`` with matching signatures.
"""

from __future__ import annotations

import math

import numpy as np

from .exp_family import ExponentialFamily
from .function_space import quotient_basis
from .kernel_graph import KernelGraph, MarkovKernel, check_strong_connectivity

MASK64 = (1 << 64) - 1
MAX_BASIS_COND = 10.0


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Xorshift64Star:
    def __init__(self, seed: int) -> None:
        state = splitmix64(int(seed) & MASK64)
        self._state = state or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def _uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def random(self, size=None):
        """Uniform floats in ``[0, 1)`` with 53 random bits."""
        if size is None:
            return self._uniform()
        n = int(np.prod(size))
        return np.array([self._uniform() for _ in range(n)]).reshape(size)

    def _gauss(self) -> float:
        # Box-Muller; 1 - u keeps the log argument in (0, 1]
        u1 = 1.0 - self._uniform()
        u2 = self._uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal(self, loc=0.0, scale=1.0, size=None):
        if size is None:
            return loc + scale * self._gauss()
        n = int(np.prod(size))
        return loc + scale * np.array([self._gauss() for _ in range(n)]).reshape(size)

    def integers(self, low: int, high: int | None = None) -> int:
        """Integer in ``[low, high)``; unbiased via rejection."""
        if high is None:
            low, high = 0, low
        span = high - low
        if span <= 0:
            raise ValueError("empty range")
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            r = self.next_u64()
            if r < limit:
                return low + r % span


def permutation(rng, n: int) -> list[int]:
    items = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        items[i], items[j] = items[j], items[i]
    return items


def random_graph(rng, n: int, kind: str = "complete", density: float = 0.3) -> KernelGraph:
    """Complete graph, or a random Hamiltonian cycle plus extra edges (``kind="sparse"``)."""
    if kind == "complete":
        return KernelGraph.complete(n)
    if kind != "sparse":
        raise ValueError(f"unknown graph kind {kind!r}")
    order = permutation(rng, n)
    edges = {(order[i], order[(i + 1) % n]) for i in range(n)}
    for x in range(n):
        for y in range(n):
            if (x, y) not in edges and rng.random() < density:
                edges.add((x, y))
    g = KernelGraph(range(n), sorted(edges))
    assert check_strong_connectivity(g)
    return g


def random_kernel(rng, graph: KernelGraph, spread: float = 1.0) -> MarkovKernel:
    """Row-normalized ``exp(spread * N(0,1))`` weights."""
    return MarkovKernel.from_weights(graph, np.exp(spread * np.asarray(rng.normal(size=graph.n_edges))))


def random_family(rng, graph: KernelGraph, d: int, scale: float = 1.0, max_cond: float = MAX_BASIS_COND) -> ExponentialFamily:
    """Gaussian carrier and basis; basis rows scaled by ``scale / sqrt(d)``.

    The scaling keeps ``sum_i theta_i F_i`` of unit order for ``theta`` of
    unit order. Bases whose image in ``F / (F_A + constants)`` has condition
    number above ``max_cond`` are redrawn: such families are minimal only
    up to rounding and their metric is numerically singular.
    """
    max_d = graph.n_edges - graph.n_states
    if not 0 <= d <= max_d:
        raise ValueError(f"d must lie in [0, {max_d}] for this graph")
    carrier = 0.5 * np.asarray(rng.normal(size=graph.n_edges))
    Q = quotient_basis(graph)
    while True:
        basis = (scale / math.sqrt(max(d, 1))) * np.asarray(rng.normal(size=(d, graph.n_edges))).reshape(d, graph.n_edges)
        if d == 0:
            break
        sv = np.linalg.svd(basis @ Q, compute_uv=False)
        if sv[-1] > 0 and sv[0] / sv[-1] <= max_cond:
            break
    return ExponentialFamily.from_arrays(graph, carrier, basis)


def random_theta(rng, d: int, scale: float = 1.0) -> np.ndarray:
    return scale * np.asarray(rng.normal(size=d), dtype=float).reshape(d)
