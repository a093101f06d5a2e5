"""Information geometry of irreducible Markov kernels on a fixed directed graph.

Kernels supported on a strongly connected graph form a dually flat manifold:
exponential families are images of affine sets of edge functions under
Perron normalization, the log Perron root is the convex potential, and the
KL divergence rate is its Bregman divergence.
"""

from .dual_geometry import (
    FisherMatrix,
    NewtonResult,
    connection_coefficients,
    dual_potential,
    expectation_param,
    fisher_derivative,
    fisher_direct,
    fisher_hessian,
    solve_theta,
    theta_from_eta,
)
from .errors import (
    ConvergenceFailure,
    GraphMismatch,
    IdenticalKernels,
    InvalidDistribution,
    InvalidGraph,
    InvalidKernel,
    MarkovGeometryError,
    NoConvergence,
    NotInFamily,
    NotMinimal,
    NotPositive,
    NotShiftInvariant,
    NotStronglyConnected,
    Overflow,
    UnsupportedTransition,
    ZeroRow,
)
from .exp_family import (
    ExponentialFamily,
    FamilyPoint,
    effective_dimension,
    full_family,
    is_minimal,
    kernel_at,
    log_partition,
    one_dim_family_through,
)
from .function_space import (
    Decomposition,
    EdgeFunction,
    StatePotential,
    anti_shift_from_potential,
    decompose,
    inner_product,
    marginals,
    quotient_basis,
    subspace_dimensions,
)
from .geodesy import (
    DivergenceReport,
    bregman_divergence,
    divergence,
    divergence_rate,
    e_geodesic_point,
    empirical_edge_measure,
    fit_mle,
    joint_fisher,
    kl_joint,
    m_geodesic_point,
    pythagorean_gap,
    pythagorean_sides,
    sample_trajectory,
)
from .kernel_graph import (
    Distribution,
    EdgeMeasure,
    KernelGraph,
    MarkovKernel,
    check_strong_connectivity,
    edge_measure,
    kernel_from_edge_measure,
    stationary_distribution,
)
from .pf_normalizer import NormalizationResult, delta_map, gamma_normalize, quotient_equal
from .rng import Xorshift64Star

__version__ = "0.1.0"
