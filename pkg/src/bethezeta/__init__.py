"""Belief propagation, Bethe free energy and graph zeta diagnostics.

The package operates on factor hypergraphs: variables live on vertices,
interactions on hyperedges (factors).  Messages, beliefs and free
energies are parametrized through exponential families (multinomial,
binary spin, Gaussian and fixed-mean Gaussian), and the directed-edge
structure of the hypergraph carries the matrix-weighted zeta function
that ties the update map of loopy BP to the Hessian of the Bethe free
energy.
"""

from .hypergraph import (
    FactorGraph,
    PrimeCycle,
    build_factor_graph,
    connected_components,
    euler_number,
    feed_pairs,
    nullity,
    prime_cycles,
    spanning_tree_count_bipartite,
    spanning_tree_count_graph,
)
from .families import (
    DiscreteFactorFamily,
    DiscreteVertexFamily,
    FixedMeanGaussianPairFamily,
    FixedMeanGaussianVertexFamily,
    GaussianPairFamily,
    GaussianVertexFamily,
    InferenceFamily,
    binary_vertex,
    correlation_block,
    marginalize_factor,
    multinomial_vertex,
)
from .models import ModelSpec
from .zeta import (
    BlockEdgeMatrix,
    EdgeWeights,
    directed_edge_matrix,
    hashimoto_limit,
    ihara_bass_factorization,
    ihara_bass_graph,
    iota_decomposition_residual,
    nonbacktracking_matrix,
    pf_bounds,
    spectral_radius,
    spectrum,
    zeta_determinant,
    zeta_euler_truncated,
)
from .lbp import (
    MessageSet,
    beliefs,
    factor_belief_expectations,
    fixed_point_residual,
    init_messages,
    linearization,
    run,
    update_damped,
    update_parallel,
    update_sequential,
)
from .bethe import (
    HessianReport,
    PseudomarginalPoint,
    bethe_free_energy,
    bethe_zeta_residual,
    convexity_classify,
    correlation_weights_from_point,
    gibbs_free_energy_bruteforce,
    hessian,
    lift_to_model_surface,
    messages_from_point,
    pd_region_member,
    positive_definiteness_certificate,
    restricted_gradient,
    restricted_hessian,
    sample_interior_point,
    stationarity_residual,
    tree_factorization,
    weights_from_point,
)
from .diagnostics import (
    StabilityReport,
    correlation_bound_weight,
    potential_strength_weight,
    stability_classify,
    trajectory,
    uniqueness_certificate,
)

__version__ = "0.1.0"
