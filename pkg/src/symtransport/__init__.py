"""Symmetric multi-marginal optimal transport on discrete measures.

Exact Kantorovich solvers with certified dual potentials, cyclic
symmetrization of plans and costs, searches over measure-preserving
m-involutions, polar factorizations of sampled vector fields, and tabulated
monotone-operator constructions.
"""

__version__ = "0.1.0"

from .costs import (
    CostTensor,
    LazyCost,
    SampledVectorField,
    embed_graph_m3,
    quadratic_cost,
    reduction_identity_residual,
    symmetrize_cost,
    vector_field_cost,
)
from .duality import (
    DualPotentials,
    c_transform,
    certificate_report,
    equivariant_duals,
    extract_duals,
    gs_potential_maps,
    graph_test,
    slackness_report,
)
from .involution import (
    BrenierPolar,
    InvolutionSearch,
    MInvolution,
    best_involution,
    characterization_check,
    enumerate_m_involutions,
    involution_objective,
    polar_brenier,
    polar_hamiltonian,
    realize_plan_as_involution,
    swap_involution,
)
from .measures import (
    CouplingPlan,
    DiscreteMeasure,
    cyclic_shift_plan,
    marginal,
    pushforward,
    symmetrize_plan,
)
from .monotone import (
    FitzpatrickFunction,
    GraphSample,
    GridFunction,
    antisymmetrize,
    fitzpatrick,
    is_m_cyclically_monotone,
    is_monotone,
    monotone_equivalence_report,
    partial_legendre,
    selfdual_interpolation,
)
from .transport import (
    KantorovichSolver,
    SymmetricKantorovichSolver,
    sinkhorn_mm,
    solve_assignment,
    solve_mm,
    solve_sym,
    wasserstein2,
)

__all__ = [
    "CostTensor",
    "LazyCost",
    "SampledVectorField",
    "embed_graph_m3",
    "quadratic_cost",
    "reduction_identity_residual",
    "symmetrize_cost",
    "vector_field_cost",
    "DualPotentials",
    "c_transform",
    "certificate_report",
    "equivariant_duals",
    "extract_duals",
    "gs_potential_maps",
    "graph_test",
    "slackness_report",
    "BrenierPolar",
    "InvolutionSearch",
    "MInvolution",
    "best_involution",
    "characterization_check",
    "enumerate_m_involutions",
    "involution_objective",
    "polar_brenier",
    "polar_hamiltonian",
    "realize_plan_as_involution",
    "swap_involution",
    "CouplingPlan",
    "DiscreteMeasure",
    "cyclic_shift_plan",
    "marginal",
    "pushforward",
    "symmetrize_plan",
    "FitzpatrickFunction",
    "GraphSample",
    "GridFunction",
    "antisymmetrize",
    "fitzpatrick",
    "is_m_cyclically_monotone",
    "is_monotone",
    "monotone_equivalence_report",
    "partial_legendre",
    "selfdual_interpolation",
    "KantorovichSolver",
    "SymmetricKantorovichSolver",
    "sinkhorn_mm",
    "solve_assignment",
    "solve_mm",
    "solve_sym",
    "wasserstein2",
]
