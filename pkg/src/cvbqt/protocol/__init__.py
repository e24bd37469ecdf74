"""Bidirectional teleportation over a five-node cluster and its generalizations."""

from .linear import BatchPipeline, batched_pipeline, batched_r_cov_y
from .pipeline import (
    TeleportReport,
    assemble_protocol,
    canonical_constraints,
    check_bqt_condition,
    error_variances,
    run_bqt,
)
from .roles import (
    CANONICAL_PHASES,
    FREE_WEIGHT_NAMES,
    FreeWeights,
    Port,
    ProtocolConfig,
    RoleAssignment,
    added_noise_fidelity,
    canonical_graph,
    db_to_variance,
)
from .search import FeasibleSolution, bqt_role_candidates, feasibility_search

__all__ = [
    "BatchPipeline", "batched_pipeline", "batched_r_cov_y",
    "TeleportReport", "assemble_protocol", "canonical_constraints", "check_bqt_condition",
    "error_variances", "run_bqt",
    "CANONICAL_PHASES", "FREE_WEIGHT_NAMES", "FreeWeights", "Port", "ProtocolConfig",
    "RoleAssignment", "added_noise_fidelity", "canonical_graph", "db_to_variance",
    "FeasibleSolution", "bqt_role_candidates", "feasibility_search",
]
