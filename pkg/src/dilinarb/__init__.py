"""Directed linear forest decompositions: a randomized list-coloring pipeline,
exact small-case oracles and the parameter recursions behind them."""

__version__ = "0.1.0"

from .coloring import (ListAssignment, PartialColoring, is_compatible, is_directed_linear_forest,
                       validate_coloring)
from .digraph import Digraph, Multigraph, eulerian_orientation, symmetric_complete
from .estimator import ExactArboricity, LinearForestDecomposer
from .oracle import exact_la, la_lower_bound, verify_decomposition
from .params import check_size_bounds, compute_trajectory
from .pipeline import PipelineConfig, decompose

__all__ = [
    "Digraph", "Multigraph", "eulerian_orientation", "symmetric_complete",
    "ListAssignment", "PartialColoring", "validate_coloring", "is_compatible",
    "is_directed_linear_forest", "exact_la", "la_lower_bound", "verify_decomposition",
    "compute_trajectory", "check_size_bounds", "PipelineConfig", "decompose",
    "LinearForestDecomposer", "ExactArboricity",
]
