"""Regularized discrete optimal transport for domain adaptation."""

from .measures import DiscreteMeasure, uniform_measure, normalize_weights
from .cost import CostMatrix, pairwise_cost, apply_label_mask
from .exact import Coupling, solve_exact, brute_force_assignment
from .sinkhorn import SinkhornOptions, solve_entropic, negentropy
from .regularizers import (
    ClassGroups,
    SimilarityGraph,
    GroupLasso,
    Laplacian,
    group_lasso,
    laplacian_reg,
    build_source_graph,
    build_target_graph,
)
from .gcg import GcgConfig, SolveTrace, solve_gcg, line_search
from .mapping import MappedSamples, barycentric_map, inverse_map, interpolate
from .pipeline import (
    LabeledDataset,
    AdaptationModel,
    AdaptConfig,
    fit,
    knn_predict,
    evaluate,
    grid_validate,
)
from .errors import ConvergenceError, SinkhornUnderflowError, DataFormatError

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure", "uniform_measure", "normalize_weights",
    "CostMatrix", "pairwise_cost", "apply_label_mask",
    "Coupling", "solve_exact", "brute_force_assignment",
    "SinkhornOptions", "solve_entropic", "negentropy",
    "ClassGroups", "SimilarityGraph", "GroupLasso", "Laplacian",
    "group_lasso", "laplacian_reg", "build_source_graph", "build_target_graph",
    "GcgConfig", "SolveTrace", "solve_gcg", "line_search",
    "MappedSamples", "barycentric_map", "inverse_map", "interpolate",
    "LabeledDataset", "AdaptationModel", "AdaptConfig",
    "fit", "knn_predict", "evaluate", "grid_validate",
    "ConvergenceError", "SinkhornUnderflowError", "DataFormatError",
]
