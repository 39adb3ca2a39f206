"""Incomplete multi-view spectral clustering re-guided by its own clustering result."""

from .dataset import (
    DatasetError,
    MultiViewDataset,
    apply_mask,
    generate_mask,
    load_dataset,
    mark_matrix,
    normalize_dataset,
    normalize_nonnegative,
    save_dataset,
    synthesize_gaussian_multiview,
)
from .evaluation import EvalReport, accuracy, aggregate, evaluate, nmi, pairwise_fscore_precision
from .graph import GraphError, GraphSet, build_graphs, build_laplacian, build_similarity
from .solver import SolverConfig, SolverError, SolverState, assign_clusters, fit

__version__ = "0.1.0"
