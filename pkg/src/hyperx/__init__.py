"""hyperx: adaptive hypergraph expansion, GCN training, and WL expressiveness checks."""

__version__ = "0.1.0"

from .core import Hypergraph, WeightedGraph, load_hypergraph, save_hypergraph, synth_hypergraph
from .classic import clique_expand, line_expand, star_expand
from .ade import (
    DistanceCache,
    GsiNetParams,
    HyperedgeSelection,
    KernelParams,
    expand,
    expand_hypergcn_fixed,
)
from .gnn import GcnParams, RunReport, TrainConfig, grid_search, make_splits, train
from .wl import distinguish, expressiveness_trial, gwl_refine, run_trials, wl_refine

__all__ = [
    "Hypergraph",
    "WeightedGraph",
    "load_hypergraph",
    "save_hypergraph",
    "synth_hypergraph",
    "clique_expand",
    "star_expand",
    "line_expand",
    "DistanceCache",
    "GsiNetParams",
    "KernelParams",
    "HyperedgeSelection",
    "expand",
    "expand_hypergcn_fixed",
    "GcnParams",
    "TrainConfig",
    "RunReport",
    "train",
    "grid_search",
    "make_splits",
    "wl_refine",
    "gwl_refine",
    "distinguish",
    "expressiveness_trial",
    "run_trials",
    "__version__",
]
