"""Community detection in multilayer networks with noisy per-layer labels.

A global two-block assignment is shared across layers; each node's label is
independently flipped per layer before edges are drawn. The package samples
such networks, recovers global and per-layer assignments (weighted spectral
initialization plus likelihood-ratio refinement, with a leave-one-out
variant), computes the error exponents that govern attainable accuracy,
estimates edge probabilities from data, and benchmarks against
co-regularized spectral clustering.
"""

from .baseline import CoRegConfig, coreg_cluster
from .estimate import ProbEstimates, moment_p_hat, plugin_pq
from .metrics import LossValue, SummaryStats, misclustering, summarize
from .model import (ModelParams, MultilayerGraph, SampleRecord,
                    as_assignment, balanced_assignment, experiment_params,
                    marginal_blend, read_instance, sample_imlsbm,
                    write_instance)
from .rates import (RateReport, global_snr, individual_snr_J, j_rho,
                    layer_info, minimize_global_snr, minimize_individual_snr,
                    psi_star, rate_report)
from .refine import (DetectionResult, RefineConfig, make_loo_spectral_init,
                     map_objective, refine_generic, refine_node,
                     refine_provable)
from .spectral import (ConvergenceError, KMeansResult, SpectralEmbedding,
                       TrimReport, approx_kmeans2, spectral_initialize,
                       stdev_weights, top2_eigenpairs, trim, uniform_weights,
                       variance_weights, weighted_adjacency)

__version__ = "0.1.0"

__all__ = [
    "CoRegConfig", "ConvergenceError", "DetectionResult", "KMeansResult",
    "LossValue", "ModelParams", "MultilayerGraph", "ProbEstimates",
    "RateReport", "RefineConfig", "SampleRecord", "SpectralEmbedding",
    "SummaryStats", "TrimReport", "approx_kmeans2", "as_assignment",
    "balanced_assignment", "coreg_cluster", "experiment_params",
    "global_snr", "individual_snr_J", "j_rho", "layer_info",
    "make_loo_spectral_init", "map_objective", "marginal_blend",
    "minimize_global_snr", "minimize_individual_snr", "misclustering",
    "moment_p_hat", "plugin_pq", "psi_star", "rate_report", "read_instance",
    "refine_generic", "refine_node", "refine_provable", "sample_imlsbm",
    "spectral_initialize", "stdev_weights", "summarize", "top2_eigenpairs",
    "trim", "uniform_weights", "variance_weights", "weighted_adjacency",
    "write_instance",
]
