"""Signed exponential random graph models with block-local dependence.

Networks carry edge values in {-1, +1} (absent dyads are 0).  Conditional
on a node partition the model factorizes into one ERGM per block plus
dyad-independent models for every block pair, which keeps estimation,
simulation and normalizing-constant work embarrassingly parallel across
blocks.

Typical use::

    net = signedergm.load_edge_list("trade.tsv")
    spec = signedergm.degree_spec()
    result = signedergm.estimate(net, k_blocks=4, spec=spec)
"""

__version__ = "0.1.0"

from .network import (DENSE_NODE_LIMIT, BlockAssignment, NetworkFormatError,
                      SignedNetwork, hamming_distance, load_block_assignment,
                      load_edge_list, save_block_assignment, save_edge_list,
                      signed_degree, subnetwork)
from .stats import (BETWEEN_TERM_NAMES, WITHIN_TERM_NAMES, ChangeStatistics,
                    ModelSpec, Term, between_stats, change_stats,
                    degree_histogram, degree_spec, full_triad_spec,
                    gwd_stat, gwesp_stat, independent_spec,
                    partial_triad_spec, shared_partner_histogram, triad_stat,
                    within_stats)
from .ssbm import (VariationalConfig, VariationalFit, compute_lower_bound,
                   hard_assignment, spectral_baseline)
from .ssbm import fit as fit_blocks
from .sampler import (SamplerConfig, between_probabilities,
                      brute_force_distribution, enumerate_networks,
                      sample_between, sample_within, simulate_network)
from .estimator import (Coefficients, FitResult, NewtonConfig, PathConfig,
                        aic, fit_between, fit_within, godambe_covariance,
                        log_likelihood, pseudo_loglik)
from .pipeline import (EstimateConfig, EstimateResult, PooledBeta,
                       PooledResult, UQConfig, estimate, uq_sample_and_pool)
from .evaluation import (GofReport, LooReport, gof, loo_block_cv,
                         network_histograms, yules_phi)

__all__ = [
    "__version__",
    # network
    "SignedNetwork", "BlockAssignment", "NetworkFormatError",
    "DENSE_NODE_LIMIT", "subnetwork", "signed_degree", "hamming_distance",
    "load_edge_list", "save_edge_list", "load_block_assignment",
    "save_block_assignment",
    # model terms / statistics
    "Term", "ModelSpec", "ChangeStatistics", "WITHIN_TERM_NAMES",
    "BETWEEN_TERM_NAMES", "within_stats", "between_stats", "change_stats",
    "degree_histogram", "shared_partner_histogram", "gwd_stat", "gwesp_stat",
    "triad_stat", "independent_spec", "degree_spec", "partial_triad_spec",
    "full_triad_spec",
    # block recovery
    "VariationalConfig", "VariationalFit", "fit_blocks", "hard_assignment",
    "spectral_baseline", "compute_lower_bound",
    # simulation
    "SamplerConfig", "sample_within", "sample_between", "simulate_network",
    "between_probabilities", "enumerate_networks", "brute_force_distribution",
    # estimation
    "Coefficients", "FitResult", "NewtonConfig", "PathConfig", "fit_within",
    "fit_between", "pseudo_loglik", "godambe_covariance", "log_likelihood",
    "aic",
    # pipeline
    "EstimateConfig", "EstimateResult", "estimate", "UQConfig", "PooledBeta",
    "PooledResult", "uq_sample_and_pool",
    # evaluation
    "yules_phi", "network_histograms", "GofReport", "LooReport", "gof",
    "loo_block_cv",
]
