"""Two-step estimation and block-membership uncertainty pooling.

Step 1 recovers memberships variationally; step 2 fits the within- and
between-block models by pseudo-likelihood given the hard assignment.

Uncertainty pooling: T partitions are drawn from the membership
probabilities (one multinomial draw per node), the model is refitted on
each, and estimates combine by the mixture rule

    beta_bar = mean_t beta_t
    total variance = mean_t Sigma_t + (1/(T-1)) sum_t (beta_t - beta_bar)^2,

keeping the sampling and assignment components separately.  Both model
sides are pooled the same way.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import ssbm
from ._util import derived_rng, thread_map
from .estimator import (Coefficients, FitResult, NewtonConfig, PathConfig,
                        aic, fit_between, fit_within, godambe_covariance)
from .network import BlockAssignment
from .sampler import SamplerConfig


@dataclass
class EstimateConfig:
    seed: int = 0
    init: str = "spectral"
    max_iter: int = 500
    tol: float = 1e-6
    cov: str = "godambe"            # or "fisher"
    godambe_r: int = 100
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    threads: int | None = None


@dataclass
class EstimateResult:
    variational: ssbm.VariationalFit | None
    blocks: BlockAssignment
    within: FitResult
    between: FitResult | None

    @property
    def coefficients(self):
        return Coefficients(
            beta_w=self.within.beta.beta_w,
            beta_b=None if self.between is None else self.between.beta.beta_b)


def estimate(net, k_blocks, spec, config=None, z=None):
    """Full two-step fit; pass z to skip membership recovery."""
    config = config or EstimateConfig()
    variational = None
    if z is None:
        if k_blocks < 2:
            z = BlockAssignment(np.zeros(net.n_nodes, dtype=np.int64), 1)
        else:
            vc = ssbm.VariationalConfig(max_iter=config.max_iter,
                                        tol=config.tol, init=config.init,
                                        seed=config.seed)
            variational = ssbm.fit(net, k_blocks, vc)
            z = ssbm.hard_assignment(variational.alpha)
    elif z.k_blocks != k_blocks:
        raise ValueError("assignment disagrees with k_blocks")

    sizes = z.block_sizes()
    if np.any(sizes == 0):
        warnings.warn(f"{int((sizes == 0).sum())} empty block(s) in the "
                      "hard assignment")

    within = fit_within(net, z, spec, config.newton)
    between = None
    if k_blocks >= 2 and np.count_nonzero(sizes) >= 2:
        between = fit_between(net, z, spec, config.newton)

    if config.cov == "godambe":
        within.covariance = godambe_covariance(
            within, net, z, spec, r_sims=config.godambe_r,
            seed=config.seed, config=config.sampler, threads=config.threads)
        within.cov_type = "godambe"
        if between is not None:
            between.covariance = godambe_covariance(
                between, net, z, spec, r_sims=config.godambe_r,
                seed=config.seed, threads=config.threads)
            between.cov_type = "godambe"
    return EstimateResult(variational, z, within, between)


# -- uncertainty pooling ------------------------------------------------------


@dataclass
class PooledBeta:
    """Mixture-pooled coefficients for one model side."""

    mean: np.ndarray
    sampling_variance: np.ndarray     # mean of per-partition covariances
    assignment_variance: np.ndarray   # between-partition scatter
    names: list

    @property
    def total_variance(self):
        return self.sampling_variance + self.assignment_variance


@dataclass
class PooledResult:
    within: PooledBeta
    between: PooledBeta | None
    per_sample_fits: list
    mean_aic: float | None
    t_samples: int
    n_skipped: int

    # the within pool is the headline object
    @property
    def mean_beta(self):
        return self.within.mean

    @property
    def total_variance(self):
        return self.within.total_variance


@dataclass
class UQConfig:
    seed: int = 0
    cov: str = "godambe"
    godambe_r: int = 100
    compute_aic: bool = False
    path: PathConfig = field(default_factory=PathConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    threads: int | None = None


def _sample_partition(alpha, rng):
    cum = np.cumsum(alpha, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(alpha.shape[0])
    return (u[:, None] > cum).sum(axis=1).astype(np.int64)


def _pool(samples, covariances, names):
    stack = np.asarray(samples)
    t = stack.shape[0]
    mean = stack.mean(axis=0)
    sampling = np.mean(covariances, axis=0)
    centered = stack - mean
    if t > 1:
        assignment = centered.T @ centered / (t - 1)
    else:
        assignment = np.zeros((stack.shape[1], stack.shape[1]))
    return PooledBeta(mean, sampling, assignment, names)


def uq_sample_and_pool(alpha, net, spec, t_samples=100, config=None):
    """Refit under T partitions drawn from alpha and pool the estimates.

    A drawn partition with an empty or singleton block is redrawn once and
    then skipped; the skip count is reported on the result.
    """
    config = config or UQConfig()
    ssbm.validate_alpha(alpha)
    k_blocks = alpha.shape[1]
    fits = []
    n_skipped = 0
    aics = []

    for t in range(t_samples):
        rng = derived_rng(config.seed, 3, t)
        z_vec = _sample_partition(alpha, rng)
        sizes = np.bincount(z_vec, minlength=k_blocks)
        if np.any(sizes <= 1):
            z_vec = _sample_partition(alpha, rng)
            sizes = np.bincount(z_vec, minlength=k_blocks)
            if np.any(sizes <= 1):
                n_skipped += 1
                continue
        z = BlockAssignment(z_vec, k_blocks)
        fw = fit_within(net, z, spec, config.newton)
        fb = fit_between(net, z, spec, config.newton) if k_blocks >= 2 else None
        if config.cov == "godambe":
            fw.covariance = godambe_covariance(
                fw, net, z, spec, r_sims=config.godambe_r,
                seed=config.seed + 7919 * t, config=config.sampler,
                threads=config.threads)
            fw.cov_type = "godambe"
            if fb is not None:
                fb.covariance = godambe_covariance(
                    fb, net, z, spec, r_sims=config.godambe_r,
                    seed=config.seed + 7919 * t, threads=config.threads)
                fb.cov_type = "godambe"
        if config.compute_aic:
            coeffs = Coefficients(beta_w=fw.beta.beta_w,
                                  beta_b=None if fb is None else fb.beta.beta_b)
            value = aic(coeffs, net, z, spec, config.path,
                        seed=config.seed + 104729 * t, threads=config.threads)
            fw.aic = value
            aics.append(value)
        fits.append((fw, fb))

    if not fits:
        raise ValueError("all sampled partitions were degenerate")

    within_pool = _pool([fw.beta_vec for fw, _ in fits],
                        [fw.covariance for fw, _ in fits],
                        fits[0][0].names)
    between_pool = None
    if fits[0][1] is not None:
        between_pool = _pool([fb.beta_vec for _, fb in fits],
                             [fb.covariance for _, fb in fits],
                             fits[0][1].names)
    mean_aic = float(np.mean(aics)) if aics else None
    return PooledResult(within_pool, between_pool, fits, mean_aic,
                        len(fits), n_skipped)
