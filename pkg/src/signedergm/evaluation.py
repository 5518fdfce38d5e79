"""Partition agreement, goodness of fit, and leave-one-block-out checks.

Partition agreement uses Yule's phi over node pairs: each pair is
co-clustered or separated under each partition, giving a 2 x 2 table whose
phi coefficient is label-permutation invariant and equals 1 exactly at
agreement.

Goodness of fit simulates networks at the fitted coefficients given the
blocks and compares six distribution families against the observed
network: positive/negative degrees and the four shared-partner families
(shared enemies and shared friends of positive and negative edges).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._util import derived_rng, thread_map
from .estimator import NewtonConfig, fit_within
from .network import BlockAssignment, SignedNetwork, subnetwork
from .sampler import SamplerConfig, sample_within, simulate_network
from .stats import degree_histogram, shared_partner_histogram

FAMILIES = ("deg_pos", "deg_neg", "ese_pos", "ese_neg", "esf_pos", "esf_neg")


def yules_phi(a, b):
    """Yule's phi between two hard partitions of the same node set.

    Pairs co-clustered in both and separated in both count as agreement;
    a degenerate 2 x 2 margin returns 0.0 with a warning.
    """
    za = a.z if isinstance(a, BlockAssignment) else np.asarray(a)
    zb = b.z if isinstance(b, BlockAssignment) else np.asarray(b)
    if za.size != zb.size:
        raise ValueError("partitions must cover the same nodes")
    n = za.size
    if n < 2:
        raise ValueError("need at least two nodes")

    def pairs(x):
        return x * (x - 1) / 2.0

    # contingency of pair co-clustering from block-size margins
    ka = int(za.max()) + 1
    kb = int(zb.max()) + 1
    table = np.zeros((ka, kb))
    np.add.at(table, (za, zb), 1.0)
    n11 = pairs(table).sum()
    same_a = pairs(table.sum(axis=1)).sum()
    same_b = pairs(table.sum(axis=0)).sum()
    n10 = same_a - n11
    n01 = same_b - n11
    n00 = pairs(float(n)) - n11 - n10 - n01
    den_sq = (n00 + n01) * (n10 + n11) * (n00 + n10) * (n01 + n11)
    if den_sq <= 0:
        warnings.warn("degenerate pair table; phi undefined, returning 0")
        return 0.0
    return float((n00 * n11 - n01 * n10) / np.sqrt(den_sq))


def _as_dict(hist):
    return {int(d): int(c) for d, c in enumerate(hist) if c > 0}


def network_histograms(net):
    """The six statistic-family histograms of one network."""
    return {
        "deg_pos": _as_dict(degree_histogram(net, 1)),
        "deg_neg": _as_dict(degree_histogram(net, -1)),
        "ese_pos": _as_dict(shared_partner_histogram(net, 1, -1)),
        "ese_neg": _as_dict(shared_partner_histogram(net, -1, -1)),
        "esf_pos": _as_dict(shared_partner_histogram(net, 1, 1)),
        "esf_neg": _as_dict(shared_partner_histogram(net, -1, 1)),
    }


@dataclass
class GofReport:
    observed: dict
    simulated: list
    n_sims: int

    def to_long_rows(self):
        """(family, value, count, replication) rows; observed rows use the
        replication label 'observed'."""
        rows = []
        for fam in FAMILIES:
            for val, cnt in sorted(self.observed.get(fam, {}).items()):
                rows.append((fam, val, cnt, "observed"))
        for r, hists in enumerate(self.simulated):
            for fam in FAMILIES:
                for val, cnt in sorted(hists.get(fam, {}).items()):
                    rows.append((fam, val, cnt, str(r)))
        return rows


def gof(net, assignment, coeffs, spec, n_sims=500, seed=0, config=None,
        threads=None):
    """Simulate n_sims networks at the fit and collect family histograms."""
    config = config or SamplerConfig()

    def one(r):
        sim = simulate_network(coeffs, assignment, spec, config,
                               seed=derived_rng(seed, 4, r).integers(2 ** 31),
                               threads=1)
        return network_histograms(sim)

    sims = thread_map(one, range(n_sims), threads)
    return GofReport(network_histograms(net), sims, n_sims)


@dataclass
class LooReport:
    reports: dict                  # block -> GofReport on the held-out block
    refits: dict                   # block -> FitResult (within, refit)
    skipped: list


def loo_block_cv(net, assignment, spec, n_sims=100, seed=0,
                 newton_config=None, sampler_config=None, threads=None):
    """Leave-one-block-out cross-validation.

    For each block: refit the within model on the remaining blocks, derive
    the held-out block's parameters through its covariate, simulate that
    block n_sims times, and compare family histograms against the observed
    held-out block.  one_hot covariates cannot extrapolate to a held-out
    block and are rejected.
    """
    if spec.covariates == "one_hot":
        raise ValueError("leave-one-block-out requires covariates that "
                         "extrapolate to unseen blocks (one_hot does not)")
    newton_config = newton_config or NewtonConfig()
    sampler_config = sampler_config or SamplerConfig()
    sizes = assignment.block_sizes()
    k_blocks = assignment.k_blocks
    v_full = spec.within_covariates(sizes)
    reports = {}
    refits = {}
    skipped = []
    for k in range(k_blocks):
        if sizes[k] < 2:
            skipped.append((k, "held-out block has no dyads"))
            continue
        keep = assignment.z != k
        if np.count_nonzero(keep) < 2:
            skipped.append((k, "no training dyads left"))
            continue
        # relabel remaining blocks compactly
        rest_labels = np.unique(assignment.z[keep])
        if not any(sizes[r] >= 2 for r in rest_labels):
            skipped.append((k, "no training dyads left"))
            continue
        remap = {int(b): i for i, b in enumerate(rest_labels)}
        nodes = np.flatnonzero(keep)
        new_id = np.full(net.n_nodes, -1, dtype=np.int64)
        new_id[nodes] = np.arange(nodes.size)
        src, dst, sgn = net.edge_arrays()
        emask = keep[src] & keep[dst]
        edges = np.column_stack([new_id[src[emask]], new_id[dst[emask]],
                                 sgn[emask]])
        train_net = SignedNetwork(nodes.size, edges)
        train_z = BlockAssignment(
            np.array([remap[int(b)] for b in assignment.z[keep]]),
            len(rest_labels))
        try:
            refit = fit_within(train_net, train_z, spec, newton_config)
        except ValueError as err:
            skipped.append((k, str(err)))
            continue
        refits[k] = refit
        theta = refit.beta.theta_within(v_full[k])
        held = subnetwork(net, assignment, k).network

        def one(r):
            sim = sample_within(
                theta, int(sizes[k]), spec,
                SamplerConfig(sampler_config.burn_in, sampler_config.thin, 1),
                rng=derived_rng(seed, 5, k, r))[0]
            return network_histograms(sim)

        sims = thread_map(one, range(n_sims), threads)
        reports[k] = GofReport(network_histograms(held), sims, n_sims)
    return LooReport(reports, refits, skipped)
