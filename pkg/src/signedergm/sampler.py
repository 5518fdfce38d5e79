"""Block-parallel simulation of signed networks.

Within a block the ERGM is sampled by Metropolis-Hastings: pick a dyad
uniformly, propose one of the two values different from the current one
uniformly, accept with probability min(1, exp(theta . delta)) where delta
is the incremental change statistic.  Chains start from the empty network;
burn-in and thinning default to 20 * C(n,2) and 2 * C(n,2) proposals.

Between blocks the model is dyad-independent, so draws are exact: each
cross pair takes value +/0/- with softmax probabilities
(e^theta+, 1, e^theta-) / Z.

Every block and block pair samples from a generator derived from the
master seed and its block labels, so full-network simulation is
reproducible under any parallel schedule.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._util import derived_rng, thread_map
from .network import SignedNetwork
from .stats import within_stats

_CHUNK = 1 << 20

ENUMERATION_NODE_LIMIT = 5


@dataclass
class SamplerConfig:
    """Within-block chain settings; None picks the dyad-count defaults."""

    burn_in: int | None = None
    thin: int | None = None
    n_samples: int = 1

    def resolve(self, n_nodes):
        n_dyads = n_nodes * (n_nodes - 1) // 2
        burn = 20 * n_dyads if self.burn_in is None else self.burn_in
        thin = max(1, 2 * n_dyads) if self.thin is None else self.thin
        if burn < 0 or thin < 1 or self.n_samples < 1:
            raise ValueError("burn_in >= 0, thin >= 1, n_samples >= 1 required")
        return burn, thin


class _Chain:
    """Mutable Metropolis state for one block."""

    def __init__(self, n_nodes, spec, theta, start=None):
        self.n = n_nodes
        self.codes, self.omegas = spec.term_codes()
        self.theta = np.asarray(theta, dtype=np.float64)
        if self.theta.shape != (spec.p,):
            raise ValueError("theta length must match the within term count")
        if start is None:
            self.mat = np.zeros((n_nodes, n_nodes), dtype=np.int8)
        else:
            self.mat = np.ascontiguousarray(start, dtype=np.int8)
        self.tri_i, self.tri_j = (a.astype(np.int64)
                                  for a in np.triu_indices(n_nodes, k=1))
        self.s_cur = within_stats(SignedNetwork.from_matrix(self.mat), spec)

    def advance(self, n_proposals, rng):
        """Run proposals without recording."""
        dummy = np.zeros((0, self.theta.size))
        done = 0
        while done < n_proposals:
            m = int(min(_CHUNK, n_proposals - done))
            d = rng.integers(0, self.tri_i.size, m)
            v = rng.integers(0, 2, m)
            u = np.log(rng.random(m))
            _kernels.mh_chain(self.mat, self.s_cur, self.theta, self.codes,
                              self.omegas, self.tri_i, self.tri_j, d, v, u,
                              0, dummy)
            done += m

    def sample_stats(self, n_records, record_every, rng):
        """Record the raw statistic vector every record_every proposals."""
        out = np.empty((n_records, self.theta.size))
        rec = 0
        chunk_records = max(1, _CHUNK // record_every)
        while rec < n_records:
            r = int(min(chunk_records, n_records - rec))
            m = r * record_every
            d = rng.integers(0, self.tri_i.size, m)
            v = rng.integers(0, 2, m)
            u = np.log(rng.random(m))
            _kernels.mh_chain(self.mat, self.s_cur, self.theta, self.codes,
                              self.omegas, self.tri_i, self.tri_j, d, v, u,
                              record_every, out[rec:rec + r])
            rec += r
        return out


def sample_within(theta, n_nodes, spec, config=None, seed=0, start=None,
                  rng=None):
    """Draw thinned within-block networks from one Metropolis chain.

    Returns a list of SignedNetwork of length config.n_samples.
    """
    config = config or SamplerConfig()
    burn, thin = config.resolve(n_nodes)
    rng = derived_rng(seed) if rng is None else rng
    chain = _Chain(n_nodes, spec, theta, start=start)
    chain.advance(burn, rng)
    nets = []
    for _ in range(config.n_samples):
        chain.advance(thin, rng)
        nets.append(SignedNetwork.from_matrix(chain.mat))
    return nets


def between_probabilities(theta_pos, theta_neg):
    """Softmax dyad probabilities (p-, p0, p+) for a between-block pair."""
    m = max(0.0, theta_pos, theta_neg)
    wp = math.exp(theta_pos - m)
    wn = math.exp(theta_neg - m)
    w0 = math.exp(-m)
    z = w0 + wp + wn
    return np.array([wn / z, w0 / z, wp / z])


def sample_between(theta, n_left, n_right, seed=0, rng=None):
    """Exact draw of a bipartite between-block network.

    theta = (theta_pos, theta_neg).  Nodes 0..n_left-1 form the left part.
    """
    rng = derived_rng(seed) if rng is None else rng
    probs = between_probabilities(float(theta[0]), float(theta[1]))
    vals = rng.choice(np.array([-1, 0, 1], dtype=np.int8),
                      size=n_left * n_right, p=probs)
    a, b = np.divmod(np.arange(n_left * n_right), n_right)
    nz = vals != 0
    edges = np.column_stack([a[nz], n_left + b[nz], vals[nz]])
    return SignedNetwork(n_left + n_right, edges)


def _between_theta(coeffs, spec, u_kl):
    """Map the between coefficient matrix to (theta_pos, theta_neg)."""
    theta = np.asarray(u_kl, dtype=np.float64) @ coeffs.beta_b
    names = [t.name for t in spec.between]
    return np.array([theta[names.index("EdgesPos")],
                     theta[names.index("EdgesNeg")]])


def simulate_network(coeffs, assignment, spec, config=None, seed=0,
                     threads=None):
    """Simulate one full network given hard blocks and coefficients.

    Blocks run independent Metropolis chains; block pairs draw exactly.
    Per-task seeds derive from (seed, side, block labels).
    """
    config = config or SamplerConfig(n_samples=1)
    sizes = assignment.block_sizes()
    k_blocks = assignment.k_blocks
    v = spec.within_covariates(sizes)
    u = spec.between_covariates(k_blocks)

    within_tasks = [k for k in range(k_blocks) if sizes[k] >= 2]
    between_tasks = [(k, l) for k in range(k_blocks)
                     for l in range(k + 1, k_blocks)
                     if sizes[k] >= 1 and sizes[l] >= 1]

    def run_within(k):
        theta = v[k] @ coeffs.beta_w
        net = sample_within(theta, int(sizes[k]), spec,
                            SamplerConfig(config.burn_in, config.thin, 1),
                            rng=derived_rng(seed, 0, k))[0]
        return k, net

    def run_between(pair):
        k, l = pair
        theta = _between_theta(coeffs, spec, u[k, l])
        net = sample_between(theta, int(sizes[k]), int(sizes[l]),
                             rng=derived_rng(seed, 1, k, l))
        return pair, net

    within_nets = thread_map(run_within, within_tasks, threads)
    between_nets = thread_map(run_between, between_tasks, threads)

    all_edges = []
    for k, net in within_nets:
        nodes = assignment.nodes_in(k)
        src, dst, sgn = net.edge_arrays()
        if src.size:
            all_edges.append(np.column_stack([nodes[src], nodes[dst], sgn]))
    for (k, l), net in between_nets:
        left = assignment.nodes_in(k)
        right = assignment.nodes_in(l)
        src, dst, sgn = net.edge_arrays()
        if src.size:
            orig = np.concatenate([left, right])
            all_edges.append(np.column_stack([orig[src], orig[dst], sgn]))
    edges = np.vstack(all_edges) if all_edges else np.zeros((0, 3), dtype=np.int64)
    return SignedNetwork(assignment.n_nodes, edges)


# -- exhaustive enumeration oracle -------------------------------------------


def _dense_within_stats(mat, spec):
    """Plain-numpy statistic evaluation on a dense matrix.

    Independent of both the sparse evaluators and the incremental kernels;
    kept simple on purpose because it anchors the enumeration oracle.
    """
    iu, ju = np.triu_indices(mat.shape[0], k=1)
    vals = mat[iu, ju]
    out = np.empty(len(spec.within))
    for idx, term in enumerate(spec.within):
        name, om = term.name, term.omega
        if name == "EdgesPos":
            out[idx] = np.count_nonzero(vals == 1)
        elif name == "EdgesNeg":
            out[idx] = np.count_nonzero(vals == -1)
        else:
            if name in ("GWDPos", "GWDNeg"):
                s = 1 if name == "GWDPos" else -1
                deg = (mat == s).sum(axis=1)
                out[idx] = math.exp(om) * np.sum(
                    1.0 - (1.0 - math.exp(-om)) ** deg[deg > 0])
            else:
                e_sign, p_sign, omega = {
                    "TriadPPP": (1, 1, 0.0), "TriadPMM": (1, -1, 0.0),
                    "GWESEPos": (1, -1, om), "GWESENeg": (-1, -1, om),
                    "GWESFPos": (1, 1, om), "GWESFNeg": (-1, 1, om),
                }[name]
                a = (mat == p_sign).astype(np.int64)
                shared = (a @ a)[iu, ju]
                focal = vals == e_sign
                out[idx] = math.exp(omega) * np.sum(
                    1.0 - (1.0 - math.exp(-omega)) ** shared[focal].astype(float))
    return out


def enumerate_networks(n_nodes, spec):
    """All 3^C(n,2) dyad configurations and their statistic vectors.

    Returns (values, stats): values is (3^m, m) int8 over dyads in i < j
    lexicographic order.  Only feasible for n <= ENUMERATION_NODE_LIMIT.
    """
    if n_nodes > ENUMERATION_NODE_LIMIT:
        raise ValueError(
            f"exhaustive enumeration limited to n <= {ENUMERATION_NODE_LIMIT}")
    m = n_nodes * (n_nodes - 1) // 2
    values = np.array(list(itertools.product((-1, 0, 1), repeat=m)),
                      dtype=np.int8)
    iu, ju = np.triu_indices(n_nodes, k=1)
    stats = np.empty((values.shape[0], spec.p))
    mat = np.zeros((n_nodes, n_nodes), dtype=np.int8)
    for r in range(values.shape[0]):
        mat[iu, ju] = values[r]
        mat[ju, iu] = values[r]
        stats[r] = _dense_within_stats(mat, spec)
    return values, stats


def brute_force_distribution(theta, n_nodes, spec):
    """Exact within-block ERGM distribution by enumeration.

    Returns (values, probs) with probs  proportional to exp(theta . s).
    """
    values, stats = enumerate_networks(n_nodes, spec)
    logw = stats @ np.asarray(theta, dtype=np.float64)
    logw -= logw.max()
    probs = np.exp(logw)
    probs /= probs.sum()
    return values, probs


def encode_dyad_values(values):
    """Base-3 integer code of dyad value rows; pairs with enumeration order."""
    values = np.atleast_2d(values)
    powers = 3 ** np.arange(values.shape[1] - 1, -1, -1, dtype=np.int64)
    return (values.astype(np.int64) + 1) @ powers
