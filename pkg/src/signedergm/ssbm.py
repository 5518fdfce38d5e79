"""Variational block recovery under a signed stochastic block model.

The latent memberships are approximated by a mean field q(Z) = prod_i
alpha_i with each alpha_i on the K-simplex.  The evidence lower bound

    LB = sum_{i<j} sum_{k,l} alpha_ik alpha_jl log p_kl(y_ij)
         + sum_{i,k} alpha_ik (log gamma_k - log alpha_ik)

is maximised by alternating an exact minorize-maximize step in alpha with
closed-form updates of the prior gamma and the edge-probability table p.

The MM surrogate splits each bilinear pair term with the AM-GM bound and
log-linearizes the entropy, which consolidates (for fixed gamma, p) to

    Q(alpha) = sum_{i,k} A_ik alpha_ik^2 + B_ik alpha_ik,
    A_ik = Omega_ik / (2 alpha_ik^t) - 1 / alpha_ik^t,
    B_ik = log gamma_k - log alpha_ik^t + 1,
    Omega_ik = sum_{j != i} sum_l alpha_jl^t log p_kl(y_ij),

with Q <= LB everywhere and equality at alpha^t.  Q separates over nodes
into concave simplex QPs solved exactly by bisection on the KKT
multiplier.

Everything is evaluated sparsely through the decomposition

    Omega = (tau - alpha) @ log p(0)
            + Y+ @ alpha @ log(p(+)/p(0)) + Y- @ alpha @ log(p(-)/p(0)),

where tau are the column sums of alpha and Y+/Y- the sign indicator
matrices, so the cost per sweep is O((N K + E) K).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import xlogy

from .network import BlockAssignment

# probability floor for the edge table; keeps logs finite and the surrogate
# concave (log p <= 0 strictly)
PROB_FLOOR = 1e-10
_NEG_BIG = -1e300

# dyad value index order in the (K, K, 3) table
VALUE_INDEX = {-1: 0, 0: 1, 1: 2}


@dataclass
class VariationalConfig:
    max_iter: int = 500
    tol: float = 1e-6
    init: str = "spectral"
    seed: int = 0
    soften: float = 0.1


@dataclass
class VariationalFit:
    alpha: np.ndarray
    gamma: np.ndarray
    p: np.ndarray
    lb_trace: np.ndarray
    iterations: int
    converged: bool


def validate_alpha(alpha, atol=1e-9):
    alpha = np.asarray(alpha)
    if alpha.ndim != 2:
        raise ValueError("alpha must be N x K")
    if np.any(alpha < -atol) or np.any(~np.isfinite(alpha)):
        raise ValueError("alpha entries must be finite and non-negative")
    if np.max(np.abs(alpha.sum(axis=1) - 1.0)) > atol:
        raise ValueError("alpha rows must sum to one")


def _log_tables(p):
    """(log p(0), log p(+)/p(0), log p(-)/p(0)) from a (K, K, 3) table."""
    logp = np.log(np.maximum(p, PROB_FLOOR))
    return logp[:, :, 1], logp[:, :, 2] - logp[:, :, 1], logp[:, :, 0] - logp[:, :, 1]


def _omega(alpha, p, net):
    """Omega_ik = sum_{j != i, l} alpha_jl log p_kl(y_ij), sparsely."""
    p0, pp, pm = _log_tables(p)
    tau = alpha.sum(axis=0)
    a0 = tau[None, :] - alpha
    om = a0 @ p0
    om += net.csr(1) @ (alpha @ pp)
    om += net.csr(-1) @ (alpha @ pm)
    return om


def compute_lower_bound(alpha, gamma, p, net):
    """Evidence lower bound, using the same sparse decomposition as the
    MM step."""
    om = _omega(alpha, p, net)
    pair = 0.5 * float(np.sum(alpha * om))
    prior = float(np.sum(xlogy(alpha, gamma[None, :])))
    entropy = -float(np.sum(xlogy(alpha, alpha)))
    return pair + prior + entropy


def surrogate_value(alpha_new, alpha_t, gamma, p, net):
    """Q(alpha_new; alpha_t, gamma, p): the MM minorant of the lower bound."""
    support = alpha_t > 0
    safe = np.where(support, alpha_t, 1.0)
    om = _omega(alpha_t, p, net)
    a_coef = om / (2.0 * safe) - 1.0 / safe
    b_coef = np.log(gamma)[None, :] - np.log(safe) + 1.0
    if np.any(alpha_new[~support] > 0):
        raise ValueError("surrogate undefined off the support of alpha_t")
    q = np.where(support, a_coef * alpha_new ** 2 + b_coef * alpha_new, 0.0)
    return float(q.sum())


def mm_update_alpha(alpha, gamma, p, net):
    """One exact MM ascent step in alpha for fixed gamma and p.

    Rows with zero entries stay zero there (the step maximises the
    surrogate over the face of the simplex carrying alpha_t), keeping the
    minorize-maximize ascent argument valid at the boundary.
    """
    n, k = alpha.shape
    if k == 1:
        return np.ones_like(alpha)
    support = alpha > 0
    safe = np.where(support, alpha, 1.0)
    om = _omega(alpha, p, net)
    a_coef = om / (2.0 * safe) - 1.0 / safe
    assert np.all(a_coef[support] < 0), "surrogate lost concavity"
    with np.errstate(divide="ignore"):
        b_coef = np.log(gamma)[None, :] - np.log(safe) + 1.0
    b_coef = np.where(support, b_coef, _NEG_BIG)
    a_coef = np.where(support, a_coef, -1.0)

    # per-row bisection on the simplex KKT multiplier lambda:
    # x_k(lambda) = clip((lambda - B_k)/(2 A_k), 0, 1), sum_k x_k = 1
    lo = np.min(np.where(support, b_coef + 2.0 * a_coef, np.inf), axis=1)
    hi = np.max(np.where(support, b_coef, -np.inf), axis=1)
    span = float(np.max(hi - lo))
    n_iter = max(60, int(np.ceil(np.log2(max(span, 1.0) / 1e-12))) + 2)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        x = np.clip((mid[:, None] - b_coef) / (2.0 * a_coef), 0.0, 1.0)
        x[~support] = 0.0
        s = x.sum(axis=1)
        too_big = s > 1.0
        lo = np.where(too_big, mid, lo)
        hi = np.where(too_big, hi, mid)
    mid = 0.5 * (lo + hi)
    x = np.clip((mid[:, None] - b_coef) / (2.0 * a_coef), 0.0, 1.0)
    x[~support] = 0.0
    x /= x.sum(axis=1, keepdims=True)
    return x


def update_gamma(alpha):
    """Closed-form prior update: column means of alpha."""
    return alpha.mean(axis=0)


def update_p(alpha, net):
    """Closed-form edge-table update.

    p_kl(y) is the alpha-weighted frequency of dyad value y between blocks
    k and l, computed from rank-one totals minus the self-pair diagonal,
    symmetrized, and floored at PROB_FLOOR (without renormalising; the
    floor is far below the sum tolerance).
    """
    tau = alpha.sum(axis=0)
    total = np.outer(tau, tau) - alpha.T @ alpha
    mpos = alpha.T @ (net.csr(1) @ alpha)
    mneg = alpha.T @ (net.csr(-1) @ alpha)
    mpos = 0.5 * (mpos + mpos.T)
    mneg = 0.5 * (mneg + mneg.T)
    total = 0.5 * (total + total.T)
    bad = total <= 1e-12
    if np.any(bad):
        warnings.warn("vanishing pair weight for some block pairs; "
                      "their edge probabilities set to uniform")
    den = np.where(bad, 1.0, total)
    p = np.stack([mneg / den, (total - mpos - mneg) / den, mpos / den], axis=2)
    p[bad] = 1.0 / 3.0
    return np.clip(p, PROB_FLOOR, 1.0)


def _leading_basis(adjacency, k_blocks):
    """K leading-magnitude eigenvectors of one symmetric sparse matrix."""
    n = adjacency.shape[0]
    if n <= 1000:
        vals, vecs = np.linalg.eigh(adjacency.toarray())
        idx = np.argsort(np.abs(vals))[-k_blocks:]
        return vecs[:, idx]
    from scipy.sparse.linalg import eigsh, ArpackNoConvergence
    try:
        vals, basis = eigsh(adjacency, k=k_blocks, which="LM")
    except ArpackNoConvergence as err:  # pragma: no cover - rare path
        warnings.warn("eigensolver did not fully converge; "
                      "using the converged subspace")
        basis = err.eigenvectors
        if basis.shape[1] < k_blocks:
            pad = np.zeros((n, k_blocks - basis.shape[1]))
            basis = np.hstack([basis, pad])
    return basis


def _spectral_labels(adjacencies, k_blocks, seed):
    """K-means over the stacked leading eigenbases of one or more
    symmetric sparse matrices."""
    from sklearn.cluster import KMeans

    basis = np.hstack([_leading_basis(m, k_blocks) for m in adjacencies])
    km = KMeans(n_clusters=k_blocks, n_init=25,
                random_state=int(seed) % (2 ** 32))
    return km.fit_predict(basis).astype(np.int64)


def spectral_baseline(net, k_blocks, seed=0):
    """Sign-blind spectral clustering baseline.

    Binarizes the network (any edge = 1), takes the K leading eigenvectors
    of the adjacency matrix by magnitude, and runs k-means with 25
    restarts on the rows.
    """
    n = net.n_nodes
    if k_blocks < 1 or k_blocks > n:
        raise ValueError("k_blocks must lie in 1..n_nodes")
    binary = (net.csr(1) + net.csr(-1)).tocsr().astype(np.float64)
    labels = _spectral_labels([binary], k_blocks, seed)
    return BlockAssignment(labels, k_blocks)


def init_alpha(net, k_blocks, method="spectral", seed=0, soften=0.1):
    """Initial memberships: softened spectral labels or Dirichlet rows.

    The spectral init clusters the stacked leading eigenbases of the
    positive and negative indicator matrices separately, so blocks that
    differ in either sign channel separate.  (The sign-blind baseline
    cannot do this, and MM refinement rarely recovers structure the init
    is blind to.)
    """
    n = net.n_nodes
    if method == "spectral":
        if k_blocks < 1 or k_blocks > n:
            raise ValueError("k_blocks must lie in 1..n_nodes")
        channels = [net.csr(1).tocsr().astype(np.float64),
                    net.csr(-1).tocsr().astype(np.float64)]
        labels = _spectral_labels(channels, k_blocks, seed)
        alpha = np.full((n, k_blocks),
                        soften / max(k_blocks - 1, 1) if k_blocks > 1 else 0.0)
        alpha[np.arange(n), labels] = 1.0 - soften if k_blocks > 1 else 1.0
        return alpha
    if method == "random":
        rng = np.random.default_rng(seed)
        return rng.dirichlet(np.ones(k_blocks), size=n)
    raise ValueError(f"unknown init method {method!r}")


def fit(net, k_blocks, config=None, iter_callback=None):
    """Alternate the MM alpha step with closed-form gamma/p updates until
    the relative lower-bound change drops below tol."""
    import time

    config = config or VariationalConfig()
    if k_blocks < 2:
        raise ValueError("variational fitting requires K >= 2")
    alpha = init_alpha(net, k_blocks, config.init, config.seed, config.soften)
    gamma = update_gamma(alpha)
    p = update_p(alpha, net)
    lb = compute_lower_bound(alpha, gamma, p, net)
    trace = [lb]
    converged = False
    it = 0
    t0 = time.perf_counter()
    for it in range(1, config.max_iter + 1):
        alpha = mm_update_alpha(alpha, gamma, p, net)
        gamma = update_gamma(alpha)
        p = update_p(alpha, net)
        lb_new = compute_lower_bound(alpha, gamma, p, net)
        delta = lb_new - lb
        trace.append(lb_new)
        if iter_callback is not None:
            iter_callback(it, lb_new, delta, time.perf_counter() - t0)
        rel = abs(delta) / (abs(lb) + 1.0)
        lb = lb_new
        if rel < config.tol:
            converged = True
            break
    return VariationalFit(alpha, gamma, p, np.array(trace), it, converged)


def hard_assignment(alpha, warn_degenerate=True):
    """Argmax memberships; ties break to the lowest block index and are
    flagged.  Empty or singleton blocks trigger a warning."""
    alpha = np.asarray(alpha)
    z = np.argmax(alpha, axis=1).astype(np.int64)
    row_max = alpha[np.arange(alpha.shape[0]), z]
    ties = (alpha == row_max[:, None]).sum(axis=1) > 1
    k = alpha.shape[1]
    if warn_degenerate:
        sizes = np.bincount(z, minlength=k)
        if np.any(sizes == 0):
            warnings.warn(
                f"hard assignment leaves {int((sizes == 0).sum())} empty block(s)")
        if np.any(sizes == 1):
            warnings.warn(
                f"hard assignment leaves {int((sizes == 1).sum())} singleton block(s)")
    return BlockAssignment(z, k, ties=ties)
