"""Maximum pseudo-likelihood estimation with sandwich uncertainty and AIC.

Given hard blocks, each dyad contributes a three-category multinomial logit
observation: the log pseudo-likelihood is

    l(beta) = sum_dyads [ beta . x_obs - log(1 + e^{beta . x+} + e^{beta . x-}) ]

where x+/x- are the change statistics for setting the dyad to +/- from 0
(x_obs = 0 for an empty dyad), lifted by block covariates.  Newton-Raphson
with analytic gradient and Hessian and step halving solves it; for
dyad-independent specifications the pseudo-likelihood is the likelihood, so
the MPLE is the MLE.

Uncertainty: the inverse negative Hessian J^-1 (labelled "fisher"), or the
Godambe sandwich J^-1 V J^-1 with V the covariance of the score over
networks simulated at the estimate (labelled "godambe").

Model selection: AIC = -2 * log-likelihood + 2 dim(beta).  Between-block
normalizers are closed form; within-block log-normalizers are estimated by
path sampling along theta(u) = u * theta from the counting measure,
integrating the expected statistic inner product over a grid of u.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._util import derived_rng, thread_map
from .network import subnetwork
from .sampler import (SamplerConfig, _Chain, between_probabilities,
                      sample_between, _between_theta)
from .stats import block_change_matrix, within_stats

SEPARATION_BOUND = 20.0


@dataclass
class NewtonConfig:
    max_iter: int = 100
    gtol: float = 1e-8
    max_halvings: int = 20
    ridge: float = 1e-8


@dataclass
class PathConfig:
    """Path-sampling settings for within-block log-normalizers."""

    n_grid: int = 21
    n_samples: int = 500
    thin: int | None = None       # default: C(n,2) // 5 proposals per draw
    burn_in: int | None = None    # default: 10 * C(n,2), then 2 * C(n,2) per step


@dataclass
class Coefficients:
    """Within (s x p) and between (t x q) coefficient matrices.

    theta for block k is v_k @ beta_w; for pair (k, l) it is u_kl @ beta_b.
    Either side may be None when only one model was fitted.
    """

    beta_w: np.ndarray | None = None
    beta_b: np.ndarray | None = None

    def theta_within(self, v):
        return np.asarray(v, dtype=np.float64) @ self.beta_w

    def theta_between(self, u):
        return np.asarray(u, dtype=np.float64) @ self.beta_b

    def to_dict(self):
        return {
            "beta_w": None if self.beta_w is None else np.asarray(self.beta_w).tolist(),
            "beta_b": None if self.beta_b is None else np.asarray(self.beta_b).tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        bw = d.get("beta_w")
        bb = d.get("beta_b")
        return cls(None if bw is None else np.asarray(bw, dtype=np.float64),
                   None if bb is None else np.asarray(bb, dtype=np.float64))


@dataclass
class FitResult:
    beta: Coefficients
    side: str                      # "within" or "between"
    names: list
    covariance: np.ndarray
    cov_type: str                  # "fisher" or "godambe"
    converged: bool
    gradient_norm: float
    n_iter: int
    aic: float | None = None

    @property
    def beta_vec(self):
        m = self.beta.beta_w if self.side == "within" else self.beta.beta_b
        return m.ravel()

    @property
    def std_errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self):
        return {
            "side": self.side,
            "names": list(self.names),
            "beta": self.beta.to_dict(),
            "covariance": self.covariance.tolist(),
            "cov_type": self.cov_type,
            "converged": bool(self.converged),
            "gradient_norm": float(self.gradient_norm),
            "n_iter": int(self.n_iter),
            "aic": None if self.aic is None else float(self.aic),
        }


# -- multinomial logit core ---------------------------------------------------


def _logit_parts(beta, xp, xm, wp, wm, w0):
    """Log pseudo-likelihood, score, and negative Hessian of the grouped
    three-category logit with baseline zero."""
    eta_p = xp @ beta
    eta_m = xm @ beta
    top = np.maximum(0.0, np.maximum(eta_p, eta_m))
    log_den = top + np.log(np.exp(-top) + np.exp(eta_p - top) + np.exp(eta_m - top))
    n_tot = wp + wm + w0
    ll = float(wp @ eta_p + wm @ eta_m - n_tot @ log_den)
    pi_p = np.exp(eta_p - log_den)
    pi_m = np.exp(eta_m - log_den)
    grad = xp.T @ (wp - n_tot * pi_p) + xm.T @ (wm - n_tot * pi_m)
    wpp = n_tot * pi_p * (1.0 - pi_p)
    wmm = n_tot * pi_m * (1.0 - pi_m)
    wpm = n_tot * pi_p * pi_m
    hess = (xp.T * wpp) @ xp + (xm.T * wmm) @ xm \
        - (xp.T * wpm) @ xm - (xm.T * wpm) @ xp
    return ll, grad, hess


def _newton(xp, xm, wp, wm, w0, config, names):
    d = xp.shape[1]
    beta = np.zeros(d)
    ll, grad, hess = _logit_parts(beta, xp, xm, wp, wm, w0)
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        if np.max(np.abs(grad)) < config.gtol:
            converged = True
            it -= 1
            break
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(hess + config.ridge * np.eye(d), grad)
        if not np.all(np.isfinite(step)):
            step = np.linalg.solve(hess + config.ridge * np.eye(d), grad)
        for _ in range(config.max_halvings):
            cand = beta + step
            ll_new, grad_new, hess_new = _logit_parts(cand, xp, xm, wp, wm, w0)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12:
                break
            step = 0.5 * step
        else:
            warnings.warn("step halving exhausted; stopping early")
            break
        beta, ll, grad, hess = cand, ll_new, grad_new, hess_new
    else:
        if np.max(np.abs(grad)) < config.gtol:
            converged = True
    if np.any(np.abs(beta) > SEPARATION_BOUND):
        warnings.warn(
            "coefficients diverged beyond +-20; likely separation "
            f"({[n for n, b in zip(names, beta) if abs(b) > SEPARATION_BOUND]})")
        converged = False
    return beta, ll, grad, hess, converged, it


def _fisher_covariance(hess, ridge):
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        warnings.warn("singular information matrix; using pseudo-inverse")
        cov = np.linalg.pinv(hess)
    return cov


# -- design assembly ----------------------------------------------------------


def within_design(net, assignment, spec, v=None):
    """Stacked multinomial rows for all within-block dyads.

    Returns (xp, xm, obs, block_of_row).  xp/xm are change statistics
    lifted by each block's covariate; obs holds the observed dyad values.
    """
    sizes = assignment.block_sizes()
    if v is None:
        v = spec.within_covariates(sizes)
    v = np.asarray(v, dtype=np.float64)
    xp_parts, xm_parts, obs_parts, blk_parts = [], [], [], []
    for k in range(assignment.k_blocks):
        if sizes[k] < 2:
            if sizes[k] == 1:
                warnings.warn(f"block {k} is a singleton; no within dyads")
            continue
        sub = subnetwork(net, assignment, k)
        mat = sub.network.signed_matrix()
        dplus, dminus, vals = block_change_matrix(mat, spec)
        lift = v[k]
        xp_parts.append(np.einsum("s,dp->dsp", lift, dplus)
                        .reshape(dplus.shape[0], -1))
        xm_parts.append(np.einsum("s,dp->dsp", lift, dminus)
                        .reshape(dminus.shape[0], -1))
        obs_parts.append(vals)
        blk_parts.append(np.full(vals.size, k, dtype=np.int64))
    if not xp_parts:
        raise ValueError("no within-block dyads; all blocks have size < 2")
    return (np.vstack(xp_parts), np.vstack(xm_parts),
            np.concatenate(obs_parts), np.concatenate(blk_parts))


def between_counts(net, assignment):
    """Per block pair (k < l): positive, negative, and total dyad counts."""
    z = assignment.z
    k_blocks = assignment.k_blocks
    sizes = assignment.block_sizes()
    pos = np.zeros((k_blocks, k_blocks), dtype=np.int64)
    neg = np.zeros((k_blocks, k_blocks), dtype=np.int64)
    src, dst, sgn = net.edge_arrays()
    cross = z[src] != z[dst]
    for i, j, s in zip(z[src[cross]], z[dst[cross]], sgn[cross]):
        a, b = (i, j) if i < j else (j, i)
        if s == 1:
            pos[a, b] += 1
        else:
            neg[a, b] += 1
    pairs = [(k, l) for k in range(k_blocks) for l in range(k + 1, k_blocks)]
    totals = np.array([sizes[k] * sizes[l] for k, l in pairs], dtype=np.int64)
    return pairs, np.array([pos[k, l] for k, l in pairs]), \
        np.array([neg[k, l] for k, l in pairs]), totals


def _between_design(spec, pairs, u):
    """Grouped design rows: one row per block pair."""
    q = spec.q
    names = [t.name for t in spec.between]
    e_pos = np.zeros(q)
    e_pos[names.index("EdgesPos")] = 1.0
    e_neg = np.zeros(q)
    e_neg[names.index("EdgesNeg")] = 1.0
    xp = np.array([np.kron(u[k, l], e_pos) for k, l in pairs])
    xm = np.array([np.kron(u[k, l], e_neg) for k, l in pairs])
    return xp, xm


def pseudo_loglik(beta_vec, net, assignment, spec, v=None):
    """Within-model log pseudo-likelihood at a stacked coefficient vector."""
    xp, xm, obs, _ = within_design(net, assignment, spec, v)
    wp = (obs == 1).astype(np.float64)
    wm = (obs == -1).astype(np.float64)
    w0 = (obs == 0).astype(np.float64)
    ll, _, _ = _logit_parts(np.asarray(beta_vec, dtype=np.float64),
                            xp, xm, wp, wm, w0)
    return ll


def fit_within(net, assignment, spec, config=None, v=None):
    """MPLE of the within-block model; covariance is J^-1 until replaced
    by a sandwich estimate."""
    config = config or NewtonConfig()
    sizes = assignment.block_sizes()
    if v is None:
        v = spec.within_covariates(sizes)
    xp, xm, obs, _ = within_design(net, assignment, spec, v)
    wp = (obs == 1).astype(np.float64)
    wm = (obs == -1).astype(np.float64)
    w0 = (obs == 0).astype(np.float64)
    s_cov = np.asarray(v).shape[1]
    names = [f"{c}:{t}" if s_cov > 1 else t
             for c in (["1"] if s_cov == 1 else [f"v{a}" for a in range(s_cov)])
             for t in spec.within_labels()]
    beta, ll, grad, hess, converged, it = _newton(xp, xm, wp, wm, w0,
                                                  config, names)
    cov = _fisher_covariance(hess, config.ridge)
    coeffs = Coefficients(beta_w=beta.reshape(s_cov, spec.p))
    return FitResult(coeffs, "within", names, cov, "fisher", converged,
                     float(np.max(np.abs(grad))), it)


def fit_between(net, assignment, spec, config=None):
    """MPLE (= MLE) of the dyad-independent between-block model, grouped
    by block pair."""
    config = config or NewtonConfig()
    if assignment.k_blocks < 2:
        raise ValueError("between-block model requires K >= 2")
    u = spec.between_covariates(assignment.k_blocks)
    pairs, n_pos, n_neg, totals = between_counts(net, assignment)
    live = totals > 0
    if not np.any(live):
        raise ValueError("no between-block dyads")
    xp, xm = _between_design(spec, pairs, u)
    wp = n_pos.astype(np.float64)[live]
    wm = n_neg.astype(np.float64)[live]
    w0 = (totals - n_pos - n_neg).astype(np.float64)[live]
    t_cov = u.shape[2]
    names = [f"u{a}:{t}" if t_cov > 1 else t
             for a in range(t_cov) for t in spec.between_labels()]
    beta, ll, grad, hess, converged, it = _newton(xp[live], xm[live], wp, wm,
                                                  w0, config, names)
    cov = _fisher_covariance(hess, config.ridge)
    coeffs = Coefficients(beta_b=beta.reshape(t_cov, spec.q))
    return FitResult(coeffs, "between", names, cov, "fisher", converged,
                     float(np.max(np.abs(grad))), it)


# -- Godambe sandwich ---------------------------------------------------------


def _within_score(net_or_mat, spec, lift, beta_vec, mat_mode=False):
    """Score contribution of one block's network at beta."""
    if mat_mode:
        dplus, dminus, vals = block_change_matrix(net_or_mat, spec)
    else:
        dplus, dminus, vals = block_change_matrix(
            net_or_mat.signed_matrix(), spec)
    xp = np.einsum("s,dp->dsp", lift, dplus).reshape(dplus.shape[0], -1)
    xm = np.einsum("s,dp->dsp", lift, dminus).reshape(dminus.shape[0], -1)
    wp = (vals == 1).astype(np.float64)
    wm = (vals == -1).astype(np.float64)
    w0 = (vals == 0).astype(np.float64)
    _, grad, _ = _logit_parts(beta_vec, xp, xm, wp, wm, w0)
    return grad


def godambe_covariance(fit, net, assignment, spec, r_sims=100, seed=0,
                       config=None, threads=None):
    """Sandwich covariance J^-1 V J^-1.

    V is the sample covariance of the pseudo-likelihood score at the
    estimate over r_sims networks simulated from the fitted model given
    the blocks; J is the observed negative Hessian.
    """
    sampler_config = config or SamplerConfig()
    sizes = assignment.block_sizes()
    beta_vec = fit.beta_vec

    if fit.side == "within":
        v = spec.within_covariates(sizes)
        xp, xm, obs, _ = within_design(net, assignment, spec, v)
        _, _, hess = _logit_parts(beta_vec, xp, xm,
                                  (obs == 1).astype(np.float64),
                                  (obs == -1).astype(np.float64),
                                  (obs == 0).astype(np.float64))
        blocks = [k for k in range(assignment.k_blocks) if sizes[k] >= 2]

        def block_scores(k):
            theta = fit.beta.theta_within(v[k])
            rng = derived_rng(seed, 0, k)
            chain = _Chain(int(sizes[k]), spec, theta)
            burn, thin = sampler_config.resolve(int(sizes[k]))
            chain.advance(burn, rng)
            rows = np.empty((r_sims, beta_vec.size))
            for r in range(r_sims):
                chain.advance(thin, rng)
                rows[r] = _within_score(chain.mat, spec, v[k], beta_vec,
                                        mat_mode=True)
            return rows

        per_block = thread_map(block_scores, blocks, threads)
        scores = np.sum(per_block, axis=0)
    elif fit.side == "between":
        u = spec.between_covariates(assignment.k_blocks)
        pairs, n_pos, n_neg, totals = between_counts(net, assignment)
        live = [i for i, t in enumerate(totals) if t > 0]
        xp, xm = _between_design(spec, pairs, u)
        wp = n_pos.astype(np.float64)
        wm = n_neg.astype(np.float64)
        w0 = (totals - n_pos - n_neg).astype(np.float64)
        _, _, hess = _logit_parts(beta_vec, xp[live], xm[live], wp[live],
                                  wm[live], w0[live])
        scores = np.zeros((r_sims, beta_vec.size))
        for i in live:
            k, l = pairs[i]
            theta = _between_theta(fit.beta, spec, u[k, l])
            probs = between_probabilities(theta[0], theta[1])
            rng = derived_rng(seed, 1, k, l)
            draws = rng.multinomial(int(totals[i]), probs, size=r_sims)
            for r in range(r_sims):
                _, grad, _ = _logit_parts(
                    beta_vec, xp[i:i + 1], xm[i:i + 1],
                    np.array([draws[r, 2]], dtype=np.float64),
                    np.array([draws[r, 0]], dtype=np.float64),
                    np.array([draws[r, 1]], dtype=np.float64))
                scores[r] += grad
    else:
        raise ValueError(f"unknown fit side {fit.side!r}")

    centered = scores - scores.mean(axis=0)
    v_hat = centered.T @ centered / (r_sims - 1)
    j_inv = _fisher_covariance(hess, 1e-8)
    return j_inv @ v_hat @ j_inv


# -- AIC through path sampling ------------------------------------------------


def _log_kappa_within(theta, n_nodes, spec, path_config, rng):
    """Within-block log-normalizer by path sampling from the counting
    measure: log kappa(theta) = C(n,2) log 3 + int_0^1 E_{u theta}[theta.s] du,
    the integrand estimated by Metropolis draws on a grid of u with warm
    starts between grid points and the trapezoid rule."""
    n_dyads = n_nodes * (n_nodes - 1) // 2
    if n_dyads == 0:
        return 0.0
    cfg = path_config or PathConfig()
    thin = cfg.thin if cfg.thin is not None else max(1, n_dyads // 5)
    burn0 = cfg.burn_in if cfg.burn_in is not None else 10 * n_dyads
    burn_step = max(1, 2 * n_dyads) if cfg.burn_in is None else cfg.burn_in
    grid = np.linspace(0.0, 1.0, cfg.n_grid)
    theta = np.asarray(theta, dtype=np.float64)
    chain = _Chain(n_nodes, spec, np.zeros_like(theta))
    means = np.empty(cfg.n_grid)
    for g, ug in enumerate(grid):
        chain.theta = ug * theta
        chain.advance(burn0 if g == 0 else burn_step, rng)
        draws = chain.sample_stats(cfg.n_samples, thin, rng)
        means[g] = float(np.mean(draws @ theta))
    integral = float(np.trapezoid(means, grid))
    return n_dyads * math.log(3.0) + integral


def log_likelihood(coeffs, net, assignment, spec, path_config=None, seed=0,
                   threads=None):
    """Estimated log-likelihood of the block-conditional model.

    Within-block normalizers come from path sampling; between-block parts
    are exact: log kappa_kl = n_k n_l log(1 + e^theta+ + e^theta-).
    """
    sizes = assignment.block_sizes()
    v = spec.within_covariates(sizes)
    total = 0.0

    blocks = [k for k in range(assignment.k_blocks) if sizes[k] >= 2]

    def block_ll(k):
        sub = subnetwork(net, assignment, k)
        s_obs = within_stats(sub.network, spec)
        theta = coeffs.theta_within(v[k])
        rng = derived_rng(seed, 2, k)
        log_kappa = _log_kappa_within(theta, int(sizes[k]), spec,
                                      path_config, rng)
        return float(theta @ s_obs) - log_kappa

    total += sum(thread_map(block_ll, blocks, threads))

    if assignment.k_blocks >= 2 and coeffs.beta_b is not None:
        u = spec.between_covariates(assignment.k_blocks)
        pairs, n_pos, n_neg, totals = between_counts(net, assignment)
        names = [t.name for t in spec.between]
        for i, (k, l) in enumerate(pairs):
            if totals[i] == 0:
                continue
            theta = coeffs.theta_between(u[k, l])
            tp = theta[names.index("EdgesPos")]
            tn = theta[names.index("EdgesNeg")]
            top = max(0.0, tp, tn)
            log_z = top + math.log(math.exp(-top) + math.exp(tp - top)
                                   + math.exp(tn - top))
            total += n_pos[i] * tp + n_neg[i] * tn - totals[i] * log_z
    return total


def aic(coeffs, net, assignment, spec, path_config=None, seed=0, threads=None):
    """Akaike information criterion of the fitted block-conditional model."""
    dim = 0
    sizes = assignment.block_sizes()
    if coeffs.beta_w is not None:
        dim += coeffs.beta_w.size
    if coeffs.beta_b is not None:
        dim += coeffs.beta_b.size
    ll = log_likelihood(coeffs, net, assignment, spec, path_config, seed,
                        threads)
    return -2.0 * ll + 2.0 * dim
