import numpy as np
import pytest
from scipy.special import logsumexp

from signedergm import (BlockAssignment, Coefficients, FitResult, NewtonConfig,
                        PathConfig, SignedNetwork, aic, enumerate_networks,
                        fit_between, fit_within, godambe_covariance,
                        independent_spec, log_likelihood, partial_triad_spec,
                        pseudo_loglik, subnetwork, within_stats)
from signedergm.estimator import (_log_kappa_within, _logit_parts,
                                  between_counts, within_design)
from signedergm._util import derived_rng

from conftest import random_network


# -- multinomial logit core ------------------------------------------------------


def _random_logit_problem(d, n, seed):
    rng = np.random.default_rng(seed)
    xp = rng.normal(size=(n, d))
    xm = rng.normal(size=(n, d))
    wp = rng.integers(0, 4, size=n).astype(np.float64)
    wm = rng.integers(0, 4, size=n).astype(np.float64)
    w0 = rng.integers(1, 4, size=n).astype(np.float64)
    return xp, xm, wp, wm, w0


@pytest.mark.parametrize("seed", range(5))
def test_logit_gradient_matches_finite_differences(seed):
    d, n = 4, 30
    xp, xm, wp, wm, w0 = _random_logit_problem(d, n, seed)
    beta = np.random.default_rng(seed + 100).normal(scale=0.5, size=d)
    ll, grad, hess = _logit_parts(beta, xp, xm, wp, wm, w0)
    h = 1e-6
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        lp = _logit_parts(beta + e, xp, xm, wp, wm, w0)[0]
        lm = _logit_parts(beta - e, xp, xm, wp, wm, w0)[0]
        fd = (lp - lm) / (2 * h)
        assert abs(grad[i] - fd) <= 1e-5 * max(1.0, abs(fd)), i


@pytest.mark.parametrize("seed", range(3))
def test_logit_hessian_matches_finite_differences(seed):
    d, n = 3, 25
    xp, xm, wp, wm, w0 = _random_logit_problem(d, n, seed)
    beta = np.random.default_rng(seed + 7).normal(scale=0.5, size=d)
    _, _, hess = _logit_parts(beta, xp, xm, wp, wm, w0)
    h = 1e-5
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        gp = _logit_parts(beta + e, xp, xm, wp, wm, w0)[1]
        gm = _logit_parts(beta - e, xp, xm, wp, wm, w0)[1]
        fd = (gp - gm) / (2 * h)
        # hess is the NEGATIVE Hessian of ll
        np.testing.assert_allclose(-hess[i], fd, rtol=1e-4, atol=1e-6)


def test_logit_value_at_zero():
    d, n = 3, 40
    xp, xm, wp, wm, w0 = _random_logit_problem(d, n, 3)
    ll, _, _ = _logit_parts(np.zeros(d), xp, xm, wp, wm, w0)
    assert ll == pytest.approx(-(wp + wm + w0).sum() * np.log(3.0), rel=1e-12)


def test_logit_extreme_eta_stable():
    xp = np.array([[100.0], [-100.0]])
    xm = np.array([[-100.0], [100.0]])
    w = np.ones(2)
    ll, grad, hess = _logit_parts(np.array([8.0]), xp, xm, w, w, w)
    assert np.isfinite(ll) and np.all(np.isfinite(grad)) \
        and np.all(np.isfinite(hess))


# -- design assembly -------------------------------------------------------------


def test_within_design_rows_and_blocks():
    net = random_network(10, seed=0)
    z = BlockAssignment(np.repeat([0, 1], 5), 2)
    xp, xm, obs, blk = within_design(net, z, independent_spec())
    assert xp.shape == (20, 2) and xm.shape == (20, 2)   # 2 * C(5,2)
    assert set(blk.tolist()) == {0, 1}
    # independent model: setting a dyad + adds one positive edge, nothing else
    np.testing.assert_array_equal(xp, np.tile([1.0, 0.0], (20, 1)))
    np.testing.assert_array_equal(xm, np.tile([0.0, 1.0], (20, 1)))
    # observed values agree with per-block edge counts
    sizes = z.block_sizes()
    n_pos = sum(subnetwork(net, z, k).network.edge_count(1) for k in range(2))
    assert (obs == 1).sum() == n_pos


def test_within_design_requires_dyads():
    net = SignedNetwork(2, [(0, 1, 1)])
    z = BlockAssignment(np.array([0, 1]), 2)
    with pytest.warns(UserWarning, match="singleton"):
        with pytest.raises(ValueError):
            within_design(net, z, independent_spec())


def test_between_counts_direct():
    net = SignedNetwork(6, [(0, 3, 1), (1, 4, -1), (2, 5, 1), (0, 1, 1),
                            (3, 4, -1)])
    z = BlockAssignment(np.repeat([0, 1], 3), 2)
    pairs, n_pos, n_neg, totals = between_counts(net, z)
    assert pairs == [(0, 1)]
    assert n_pos.tolist() == [2] and n_neg.tolist() == [1]
    assert totals.tolist() == [9]


# -- MPLE ------------------------------------------------------------------------


def test_mple_independent_closed_form():
    net = random_network(14, seed=2, p_pos=0.3, p_neg=0.2)
    z = BlockAssignment(np.zeros(14, dtype=np.int64), 1)
    fit = fit_within(net, z, independent_spec())
    n_pos = net.edge_count(1)
    n_neg = net.edge_count(-1)
    n0 = 14 * 13 // 2 - n_pos - n_neg
    want = np.array([np.log(n_pos / n0), np.log(n_neg / n0)])
    np.testing.assert_allclose(fit.beta_vec, want, atol=1e-8)
    assert fit.converged


def test_mple_equals_enumeration_mle():
    # dyad-independent model: the pseudo-likelihood IS the likelihood, so
    # the fit must agree with a direct optimum of the exact log-likelihood
    from scipy.optimize import minimize

    spec = independent_spec()
    net = random_network(5, seed=8, p_pos=0.35, p_neg=0.25)
    z = BlockAssignment(np.zeros(5, dtype=np.int64), 1)
    fit = fit_within(net, z, spec)

    _, stats = enumerate_networks(5, spec)
    s_obs = within_stats(net, spec)

    def neg_ll(theta):
        return logsumexp(stats @ theta) - theta @ s_obs

    def neg_grad(theta):
        w = stats @ theta
        w = np.exp(w - logsumexp(w))
        return w @ stats - s_obs

    res = minimize(neg_ll, np.zeros(2), jac=neg_grad, method="BFGS",
                   options={"gtol": 1e-12})
    assert np.max(np.abs(neg_grad(res.x))) < 1e-8
    np.testing.assert_allclose(fit.beta_vec, res.x, atol=1e-6)


def test_mple_is_pseudo_loglik_optimum():
    spec = partial_triad_spec(0.3, 0.0)
    net = random_network(12, seed=5, p_pos=0.3, p_neg=0.2)
    z = BlockAssignment(np.zeros(12, dtype=np.int64), 1)
    fit = fit_within(net, z, spec)
    best = pseudo_loglik(fit.beta_vec, net, z, spec)
    rng = np.random.default_rng(0)
    for _ in range(20):
        other = fit.beta_vec + rng.normal(scale=0.05, size=fit.beta_vec.size)
        assert pseudo_loglik(other, net, z, spec) <= best + 1e-10


def test_mple_one_hot_equals_per_block_fits():
    # block-specific coefficients through one-hot covariates must reproduce
    # fitting each block separately
    spec = independent_spec(covariates="one_hot")
    plain = independent_spec()
    rng_nets = [random_network(8, seed=s, p_pos=0.35, p_neg=0.25)
                for s in (0, 1)]
    src0, dst0, sgn0 = rng_nets[0].edge_arrays()
    src1, dst1, sgn1 = rng_nets[1].edge_arrays()
    edges = list(zip(src0.tolist(), dst0.tolist(), sgn0.tolist()))
    edges += [(i + 8, j + 8, v) for i, j, v in
              zip(src1.tolist(), dst1.tolist(), sgn1.tolist())]
    net = SignedNetwork(16, edges)
    z = BlockAssignment(np.repeat([0, 1], 8), 2)
    fit = fit_ = fit_within(net, z, spec)
    beta = fit_.beta.beta_w
    assert beta.shape == (2, 2)
    for k in range(2):
        zk = BlockAssignment(np.zeros(8, dtype=np.int64), 1)
        solo = fit_within(rng_nets[k], zk, plain)
        np.testing.assert_allclose(beta[k], solo.beta_vec, atol=1e-7)


def test_separation_warns_and_flags():
    n = 6
    edges = [(i, j, 1) for i in range(n) for j in range(i + 1, n)]
    net = SignedNetwork(n, edges)   # every dyad positive: separated
    z = BlockAssignment(np.zeros(n, dtype=np.int64), 1)
    with pytest.warns(UserWarning, match="separation"):
        fit = fit_within(net, z, independent_spec())
    assert not fit.converged


def test_fit_between_single_pair_closed_form():
    net = SignedNetwork(8, [(0, 4, 1), (1, 5, 1), (2, 6, -1), (0, 1, 1)])
    z = BlockAssignment(np.repeat([0, 1], 4), 2)
    fit = fit_between(net, z, independent_spec())
    # 16 cross dyads: 2 positive, 1 negative, 13 empty
    want = np.array([np.log(2 / 13), np.log(1 / 13)])
    np.testing.assert_allclose(fit.beta_vec, want, atol=1e-8)
    assert fit.converged
    assert fit.side == "between"


def test_fit_between_pools_pairs_with_shared_coefficients():
    rng = np.random.default_rng(4)
    n = 12
    z = BlockAssignment(np.repeat([0, 1, 2], 4), 3)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if z.z[i] != z.z[j]:
                u = rng.random()
                if u < 0.3:
                    edges.append((i, j, 1))
                elif u < 0.45:
                    edges.append((i, j, -1))
    net = SignedNetwork(n, edges)
    fit = fit_between(net, z, independent_spec())
    _, n_pos, n_neg, totals = between_counts(net, z)
    n0 = totals.sum() - n_pos.sum() - n_neg.sum()
    want = np.array([np.log(n_pos.sum() / n0), np.log(n_neg.sum() / n0)])
    np.testing.assert_allclose(fit.beta_vec, want, atol=1e-8)


def test_fit_between_requires_two_blocks():
    net = random_network(6, seed=0)
    z = BlockAssignment(np.zeros(6, dtype=np.int64), 1)
    with pytest.raises(ValueError):
        fit_between(net, z, independent_spec())


def test_fisher_covariance_matches_multinomial_information():
    net = random_network(16, seed=9, p_pos=0.3, p_neg=0.2)
    z = BlockAssignment(np.zeros(16, dtype=np.int64), 1)
    fit = fit_within(net, z, independent_spec())
    n = 16 * 15 // 2
    p_hat = np.array([net.edge_count(1) / n, net.edge_count(-1) / n])
    info = n * (np.diag(p_hat) - np.outer(p_hat, p_hat))
    np.testing.assert_allclose(fit.covariance, np.linalg.inv(info), rtol=1e-6)
    assert np.all(fit.std_errors > 0)


# -- Godambe sandwich ------------------------------------------------------------


def test_godambe_within_symmetric_psd_deterministic():
    net = random_network(15, seed=1, p_pos=0.3, p_neg=0.2)
    z = BlockAssignment(np.repeat([0, 1, 2], 5), 3)
    fit = fit_within(net, z, independent_spec())
    g1 = godambe_covariance(fit, net, z, independent_spec(), r_sims=40, seed=5)
    g2 = godambe_covariance(fit, net, z, independent_spec(), r_sims=40, seed=5)
    np.testing.assert_array_equal(g1, g2)
    np.testing.assert_allclose(g1, g1.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(g1) > -1e-10)
    assert np.all(np.isfinite(g1))


def test_godambe_between_close_to_fisher_for_independent_model():
    # the between model is a correctly specified multinomial, so the
    # sandwich should roughly reproduce the Fisher covariance
    rng = np.random.default_rng(12)
    n = 40
    z = BlockAssignment(np.repeat([0, 1], 20), 2)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            u = rng.random()
            if u < 0.25:
                edges.append((i, j, 1))
            elif u < 0.40:
                edges.append((i, j, -1))
    net = SignedNetwork(n, edges)
    fit = fit_between(net, z, independent_spec())
    god = godambe_covariance(fit, net, z, independent_spec(), r_sims=400,
                             seed=2)
    np.testing.assert_allclose(god, fit.covariance, rtol=0.35)


# -- likelihood, normalizers, AIC -------------------------------------------------


def test_log_kappa_zero_theta_exact():
    rng = derived_rng(0)
    spec = independent_spec()
    got = _log_kappa_within(np.zeros(2), 5, spec, PathConfig(n_grid=5,
                                                             n_samples=10), rng)
    assert got == pytest.approx(10 * np.log(3.0), abs=1e-12)


@pytest.mark.parametrize("spec_name", ["independent", "partial"])
def test_log_kappa_matches_enumeration(spec_name):
    if spec_name == "independent":
        spec = independent_spec()
        theta = np.array([0.3, -0.4])
    else:
        spec = partial_triad_spec(0.2, 0.0)
        theta = np.array([-0.3, -0.6, 0.2, -0.1, 0.4])
    _, stats = enumerate_networks(4, spec)
    exact = logsumexp(stats @ theta)
    cfg = PathConfig(n_grid=15, n_samples=600, thin=12)
    got = _log_kappa_within(theta, 4, spec, cfg, derived_rng(3))
    assert got == pytest.approx(exact, rel=0.03)


def test_log_likelihood_between_closed_form():
    # two singleton blocks: only the between part contributes
    net = SignedNetwork(2, [(0, 1, 1)])
    z = BlockAssignment(np.array([0, 1]), 2)
    coeffs = Coefficients(beta_b=np.array([[0.7, -0.2]]))
    got = log_likelihood(coeffs, net, z, independent_spec())
    want = 0.7 - np.log(1 + np.exp(0.7) + np.exp(-0.2))
    assert got == pytest.approx(want, abs=1e-12)


def test_log_likelihood_exact_on_enumerable_block():
    # single 4-node block, independent model: likelihood is closed form
    spec = independent_spec()
    net = random_network(4, seed=3, p_pos=0.4, p_neg=0.2)
    z = BlockAssignment(np.zeros(4, dtype=np.int64), 1)
    theta = np.array([0.2, -0.5])
    coeffs = Coefficients(beta_w=theta[None, :])
    _, stats = enumerate_networks(4, spec)
    want = float(theta @ within_stats(net, spec)) - logsumexp(stats @ theta)
    cfg = PathConfig(n_grid=15, n_samples=600, thin=12)
    got = log_likelihood(coeffs, net, z, spec, path_config=cfg, seed=4)
    assert got == pytest.approx(want, abs=0.25)


def test_aic_dimension_counting():
    net = SignedNetwork(2, [(0, 1, 1)])
    z = BlockAssignment(np.array([0, 1]), 2)
    coeffs = Coefficients(beta_b=np.array([[0.7, -0.2]]))
    ll = log_likelihood(coeffs, net, z, independent_spec())
    got = aic(coeffs, net, z, independent_spec())
    assert got == pytest.approx(-2 * ll + 2 * 2, abs=1e-10)


def test_coefficients_round_trip():
    c = Coefficients(beta_w=np.array([[1.0, 2.0]]), beta_b=None)
    d = c.to_dict()
    back = Coefficients.from_dict(d)
    np.testing.assert_array_equal(back.beta_w, c.beta_w)
    assert back.beta_b is None
    assert d["beta_b"] is None


def test_fit_result_serialization():
    net = random_network(10, seed=0, p_pos=0.3, p_neg=0.2)
    z = BlockAssignment(np.zeros(10, dtype=np.int64), 1)
    fit = fit_within(net, z, independent_spec())
    d = fit.to_dict()
    assert d["side"] == "within"
    assert d["cov_type"] == "fisher"
    assert len(d["names"]) == 2
    np.testing.assert_allclose(np.asarray(d["beta"]["beta_w"]).ravel(),
                               fit.beta_vec)
    assert np.asarray(d["covariance"]).shape == (2, 2)


def test_theta_lift_round_trip():
    c = Coefficients(beta_w=np.array([[1.0, 2.0], [10.0, 20.0]]),
                     beta_b=np.array([[0.5, -0.5]]))
    np.testing.assert_allclose(c.theta_within(np.array([1.0, 3.0])),
                               [31.0, 62.0])
    np.testing.assert_allclose(c.theta_between(np.array([2.0])), [1.0, -1.0])
