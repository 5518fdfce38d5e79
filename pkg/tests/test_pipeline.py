import numpy as np
import pytest

from signedergm import (BlockAssignment, EstimateConfig, PathConfig, UQConfig,
                        estimate, fit_between, fit_within, independent_spec,
                        uq_sample_and_pool, yules_phi)
from signedergm.pipeline import _pool, _sample_partition
from signedergm._util import derived_rng

from conftest import planted_network, random_network


def _one_hot(labels, k):
    a = np.zeros((labels.size, k))
    a[np.arange(labels.size), labels] = 1.0
    return a


def test_estimate_with_known_blocks_matches_direct_fits():
    net, z_true = planted_network(24, 2, seed=0)
    z = BlockAssignment(z_true, 2)
    spec = independent_spec()
    res = estimate(net, 2, spec, EstimateConfig(cov="fisher"), z=z)
    np.testing.assert_array_equal(res.within.beta_vec,
                                  fit_within(net, z, spec).beta_vec)
    np.testing.assert_array_equal(res.between.beta_vec,
                                  fit_between(net, z, spec).beta_vec)
    assert res.variational is None
    assert res.blocks is z
    c = res.coefficients
    assert c.beta_w is not None and c.beta_b is not None


def test_estimate_single_block():
    net = random_network(12, seed=1, p_pos=0.3, p_neg=0.2)
    res = estimate(net, 1, independent_spec(), EstimateConfig(cov="fisher"))
    assert res.between is None
    assert res.blocks.k_blocks == 1
    assert np.all(res.blocks.z == 0)
    assert res.coefficients.beta_b is None


def test_estimate_rejects_mismatched_assignment():
    net = random_network(8, seed=2)
    z = BlockAssignment(np.repeat([0, 1], 4), 2)
    with pytest.raises(ValueError):
        estimate(net, 3, independent_spec(), z=z)


def test_estimate_recovers_planted_blocks_end_to_end():
    net, z_true = planted_network(40, 2, seed=3, pin_pos=0.6, pin_neg=0.05,
                                  pout_pos=0.05, pout_neg=0.6)
    res = estimate(net, 2, independent_spec(), EstimateConfig(cov="fisher"))
    assert res.variational is not None
    assert res.variational.converged
    assert yules_phi(res.blocks.z, z_true) == pytest.approx(1.0)


def test_estimate_godambe_covariance_is_deterministic():
    net, z_true = planted_network(20, 2, seed=4)
    z = BlockAssignment(z_true, 2)
    cfg = EstimateConfig(cov="godambe", godambe_r=25)
    a = estimate(net, 2, independent_spec(), cfg, z=z)
    b = estimate(net, 2, independent_spec(), cfg, z=z)
    assert a.within.cov_type == "godambe"
    assert a.between.cov_type == "godambe"
    np.testing.assert_array_equal(a.within.covariance, b.within.covariance)
    np.testing.assert_allclose(a.within.covariance, a.within.covariance.T,
                               atol=1e-12)
    assert np.all(np.isfinite(a.within.covariance))


def test_estimate_warns_on_empty_block():
    net = random_network(10, seed=5, p_pos=0.4, p_neg=0.2)
    z = BlockAssignment(np.repeat([0, 1], 5), 3)  # block 2 unused
    with pytest.warns(UserWarning, match="empty"):
        estimate(net, 3, independent_spec(), EstimateConfig(cov="fisher"),
                 z=z)


# -- partition sampling -----------------------------------------------------------


def test_sample_partition_one_hot_is_deterministic():
    labels = np.array([0, 1, 2, 1, 0])
    alpha = _one_hot(labels, 3)
    for s in range(5):
        np.testing.assert_array_equal(
            _sample_partition(alpha, derived_rng(s)), labels)


def test_sample_partition_frequencies():
    alpha = np.tile([0.7, 0.3], (1, 1))
    draws = np.array([_sample_partition(alpha, derived_rng(s))[0]
                      for s in range(4000)])
    assert abs((draws == 0).mean() - 0.7) < 0.03


def test_pool_identities():
    samples = [np.array([1.0, 2.0]), np.array([3.0, 2.0]),
               np.array([2.0, 5.0])]
    covs = [np.eye(2) * c for c in (1.0, 2.0, 3.0)]
    pooled = _pool(samples, covs, ["a", "b"])
    np.testing.assert_allclose(pooled.mean, [2.0, 3.0])
    np.testing.assert_allclose(pooled.sampling_variance, np.eye(2) * 2.0)
    stack = np.array(samples)
    centered = stack - stack.mean(axis=0)
    np.testing.assert_allclose(pooled.assignment_variance,
                               centered.T @ centered / 2)
    np.testing.assert_allclose(
        pooled.total_variance,
        pooled.sampling_variance + pooled.assignment_variance)


# -- pooling over membership draws -------------------------------------------------


def test_uq_one_hot_alpha_degenerates_to_point_fit():
    net, z_true = planted_network(20, 2, seed=6)
    alpha = _one_hot(z_true, 2)
    spec = independent_spec()
    pooled = uq_sample_and_pool(alpha, net, spec, t_samples=6,
                                config=UQConfig(cov="fisher"))
    z = BlockAssignment(z_true, 2)
    point = fit_within(net, z, spec)
    np.testing.assert_array_equal(pooled.within.mean, point.beta_vec)
    np.testing.assert_array_equal(pooled.within.assignment_variance,
                                  np.zeros((2, 2)))
    np.testing.assert_allclose(pooled.within.sampling_variance,
                               point.covariance, atol=1e-12)
    assert pooled.n_skipped == 0
    assert pooled.t_samples == 6
    # between side pools the same way
    point_b = fit_between(net, z, spec)
    np.testing.assert_array_equal(pooled.between.mean, point_b.beta_vec)
    np.testing.assert_array_equal(pooled.between.assignment_variance,
                                  np.zeros((2, 2)))


def test_uq_diffuse_alpha_adds_assignment_variance():
    net, z_true = planted_network(20, 2, seed=7)
    alpha = np.where(_one_hot(z_true, 2) == 1.0, 0.85, 0.15)
    pooled = uq_sample_and_pool(alpha, net, independent_spec(), t_samples=12,
                                config=UQConfig(cov="fisher"))
    assert np.trace(pooled.within.assignment_variance) > 0
    assert np.trace(pooled.within.total_variance) \
        > np.trace(pooled.within.sampling_variance)
    assert pooled.t_samples + pooled.n_skipped == 12


def test_uq_all_degenerate_raises():
    net = random_network(6, seed=8, p_pos=0.4, p_neg=0.2)
    alpha = np.zeros((6, 2))
    alpha[:, 0] = 1.0   # block 1 always empty
    with pytest.raises(ValueError, match="degenerate"):
        uq_sample_and_pool(alpha, net, independent_spec(), t_samples=4,
                           config=UQConfig(cov="fisher"))


def test_uq_mean_aic_smoke():
    net, z_true = planted_network(12, 2, seed=9)
    alpha = _one_hot(z_true, 2)
    cfg = UQConfig(cov="fisher", compute_aic=True,
                   path=PathConfig(n_grid=5, n_samples=50, thin=5))
    pooled = uq_sample_and_pool(alpha, net, independent_spec(), t_samples=2,
                                config=cfg)
    assert pooled.mean_aic is not None and np.isfinite(pooled.mean_aic)
    assert all(fw.aic is not None for fw, _ in pooled.per_sample_fits)
    np.testing.assert_allclose(pooled.mean_beta, pooled.within.mean)
