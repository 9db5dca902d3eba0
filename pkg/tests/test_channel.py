"""Test the RSSI model and the sparse observation process."""

import numpy as np
import pytest

from wsnloc.channel import (
    ChannelParams,
    ObservationModel,
    bias_constant,
    estimate_sq_distance,
    estimator_variance,
    path_loss,
    sample_observation,
    sample_observation_batch,
    sample_rssi,
    sample_rssi_matrix,
)
from wsnloc.exceptions import ConfigurationError, DomainError
from wsnloc.mds_core import Scenario, squared_distances

from . import uniform_scenario


def test_path_loss_reference_values(noiseless):
    """PL(1) is PL₀ and every decade adds 10η dB."""
    assert path_loss(1.0, noiseless) == pytest.approx(-61.71)
    assert path_loss(10.0, noiseless) == pytest.approx(-37.31)


def test_path_loss_rejects_non_positive_distance(noiseless):
    """Path loss is undefined at d ≤ 0."""
    with pytest.raises(DomainError):
        path_loss(0.0, noiseless)
    with pytest.raises(DomainError):
        path_loss(-1.0, noiseless)


def test_sample_rssi_noiseless(rng):
    """With σ = 0 the sample is exactly −PL(d)."""
    params = ChannelParams(pl0=0.0, eta=2.0, sigma2=0.0)
    sample = sample_rssi(0, 1, 2.0, params, rng)
    assert sample.value == pytest.approx(-6.0206, abs=1e-4)
    assert (sample.src, sample.dst) == (0, 1)


def test_sample_rssi_same_node(rng, noiseless):
    """A node does not measure itself."""
    with pytest.raises(DomainError):
        sample_rssi(3, 3, 1.0, noiseless, rng)


def test_sample_rssi_statistics(rng, testbed):
    """Mean and variance of RSSI draws match −PL(d) and σ²."""
    values = np.array([sample_rssi(0, 1, 3.0, testbed, rng).value for _ in range(20000)])
    se = np.sqrt(testbed.sigma2 / len(values))
    assert abs(values.mean() + path_loss(3.0, testbed)) <= 3 * se
    assert values.var() == pytest.approx(testbed.sigma2, rel=0.05)


def test_bias_constant(noiseless, testbed):
    """C is one without shadowing and ≈ 1.1336 with the testbed constants."""
    assert bias_constant(noiseless) == 1.0
    assert bias_constant(testbed) == pytest.approx(1.1336, abs=1e-4)


def test_bias_constant_shrinks_with_averaging(testbed):
    """Averaging T = 2 samples takes the square root of C."""
    averaged = ChannelParams(testbed.pl0, testbed.eta, testbed.sigma2, t_samples=2)
    assert bias_constant(averaged) == pytest.approx(np.sqrt(bias_constant(testbed)))


def test_estimate_noiseless_inversion(noiseless):
    """The estimator inverts the mean path loss exactly when σ = 0."""
    assert estimate_sq_distance(-path_loss(2.0, noiseless), noiseless) == pytest.approx(
        4.0, rel=1e-12
    )


def test_estimator_unbiased(rng, testbed):
    """E[d̂²] = d² at d = 3 m."""
    rssi = -path_loss(3.0, testbed) + testbed.sigma * rng.standard_normal(1_000_000)
    estimates = estimate_sq_distance(rssi, testbed)
    se = estimates.std() / np.sqrt(len(estimates))
    assert abs(estimates.mean() - 9.0) <= 3 * se


def test_estimator_variance(rng, testbed):
    """Var[d̂²] = d⁴(C⁸ − 1) at d = 1 m."""
    expected = estimator_variance(1.0, testbed)
    assert expected == pytest.approx(1.727, abs=2e-3)
    rssi = -path_loss(1.0, testbed) + testbed.sigma * rng.standard_normal(1_000_000)
    assert estimate_sq_distance(rssi, testbed).var() == pytest.approx(expected, rel=0.05)


def test_channel_params_validation():
    """Invalid channel constants are configuration errors."""
    with pytest.raises(ConfigurationError):
        ChannelParams(eta=0.0)
    with pytest.raises(ConfigurationError):
        ChannelParams(sigma2=-1.0)
    with pytest.raises(ConfigurationError):
        ChannelParams(t_samples=0)


def test_observation_model_validation():
    """Probabilities must lie in (0, 1] off the diagonal."""
    with pytest.raises(ConfigurationError):
        ObservationModel.uniform(4, 1.5)
    with pytest.raises(ConfigurationError):
        ObservationModel.uniform(4, 0.0)
    with pytest.raises(ConfigurationError):
        ObservationModel.from_matrix(np.ones((3, 4)))
    obs = ObservationModel.uniform(3, 0.5)
    assert np.array_equal(np.diag(obs.weights), np.zeros(3))
    assert obs.weights[0, 1] == 2.0


def test_full_noiseless_observation(rng, noiseless, triangle):
    """q = 1 and σ = 0 observe the exact squared distances."""
    obs = sample_observation(triangle, ObservationModel.uniform(3, 1.0), noiseless, rng)
    np.testing.assert_allclose(obs.s, squared_distances(triangle.positions), atol=1e-12)
    assert np.array_equal(obs.mask, 1 - np.eye(3, dtype=np.int8))
    np.testing.assert_allclose(obs.row_avg, obs.s.mean(axis=1))


def test_observation_rows_are_local(rng, testbed):
    """Row averages come from the node's own row; the diagonal stays empty."""
    scenario = uniform_scenario(6, seed=3)
    obs = sample_observation(scenario, ObservationModel.uniform(6, 0.7), testbed, rng)
    assert np.all(np.diag(obs.s) == 0.0)
    assert np.all(np.diag(obs.mask) == 0)
    assert np.all(obs.s[obs.mask == 0] == 0.0)
    np.testing.assert_allclose(obs.row_avg, obs.s.sum(axis=1) / 6)


def test_observation_fraction(rng, noiseless):
    """The observed fraction of each link is close to q."""
    scenario = Scenario(np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]))
    batch = sample_observation_batch(
        scenario, ObservationModel.uniform(3, 0.8), noiseless, rng, 100_000
    )
    fraction = batch.mask.mean(axis=0)
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(fraction[off], 0.8, atol=0.01)


def test_sparse_observation_unbiased(rng, testbed):
    """E[S_n] = S entrywise for noisy sparse observations."""
    scenario = uniform_scenario(5, seed=11)
    batch = sample_observation_batch(
        scenario, ObservationModel.uniform(5, 0.6), testbed, rng, 100_000
    )
    exact = squared_distances(scenario.positions)
    mean = batch.s.mean(axis=0)
    se = batch.s.std(axis=0) / np.sqrt(batch.s.shape[0])
    off = ~np.eye(5, dtype=bool)
    assert np.all(np.abs(mean - exact)[off] <= 4 * se[off])


def test_observation_size_mismatch(rng, noiseless, triangle):
    """The observation model must match the scenario size."""
    with pytest.raises(ConfigurationError):
        sample_observation(triangle, ObservationModel.uniform(4, 1.0), noiseless, rng)


def test_coincident_nodes(rng, noiseless):
    """Two nodes at the same place make the path loss undefined."""
    positions = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(DomainError):
        sample_rssi_matrix(positions, noiseless, rng)


def test_rssi_matrix_noiseless(rng, noiseless, triangle):
    """Every off-diagonal entry is −PL(1) on the unit triangle."""
    rssi = sample_rssi_matrix(triangle.positions, noiseless, rng)
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(rssi[off], 61.71)
    assert np.all(np.diag(rssi) == 0.0)
