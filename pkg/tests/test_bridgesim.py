import math

import numpy as np
import pytest

import bridgesim
import kernels
import streams
from errors import ConfigurationError, DomainError, InfeasibleConfiguration
from pdesolve import PotentialField


def test_bridge_endpoints_are_exact() -> None:
    rng = streams.stream(1, "test")
    paths = bridgesim.bridge_batch(rng, 2.0, [0.5, -0.5], [1.0, -1.0], 20, 7)
    assert paths.shape == (7, 2, 21)
    assert np.all(paths[:, :, 0] == [0.5, -0.5])
    assert np.all(paths[:, :, -1] == [1.0, -1.0])


def test_bridge_midpoint_statistics() -> None:
    rng = streams.stream(2, "test")
    paths = bridgesim.bridge_batch(rng, 1.0, [0.0], [0.0], 10, 20000)
    mid = paths[:, 0, 5]
    assert abs(mid.mean()) < 5.0 * math.sqrt(0.25 / 20000)
    assert abs(mid.var() - 0.25) < 5.0 * 0.25 * math.sqrt(2.0 / 20000)


def test_bridge_batch_domain() -> None:
    rng = streams.stream(3, "test")
    with pytest.raises(DomainError):
        bridgesim.bridge_batch(rng, 0.0, [0.0], [0.0], 10, 1)
    with pytest.raises(DomainError):
        bridgesim.bridge_batch(rng, 1.0, [0.0], [0.0], 1, 1)


def test_karlin_mcgregor_acceptance_two_paths() -> None:
    x = (0.5, -0.5)
    y = (0.75, -0.25)
    expected = 1.0 - math.exp(-(x[0] - x[1]) * (y[0] - y[1]) / 0.8)
    assert bridgesim.karlin_mcgregor_acceptance(0.8, x, y) == pytest.approx(expected, rel=1e-12)


def test_acceptance_with_crossing_correction_is_unbiased() -> None:
    x = y = (0.5, -0.5)
    estimate, stderr = bridgesim.acceptance_probability(1.0, x, y, 50, 20000, seed=11)
    exact = 1.0 - math.exp(-1.0)
    assert abs(estimate - exact) <= 4.0 * stderr


def test_ordered() -> None:
    paths = np.array([[[1.0, 0.5, 1.0], [0.0, 0.0, 0.0]], [[1.0, -0.1, 1.0], [0.0, 0.0, 0.0]]])
    assert list(bridgesim.ordered(paths)) == [True, False]


def test_sample_nonintersecting() -> None:
    rng = streams.stream(4, "test")
    ensemble = bridgesim.sample_nonintersecting(2, 1.0, (1.0, -1.0), (1.0, -1.0), 50, rng, probe=2000)
    assert ensemble.accepted
    assert np.all(ensemble.paths[0] > ensemble.paths[1])
    assert ensemble.times[-1] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        bridgesim.sample_nonintersecting(2, 1.0, (1.0, 1.0), (1.0, -1.0), 50, rng)


def test_sample_nonintersecting_infeasible(monkeypatch) -> None:
    monkeypatch.setattr(bridgesim, "MIN_ACCEPTANCE", 0.5)
    rng = streams.stream(5, "test")
    with pytest.raises(InfeasibleConfiguration) as info:
        bridgesim.sample_nonintersecting(2, 1.0, (0.01, 0.0), (0.01, 0.0), 100, rng, probe=2000)
    assert info.value.rate < 0.5


def test_path_energy_of_flat_potential() -> None:
    rng = streams.stream(6, "test")
    paths = bridgesim.bridge_batch(rng, 1.5, [0.0, -1.0], [0.0, -1.0], 30, 4)
    energy = bridgesim.path_energy(PotentialField.constant(0.4), paths, 1.5)
    assert energy == pytest.approx([2 * 0.4 * 1.5] * 4)


def test_feynman_kac_zero_potential_is_exact() -> None:
    x = (0.5, -0.5)
    y = (0.3, -0.6)
    estimate = bridgesim.feynman_kac_layers(PotentialField.zero(), 2, 1.0, x, y, 2000, seed=7, m=50)
    assert estimate.value == pytest.approx(kernels.km_density(1.0, x, y), rel=1e-12)
    assert estimate.stderr == pytest.approx(0.0, abs=1e-15)
    single = bridgesim.feynman_kac_layers(PotentialField.zero(), 1, 1.0, 0.2, -0.1, 100, seed=7, m=20)
    assert single.value == pytest.approx(float(kernels.heat_kernel(1.0, 0.2, -0.1)), rel=1e-12)


def test_feynman_kac_flat_potential() -> None:
    x = (0.5, -0.5)
    y = (0.3, -0.6)
    estimate = bridgesim.feynman_kac_layers(PotentialField.constant(0.3), 2, 1.0, x, y, 2000, seed=7, m=50)
    assert estimate.value == pytest.approx(math.exp(0.6) * kernels.km_density(1.0, x, y), rel=1e-12)


def test_intersection_local_time() -> None:
    path = np.linspace(0.0, 1.0, 101)
    identical = bridgesim.intersection_local_time(path, path, 0.1)
    assert identical.degenerate
    assert float(identical) == pytest.approx(1.0 / 0.2)
    apart = bridgesim.intersection_local_time(path, path + 1.0, 0.1)
    assert float(apart) == 0.0
    assert not apart.degenerate
    with pytest.raises(ConfigurationError):
        bridgesim.intersection_local_time(path, path, 0.01)
    with pytest.raises(DomainError):
        bridgesim.intersection_local_time(path, path[:-1], 0.1)


def test_signed_sum_without_local_time_is_the_determinant() -> None:
    x = (0.5, -0.5)
    y = (0.3, -0.6)
    report = bridgesim.signed_sum_estimate(PotentialField.zero(), 1.0, x, y, 500, seed=3, m=50)
    assert report.without_local_time.value == pytest.approx(kernels.km_density(1.0, x, y), rel=1e-10)
    with pytest.raises(DomainError):
        bridgesim.signed_sum_estimate(PotentialField.zero(), 1.0, (1.0, 0.0, -1.0), (1.0, 0.0, -1.0), 10, 3)


def test_mc_estimate_within() -> None:
    estimate = bridgesim.MCEstimate(value=1.02, stderr=0.01, n_samples=100, n_accepted=100, seed=0)
    assert estimate.within(1.0)
    assert not estimate.within(1.05, n_sigma=2.0)


@pytest.mark.slow
def test_local_time_is_rayleigh() -> None:
    report = bridgesim.rayleigh_check(1000, 5000, seed=20240601, bandwidth=0.02)
    assert report.ks_distance < 0.05
    assert report.mean == pytest.approx(math.sqrt(math.pi / 2.0), rel=5e-2)


@pytest.mark.slow
def test_second_moment_matches_closed_form() -> None:
    report = bridgesim.second_moment_check(0.25, 0.0, 0.0, 20000, seed=20240601, m=200)
    assert report.extrapolated == pytest.approx(report.closed_form, rel=5e-2)


def test_sample_bridge() -> None:
    path = bridgesim.sample_bridge(1.0, 0.3, -0.2, 50, streams.stream(7, "test"))
    assert path.shape == (51,)
    assert path[0] == 0.3
    assert path[-1] == -0.2
    again = bridgesim.sample_bridge(1.0, 0.3, -0.2, 50, streams.stream(7, "test"))
    assert np.array_equal(path, again)


def test_pairwise_local_time() -> None:
    m = 100
    paths = np.zeros((2, 3, m + 1))
    paths[:, 2] = 5.0
    paths[1, 1] = 5.0
    total = bridgesim.pairwise_local_time(paths, 1.0 / m, 0.1)
    assert total[0] == pytest.approx(1.0 / 0.2)
    assert total[1] == pytest.approx(1.0 / 0.2)
    with pytest.raises(ConfigurationError):
        bridgesim.pairwise_local_time(paths, 1.0 / m, 0.01)


def test_local_time_bound_holds_for_three_bridges() -> None:
    report = bridgesim.local_time_bound_check(3, 1.0, 2000, seed=8, m=100)
    assert report.bound == pytest.approx(kernels.holder_bound(3, 1.0))
    assert report.estimate.n_samples == 2000
    assert report.estimate.value >= 1.0
    assert report.holds
    assert set(report.diagnostics) == {"max_weight_share", "tail_share"}


def test_bridge_batch_stream_order() -> None:
    direct = bridgesim.bridge_batch(streams.stream(4, "test"), 1.0, [0.0, 0.0], [0.0, 0.0], 20, 50)
    swapped = bridgesim.bridge_batch(streams.stream(4, "test"), 1.0, [0.0, 0.0], [0.0, 0.0], 20, 50, order=[1, 0])
    assert np.array_equal(swapped[:, 0], direct[:, 1])
    assert np.array_equal(swapped[:, 1], direct[:, 0])
    with pytest.raises(DomainError):
        bridgesim.bridge_batch(streams.stream(4, "test"), 1.0, [0.0, 0.0], [0.0, 0.0], 20, 5, order=[0, 0])


def test_stderr_halves_when_samples_quadruple(bump) -> None:
    x = (0.5, -0.5)
    y = (0.3, -0.6)
    small = bridgesim.feynman_kac_layers(bump, 2, 1.0, x, y, 2000, seed=11, m=50)
    large = bridgesim.feynman_kac_layers(bump, 2, 1.0, x, y, 8000, seed=11, m=50)
    assert small.stderr / large.stderr == pytest.approx(2.0, rel=0.2)


def test_path_weights_reproduce_the_estimate(bump) -> None:
    x = (0.5, -0.5)
    y = (0.3, -0.6)
    weights = bridgesim.path_weights(bump, 1.0, x, y, 3000, seed=5, m=50)
    accepted = bridgesim.path_weights(PotentialField.zero(), 1.0, x, y, 3000, seed=5, m=50)
    estimate = bridgesim.feynman_kac_layers(bump, 2, 1.0, x, y, 3000, seed=5, m=50)
    assert weights.shape == (3000,)
    assert estimate.value == pytest.approx(kernels.km_density(1.0, x, y) * weights.sum() / accepted.sum(),
                                           rel=1e-10)
    stderr = accepted.std(ddof=1) / math.sqrt(len(accepted))
    assert abs(accepted.mean() - bridgesim.karlin_mcgregor_acceptance(1.0, x, y)) < 4.0 * stderr


@pytest.mark.slow
def test_estimator_law_ignores_stream_order(bump) -> None:
    report = bridgesim.exchangeability_check(bump, 1.0, (0.5, -0.5), (0.3, -0.6), 10000, seed=23, m=50)
    assert report.order == (1, 0)
    assert report.p_value > 0.01
    three = bridgesim.exchangeability_check(bump, 1.0, (1.0, 0.0, -1.0), (1.0, 0.0, -1.0), 10000, seed=23,
                                            order=(2, 0, 1), m=50)
    assert three.p_value > 0.01
