from dataclasses import replace

import numpy as np
import pytest

import kernels
import pdesolve
import shelattice
from errors import ConfigurationError, DomainError, StepSizeError
from pdesolve import PotentialField
from shelattice import LatticeEnsemble, NoiseField


def test_noise_export_and_load(tmp_path, tiny_lattice) -> None:
    noise = NoiseField.generate(42, tiny_lattice, index=3)
    path = noise.export(tmp_path / "noise.bin")
    loaded = NoiseField.load(path)
    assert np.array_equal(loaded.xi, noise.xi)
    assert loaded.seed == 42
    assert loaded.matches(tiny_lattice)


def test_noise_load_rejects_bad_files(tmp_path, tiny_lattice) -> None:
    short = tmp_path / "short.bin"
    short.write_bytes(b"abc")
    with pytest.raises(ConfigurationError):
        NoiseField.load(short)
    noise = NoiseField.generate(1, tiny_lattice)
    data = noise.export(tmp_path / "cut.bin").read_bytes()
    (tmp_path / "cut.bin").write_bytes(data[:-8])
    with pytest.raises(ConfigurationError):
        NoiseField.load(tmp_path / "cut.bin")


def test_noise_is_regenerable(tiny_lattice) -> None:
    a = NoiseField.generate(5, tiny_lattice, 0)
    assert np.array_equal(a.xi, NoiseField.generate(5, tiny_lattice, 0).xi)
    assert not np.array_equal(a.xi, NoiseField.generate(5, tiny_lattice, 1).xi)
    assert a.xi.shape == (tiny_lattice.n_t, tiny_lattice.n_y)


def test_zero_noise_matches_smooth_solver(tiny_lattice) -> None:
    sol = shelattice.evolve_she(NoiseField.zeros(tiny_lattice), tiny_lattice)
    smooth = pdesolve.solve_smooth(PotentialField.zero(), tiny_lattice, retain=1)
    assert sol.negative_fraction == 0.0
    np.testing.assert_allclose(sol.z, smooth.z, rtol=1e-12, atol=1e-300)


def test_noise_must_match_grid(tiny_lattice) -> None:
    other = shelattice.lattice_grid(n_y=101, n_t=200)
    with pytest.raises(ConfigurationError):
        shelattice.evolve_she(NoiseField.zeros(other), tiny_lattice)


def test_negative_multipliers_raise(tiny_lattice) -> None:
    noise = NoiseField(np.full((tiny_lattice.n_t, tiny_lattice.n_y), -10.0), 0, tiny_lattice.dt, tiny_lattice.dy)
    with pytest.raises(StepSizeError) as info:
        shelattice.evolve_she(noise, tiny_lattice)
    assert info.value.fraction == pytest.approx(1.0)


def test_km_determinant(tiny_lattice) -> None:
    grid = replace(tiny_lattice, x_nodes=(0.5, 0.0))
    sol = shelattice.evolve_she(NoiseField.generate(3, grid), grid)
    km = shelattice.km_determinant(sol, (0.5, 0.0), (0.5, -0.5))
    z = sol.z
    j1, j2 = 75, 65
    assert km.det == pytest.approx(z[0, j1] * z[1, j2] - z[0, j2] * z[1, j1], rel=1e-10)
    assert km.hat == pytest.approx(km.det / 0.25, rel=1e-12)
    tied = shelattice.km_determinant(sol, (0.5, 0.0), (0.5, 0.5))
    assert tied.det == 0.0
    assert np.isnan(tied.hat)
    with pytest.raises(DomainError):
        shelattice.km_determinant(sol, (0.5, 0.0), (0.55, 0.0))


def test_flow_property(tiny_lattice) -> None:
    free = shelattice.flow_property_check(None, tiny_lattice, 0.5)
    assert free.max_stencil_error < 1e-8
    assert 0.0 < free.max_error < 2e-2
    fine_free = shelattice.flow_property_check(None, shelattice.flow_refined(tiny_lattice), 0.5)
    assert fine_free.max_error < free.max_error
    seeded = shelattice.flow_property_check(17, tiny_lattice, 0.5)
    assert seeded.max_stencil_error < 1e-8
    assert 0.0 < seeded.max_error < 2e-2
    assert 0.0 < seeded.s < 1.0
    fine = shelattice.flow_property_check(17, shelattice.flow_refined(tiny_lattice), 0.5)
    assert fine.max_error < seeded.max_error
    with pytest.raises(ConfigurationError):
        shelattice.flow_property_check(17, tiny_lattice, 2.0)


def test_flow_refined_keeps_parabolic_scaling(tiny_lattice) -> None:
    fine = shelattice.flow_refined(tiny_lattice)
    assert fine.dy == pytest.approx(tiny_lattice.dy / 2.0)
    assert fine.init_epsilon / fine.dy ** 2 == pytest.approx(tiny_lattice.init_epsilon / tiny_lattice.dy ** 2)


def test_ratio_identity(tiny_lattice) -> None:
    grid = replace(tiny_lattice, x_nodes=(0.0, tiny_lattice.dy))
    ensemble = shelattice.evolve_ensemble(grid, 23, 5)
    report = shelattice.ratio_identity_check(ensemble, 0.0, 0.5, 0.0)
    assert report.lhs.shape == (5 - report.skipped,)
    assert report.telescoped_error < 1e-8
    degenerate = shelattice.ratio_identity_check(ensemble, 0.0, 0.5, 0.5)
    assert degenerate.degenerate
    assert np.all(degenerate.lhs == 0.0)
    with pytest.raises(DomainError):
        shelattice.ratio_identity_check(ensemble, 0.0, 0.0, 0.5)


def test_ensemble_is_regenerable(tiny_lattice) -> None:
    first = shelattice.evolve_ensemble(tiny_lattice, 29, 3)
    again = shelattice.evolve_ensemble(tiny_lattice, 29, 3)
    assert np.array_equal(first.z, again.z)
    single = shelattice.evolve_she(NoiseField.generate(29, tiny_lattice, 1), tiny_lattice)
    np.testing.assert_allclose(first.z[1], single.z, rtol=1e-12, atol=1e-300)


def test_line_ensemble_zero_noise(tiny_lattice) -> None:
    dy = tiny_lattice.dy
    grid = replace(tiny_lattice, x_nodes=(0.0, dy, 2 * dy))
    sol = shelattice.evolve_she(NoiseField.zeros(grid), grid)
    ensemble = LatticeEnsemble(grid=grid, seed=0, z=sol.z[None])
    report = shelattice.line_ensemble_diagnostics(ensemble, 0.0, n_max=2)
    assert report.fractions.shape == (2, 1)
    assert np.all(report.min_fraction >= 0.99)
    with pytest.raises(DomainError):
        shelattice.line_ensemble_diagnostics(ensemble, 0.0, n_max=4)


def test_confluent_hat_first_layer(tiny_lattice) -> None:
    z = np.arange(2 * tiny_lattice.n_y, dtype=float).reshape(2, tiny_lattice.n_y)
    grid = replace(tiny_lattice, x_nodes=(0.0, tiny_lattice.dy))
    assert np.array_equal(shelattice.confluent_hat(z, grid, 0, 1), z[0])
    with pytest.raises(DomainError):
        shelattice.confluent_hat(z, grid, 1, 2)


@pytest.mark.slow
def test_lattice_second_moment_matches_closed_form() -> None:
    report = shelattice.lattice_second_moment(shelattice.lattice_grid())
    assert report.coarse > 1.0
    assert report.extrapolated == pytest.approx(kernels.second_moment_closed_form(1.0), rel=5e-2)


def test_noise_shift_mean_without_potential(tiny_lattice) -> None:
    grid = replace(tiny_lattice, x_nodes=(0.5, -0.5))
    probes = [(0.5, 0.5), (0.5, 0.0), (-0.5, -0.5)]
    report = shelattice.noise_shift_mean(PotentialField.zero(), grid, 200, 31, probes,
                                         pair=((0.5, -0.5), (0.5, -0.5)))
    assert report.mean.shape == (3,)
    assert np.all(report.z_scores() < 5.0)
    assert np.all(np.abs(report.wick_mean - report.reference) < 5.0 * report.wick_stderr)
    assert abs(report.det_mean - report.det_reference) < 5.0 * report.det_stderr
