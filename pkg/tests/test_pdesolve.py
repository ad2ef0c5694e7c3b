import math

import numpy as np
import pytest

import kernels
import pdesolve
from errors import ConfigurationError, DomainError
from pdesolve import Bump, GridSpec, HalfStepDiffusion, PotentialField


def _trust(grid, x=0.0):
    return grid.trust_mask(x)


def test_free_field_matches_heat_kernel(small_grid) -> None:
    surface = pdesolve.solve_smooth(PotentialField.zero(), small_grid)
    mask = _trust(small_grid)
    exact = kernels.heat_kernel(1.0, 0.0, small_grid.y)
    assert surface.t == pytest.approx(1.0)
    assert np.max(np.abs(surface.z[0, mask] / exact[mask] - 1.0)) < 2e-3
    assert surface.nonpositive() == 0


def test_flat_potential_scales_free_field(small_grid) -> None:
    free = pdesolve.solve_smooth(PotentialField.zero(), small_grid).z[0]
    flat = pdesolve.solve_smooth(PotentialField.constant(0.5), small_grid).z[0]
    mask = _trust(small_grid)
    assert np.allclose(flat[mask] / free[mask], math.exp(0.5), rtol=1e-10)


def test_grid_validation() -> None:
    with pytest.raises(ConfigurationError):
        GridSpec(y_min=-3.0, y_max=3.0).validate()
    with pytest.raises(ConfigurationError):
        GridSpec(init_epsilon=0.5).validate()
    with pytest.raises(ConfigurationError):
        GridSpec(n_y=3).validate()
    assert GridSpec().init_epsilon == pytest.approx(1e-3)


def test_refined_pencil_keeps_centre(small_grid) -> None:
    pencil = small_grid.pencil(0.5, 2)
    assert pencil.is_pencil()
    fine = pencil.refined()
    assert fine.dy == pytest.approx(small_grid.dy / 2)
    assert fine.n_t == 2 * small_grid.n_t
    assert len(fine.x_nodes) == 5
    assert fine.x_nodes[2] == pytest.approx(0.5)
    assert np.diff(fine.x_nodes) == pytest.approx([fine.dy] * 4)


def test_bump_potential() -> None:
    bump = Bump(1.0, 0.5, 0.7, 0.2, 0.5)
    field = PotentialField((bump,))
    y = np.linspace(-2.0, 2.0, 9)
    assert field(0.5, 0.7) == pytest.approx(1.0)
    assert field.reflect()(0.3, y) == pytest.approx(field(0.3, -y))
    assert field.reflect().reflect() == field
    assert field.sup_norm == 1.0
    assert PotentialField((Bump(-0.5),)).sup_upper == 0.0
    with pytest.raises(ConfigurationError):
        Bump(1.0, width_y=0.0)


def test_potential_config() -> None:
    field = PotentialField.from_config([{"amplitude": 1.0, "center_t": 0.5, "width_t": 0.2, "width_y": 0.5}])
    assert field == pdesolve.standard_bump()
    assert PotentialField.from_config(None).is_zero
    with pytest.raises(ConfigurationError):
        PotentialField.from_config("bump")
    with pytest.raises(ConfigurationError):
        PotentialField.from_config([{"amplitude": 1.0, "height": 2.0}])


def test_bump_near_boundary_is_rejected(small_grid) -> None:
    field = PotentialField((Bump(1.0, 0.5, 5.0, 0.2, 0.5),))
    with pytest.raises(ConfigurationError):
        pdesolve.check_potential(field, small_grid)


def test_half_step_keeps_boundary_and_mass() -> None:
    y = np.linspace(-5.0, 5.0, 201)
    v = kernels.heat_kernel(0.1, 0.0, y)[:, None]
    v[[0, -1]] = 0.0
    out = HalfStepDiffusion(201, y[1] - y[0], 0.01)(v)
    assert out.shape == v.shape
    assert out[0, 0] == 0.0 and out[-1, 0] == 0.0
    assert out.sum() == pytest.approx(v.sum(), rel=1e-8)


def test_free_layers(small_grid) -> None:
    surface = pdesolve.solve_smooth(PotentialField.zero(), small_grid.pencil(0.0, 2), retain=3)
    stack = pdesolve.build_layers(surface, 0.0, 2)
    p = kernels.heat_kernel(1.0, 0.0, stack.y)
    mask = stack.trust
    for n in (1, 2):
        assert np.max(np.abs(stack.z_layers[n - 1][mask] / p[mask] ** n - 1.0)) < 5e-3
    assert np.allclose(stack.s_fields[0][mask], 1.0, rtol=1e-2)
    assert np.allclose(stack.s_tilde[0][mask], 1.0, rtol=1e-2)
    assert [c.n for c in stack.constants] == [1, 2]


def test_build_layers_domain(small_grid) -> None:
    surface = pdesolve.solve_smooth(PotentialField.zero(), small_grid.pencil(0.0, 1), retain=1)
    with pytest.raises(DomainError):
        pdesolve.build_layers(surface, 0.0, 6)
    with pytest.raises(DomainError):
        pdesolve.build_layers(surface, 0.0, 2)
    with pytest.raises(DomainError):
        pdesolve.build_layers(surface, 0.3, 1)


def test_calibration_probe_free_field(small_grid) -> None:
    surface = pdesolve.solve_smooth(PotentialField.zero(), small_grid.pencil(0.0, 2), retain=1)
    entry = pdesolve.calibration_probe(surface, 0.0, 0.5, 2)
    assert entry.calibrated_constant == pytest.approx(kernels.calibrate_wronskian_constant(2, 1.0), rel=1e-2)
    assert entry.printed_constant == pytest.approx(1.0)


def test_gt_reconstruction_free_field(small_grid) -> None:
    surface = pdesolve.solve_smooth(PotentialField.zero(), small_grid.pencil(0.0, 2), retain=1)
    report = pdesolve.gt_reconstruction_check(surface, 0.0, (0.5, -0.5), 2)
    assert report.sign == -1
    assert report.ratio_alt * report.sign == pytest.approx(1.0, abs=2e-2)
    with pytest.raises(DomainError):
        pdesolve.gt_reconstruction_check(surface, 0.0, (0.5, -0.5), 4)


def test_reflection_symmetry(small_grid) -> None:
    free = pdesolve.rsk_symmetry_check(PotentialField.zero(), small_grid, N=2, tolerance=1e-8)
    assert free.holds
    off_centre = PotentialField((Bump(1.0, 0.5, 0.7, 0.2, 0.5),))
    single = pdesolve.rsk_symmetry_check(off_centre, small_grid, N=1, tolerance=1e-8)
    assert single.holds
    with pytest.raises(ConfigurationError):
        pdesolve.rsk_symmetry_check(off_centre, GridSpec(y_min=-7.0, y_max=8.0, n_y=301), N=1)


def test_mass_bound(small_grid, bump) -> None:
    for potential in (PotentialField.zero(), bump):
        report = pdesolve.mass_bound_check(pdesolve.solve_smooth(potential, small_grid))
        assert report.holds


def test_monotonicity(small_grid) -> None:
    margin = pdesolve.monotonicity_check(PotentialField.zero(), PotentialField.constant(0.5), small_grid)
    assert margin == pytest.approx(1.0 - math.exp(-0.5), rel=1e-8)
    with pytest.raises(ConfigurationError):
        pdesolve.monotonicity_check(PotentialField.constant(0.5), PotentialField.zero(), small_grid)


@pytest.mark.slow
def test_layer_residual_converges(bump) -> None:
    grid = GridSpec(y_min=-7.0, y_max=7.0, n_y=281, n_t=200, t_final=1.0, init_epsilon=0.01).pencil(0.0, 2)
    coarse = pdesolve.layer_residual(pdesolve.solve_smooth(bump, grid), 0.0, 2)
    fine = pdesolve.layer_residual(pdesolve.solve_smooth(bump, grid.refined()), 0.0, 2)
    assert np.all(coarse.ratio(fine) > 2.0)


@pytest.mark.slow
def test_reflection_symmetry_two_layers() -> None:
    off_centre = PotentialField((Bump(1.0, 0.5, 0.7, 0.2, 0.5),))
    assert pdesolve.rsk_symmetry_check(off_centre, GridSpec(), N=2).holds


def test_layer_stack_over_time(small_grid) -> None:
    surface = pdesolve.solve_smooth(PotentialField.zero(), small_grid.pencil(0.0, 1), retain=3)
    stacks = pdesolve.layer_stack_over_time(surface, 0.0, 1)
    assert len(stacks) == 3
    times = [stack.t for stack in stacks]
    assert times == sorted(times)
    assert times[-1] == pytest.approx(surface.t)
    for stack in stacks:
        p = kernels.heat_kernel(stack.t, 0.0, stack.y)
        assert np.max(np.abs(stack.z_layers[0][stack.trust] / p[stack.trust] - 1.0)) < 5e-3


def test_s_evolution_residual_reports_both_definitions(small_grid) -> None:
    surface = pdesolve.solve_smooth(PotentialField.zero(), small_grid.pencil(0.0, 2), retain=3)
    reports = pdesolve.s_evolution_residual(surface, 0.0, 2)
    assert set(reports) == {"nt-ratio", "dxy-log"}
    for label, report in reports.items():
        assert report.kind == "s-evolution"
        assert report.definition == label
        assert report.max_norm.shape == (1,)
        assert np.all(np.isfinite(report.max_norm))
    with pytest.raises(DomainError):
        pdesolve.s_evolution_residual(surface, 0.0, 1)
