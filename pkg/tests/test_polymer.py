import math

import numpy as np
import pytest

import polymer
from errors import DomainError
from polymer import DisorderPath


def test_zero_disorder_closed_forms() -> None:
    table = polymer.hierarchy_table(DisorderPath.zero(3, 400, 1.0))
    assert table.entry(1, 1) == pytest.approx(1.0)
    assert table.entry(1, 2) == pytest.approx(1.0, rel=1e-12)
    assert table.entry(1, 3) == pytest.approx(0.5, rel=1e-12)
    assert polymer.multilayer_partition(table, 3) == pytest.approx(1.0, rel=1e-12)
    increments = polymer.x_increments(polymer.multilayer_all(table))
    assert increments == pytest.approx([math.log(0.5), 0.0, math.log(2.0)], abs=1e-10)


def test_zero_disorder_four_levels() -> None:
    table = polymer.hierarchy_table(DisorderPath.zero(4, 400, 2.0))
    assert table.entry(1, 4) == pytest.approx(2.0 ** 3 / 6.0, rel=1e-5)
    assert table.entry(2, 4) == pytest.approx(2.0 ** 2 / 2.0, rel=1e-12)


def test_series_ends_at_partition() -> None:
    path = DisorderPath.sample(3, 100, 1.0, seed=4)
    series = polymer.partition_series(path, 1, 3)
    assert series[0] == 0.0
    assert series[-1] == pytest.approx(polymer.single_path_partition(path, 1, 3))
    assert polymer.hierarchy_table(path).entry(1, 3) == pytest.approx(series[-1], rel=1e-12)


def test_level_domain() -> None:
    path = DisorderPath.zero(3, 10, 1.0)
    with pytest.raises(DomainError):
        polymer.partition_series(path, 2, 1)
    with pytest.raises(DomainError):
        polymer.partition_series(path, 1, 4)
    with pytest.raises(DomainError):
        polymer.multilayer_partition(polymer.hierarchy_table(path), 4)
    with pytest.raises(DomainError):
        polymer.x_increments([1.0, -0.5])


def test_direct_quadrature_two_levels() -> None:
    path = DisorderPath.sample(2, 200, 1.0, seed=8)
    assert polymer.brute_force_partition(path, 1) == pytest.approx(polymer.single_path_partition(path, 1, 2),
                                                                   rel=1e-10)
    assert polymer.brute_force_partition(path, 2) == pytest.approx(
        math.exp(path.b[0, -1] + path.b[1, -1]), rel=1e-12)


def test_determinant_against_brute_force() -> None:
    for comparison in polymer.lgv_check(3, 2, 200, 1.0, [1, 2, 3]):
        assert comparison.relative_error < 1e-3


def test_raised_environments_keep_determinant_and_brute_force_together() -> None:
    for comparison in polymer.lgv_check(3, 2, 200, 1.0, [4, 5], shift=0.7):
        assert comparison.relative_error < 1e-3
    path = DisorderPath.sample(3, 200, 1.0, seed=4)
    raised = path.shifted(0.7)
    assert polymer.brute_force_partition(raised, 2) == pytest.approx(
        math.exp(1.4) * polymer.brute_force_partition(path, 2), rel=1e-12)
    assert polymer.brute_force_partition(raised, 3) == pytest.approx(
        math.exp(raised.b[:, -1].sum()), rel=1e-12)
    pair = DisorderPath.sample(2, 200, 1.0, seed=8).shifted(-0.4)
    assert polymer.brute_force_partition(pair, 1) == pytest.approx(polymer.single_path_partition(pair, 1, 2),
                                                                   rel=1e-10)


def test_brute_force_dimension_limit() -> None:
    with pytest.raises(DomainError):
        polymer.brute_force_partition(DisorderPath.zero(4, 10, 1.0), 2)


def test_shift_moves_every_increment() -> None:
    path = DisorderPath.sample(3, 200, 1.0, seed=12)
    before = polymer.x_increments(polymer.multilayer_all(polymer.hierarchy_table(path)))
    after = polymer.x_increments(polymer.multilayer_all(polymer.hierarchy_table(path.shifted(0.3))))
    assert after - before == pytest.approx([0.3, 0.3, 0.3], abs=1e-10)


def test_ramp_raises_every_partition_function() -> None:
    path = DisorderPath.sample(3, 200, 1.0, seed=13)
    before = polymer.multilayer_all(polymer.hierarchy_table(path))
    for level in (1, 2, 3):
        ramped = path.ramped(level, 0.5, 0.5, 0.1)
        assert ramped.b[level - 1, 0] == path.b[level - 1, 0]
        after = polymer.multilayer_all(polymer.hierarchy_table(ramped))
        assert np.all(after / before >= 1.0 - 1e-12)


def test_disorder_path() -> None:
    path = DisorderPath.sample(2, 50, 2.0, seed=1)
    assert np.array_equal(path.b, DisorderPath.sample(2, 50, 2.0, seed=1).b)
    assert path.dt == pytest.approx(0.04)
    assert np.all(path.b[:, 0] == 0.0)
    fine = path.refined(2)
    assert fine.m == 100
    assert np.allclose(fine.b[:, ::2], path.b)
    with pytest.raises(DomainError):
        DisorderPath(np.zeros((2, 1)), 1.0)
