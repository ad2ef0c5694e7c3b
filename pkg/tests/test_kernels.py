import math

import numpy as np
import pytest
import sympy
from scipy.integrate import quad, trapezoid

import kernels
from errors import DomainError
from kernels import WeylPoint


def test_heat_kernel_normalization_and_symmetry() -> None:
    y = np.linspace(-10.0, 10.0, 4001)
    p = kernels.heat_kernel(0.7, 0.3, y)
    assert trapezoid(p, y) == pytest.approx(1.0, abs=1e-10)
    assert kernels.heat_kernel(0.7, 0.3, -0.2) == pytest.approx(kernels.heat_kernel(0.7, -0.2, 0.3))


def test_heat_kernel_rejects_nonpositive_time() -> None:
    with pytest.raises(DomainError):
        kernels.heat_kernel(0.0, 0.0, 0.0)


def test_derivative_table_matches_symbolic_differentiation() -> None:
    x, y, t = sympy.symbols("x y t", real=True)
    p = sympy.exp(-(x - y) ** 2 / (2 * t)) / sympy.sqrt(2 * sympy.pi * t)
    point = {x: sympy.Rational(3, 10), y: sympy.Rational(-1, 5), t: sympy.Rational(7, 10)}
    table = kernels.heat_kernel_derivatives(0.7, 0.3, -0.2, 3)
    for i in range(3):
        for j in range(3):
            exact = float(sympy.diff(sympy.diff(p, x, i), y, j).subs(point))
            assert table[i, j] == pytest.approx(exact, rel=1e-10, abs=1e-14)


def test_calibrated_constant_is_free_field_normalization() -> None:
    t = 0.7
    for n in (1, 2, 3, 4):
        expected = t ** (n * (n - 1) / 2) / math.prod(math.factorial(j) for j in range(1, n))
        assert kernels.calibrate_wronskian_constant(n, t) == pytest.approx(expected, rel=1e-10)


def test_printed_constant_values() -> None:
    assert kernels.printed_constant(1, 0.5) == 1.0
    assert kernels.printed_constant(3, 1.0) == pytest.approx(2.0)
    assert kernels.printed_constant(3, 2.0) == pytest.approx(16.0)
    with pytest.raises(DomainError):
        kernels.printed_constant(0, 1.0)


def test_confluent_limit_matches_printed_constant() -> None:
    for n in (2, 3):
        value, error = kernels.confluent_limit_constant(n, 1.0)
        assert value == pytest.approx(kernels.printed_constant(n, 1.0), rel=1e-3)
        assert error < 1e-2


def test_km_density_two_paths() -> None:
    t = 0.8
    x = (0.6, -0.4)
    y = (0.3, -0.9)
    p = lambda a, b: float(kernels.heat_kernel(t, a, b))
    expected = p(x[0], y[0]) * p(x[1], y[1]) - p(x[0], y[1]) * p(x[1], y[0])
    assert kernels.km_density(t, x, y) == pytest.approx(expected, rel=1e-12)


def test_km_density_vanishes_on_ties() -> None:
    assert kernels.km_density(1.0, (0.5, 0.5), (0.2, -0.3)) == 0.0
    sign, logdet = kernels.log_km_density(1.0, (0.5, -0.5), (0.0, 0.0))
    assert sign == 0.0
    assert logdet == -np.inf


def test_km_density_length_mismatch() -> None:
    with pytest.raises(DomainError):
        kernels.km_density(1.0, (0.5, -0.5), (0.0,))


def test_weyl_point() -> None:
    point = WeylPoint.confluent(0.0, 3, 0.2)
    assert point.coords == pytest.approx((0.2, 0.0, -0.2))
    assert point.is_interior()
    assert not WeylPoint((1.0, 1.0)).is_interior()
    assert kernels.vandermonde(point) == pytest.approx(0.2 * 0.4 * 0.2)
    with pytest.raises(DomainError):
        WeylPoint((0.0, 1.0))


def test_signs() -> None:
    assert [kernels.orientation_sign(n) for n in (1, 2, 3, 4)] == [1, -1, 1, -1]
    assert [kernels.gt_sign(n) for n in (1, 2, 3, 4)] == [1, -1, -1, 1]
    assert [kernels.dx_sign(n) for n in (1, 2, 3, 4)] == [1, -1, -1, 1]


def test_rayleigh_moment_against_quadrature() -> None:
    for c in (0.0, 0.5, 1.3):
        exact, _ = quad(lambda r: math.exp(c * r) * r * math.exp(-r * r / 2), 0.0, math.inf)
        assert kernels.rayleigh_exponential_moment(c) == pytest.approx(exact, rel=1e-8)


def test_second_moment_is_two_path_holder_bound() -> None:
    for t in (0.25, 1.0):
        assert kernels.holder_bound(2, t) == pytest.approx(kernels.second_moment_closed_form(t))
    assert kernels.holder_bound(3, 1.0) > kernels.second_moment_closed_form(1.0)


def test_ledger_entries_cover_every_constant() -> None:
    entries = kernels.ledger_entries(3, 1.0)
    names = {e.name for e in entries}
    assert names == {"wronskian", "confluent_hat", "divided_difference_factor", "orientation_sign", "gt_sign",
                     "s_definition_factor"}
    assert len(entries) == 3 * len(names)
    wronskian = [e for e in entries if e.name == "wronskian"]
    assert [e.ratio() for e in wronskian] == pytest.approx([1.0, 1.0, 0.25])


def test_confluent_constants_entry() -> None:
    entry = kernels.confluent_constants(3, 0.5)
    assert entry.n == 3
    assert entry.printed_constant == pytest.approx(kernels.printed_constant(3, 0.5))
    assert entry.calibrated_constant == pytest.approx(kernels.calibrate_wronskian_constant(3, 0.5))
    assert entry.orientation_sign == 1
