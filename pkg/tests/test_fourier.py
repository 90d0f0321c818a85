import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from hmmdeconv.fourier import (EmpiricalCF, QuadratureGrid, _sinc, basis_square_sum,
                               direct_coeff_sum, empirical_cf_1d, empirical_cf_2d,
                               fourier_coeff_grid, grid_for_frequency, oscillation_rule,
                               sinc_basis, sinc_second_derivative)


def test_sinc_basis_values():
    assert sinc_basis(1, 0, 0.0) == 1.0
    for k in (-3, -1, 1, 2, 7):
        assert abs(sinc_basis(1, 0, float(k))) < 1e-15
    assert_allclose(sinc_basis(4, 3, 0.75), 2.0, rtol=1e-15)


def test_sinc_series_branch_is_continuous():
    z = np.array([-2e-4, -1e-4 - 1e-12, -1e-4 + 1e-12, 0.0, 5e-5, 1e-4 + 1e-12])
    direct = np.where(z == 0, 1.0, np.sin(np.pi * z) / (np.pi * np.where(z == 0, 1, z)))
    assert_allclose(_sinc(z), direct, rtol=1e-14)


def test_sinc_second_derivative_matches_finite_differences():
    z = np.array([-2.3, -0.5, -0.04, 0.0, 0.03, 0.051, 0.7, 3.2])
    h = 1e-4
    fd = (_sinc(z + h) - 2 * _sinc(z) + _sinc(z - h)) / h ** 2
    assert_allclose(sinc_second_derivative(z), fd, atol=1e-6)
    assert_allclose(sinc_second_derivative(np.array([0.0])), [-np.pi ** 2 / 3], rtol=1e-14)


def test_basis_rejects_nonpositive_m():
    with pytest.raises(ValueError):
        sinc_basis(0, 0, 0.5)


@pytest.mark.parametrize("m", [1, 2, 8, 32])
def test_basis_square_sum_equals_m(m):
    rng = np.random.default_rng(m)
    for x in rng.uniform(-10, 10, 25):
        value, tail = basis_square_sum(x, m)
        assert abs(value - m) < 1e-6
        assert tail == pytest.approx(2 * m / (np.pi ** 2 * 1e4))


def test_empirical_cf_examples():
    rng = np.random.default_rng(0)
    sample = rng.normal(size=50)
    assert empirical_cf_1d(sample, 0.0) == 1 + 0j
    y, u = 0.7, 2.3
    assert_allclose(empirical_cf_1d([y], u), np.exp(1j * u * y), rtol=1e-15)
    assert_allclose(empirical_cf_1d([y, -y], u), math.cos(u * y), rtol=1e-15)
    with pytest.raises(ValueError, match="empty sample"):
        empirical_cf_1d([], 1.0)
    with pytest.raises(ValueError, match="empty sample"):
        EmpiricalCF(np.array([]))


def test_empirical_cf_2d_examples():
    a, b, u, v = 0.4, -1.2, 0.9, 2.1
    pairs = np.array([[0.1, 0.2], [1.0, -3.0]])
    assert empirical_cf_2d(pairs, 0.0, 0.0) == 1 + 0j
    assert_allclose(empirical_cf_2d([[a, b]], u, v), np.exp(1j * (u * a + v * b)), rtol=1e-15)
    assert_allclose(empirical_cf_2d([[a, b], [-a, -b]], u, v), math.cos(u * a + v * b), rtol=1e-14)
    with pytest.raises(ValueError):
        empirical_cf_2d(np.zeros((0, 2)), 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30),
       st.lists(st.floats(-20, 20), min_size=1, max_size=10))
def test_empirical_cf_invariants(sample, us):
    cf = EmpiricalCF(sample)
    u = np.array(us)
    vals = cf(u)
    assert cf(0.0) == 1 + 0j
    assert np.all(np.abs(vals) <= 1 + 1e-12)
    assert_allclose(cf(-u), np.conj(vals), atol=1e-12)


def test_grid_invariants():
    g = QuadratureGrid(257)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] == -np.pi and g.nodes[-1] == np.pi
    assert_allclose(g.weights.sum(), 2 * np.pi, rtol=1e-14)
    assert QuadratureGrid().n_points == 4096
    with pytest.raises(ValueError):
        QuadratureGrid(1)


def test_coefficients_of_constant_and_pure_modes():
    grid = QuadratureGrid()
    c = fourier_coeff_grid(lambda v: np.ones_like(v), grid, (-20, 20))
    expect = np.zeros(41)
    expect[20] = 1
    assert_allclose(c, expect, atol=1e-12)
    for k in (-7, 0, 3, 15):
        c = fourier_coeff_grid(lambda v: np.exp(1j * k * v), grid, (-20, 20))
        expect = np.zeros(41)
        expect[k + 20] = 1
        assert_allclose(c, expect, atol=1e-12)


def test_coefficients_of_ramp():
    grid = QuadratureGrid()
    js = np.arange(-50, 51)
    c = fourier_coeff_grid(lambda v: v, grid, (-50, 50))
    # closed form (1/2pi) int v exp(-ijv) dv = i (-1)^j / j
    exact = np.where(js == 0, 0, 1j * (-1.0) ** js / np.where(js == 0, 1, js))
    assert_allclose(c, exact, atol=1e-10)
    fine = QuadratureGrid(10 * (grid.n_points - 1) + 1)
    assert_allclose(c, direct_coeff_sum(lambda v: v, fine, (-50, 50)), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3), st.integers(3, 40))
def test_fft_path_matches_direct_sum(a, b, shift, jmax):
    grid = QuadratureGrid(1025)

    def g(v):
        return np.exp(a * np.cos(v) + 1j * b * np.sin(v + shift)) * (1 + v * v)

    fast = fourier_coeff_grid(g, grid, (-jmax, jmax))
    slow = direct_coeff_sum(g, grid, (-jmax, jmax))
    assert_allclose(fast, slow, atol=1e-12 * max(1.0, np.abs(slow).max()))


def test_non_finite_integrand_rejected():
    grid = QuadratureGrid(65)
    with np.errstate(divide="ignore"), pytest.raises(ValueError, match="non-finite integrand"):
        fourier_coeff_grid(lambda v: 1 / (v - v[10]), grid, (-3, 3))


def test_grid_sizing_rules():
    assert oscillation_rule(2, 3.0) == math.ceil(8 * 2 * 4 / math.pi)
    g = grid_for_frequency(100.0)
    assert g.step * 100 <= 0.15
    assert (g.n_points - 1) & (g.n_points - 2) == 0
