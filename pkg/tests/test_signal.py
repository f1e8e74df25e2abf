import numpy as np
import pytest
from numpy.testing import assert_allclose
import scipy.integrate

from nusrec.signal import (
    GridFunction, HarmonicBasis, Signal, derivative, dirichlet, evaluate, inner_l2, integral,
    interval_harmonics, max_harmonic, project_bandlimited, random_bandlimited, sobolev_inner, to_grid
)


def test_max_harmonic():
    assert max_harmonic(31) == 15
    assert max_harmonic(63) == 31
    assert max_harmonic(32) == 15
    assert max_harmonic(32.5) == 16
    with pytest.raises(ValueError):
        max_harmonic(0)


def test_random_bandlimited_rms():
    x = random_bandlimited(31, 2., seed=0)
    assert x.M == 15
    grid = x.to_grid()
    assert_allclose(np.sqrt(np.mean(grid.samples ** 2)), 2., rtol=1e-10)
    assert_allclose(x.norm_l2(), 2. * np.sqrt(31), rtol=1e-10)


def test_random_bandlimited_is_deterministic():
    x1 = random_bandlimited(31, 1., seed=42)
    x2 = random_bandlimited(31, 1., seed=42)
    assert_allclose(x1.coeffs, x2.coeffs)
    with pytest.raises(ValueError):
        random_bandlimited(2., 1., seed=0)


def test_signal_rejects_complex_valued_harmonics():
    with pytest.raises(ValueError):
        Signal(31, np.array([1j, 0., 0.]))
    with pytest.raises(ValueError):
        Signal(3, np.ones(5))


def test_grid_matches_direct_evaluation():
    x = random_bandlimited(31, 1., seed=1)
    grid = to_grid(x)
    assert_allclose(grid.samples, evaluate(x, grid.times), atol=1e-10)
    assert_allclose(project_bandlimited(grid, x.M).coeffs, x.coeffs, atol=1e-12)


def test_integral_matches_quadrature():
    x = random_bandlimited(31, 1., seed=2)
    a, b = 3.2, 40.7
    expected, _ = scipy.integrate.quad(x, a, b, limit=500, epsabs=1e-12, epsrel=1e-12)
    assert_allclose(integral(x, a, b), expected, atol=1e-9)
    assert_allclose(integral(x, 0., 31.), 31. * x.mean, atol=1e-10)
    assert_allclose(x.antiderivative(b) - x.antiderivative(a), integral(x, a, b))
    assert x.antiderivative(0.) == 0.


def test_dirichlet_reproduces_point_values():
    x = random_bandlimited(31, 1., seed=3)
    for t0 in [0., 1.7, 12.25, 30.9]:
        assert_allclose(inner_l2(x, dirichlet(31, t0)), x(t0), atol=1e-10)


def test_sobolev_inner_is_inner_product_of_derivatives():
    x = random_bandlimited(31, 1., seed=4)
    y = random_bandlimited(31, 1., seed=5)
    grid_x = derivative(x).to_grid()
    grid_y = derivative(y).to_grid()
    assert_allclose(sobolev_inner(x, y), grid_x.inner(grid_y), rtol=1e-9)
    assert_allclose(sobolev_inner(Signal.constant(31, 3.), x), 0., atol=1e-12)


@pytest.mark.parametrize('leak', [0., 0.4])
def test_interval_harmonics_wraps_around(leak):
    period, M = 31., 15
    a, b = 29.5, 33.2
    expected = np.zeros(M + 1, dtype=complex)
    for m in range(M + 1):
        w = 2. * np.pi * m / period
        f = lambda t: np.exp(-leak * (t - a)) * np.exp(-1j * w * t) / period
        re, _ = scipy.integrate.quad(lambda t: f(t).real, a, b, epsabs=1e-13)
        im, _ = scipy.integrate.quad(lambda t: f(t).imag, a, b, epsabs=1e-13)
        expected[m] = re + 1j * im
    assert_allclose(interval_harmonics(a, b, period, M, leak=leak), expected, atol=1e-10)


def test_interval_harmonics_full_period_is_constant():
    coeffs = interval_harmonics(2.5, 2.5 + 31., 31., 15)
    assert_allclose(coeffs[0], 1.)
    assert_allclose(coeffs[1:], 0., atol=1e-12)
    with pytest.raises(ValueError):
        interval_harmonics(0., 32., 31., 15)
    with pytest.raises(ValueError):
        interval_harmonics(1., 1., 31., 15)


@pytest.mark.parametrize('sobolev', [False, True])
def test_harmonic_basis_is_orthonormal(sobolev):
    basis = HarmonicBasis(31, 15, sobolev=sobolev)
    x = random_bandlimited(31, 1., seed=6)
    y = random_bandlimited(31, 1., seed=7)
    expected = sobolev_inner(x, y) if sobolev else inner_l2(x, y)
    assert_allclose(basis.inner(x, y), expected, rtol=1e-10)
    back = basis.from_coords(basis.to_coords(x))
    if sobolev:
        back = back + Signal.constant(31, x.mean, M=15)
    assert_allclose(back.coeffs, x.coeffs, atol=1e-12)


def test_grid_function_arithmetic():
    g = GridFunction(4., np.ones(8))
    assert_allclose(g.integral(), 4.)
    assert_allclose((g + g).inner(g), 8.)
    assert_allclose((g - g).samples, 0.)


def test_arithmetic_needs_compatible_signals():
    x = Signal.zeros(31.)
    assert x.is_compatible(Signal.zeros(31.))
    assert not x.is_compatible(Signal.zeros(31., M=5))
    assert not x.is_compatible(Signal.zeros(63., M=x.M))
    with pytest.raises(ValueError, match='Harmonic cutoff'):
        x + Signal.zeros(31., M=5)
    with pytest.raises(ValueError, match='Period'):
        x - Signal.zeros(63., M=x.M)
