import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from heatkern.errors import DomainError
from heatkern.spectral import MultiplierSymbol, heat_kernel_spectral, poisson_kernel_closed
from heatkern.subordination import (
    density,
    eta_d1,
    eta_general,
    heat_kernel_subordination,
    small_s_cutoff,
    subordinated_kernel,
    tail_asymptotics_check,
)


def test_closed_form_at_reference_point():
    # t e^{-t^2/4s} s^{-3/2} / (2 sqrt(pi)) at t = 2, s = 1
    assert eta_d1(2.0, 1.0) == pytest.approx(math.exp(-1.0) / math.sqrt(math.pi), rel=1e-15)


@pytest.mark.parametrize("s", [0.01, 0.1, 0.5, 1.0, 3.0, 40.0])
def test_general_quadrature_matches_closed_form(s):
    assert eta_general(1.0, 1.0, s) == pytest.approx(eta_d1(1.0, s), rel=1e-9, abs=1e-14)


def test_closed_form_laplace_transform():
    for lam in [0.1, 1.0, 7.0]:
        v = integrate.quad(lambda s: math.exp(-s * lam) * eta_d1(1.0, s), 0, np.inf, epsabs=1e-14)[0]
        assert v == pytest.approx(math.exp(-math.sqrt(lam)), rel=1e-9)


@pytest.mark.parametrize("d", [0.5, 1.0, 1.5])
def test_unit_mass(d):
    assert density(d).normalization() == pytest.approx(1.0, abs=1e-8)


@given(st.sampled_from([0.5, 1.0, 1.5]), st.floats(0.2, 3.0), st.floats(0.1, 20.0))
def test_laplace_identity(d, t, lam):
    v = density(d).laplace(t, lam)
    assert abs(v - math.exp(-t * lam ** (d / 2))) < 1e-9


@given(st.floats(0.3, 3.0), st.floats(0.05, 5.0))
def test_scaling_relation(t, s):
    d = 1.5
    a = eta_general(d, t, s)
    b = t ** (-2 / d) * eta_general(d, 1.0, s * t ** (-2 / d))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_nonnegative_and_tiny_below_cutoff():
    u0 = small_s_cutoff(0.75)
    assert eta_general(1.5, 1.0, u0) < 1e-28
    vals = eta_general(1.5, 1.0, np.geomspace(u0, 100, 30))
    assert np.all(vals >= 0)


@pytest.mark.parametrize("d", [0.5, 1.0, 1.5])
def test_polynomial_tail(d):
    rep = tail_asymptotics_check(d, 1.0, np.geomspace(1.0, 1e4, 20))
    assert rep.passed
    # the leading constant is alpha / Gamma(1 - alpha); corrections are O(s^-alpha)
    a = d / 2
    far = tail_asymptotics_check(d, 1.0, [1e12]).ratio[0]
    assert far == pytest.approx(a / math.gamma(1 - a), rel=0.01)


def test_tail_grid_below_scale_is_rejected():
    with pytest.raises(DomainError):
        tail_asymptotics_check(1.0, 1.0, [0.5])


@pytest.mark.parametrize("d", [0.0, 2.0, -1.0, 2.5])
def test_index_out_of_range(d):
    with pytest.raises(ValueError):
        eta_general(d, 1.0, 1.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        eta_d1(1.0, 0.0)
    with pytest.raises(DomainError):
        subordinated_kernel(1.0, [0.0], [0.0], 0.0)
    with pytest.raises(DomainError):
        heat_kernel_subordination(1.0, complex(1, 1), [0.0], [0.0])


@pytest.mark.parametrize("t", [0.05, 0.5, 3.0])
def test_poisson_by_subordination(t):
    z = np.linspace(0, 2 * np.pi, 21)
    k = subordinated_kernel(1.0, z, np.zeros_like(z), t)
    np.testing.assert_allclose(k, poisson_kernel_closed(z, t).real, rtol=1e-9)


@pytest.mark.parametrize("d", [0.6, 1.5])
def test_fractional_kernel_agrees_with_spectral(d):
    z = np.linspace(0, np.pi, 9)
    a = heat_kernel_subordination(d, [0.2, 1.0], z, [0.0]).values
    b = heat_kernel_spectral(MultiplierSymbol.power(d), [0.2, 1.0], z, [0.0]).values
    assert np.max(np.abs(a - b) / np.abs(b)) < 1e-8


def test_torus_kernel_agrees_with_spectral():
    pts = np.array([[0.0, 0.0], [0.5, 1.0], [np.pi, np.pi]])
    a = heat_kernel_subordination(1.0, 0.5, pts, np.zeros((1, 2)), n=2).values
    b = heat_kernel_spectral(MultiplierSymbol.power(1.0, n=2), 0.5, pts, np.zeros((1, 2))).values
    assert np.max(np.abs(a - b) / np.abs(b)) < 1e-8


def test_zero_time_row_is_nan():
    g = heat_kernel_subordination(1.0, [0.0, 1.0], [0.0], [0.0])
    assert np.isnan(g.values[0, 0, 0].real)
    assert g.identity[0]
