import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatkern.contour import (
    check_clearance,
    heat_kernel_contour,
    hyperbola,
    make_contour,
    ray_angle,
)
from heatkern.errors import ContourError, DomainError
from heatkern.spectral import MultiplierSymbol, heat_kernel_spectral, poisson_kernel_closed
from heatkern.symbols import ClassicalSymbol, HomogTerm, TrigPoly

Z = np.linspace(0.0, 2 * np.pi, 17)


def perturbed(imag=0.0):
    c = TrigPoly.from_dict({0: 0.25, 1: 0.125, -1: 0.125})
    if imag:
        c = c + TrigPoly.sin(1, 1j * imag)
    return ClassicalSymbol.from_terms(1, [HomogTerm.abs_power(1), HomogTerm.xi_power(0, c)], "perturbed")


def test_ray_angle():
    assert ray_angle(1.0) == pytest.approx(math.pi / 4)
    assert ray_angle(complex(1, 1)) == pytest.approx(math.pi / 8)
    assert ray_angle(complex(1, -1)) == ray_angle(complex(1, 1))


def test_nodes_are_conjugate_symmetric_for_real_t():
    spec = hyperbola(0.7, -0.5, 0.5, 200)
    np.testing.assert_allclose(spec.nodes, spec.nodes[::-1].conj(), atol=1e-12)
    np.testing.assert_allclose(spec.weights, -spec.weights[::-1].conj(), atol=1e-12)
    assert spec.nodes[100].real == pytest.approx(-0.5, abs=0.01)


@given(st.floats(0.05, 5.0), st.floats(-1.0, 1.0), st.floats(0.0, 50.0))
def test_scalar_exponential_is_reproduced(tr, ratio, sigma):
    # (i/2pi) int e^{-t lam} / (sigma - lam) d lam = e^{-t sigma} for sigma inside the contour
    t = complex(tr, ratio * tr)
    spec = hyperbola(t, -0.5, 0.5, 200)
    val = spec.integrate(1.0 / (sigma - spec.nodes))
    assert abs(val - np.exp(-t * sigma)) < 1e-10


def test_hyperbola_rejects_bad_times():
    with pytest.raises(DomainError):
        hyperbola(-1.0, -0.5, 0.5, 100)
    with pytest.raises(ContourError):
        hyperbola(1.0, -0.5, 0.5, 100, phi=2.0)


def test_clearance_detects_spectrum_outside_sector():
    spec = hyperbola(1.0, -0.5, 0.5, 100)
    assert check_clearance(spec, np.array([0.0, 1.0, 10.0])) > 0
    with pytest.raises(ContourError):
        check_clearance(spec, np.array([-2.0]))
    with pytest.raises(ContourError):
        check_clearance(spec, np.array([1.0 + 5.0j]))


@pytest.mark.parametrize("t", [0.05, 0.5, complex(0.4, 0.3), complex(1.0, -0.9)])
def test_poisson_by_contour(t):
    g = heat_kernel_contour(MultiplierSymbol.power(1.0), t, Z, [0.0])
    ref = poisson_kernel_closed(Z, t)
    assert np.max(np.abs(g.values[0, :, 0] - ref)) < 1e-9 * np.max(np.abs(ref))


def test_fractional_multiplier_agrees_with_spectral():
    p = MultiplierSymbol.power(1.5)
    ts = [0.1, 1.0]
    a = heat_kernel_contour(p, ts, Z, [0.0]).values
    b = heat_kernel_spectral(p, ts, Z, [0.0]).values
    assert np.max(np.abs(a - b) / np.abs(b)) < 1e-8


@pytest.mark.parametrize("imag", [0.0, 0.25])
def test_matrix_route_agrees_with_spectral(imag):
    p = perturbed(imag)
    xs = np.linspace(0, 2 * np.pi, 6, endpoint=False)
    a = heat_kernel_contour(p, 0.5, xs, xs, K=64).values
    b = heat_kernel_spectral(p, 0.5, xs, xs, K_max=64).values
    assert np.max(np.abs(a - b)) < 1e-9 * np.max(np.abs(b))


def test_make_contour_clears_perturbed_spectrum():
    spec = make_contour(perturbed(), 32, 1.0)
    assert spec.vertex < 0.25
    assert spec.n_nodes == 200


def test_zero_time_is_rejected():
    with pytest.raises(DomainError):
        heat_kernel_contour(MultiplierSymbol.power(1.0), [0.0, 1.0], Z, [0.0])


def test_explicit_contour_single_time_only():
    spec = hyperbola(1.0, -0.5, 0.5, 200)
    with pytest.raises(ValueError):
        heat_kernel_contour(MultiplierSymbol.power(1.0), [0.5, 1.0], Z, [0.0], contour=spec)


def test_csv_header_and_rows():
    text = hyperbola(1.0, -0.5, 0.5, 10).to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "node,lambda_re,lambda_im,weight_re,weight_im"
    assert len(lines) == 11
