import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatkern.errors import ContourError, DomainError
from heatkern.parametrix import (
    bracket_expansion,
    heat_symbol_term,
    heat_symbol_terms,
    parametrix_residual,
    recursion_residual,
    remainder_kernel,
    resolvent_terms,
    term_kernel,
)
from heatkern.spectral import MultiplierSymbol, heat_kernel_spectral
from heatkern.symbols import ClassicalSymbol, HomogTerm, TrigPoly


def shifted_abs():
    return ClassicalSymbol.from_terms(1, [HomogTerm.abs_power(1), HomogTerm.xi_power(0, 1.0)], "|xi| + 1")


def perturbed(imag=0.0):
    c = TrigPoly.from_dict({0: 0.25, 1: 0.125, -1: 0.125})
    if imag:
        c = c + TrigPoly.sin(1, 1j * imag)
    return ClassicalSymbol.from_terms(1, [HomogTerm.abs_power(1), HomogTerm.xi_power(0, c)], "perturbed")


def test_leading_term_is_the_placeholder():
    q = resolvent_terms(shifted_abs(), 1)[0]
    assert list(q.coeffs) == [0]
    assert q.b(0)(0.0, 3.0) == pytest.approx(1.0)
    assert q(0.0, 3.0, -1.0) == pytest.approx(1 / 4)


def test_shifted_multiplier_first_correction():
    # q_{-2} = -p_0 q^2 with p_0 = 1, so b_{1,1} = -1
    terms = resolvent_terms(shifted_abs(), 2)
    q1 = terms[1]
    assert q1.degree_ok()
    assert q1.b(1)(0.0, 2.0) == pytest.approx(-1.0)
    v = heat_symbol_term(q1, shifted_abs())
    assert v(0.0, 2.0, 1.0) == pytest.approx(-math.exp(-2.0))


@given(st.floats(0.0, 2 * math.pi), st.floats(1.5, 40.0) | st.floats(-40.0, -1.5))
def test_variable_symbol_first_correction(x, xi):
    p = perturbed()
    q1 = resolvent_terms(p, 2)[1]
    c = p.term(1)
    # b_{1,1} = -p_{d-1};  b_{1,2} = -i d_xi p^0 d_x p^0 (zero here, p^0 is x-independent)
    assert abs(q1.b(1)(x, xi) + c(x, xi)) < 1e-12
    assert abs(q1.b(2)(x, xi)) < 1e-12


def test_x_dependent_principal_symbol():
    a = TrigPoly.from_dict({0: 1.0, 1: 0.2, -1: 0.2})
    p = ClassicalSymbol.from_terms(1, [HomogTerm.abs_power(1, a)], "a(x)|xi|")
    q1 = resolvent_terms(p, 2)[1]
    x, xi = 0.7, 3.0
    want = -1j * a(x) * a.diff()(x) * xi  # -i d_xi p0 d_x p0 for xi > 0
    assert q1.b(2)(x, xi) == pytest.approx(want)


@pytest.mark.parametrize("imag", [0.0, 0.25])
def test_recursion_identities_hold_exactly(imag):
    p = perturbed(imag)
    terms = resolvent_terms(p, 4)
    assert all(t.degree_ok() for t in terms)
    assert max(recursion_residual(p, terms)) < 1e-13


@given(st.dictionaries(st.integers(-2, 2), st.complex_numbers(max_magnitude=0.2, allow_nan=False), max_size=3))
def test_recursion_identities_random_potential(c):
    p = ClassicalSymbol.from_terms(
        1, [HomogTerm.abs_power(1, TrigPoly.from_dict({0: 1.0, 1: 0.1, -1: 0.1})),
            HomogTerm.xi_power(0, TrigPoly.from_dict(c))])
    terms = resolvent_terms(p, 3)
    assert max(recursion_residual(p, terms)) < 1e-12


def test_invalid_L():
    with pytest.raises(ValueError):
        resolvent_terms(perturbed(), 0)


def test_heat_term_at_zero_time():
    v0, v1 = heat_symbol_terms(perturbed(), 2)
    assert v0(0.3, 5.0, 0.0) == 1.0
    assert v1(0.3, 5.0, 0.0) == 0.0


def test_leading_term_kernel_equals_exact_kernel_for_pure_power():
    # chi(k)|k| = |k| on the integers, so the l = 0 term is the whole kernel
    p = ClassicalSymbol.from_terms(1, [HomogTerm.abs_power(1)])
    v0 = heat_symbol_terms(p, 1)[0]
    z = np.linspace(0, np.pi, 9)
    k = term_kernel(v0, z, [0.0], 0.2)
    ref = heat_kernel_spectral(MultiplierSymbol.power(1.0), 0.2, z, [0.0]).values[0]
    np.testing.assert_allclose(k, ref, atol=1e-12)


def test_term_kernel_rejects_bad_time():
    v0 = heat_symbol_terms(perturbed(), 1)[0]
    with pytest.raises(DomainError):
        term_kernel(v0, [0.0], [0.0], 0.0)


def test_bracket_expansion_terms():
    p = bracket_expansion(4, 1.0)
    assert [t.degree for t in p.terms] == [1.0, 0.0, -1.0]
    assert p.term(2)(0.0, 4.0) == pytest.approx(0.5 / 4.0)
    assert p.term(1).is_zero()


def test_remainder_vanishes_at_zero_and_shrinks():
    p = bracket_expansion(2, 1.0)
    exact = MultiplierSymbol.bracket(1.0)
    assert np.all(remainder_kernel(p, 2, [0.0], [0.0], 0.0, exact=exact) == 0)
    r1 = abs(remainder_kernel(p, 2, [0.0], [0.0], 1e-2, exact=exact)[0, 0])
    r2 = abs(remainder_kernel(p, 2, [0.0], [0.0], 1e-3, exact=exact)[0, 0])
    assert r2 < r1 / 5


def test_residual_oracle_shifted_multiplier():
    # L = 1, lambda = -1: Q(A + 1) - I = diag(1 / (chi(k)|k| + 1)), largest at k = 0
    r = parametrix_residual(shifted_abs(), 1, -1.0, K_max=32)
    assert r == pytest.approx(1.0, abs=1e-12)


def test_residual_pure_multiplier_vanishes():
    p = ClassicalSymbol.from_terms(1, [HomogTerm.abs_power(1)])
    assert parametrix_residual(p, 1, -1.0, K_max=32) < 1e-14


def test_residual_decreases_along_negative_axis():
    p = perturbed()
    rs = [10.0, 100.0, 1000.0]
    res = [parametrix_residual(p, 2, -r, K_max=48) for r in rs]
    assert res[0] > res[1] > res[2]
    assert res[1] / res[0] < 0.05


def test_residual_on_spectrum_raises():
    p = ClassicalSymbol.from_terms(1, [HomogTerm.abs_power(1), HomogTerm.xi_power(0, 1.0)])
    with pytest.raises(ContourError):
        parametrix_residual(p, 1, 3.0, K_max=16)


def test_coefficient_rows():
    q1 = resolvent_terms(perturbed(), 2)[1]
    rows = list(q1.rows())
    assert all(r[0] == 1 for r in rows)
    assert {r[1] for r in rows} == {2}
    assert {r[3] for r in rows} == {-1, 0, 1}
