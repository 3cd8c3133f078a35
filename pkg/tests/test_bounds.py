import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatkern.bounds import (
    GridSpec,
    angle_exponent_fit,
    angle_samples,
    circle_distance,
    complex_bound,
    derivative_bound_scan,
    dn_lower_bound,
    dn_upper_bound,
    exponent_N,
    loglog_fit,
    longtime_check,
    lower_bound_scan,
    poisson_bound,
    ratio_scan,
    refined_bound,
    torus_distance,
    window_change,
)
from heatkern.errors import DomainError
from heatkern.spectral import KernelGrid, MultiplierSymbol, dn_heat_kernel_closed, heat_kernel_spectral

angles = st.floats(-20.0, 20.0)


@given(angles, angles)
def test_circle_distance_properties(x, y):
    d = circle_distance(x, y)
    assert 0 <= d <= math.pi + 1e-12
    assert d == pytest.approx(circle_distance(y, x), abs=1e-12)
    assert d == pytest.approx(circle_distance(x + 2 * math.pi, y), abs=1e-9)


@given(angles, angles, angles)
def test_circle_distance_triangle(x, y, z):
    assert circle_distance(x, z) <= circle_distance(x, y) + circle_distance(y, z) + 1e-9


def test_torus_distance():
    assert torus_distance(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(
        math.hypot(3.0, 2 * math.pi - 4.0))


def test_bound_formulas():
    assert poisson_bound(1.0, 1.0, 1.0) == pytest.approx(0.25)
    assert refined_bound(0.0, 1.0, 2.0, 1, gamma=0.0) == pytest.approx(2.0)
    assert refined_bound(0.0, 1.0, 2.0, 1, gamma=1.0) == pytest.approx(2.0 / math.e)
    assert dn_upper_bound(1.0, 1.0) == pytest.approx(0.75)
    assert dn_lower_bound(1.0, 1.0) == pytest.approx(0.25)
    assert complex_bound(0.0, 1.0, 0.0, 1.0) == pytest.approx(2.0)


def test_angle_exponent():
    assert exponent_N(1, 1) == 14.5
    assert exponent_N(0.1, 1) == pytest.approx(10.9)
    assert exponent_N(0.05, 1) == pytest.approx(20.0)
    assert exponent_N(1, 2) == 18.0
    with pytest.raises(DomainError):
        complex_bound(0.0, 1.0, math.pi / 2, 1.0)


def test_grid_spec():
    g = GridSpec()
    assert g.dist[0] == 0.0 and g.dist[-1] == pytest.approx(math.pi)
    assert g.t[0] == pytest.approx(1e-2) and g.t[-1] == pytest.approx(10.0)
    assert len(g.t) == 61
    assert len(g.refined().t) == 121
    assert g.describe()["n_dist"] == len(g.dist)


@given(st.floats(-3.0, 3.0), st.floats(0.1, 10.0))
def test_loglog_fit_recovers_power(a, c):
    x = np.geomspace(1e-3, 1.0, 20)
    f = loglog_fit(x, c * x**a)
    assert f.slope == pytest.approx(a, abs=1e-9)
    assert f.residual < 1e-9


def _dn_grid(g):
    vals = np.array([dn_heat_kernel_closed(g.dist, 0.0, t) for t in g.t])
    return KernelGrid(g.dist, np.array([0.0]), g.t.astype(complex), vals[:, :, None].astype(complex),
                      "closed_form", np.zeros(len(g.t), int), np.zeros(len(g.t)))


def test_self_ratio_and_poisson_upper_bound():
    g = GridSpec(per_decade=10, t_max=1.0)
    k = heat_kernel_spectral(MultiplierSymbol.power(1.0), g.t, g.dist, [0.0])
    same = ratio_scan(k, lambda D, T: np.abs(k.values[:, :, 0]).ravel(), "self", d=1.0)
    assert same.c1 == pytest.approx(1.0) and same.c2 == pytest.approx(1.0)
    upper = ratio_scan(k, lambda D, T: poisson_bound(D, T, 1.0) + T / (D + T), "poisson", d=1.0)
    assert upper.passed, upper.summary()


def test_poisson_kernel_within_refined_window():
    g = GridSpec(per_decade=10)
    k = heat_kernel_spectral(MultiplierSymbol.power(1.0), g.t, g.dist, [0.0])
    a = ratio_scan(k, lambda D, T: refined_bound(D, T, 1.0), "refined", d=1.0,
                   lower_region=lambda D, T: np.ones_like(D, bool))
    assert a.passed, a.summary()
    assert 0 < a.c1 <= a.c2 < np.inf
    g2 = g.refined()
    k2 = heat_kernel_spectral(MultiplierSymbol.power(1.0), g2.t, g2.dist, [0.0])
    b = ratio_scan(k2, lambda D, T: refined_bound(D, T, 1.0), "refined", d=1.0,
                   lower_region=lambda D, T: np.ones_like(D, bool))
    assert window_change(a, b) < 0.1


def test_wrong_exponent_is_detected():
    g = GridSpec(per_decade=10, t_max=1.0)
    k = heat_kernel_spectral(MultiplierSymbol.power(1.0), g.t, g.dist, [0.0])
    # t^2 rho^{-2} is too small by a factor of t near the diagonal
    rep = ratio_scan(k, lambda D, T: T**2 * (D + T) ** -2.0, "wrong", d=1.0)
    assert not rep.passed
    assert not rep.checks["small_t_upper_diag"]


def test_lower_bound_for_dn_kernel():
    g = GridSpec(per_decade=10)
    k = _dn_grid(g)
    rep = lower_bound_scan(k, 1.0, 1, r=1.0, bound=lambda D, T: dn_lower_bound(D, T))
    assert rep.passed, rep.summary()
    assert rep.c1 > 0


def test_empty_region_fails():
    g = GridSpec(per_decade=5)
    k = _dn_grid(g)
    rep = lower_bound_scan(k, 1.0, 1, r=1e-9)
    assert rep.empty and not rep.passed


def test_summary_and_csv():
    g = GridSpec(per_decade=5)
    rep = ratio_scan(_dn_grid(g), lambda D, T: dn_upper_bound(D, T), "dn", d=1.0)
    assert rep.summary().startswith("[dn] PASS")
    lines = rep.to_csv().splitlines()
    assert lines[0] == "dist,t,kernel,bound,ratio,lower_region"
    assert len(lines) == rep.ratio.size + 1


def test_angle_samples():
    th = angle_samples(3)
    np.testing.assert_allclose(th, [math.pi / 2 - 0.5, math.pi / 2 - 0.25, math.pi / 2 - 0.125])


def test_angle_fit_for_poisson():
    # sup |K| ~ 1/(pi Re t) = sec(theta)/pi off the diagonal
    rep = angle_exponent_fit(MultiplierSymbol.power(1.0), 1.0, angle_samples(6), mode="offdiagonal")
    assert rep.passed
    assert rep.fits[0].slope == pytest.approx(1.0, abs=0.1)
    with pytest.raises(ValueError):
        angle_exponent_fit(MultiplierSymbol.power(1.0), 1.0, angle_samples(2), mode="sideways")


def test_longtime_limit_for_shifted_spectrum():
    # |k|: gamma = 0 and sup|K| -> 1/(2 pi)
    rep = longtime_check(MultiplierSymbol.power(1.0), limit=1 / (2 * math.pi))
    assert rep.passed, rep.summary()


def test_derivative_scan_x_derivative_passes():
    grid = GridSpec(per_decade=10, t_max=1.0)
    rep = derivative_bound_scan(MultiplierSymbol.power(1.0), 0, 1, grid=grid)
    assert rep.passed, rep.summary()
    assert not any(k.endswith("_diag") for k in rep.checks)


def test_derivative_scan_time_derivative_blows_up_off_diagonal():
    # d_t K -> 1/(pi dist^2) off the diagonal while the bound t rho^-3 -> 0
    grid = GridSpec(per_decade=10, t_max=1.0)
    rep = derivative_bound_scan(MultiplierSymbol.power(1.0), 1, 0, grid=grid)
    assert not rep.passed
    assert not rep.checks["small_t_upper_far"]
    far = [f for f in rep.fits if "(far)" in f.name][0]
    assert far.slope == pytest.approx(-1.0, abs=0.1)
    assert np.isfinite(rep.c2)
