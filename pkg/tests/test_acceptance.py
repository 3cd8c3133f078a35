"""Acceptance criteria, each at its stated tolerance.

Every criterion prints one ``criterion N: PASS|FAIL ...`` line.  Run
``python tests/test_acceptance.py`` for the same lines without pytest.
"""
import math

import numpy as np
import pytest
from scipy import integrate

from heatkern.bounds import (
    GridSpec,
    angle_exponent_fit,
    angle_samples,
    dn_lower_bound,
    dn_upper_bound,
    exponent_N,
    longtime_check,
    loglog_fit,
    lower_bound_scan,
    perturbation_upper_bound,
    ratio_scan,
    refined_bound,
    window_change,
)
from heatkern.contour import heat_kernel_contour
from heatkern.parametrix import bracket_expansion, parametrix_residual, remainder_kernel
from heatkern.spectral import (
    KernelGrid,
    MultiplierSymbol,
    dn_heat_kernel_closed,
    gaussian_fourier_kernel,
    gaussian_torus_kernel,
    heat_kernel_spectral,
    min_time_for,
    semigroup_defect,
)
from heatkern.subordination import density, eta_d1, eta_general, heat_kernel_subordination
from heatkern.symbols import ClassicalSymbol, HomogTerm, TrigPoly


def perturbed(nonselfadjoint=False):
    # (1/4)(1 + cos x), plus i (1/4) sin x = (1/8)(e^{ix} - e^{-ix})
    c = {0: 0.25, 1: 0.125, -1: 0.125}
    if nonselfadjoint:
        c = {0: 0.25, 1: 0.25, -1: 0.0}
    return ClassicalSymbol.from_terms(
        1, [HomogTerm.abs_power(1), HomogTerm.xi_power(0, TrigPoly.from_dict(c))], "perturbed")


def _grid_kernel(route, d, grid):
    if route == "subordination":
        return heat_kernel_subordination(d, grid.t, grid.dist, [0.0])
    return heat_kernel_spectral(MultiplierSymbol.power(d), grid.t, grid.dist, [0.0])


def c01():
    worst = 0.0
    for d in (0.6, 1.0, 1.4):
        for t in (0.5, 1.0, 2.0):
            for lam in (0.1, 1.0, 10.0):
                exact = math.exp(-t * lam ** (d / 2))
                worst = max(worst, abs(density(d).laplace(t, lam) - exact) / exact)
    return worst < 1e-6, f"max relative error {worst:.2e} (tol 1e-06)"


def c02():
    s = np.geomspace(0.01, 100.0, 50)
    worst = max(float(np.max(np.abs(eta_general(1.0, t, s) - eta_d1(t, s)))) for t in (0.5, 1.0, 2.0))
    v = integrate.quad(lambda u: math.exp(-u) * eta_d1(1.0, u), 0, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
    ident = abs(v - math.exp(-1.0))
    ok = worst < 1e-8 and ident < 1e-8
    return ok, f"max abs error {worst:.2e}, Laplace identity error {ident:.2e} (tol 1e-08)"


def c03():
    x = GridSpec().dist
    ts = np.geomspace(0.05, 5.0, 41)
    out = []
    ok = True
    for d in (0.5, 1.0, 1.5):
        p = MultiplierSymbol.power(d)
        ref = heat_kernel_spectral(p, ts, x, [0.0]).values
        con = heat_kernel_contour(p, ts, x, [0.0], n_nodes=200).values
        sub = heat_kernel_subordination(d, ts, x, [0.0]).values
        e1 = float(np.max(np.abs(con - ref) / np.abs(ref)))
        e2 = float(np.max(np.abs(sub - ref) / np.abs(ref)))
        ok &= e1 < 1e-6 and e2 < 1e-4
        out.append(f"d={d}: contour {e1:.1e}, subordination {e2:.1e}")
    return ok, "; ".join(out) + " (tol 1e-06, 1e-04)"


def c04():
    # kernels by subordination, which criterion 3 ties to the spectral route
    ok = True
    out = []
    everywhere = lambda D, T: np.ones(D.shape, bool)  # noqa: E731
    for d in (0.5, 1.0, 1.5):
        bound = lambda D, T, d=d: refined_bound(D, T, d, 1, 0.0)  # noqa: E731
        reps = []
        for g in (GridSpec(), GridSpec().refined(2)):
            k = _grid_kernel("subordination", d, g)
            reps.append(ratio_scan(k, bound, f"refined d={d}", lower_region=everywhere, d=d, use_abs=False))
        ch = window_change(*reps)
        good = reps[0].passed and reps[1].passed and np.isfinite(reps[0].c2) and reps[0].c1 > 0 and ch < 0.1
        ok &= good
        out.append(f"d={d}: [{reps[0].c1:.3g}, {reps[0].c2:.3g}] change {ch:.1e}")
    return ok, "; ".join(out)


def c05():
    g = GridSpec()
    vals = np.array([dn_heat_kernel_closed(g.dist, 0.0, t) for t in g.t])
    k = KernelGrid(g.dist, np.array([0.0]), g.t.astype(complex), vals[:, :, None].astype(complex),
                   "closed_form", np.zeros(len(g.t), int), np.zeros(len(g.t)))
    up = ratio_scan(k, dn_upper_bound, "dn_upper", d=1.0)
    near = lambda D, T: D + T <= 1.0  # noqa: E731
    low = ratio_scan(k, dn_lower_bound, "dn_lower", region=near, lower_region=near, d=1.0, use_abs=False)
    ok = up.passed and low.passed
    return ok, f"upper sup {up.c2:.4g}, lower inf {low.c1:.4g}"


def c06():
    ok = True
    out = []
    x = np.linspace(0.0, 2 * np.pi, 32, endpoint=False)
    for nsa in (False, True):
        p = perturbed(nsa)
        tmin = min_time_for(p, 128)
        g = GridSpec(t_min=tmin)
        k = heat_kernel_spectral(p, g.t, x, x, K_max=128)
        up = ratio_scan(k, lambda D, T: perturbation_upper_bound(D, T, 1.0, 1, 0.0), "upper", d=1.0)
        low = lower_bound_scan(k, 1.0, 1, 0.5, use_abs=True)
        ok &= up.passed and low.passed
        out.append(f"{'nonselfadjoint' if nsa else 'selfadjoint'}: sup {up.c2:.3g}, inf {low.c1:.3g} (t >= {tmin:.3f})")
    return ok, "; ".join(out)


def c07():
    ts = np.geomspace(1e-3, 1e-1, 41)
    p = bracket_expansion(2, 1.0)
    exact = MultiplierSymbol.bracket(1.0)
    R = [abs(remainder_kernel(p, 2, [0.0], [0.0], t, exact=exact)[0, 0]) for t in ts]
    s = loglog_fit(ts, R).slope
    return abs(s - 1.0) <= 0.2, f"slope {s:.4f} (expected 1 +- 0.2)"


def c08():
    rs = np.array([10.0, 1e2, 1e3, 1e4])
    res = np.array([parametrix_residual(perturbed(), 2, complex(-r), 64) for r in rs])
    mono = bool(np.all(np.diff(res) < 0))
    s = loglog_fit(rs, res).slope
    return mono and s <= -1.0, f"monotone {mono}, slope {s:.3f} (need <= -1)"


def c09():
    p = MultiplierSymbol.power(1.0)
    N = exponent_N(1.0, 1)
    th = angle_samples(8)
    diag = angle_exponent_fit(p, 1.0, th, mode="diagonal")
    off = angle_exponent_fit(p, 1.0, th, mode="offdiagonal")
    sd, so = diag.fits[0].slope, off.fits[0].slope
    ok = N == 14.5 and sd <= N + 0.2 and so <= N + 0.2 and abs(so - 1.0) <= 0.2
    return ok, f"diagonal slope {sd:.3f}, sup over pairs slope {so:.3f} (N = {N})"


def c10():
    rep = longtime_check(MultiplierSymbol.power(1.0, shift=1.0), tol=1e-6, limit=1 / (2 * math.pi))
    return rep.passed, rep.notes[-1]


def c11():
    z = np.linspace(-math.pi, math.pi, 257)
    worst = 0.0
    for tau in np.geomspace(0.01, 10.0, 61):
        a = gaussian_torus_kernel(z, 0.0, tau, method="image")
        b = gaussian_fourier_kernel(z, 0.0, tau)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst < 1e-12, f"max abs difference {worst:.2e} (tol 1e-12)"


def c12():
    syms = [MultiplierSymbol.power(1.0), MultiplierSymbol.power(1.5), MultiplierSymbol.bracket(1.0),
            MultiplierSymbol.power(2.0)]
    pairs = [(0.1, 0.2), (0.5, 1.0), (0.05, 0.05), (complex(0.5, 0.6), complex(0.4, -0.3))]
    worst = max(semigroup_defect(p, a, b) for p in syms for a, b in pairs)
    return worst < 1e-10, f"max relative defect {worst:.2e} (tol 1e-10)"


CRITERIA = [c01, c02, c03, c04, c05, c06, c07, c08, c09, c10, c11, c12]


def _line(i, fn):
    ok, detail = fn()
    return ok, f"criterion {i}: {'PASS' if ok else 'FAIL'} {detail}"


@pytest.mark.parametrize("i", range(1, 13))
def test_criterion(i, capsys):
    ok, line = _line(i, CRITERIA[i - 1])
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    for i, fn in enumerate(CRITERIA, 1):
        print(_line(i, fn)[1], flush=True)
