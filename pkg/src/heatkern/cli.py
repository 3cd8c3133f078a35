"""Command-line entry point: ``heatkern <subcommand> CONFIG [options]``.

Subcommands
-----------
kernel        tabulate a heat kernel by one route
verify        cross-route, semigroup and theta-identity comparisons
parametrix    resolvent-term tables, remainder scaling, parametrix residuals
subordinator  stable-subordinator density tables and Laplace residuals
bounds        ratio scans against Poissonian bounds
scan-angle    growth of the kernel toward the imaginary time axis

Exit codes: 0 success or pass, 1 verification failure, 2 invalid input.
CSV goes to ``--out`` (stdout when absent); the summary goes to stdout, or
to stderr when the CSV occupies stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import __version__
from .bounds import (
    WINDOW_TOL,
    BoundReport,
    GridSpec,
    angle_exponent_fit,
    angle_samples,
    derivative_bound_scan,
    dn_lower_bound,
    dn_upper_bound,
    exponent_N,
    longtime_check,
    loglog_fit,
    lower_bound_scan,
    perturbation_upper_bound,
    poisson_bound,
    ratio_scan,
    refined_bound,
    window_change,
)
from .config import (
    ROUTES,
    RunConfig,
    load_config,
    parse_grid,
    parse_grid_spec,
    parse_points,
    parse_symbol,
    parse_time,
    parse_times,
    symbol_spec,
)
from .contour import heat_kernel_contour
from .errors import (
    AccuracyError,
    ConfigError,
    ContourError,
    DomainError,
    EllipticityError,
    HeatKernError,
    TruncationError,
)
from .parametrix import (
    heat_symbol_terms,
    parametrix_residual,
    recursion_residual,
    remainder_kernel,
    resolvent_terms,
    term_kernel,
)
from .spectral import (
    TWO_PI,
    KernelGrid,
    MultiplierSymbol,
    dn_heat_kernel_closed,
    gamma_lower_bound,
    gaussian_fourier_kernel,
    gaussian_torus_kernel,
    heat_kernel_spectral,
    min_time_for,
    poisson_kernel_closed,
    semigroup_defect,
)
from .subordination import density, eta_d1, eta_general, heat_kernel_subordination
from .symbols import ClassicalSymbol

SUBCOMMANDS = ("kernel", "verify", "parametrix", "subordinator", "bounds", "scan-angle")


@dataclass
class Outcome:
    """CSV body, summary lines and the pass flag of one run."""

    csv: str
    lines: list
    passed: bool = True


def _f(v) -> str:
    return f"{float(v):.16e}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _pmap(fn, items, threads: int):
    """Order-preserving map, on a thread pool when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _concat(grids: list[KernelGrid]) -> KernelGrid:
    g0 = grids[0]
    return KernelGrid(
        g0.x, g0.y,
        np.concatenate([g.t for g in grids]),
        np.concatenate([g.values for g in grids]),
        g0.method,
        np.concatenate([g.k_max for g in grids]),
        np.concatenate([g.tail for g in grids]),
        g0.n,
        np.concatenate([g.identity for g in grids]),
    )


def _power_params(spec: dict) -> tuple[float, int, complex, complex]:
    if spec["kind"] == "dn":
        return 1.0, 1, 1.0, 0.0
    if spec["kind"] != "power":
        raise ConfigError("this route needs a symbol of kind 'power' or 'dn'")
    d = float(spec.get("d", 1.0))
    n = int(spec.get("n", 1))
    coef = spec.get("coef", 1.0)
    shift = spec.get("shift", 0.0)
    coef = complex(*coef) if isinstance(coef, list) else complex(coef)
    shift = complex(*shift) if isinstance(shift, list) else complex(shift)
    return d, n, coef, shift


def closed_form_kernel(spec: dict, t, x, y) -> KernelGrid:
    """Closed-form kernels: ``|k|`` on the circle (Poisson) and ``|k|^2`` (Gaussian image sum)."""
    d, n, coef, shift = _power_params(spec)
    if coef != 1 or shift != 0:
        raise ConfigError("closed forms exist for unit coefficient and zero shift")
    ts = np.atleast_1d(np.asarray(t, complex))
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    nx, ny = (len(x), len(y))
    vals = np.full((len(ts), nx, ny), np.nan, dtype=complex)
    if d == 1.0 and n == 1:
        z = x[:, None] - y[None, :]
        for i, tt in enumerate(ts):
            if tt != 0:
                vals[i] = poisson_kernel_closed(z, tt)
    elif d == 2.0:
        if np.any(ts.imag != 0):
            raise DomainError("the Gaussian closed form takes real times")
        for i, tt in enumerate(ts.real):
            if tt > 0:
                if n == 1:
                    vals[i] = gaussian_torus_kernel(x[:, None], y[None, :], tt)
                else:
                    vals[i] = gaussian_torus_kernel(x[:, None, :], y[None, :, :], tt, 2)
    else:
        raise ConfigError("closed forms exist for |k| on the circle and |k|^2")
    zeros = np.zeros(len(ts))
    return KernelGrid(x, y, ts, vals, "closed_form", zeros.astype(int), zeros, n)


def kernel_by_route(spec: dict, p, route: str, t, x, y, kmax=None, tol=1e-10, n_nodes=200) -> KernelGrid:
    if route == "spectral":
        return heat_kernel_spectral(p, t, x, y, K_max=kmax, tol=tol)
    if route == "contour":
        return heat_kernel_contour(p, t, x, y, K=kmax, n_nodes=n_nodes, tol=tol)
    if route == "subordination":
        d, n, coef, shift = _power_params(spec)
        if coef != 1 or shift != 0:
            raise ConfigError("subordination needs |k|^d with unit coefficient and zero shift")
        ts = np.atleast_1d(np.asarray(t, complex))
        if np.any(ts.imag != 0):
            raise DomainError("subordination takes real times")
        return heat_kernel_subordination(d, ts.real, x, y, n, tol=max(tol, 1e-8))
    if route == "closed_form":
        return closed_form_kernel(spec, t, x, y)
    raise ConfigError(f"unknown route {route!r}; expected one of {', '.join(ROUTES)}")


def _kernel_parallel(spec, p, route, ts, x, y, kmax, tol, n_nodes, threads) -> KernelGrid:
    chunks = [ts[i :: max(threads, 1)] for i in range(max(threads, 1))] if threads > 1 else [ts]
    chunks = [c for c in chunks if len(c)]
    grids = _pmap(lambda c: kernel_by_route(spec, p, route, c, x, y, kmax, tol, n_nodes), chunks, threads)
    if len(grids) == 1:
        return grids[0]
    g = _concat(grids)
    # restore the configured order of t
    order = np.concatenate([np.arange(len(ts))[i :: threads] for i in range(threads)])
    inv = np.argsort(order)
    return KernelGrid(g.x, g.y, g.t[inv], g.values[inv], g.method, g.k_max[inv], g.tail[inv], g.n, g.identity[inv])


def _symbols(cfg: RunConfig) -> list[tuple[dict, object]]:
    raw = cfg.get("symbols")
    if raw is None:
        raw = [cfg.require("symbol")]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("symbols must be a non-empty list")
    out = []
    for s in raw:
        spec = symbol_spec(s, cfg.base_dir)
        out.append((spec, parse_symbol(spec, cfg.base_dir)))
    return out


def _n_of(spec: dict) -> int:
    return int(spec.get("n", 1)) if spec["kind"] in ("power", "bracket") else 1


def _choice(cfg: RunConfig, key: str, options: tuple, default=None) -> str:
    v = cfg.get(key, default)
    if v not in options:
        raise ConfigError(f"{key} must be one of {', '.join(options)}; got {v!r}")
    return v


def _int(cfg: RunConfig, key: str, default: int, lo: int = 0) -> int:
    v = cfg.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}")
    return v


def _real(cfg: RunConfig, key: str, default: float) -> float:
    v = cfg.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number")
    return float(v)


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------


def run_kernel(cfg: RunConfig, threads: int) -> Outcome:
    spec = symbol_spec(cfg.require("symbol"), cfg.base_dir)
    p = parse_symbol(spec, cfg.base_dir)
    route = _choice(cfg, "route", ROUTES, "spectral")
    n = _n_of(spec)
    x = parse_points(cfg.get("x", {"linspace": [0.0, TWO_PI, 64], "endpoint": False}), n, "x")
    y = parse_points(cfg.get("y", [0.0] if n == 1 else [[0.0, 0.0]]), n, "y")
    ts = parse_times(cfg.require("t"))
    n_nodes = _int(cfg, "n_nodes", 200, 4)
    g = _kernel_parallel(spec, p, route, ts, x, y, cfg.kmax, cfg.tol, n_nodes, threads)
    lines = [
        f"kernel: route {route}, {len(g.t)} time(s), {len(g.x)} x {len(g.y)} points",
        f"K_max range [{int(g.k_max.min())}, {int(g.k_max.max())}]",
    ]
    return Outcome(g.to_csv(), lines)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _rel_errors(a: KernelGrid, b: KernelGrid, metric: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-t absolute and relative errors of ``b`` against the reference ``a``."""
    live = ~a.identity
    absd = np.abs(a.values - b.values).reshape(len(a.t), -1)
    ref = np.abs(a.values).reshape(len(a.t), -1)
    if metric == "pointwise":
        rel = (absd / ref).max(axis=1)
    else:
        rel = absd.max(axis=1) / ref.max(axis=1)
    return np.where(live, absd.max(axis=1), 0.0), np.where(live, rel, 0.0)


def run_verify(cfg: RunConfig, threads: int) -> Outcome:
    check = _choice(cfg, "check", ("routes", "semigroup", "theta"))
    if check == "routes":
        return _verify_routes(cfg, threads)
    if check == "semigroup":
        return _verify_semigroup(cfg, threads)
    return _verify_theta(cfg)


def _verify_routes(cfg: RunConfig, threads: int) -> Outcome:
    routes = cfg.get("routes", ["spectral", "contour"])
    if not isinstance(routes, list) or len(routes) < 2 or any(r not in ROUTES for r in routes):
        raise ConfigError(f"routes must list at least two of {', '.join(ROUTES)}")
    rel_tol = cfg.get("rel_tol", 1e-6)
    if isinstance(rel_tol, (int, float)):
        rel_tol = {r: float(rel_tol) for r in routes[1:]}
    elif isinstance(rel_tol, dict) and set(rel_tol) <= set(routes[1:]):
        rel_tol = {r: float(rel_tol.get(r, 1e-6)) for r in routes[1:]}
    else:
        raise ConfigError("rel_tol must be a number or a map from compared route to tolerance")
    metric = _choice(cfg, "metric", ("pointwise", "sup"), "pointwise")
    ts = parse_times(cfg.require("t"))
    n_nodes = _int(cfg, "n_nodes", 200, 4)
    rows, lines, passed = [], [], True
    for spec, p in _symbols(cfg):
        n = _n_of(spec)
        x = parse_points(cfg.get("x", {"standard": True}), n, "x")
        y = parse_points(cfg.get("y", [0.0] if n == 1 else [[0.0, 0.0]]), n, "y")
        ref = _kernel_parallel(spec, p, routes[0], ts, x, y, cfg.kmax, cfg.tol, n_nodes, threads)
        for route in routes[1:]:
            g = _kernel_parallel(spec, p, route, ts, x, y, cfg.kmax, cfg.tol, n_nodes, threads)
            absd, rel = _rel_errors(ref, g, metric)
            for tt, a, r in zip(ts, absd, rel):
                rows.append([p.name, _f(tt.real), _f(tt.imag), routes[0], route, _f(a), _f(r)])
            worst = float(rel.max())
            ok = worst < rel_tol[route]
            passed &= ok
            lines.append(
                f"[{'PASS' if ok else 'FAIL'}] {p.name}: {routes[0]} vs {route}, "
                f"max {metric} relative error {worst:.3e} (tol {rel_tol[route]:.1e})"
            )
    header = ["symbol", "t_re", "t_im", "reference", "route", "max_abs_error", "max_rel_error"]
    return Outcome(_csv(header, rows), lines, passed)


def _verify_semigroup(cfg: RunConfig, threads: int) -> Outcome:
    pairs = cfg.get("t_pairs", [[0.1, 0.2], [0.5, 1.0]])
    if not isinstance(pairs, list) or not all(isinstance(q, list) and len(q) == 2 for q in pairs):
        raise ConfigError("t_pairs must be a list of [t1, t2]")
    rel_tol = _real(cfg, "rel_tol", 1e-10)
    rows, lines, passed = [], [], True
    for spec, p in _symbols(cfg):
        if not isinstance(p, MultiplierSymbol) or p.n != 1:
            raise ConfigError("the semigroup check takes circle multipliers")
        ts = [(parse_time(a), parse_time(b)) for a, b in pairs]
        errs = _pmap(lambda q: semigroup_defect(p, q[0], q[1], tol=min(cfg.tol, 1e-14)), ts, threads)
        for (a, b), e in zip(ts, errs):
            rows.append([p.name, _f(a.real), _f(a.imag), _f(b.real), _f(b.imag), _f(e)])
        worst = max(errs)
        ok = worst < rel_tol
        passed &= ok
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {p.name}: max relative defect {worst:.3e} (tol {rel_tol:.1e})")
    header = ["symbol", "t1_re", "t1_im", "t2_re", "t2_im", "rel_defect"]
    return Outcome(_csv(header, rows), lines, passed)


def _verify_theta(cfg: RunConfig) -> Outcome:
    taus = parse_grid(cfg.get("taus", {"logspace": [0.01, 10.0, 61]}), "taus", kind="t")
    n = _int(cfg, "n", 1, 1)
    if n not in (1, 2):
        raise ConfigError("n must be 1 or 2")
    pts = parse_grid(cfg.get("points", {"linspace": [-math.pi, math.pi, 257]}), "points")
    abs_tol = _real(cfg, "abs_tol", 1e-12)
    if n == 1:
        z = pts
    else:
        z = np.stack(np.meshgrid(pts, pts, indexing="ij"), -1).reshape(-1, 2)
    zero = np.zeros_like(z)
    rows, worst = [], 0.0
    for tau in taus:
        a = gaussian_torus_kernel(z, zero, tau, n, method="image")
        b = gaussian_fourier_kernel(z, zero, tau, n)
        e = float(np.abs(a - b).max())
        worst = max(worst, e)
        rows.append([_f(tau), n, _f(e)])
    ok = worst < abs_tol
    lines = [f"[{'PASS' if ok else 'FAIL'}] image sum vs Fourier sum (n={n}): max abs difference {worst:.3e} "
             f"(tol {abs_tol:.1e})"]
    return Outcome(_csv(["tau", "n", "max_abs_diff"], rows), lines, ok)


# ---------------------------------------------------------------------------
# parametrix
# ---------------------------------------------------------------------------


def _classical(p) -> ClassicalSymbol:
    if isinstance(p, MultiplierSymbol):
        raise ConfigError("parametrix modes take a classical symbol")
    return p


def run_parametrix(cfg: RunConfig, threads: int) -> Outcome:
    mode = _choice(cfg, "mode", ("terms", "term_kernels", "remainder", "residual"))
    p = _classical(parse_symbol(cfg.require("symbol"), cfg.base_dir))
    if mode == "terms":
        L = _int(cfg, "L", 3, 1)
        terms = resolvent_terms(p, L)
        res = recursion_residual(p, terms)
        rows = [[l, k, _f(deg), m, _f(a), _f(b), _f(c), _f(d)] for q in terms for (l, k, deg, m, a, b, c, d) in q.rows()]
        ok = max(res) <= 1e-12
        lines = [f"{len(terms)} resolvent terms; recursion residuals " + ", ".join(f"{r:.1e}" for r in res),
                 f"[{'PASS' if ok else 'FAIL'}] composition identities hold"]
        header = ["l", "k_power", "degree", "m", "re_plus", "im_plus", "re_minus", "im_minus"]
        return Outcome(_csv(header, rows), lines, ok)
    if mode == "term_kernels":
        L = _int(cfg, "L", 2, 1)
        x = parse_grid(cfg.get("x", [0.0]), "x")
        y = parse_grid(cfg.get("y", [0.0]), "y")
        ts = parse_times(cfg.require("t"))
        rows = []
        for v in heat_symbol_terms(p, L):
            for tt in ts:
                k = term_kernel(v, x, y, tt, cfg.kmax, cfg.tol)
                for a, xa in enumerate(x):
                    for b, yb in enumerate(y):
                        rows.append([_f(xa), _f(yb), _f(tt.real), _f(tt.imag), _f(k[a, b].real), _f(k[a, b].imag), v.l])
        return Outcome(_csv(["x", "y", "t_re", "t_im", "re", "im", "l"], rows), [f"{L} term kernels tabulated"])
    if mode == "remainder":
        M = _int(cfg, "M", 2, 1)
        exact = cfg.get("exact")
        exact = parse_symbol(exact, cfg.base_dir) if exact is not None else None
        x = parse_grid(cfg.get("x", [0.0]), "x")
        y = parse_grid(cfg.get("y", [0.0]), "y")
        ts = parse_times(cfg.get("t", {"logspace": [1e-3, 1e-1, 41]}))
        expected = _real(cfg, "expected_slope", (M - 1) / p.order)
        slope_tol = _real(cfg, "slope_tol", 0.2)
        Rs = _pmap(lambda tt: remainder_kernel(p, M, x, y, tt, cfg.kmax, exact, cfg.tol), list(ts), threads)
        rows = []
        for tt, R in zip(ts, Rs):
            for a, xa in enumerate(x):
                for b, yb in enumerate(y):
                    rows.append([_f(xa), _f(yb), _f(tt.real), _f(tt.imag), _f(R[a, b].real), _f(R[a, b].imag), M])
        diag = np.isclose(x[:, None], y[None, :])
        if not diag.any():
            raise ConfigError("the remainder slope is fitted on x = y; include a diagonal point")
        sup = np.array([np.abs(R[diag]).max() for R in Rs])
        fit = loglog_fit(np.abs(ts), sup, "remainder slope in t (x = y)")
        ok = abs(fit.slope - expected) <= slope_tol
        lines = [fit.line(), f"[{'PASS' if ok else 'FAIL'}] slope {fit.slope:.4f} vs expected {expected:.4f} "
                             f"(tol {slope_tol})"]
        return Outcome(_csv(["x", "y", "t_re", "t_im", "re", "im", "M"], rows), lines, ok)
    L = _int(cfg, "L", 2, 1)
    rs = parse_grid(cfg.get("r", [10.0, 100.0, 1000.0, 10000.0]), "r")
    max_slope = _real(cfg, "max_slope", -1.0)
    K = cfg.kmax or 64
    res = np.array(_pmap(lambda r: parametrix_residual(p, L, complex(-r), K), list(rs), threads))
    rows = [[_f(r), _f(-r), _f(0.0), _f(v)] for r, v in zip(rs, res)]
    mono = bool(np.all(np.diff(res) < 0))
    fit = loglog_fit(rs, res, "residual slope in r")
    ok = mono and fit.slope <= max_slope
    lines = [fit.line(), f"[{'PASS' if mono else 'FAIL'}] residual decreases monotonically",
             f"[{'PASS' if fit.slope <= max_slope else 'FAIL'}] slope {fit.slope:.4f} <= {max_slope}"]
    return Outcome(_csv(["r", "lambda_re", "lambda_im", "residual"], rows), lines, ok)


# ---------------------------------------------------------------------------
# subordinator
# ---------------------------------------------------------------------------


def _real_list(cfg: RunConfig, key: str, default, kind: str = "t") -> np.ndarray:
    return parse_grid(cfg.get(key, default), key, kind=kind)


def run_subordinator(cfg: RunConfig, threads: int) -> Outcome:
    mode = _choice(cfg, "mode", ("table", "laplace", "closed_form"))
    if mode == "table":
        ds = _real_list(cfg, "d", [1.0])
        ts = _real_list(cfg, "t", [1.0])
        ss = _real_list(cfg, "s", {"logspace": [0.01, 100.0, 50]})
        rows = []
        for d in ds:
            for t in ts:
                vals = eta_general(d, t, ss)
                ref = eta_d1(t, ss) if d == 1.0 else np.full(ss.shape, np.nan)
                for s, v, r in zip(ss, vals, ref):
                    rows.append([_f(d), _f(t), _f(s), _f(v), _f(v - r)])
        lines = [f"density tabulated on {len(ss)} points for {len(ds)} d and {len(ts)} t values"]
        return Outcome(_csv(["d", "t", "s", "value", "residual"], rows), lines)
    if mode == "laplace":
        ds = _real_list(cfg, "d", [0.6, 1.0, 1.4])
        ts = _real_list(cfg, "t", [0.5, 1.0, 2.0])
        lams = _real_list(cfg, "lambdas", [0.1, 1.0, 10.0])
        rel_tol = _real(cfg, "rel_tol", 1e-6)
        rows, worst = [], 0.0
        for d in ds:
            dens = density(float(d))
            for t in ts:
                for lam in lams:
                    v = dens.laplace(float(t), float(lam))
                    exact = math.exp(-t * lam ** (d / 2))
                    r = abs(v - exact) / exact
                    worst = max(worst, r)
                    rows.append([_f(d), _f(t), _f(lam), _f(v), _f(r)])
        ok = worst < rel_tol
        lines = [f"[{'PASS' if ok else 'FAIL'}] Laplace identity: max relative residual {worst:.3e} (tol {rel_tol:.1e})"]
        return Outcome(_csv(["d", "t", "lambda", "value", "residual"], rows), lines, ok)
    ts = _real_list(cfg, "t", [0.5, 1.0, 2.0])
    ss = _real_list(cfg, "s", {"logspace": [0.01, 100.0, 50]})
    abs_tol = _real(cfg, "abs_tol", 1e-8)
    rows, worst = [], 0.0
    for t in ts:
        vals = eta_general(1.0, t, ss)
        ref = eta_d1(t, ss)
        for s, v, r in zip(ss, vals, ref):
            worst = max(worst, abs(v - r))
            rows.append([_f(1.0), _f(t), _f(s), _f(v), _f(v - r)])
    ident = cfg.get("identity", {"t": 1.0, "lambda": 1.0})
    if not isinstance(ident, dict) or set(ident) != {"t", "lambda"}:
        raise ConfigError("identity must be {\"t\": ..., \"lambda\": ...}")
    ti, li = float(ident["t"]), float(ident["lambda"])
    # independent quadrature of the closed-form density
    q, _ = integrate.quad(lambda s: math.exp(-s * li) * float(eta_d1(ti, s)), 0.0, np.inf,
                          epsabs=1e-14, epsrel=1e-13, limit=200)
    ierr = abs(q - math.exp(-ti * math.sqrt(li)))
    ok1, ok2 = worst < abs_tol, ierr < abs_tol
    lines = [
        f"[{'PASS' if ok1 else 'FAIL'}] general density at d=1 vs closed form: max abs error {worst:.3e} (tol {abs_tol:.1e})",
        f"[{'PASS' if ok2 else 'FAIL'}] closed-form Laplace transform at t={ti:g}, lambda={li:g}: error {ierr:.3e}",
    ]
    return Outcome(_csv(["d", "t", "s", "value", "residual"], rows), lines, ok1 and ok2)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def _report_rows(reports: list[BoundReport]) -> str:
    rows = []
    for rep in reports:
        low = rep.lower_mask if rep.lower_mask is not None else np.zeros(rep.ratio.shape, bool)
        for a, b, k, bd, r, m in zip(rep.dist, rep.t, rep.kernel, rep.bound, rep.ratio, low):
            rows.append([rep.name, _f(a), _f(b), _f(k), _f(bd), _f(r), int(m)])
    return _csv(["report", "dist", "t", "kernel", "bound", "ratio", "lower_region"], rows)


def _gamma(cfg: RunConfig, p) -> float:
    g = cfg.get("gamma", 0.0)
    if g == "auto":
        return gamma_lower_bound(p, 64)
    return _real(cfg, "gamma", 0.0)


def _upper_lower_scan(cfg, spec, p, grid: GridSpec, bound, name, lower: bool, threads) -> BoundReport:
    route = _choice(cfg, "route", ROUTES, "spectral")
    d = p.order
    k = _kernel_parallel(spec, p, route, grid.t.astype(complex), grid.dist, np.array([0.0]),
                         cfg.kmax, cfg.tol, 200, threads)
    everywhere = (lambda D, T: np.ones(D.shape, bool)) if lower else None
    return ratio_scan(k, bound, name, lower_region=everywhere, params={"symbol": p.name, "d": d},
                      grid=grid.describe(), d=d, use_abs=not lower)


def run_bounds(cfg: RunConfig, threads: int) -> Outcome:
    campaign = _choice(cfg, "campaign",
                       ("refined", "poisson", "dn", "perturbation", "longtime", "derivative", "custom"))
    grid, auto_t = parse_grid_spec(cfg.get("grid"))
    reports: list[BoundReport] = []
    lines: list[str] = []
    if campaign == "dn":
        z = grid.dist
        vals = np.array([dn_heat_kernel_closed(z, 0.0, t) for t in grid.t])
        k = KernelGrid(z, np.array([0.0]), grid.t.astype(complex), vals[:, :, None].astype(complex), "closed_form",
                       np.zeros(len(grid.t), int), np.zeros(len(grid.t)))
        reports.append(ratio_scan(k, dn_upper_bound, "dn_upper", d=1.0, grid=grid.describe()))
        near = lambda D, T: D + T <= 1.0  # noqa: E731
        reports.append(ratio_scan(k, dn_lower_bound, "dn_lower", region=near, lower_region=near, d=1.0,
                                  use_abs=False, grid=grid.describe()))
    elif campaign in ("refined", "poisson", "custom"):
        refine = bool(cfg.get("refine", campaign == "refined"))
        for spec, p in _symbols(cfg):
            if not isinstance(p, MultiplierSymbol):
                raise ConfigError(f"the {campaign} campaign takes multipliers")
            d, n = p.order, p.n
            if campaign == "refined":
                gam = _gamma(cfg, p)
                bound = lambda D, T, d=d, n=n, g=gam: refined_bound(D, T, d, n, g)  # noqa: E731
                lower = True
            elif campaign == "poisson":
                bound = lambda D, T, d=d, n=n: poisson_bound(D, T, d, n)  # noqa: E731
                lower = False
            else:
                bound, lower = _custom_bound(cfg, d)
            name = f"{campaign}[{p.name}]"
            rep = _upper_lower_scan(cfg, spec, p, grid, bound, name, lower, threads)
            if refine:
                fine = _upper_lower_scan(cfg, spec, p, grid.refined(2), bound, name + " 2x", lower, threads)
                ch = window_change(rep, fine)
                rep.notes.append(f"window [{rep.c1:.6g}, {rep.c2:.6g}] -> [{fine.c1:.6g}, {fine.c2:.6g}], "
                                 f"relative change {ch:.3e}")
                rep.checks["window_stable"] = ch < WINDOW_TOL
            reports.append(rep)
    elif campaign == "perturbation":
        radii = cfg.get("radii", [0.25, 0.5, 1.0])
        need = _real(cfg, "required_radius", 0.5)
        K = cfg.kmax or 128
        x = parse_grid(cfg.get("x", {"linspace": [0.0, TWO_PI, 32], "endpoint": False}), "x")
        for spec, p in _symbols(cfg):
            p = _classical(p)
            g = grid
            if auto_t:
                tmin = min_time_for(p, K, cfg.tol)
                g = GridSpec(grid.dist_min, grid.dist_max, tmin, grid.t_max, grid.per_decade)
                lines.append(f"{p.name}: t_min resolved to {tmin:.4g} for K = {K}")
            k = heat_kernel_spectral(p, g.t, x, x, K_max=K, tol=cfg.tol)
            rep = ratio_scan(k, lambda D, T: perturbation_upper_bound(D, T, p.order, 1, 0.0),
                             f"perturbation_upper[{p.name}]", d=p.order, params={"K": K}, grid=g.describe())
            reports.append(rep)
            best = None
            for r in radii:
                low = lower_bound_scan(k, p.order, 1, float(r), use_abs=True, name=f"perturbation_lower[{p.name}] r={r}")
                reports.append(low)
                if low.passed:
                    best = r
            ok = best is not None and best >= need
            lines.append(f"[{'PASS' if ok else 'FAIL'}] {p.name}: largest passing lower-bound radius {best} "
                         f"(required {need})")
            if not ok:
                reports[-1].checks["required_radius"] = False
    elif campaign == "longtime":
        lim = cfg.get("limit", "auto")
        for spec, p in _symbols(cfg):
            limit = 1.0 / TWO_PI if lim == "auto" else _real(cfg, "limit", 0.0)
            rep = longtime_check(p, tol=_real(cfg, "limit_tol", 1e-6), limit=limit)
            rep.name = f"longtime[{p.name}]"
            reports.append(rep)
    elif campaign == "derivative":
        j = _int(cfg, "j", 0)
        gi = _int(cfg, "gamma_idx", 0)
        g = grid if cfg.get("grid") is not None else GridSpec(t_max=1.0)
        for spec, p in _symbols(cfg):
            reports.append(derivative_bound_scan(p, j, gi, grid=g))
    passed = all(r.passed for r in reports) and all("FAIL" not in ln for ln in lines)
    for r in reports:
        lines.append(r.summary())
    return Outcome(_report_rows(reports), lines, passed)


def _custom_bound(cfg: RunConfig, d: float):
    """``t^a (dist + t^{1/d})^b``, optionally also claimed as a lower bound."""
    spec = cfg.require("bound")
    if not isinstance(spec, dict) or not {"t_power", "rho_power"} <= set(spec) <= {"t_power", "rho_power", "lower"}:
        raise ConfigError("bound must be {\"t_power\": a, \"rho_power\": b[, \"lower\": bool]}")
    a = float(spec["t_power"])
    b = float(spec["rho_power"])

    def bound(D, T):
        return np.asarray(T, float) ** a * (np.asarray(D, float) + np.asarray(T, float) ** (1.0 / d)) ** b

    return bound, bool(spec.get("lower", False))


# ---------------------------------------------------------------------------
# scan-angle
# ---------------------------------------------------------------------------


def run_scan_angle(cfg: RunConfig, threads: int) -> Outcome:
    p = parse_symbol(cfg.require("symbol"), cfg.base_dir)
    if not isinstance(p, MultiplierSymbol):
        raise ConfigError("scan-angle takes a multiplier")
    tmods = parse_grid(cfg.get("tmod", [1.0]), "tmod", kind="t")
    thetas = cfg.get("thetas")
    thetas = angle_samples(_int(cfg, "j_max", 8, 2)) if thetas is None else parse_grid(thetas, "thetas")
    modes = cfg.get("modes", ["diagonal", "offdiagonal"])
    if not isinstance(modes, list) or not modes or any(m not in ("diagonal", "offdiagonal") for m in modes):
        raise ConfigError("modes must list 'diagonal' and/or 'offdiagonal'")
    jobs = [(m, float(tm)) for m in modes for tm in tmods]
    reports = _pmap(lambda job: angle_exponent_fit(p, job[1], thetas, mode=job[0]), jobs, threads)
    rows, lines = [], []
    N = exponent_N(p.order, p.n)
    for (m, tm), rep in zip(jobs, reports):
        for th, s in zip(rep.grid["theta"], rep.kernel):
            rows.append([m, _f(tm), _f(th), _f(s), _f(1.0 / math.cos(th))])
        lines.append(rep.summary())
    lines.insert(0, f"angle exponent N = {N:g}")
    return Outcome(_csv(["mode", "tmod", "theta", "sup_abs_kernel", "sec_theta"], rows), lines,
                   all(r.passed for r in reports))


RUNNERS = {
    "kernel": run_kernel,
    "verify": run_verify,
    "parametrix": run_parametrix,
    "subordinator": run_subordinator,
    "bounds": run_bounds,
    "scan-angle": run_scan_angle,
}


def run(subcommand: str, config, threads: int = 1, out: str | None = None, tol: float | None = None,
        kmax: int | None = None, stdout=None, stderr=None) -> int:
    """Execute one subcommand; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        if subcommand not in RUNNERS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        cfg = load_config(config, subcommand)
        cfg.overrides.update({"tol": tol, "kmax": kmax, "out": out})
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        result = RUNNERS[subcommand](cfg, threads)
    except (ConfigError, DomainError, EllipticityError, ValueError) as exc:
        print(f"heatkern: invalid input: {exc}", file=stderr)
        return 2
    except (TruncationError, ContourError, AccuracyError, HeatKernError) as exc:
        print(f"heatkern: verification failed: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    target = cfg.get("out")
    if target:
        try:
            with open(target, "w", newline="") as fh:
                fh.write(result.csv)
        except OSError as exc:
            print(f"heatkern: invalid input: cannot write {target}: {exc.strerror}", file=stderr)
            return 2
        summary = stdout
    else:
        stdout.write(result.csv)
        summary = stderr
    for line in result.lines:
        print(line, file=summary)
    print(f"overall: {'PASS' if result.passed else 'FAIL'}", file=summary)
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="heatkern",
        description="Heat-semigroup kernels of elliptic pseudodifferential operators on the circle and torus.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    helps = {
        "kernel": "tabulate a heat kernel by one route",
        "verify": "cross-route, semigroup and theta-identity checks",
        "parametrix": "resolvent terms, remainder scaling, parametrix residuals",
        "subordinator": "stable-subordinator density tables and Laplace residuals",
        "bounds": "ratio scans against Poissonian bounds",
        "scan-angle": "kernel growth toward the imaginary time axis",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("config", help="JSON config file (or an inline JSON object)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for grid-parallel sections")
        sp.add_argument("--tol", type=float, default=None, help="truncation tolerance (overrides the config)")
        sp.add_argument("--kmax", type=int, default=None, help="fixed mode cut-off (overrides the config)")
        sp.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    if args.subcommand is None:
        ap.print_usage(sys.stderr)
        return 2
    return run(args.subcommand, args.config, args.threads, args.out, args.tol, args.kmax)


if __name__ == "__main__":
    sys.exit(main())
