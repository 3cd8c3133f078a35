"""Poissonian bound functions and verification scans.

The estimates compared here hide their constants, so a scan never asserts
particular values.  It records the ratios ``|K| / B`` on a grid, checks that
the supremum is finite and (where a lower bound is claimed) the infimum
positive, and fits log-log slopes of the ratio toward ``t -> 0`` to detect
a bound with the wrong scaling.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import DomainError, TruncationError
from .spectral import (
    TWO_PI,
    KernelGrid,
    MultiplierSymbol,
    derivative_kernel,
    gamma_lower_bound,
    heat_kernel_spectral,
)

FIT_TOL = 0.2
WINDOW_TOL = 0.10


# ---------------------------------------------------------------------------
# distances and bound functions
# ---------------------------------------------------------------------------


def circle_distance(x, y) -> np.ndarray:
    """Geodesic distance on the circle, ``min(|x - y|, 2 pi - |x - y|)`` after reduction."""
    r = np.mod(np.abs(np.asarray(x, float) - np.asarray(y, float)), TWO_PI)
    return np.minimum(r, TWO_PI - r)


def torus_distance(x, y) -> np.ndarray:
    """Flat distance on ``T^2``; points carry their coordinates on the last axis."""
    c = circle_distance(x, y)
    return np.sqrt((c**2).sum(-1))


def _rho(dist, t, d):
    return np.asarray(dist, float) + np.asarray(t, float) ** (1.0 / d)


def poisson_bound(dist, t, d: float, n: int = 1) -> np.ndarray:
    """``t (dist + t^{1/d})^{-n-d}``."""
    return np.asarray(t, float) * _rho(dist, t, d) ** (-n - d)


def refined_bound(dist, t, d: float, n: int = 1, gamma: float = 0.0) -> np.ndarray:
    """``e^{-gamma t} t / rho^d (rho^{-n} + 1)`` with ``rho = dist + t^{1/d}``."""
    rho = _rho(dist, t, d)
    t = np.asarray(t, float)
    return np.exp(-gamma * t) * t / rho**d * (rho ** (-n) + 1.0)


def exponent_N(d: float, n: int = 1) -> float:
    """Angle exponent ``N = max(n/d, 7n/2 + 4d + 7)``."""
    return max(n / d, 3.5 * n + 4.0 * d + 7.0)


def complex_bound(dist, tmod, theta, d: float, n: int = 1, gamma: float = 0.0) -> np.ndarray:
    """``(cos theta)^{-N} e^{-gamma |t| cos theta} |t| / rho^d (rho^{-n} + 1)``, ``rho = dist + |t|^{1/d}``."""
    theta = np.asarray(theta, float)
    if np.any(np.abs(theta) >= np.pi / 2):
        raise DomainError("|theta| must be below pi/2")
    c = np.cos(theta)
    tmod = np.asarray(tmod, float)
    rho = _rho(dist, tmod, d)
    return c ** (-exponent_N(d, n)) * np.exp(-gamma * tmod * c) * tmod / rho**d * (rho ** (-n) + 1.0)


def perturbation_upper_bound(dist, t, d: float, n: int = 1, c1: float = 0.0) -> np.ndarray:
    """``t (rho^{-n-d} + rho^{-d}) + e^{-c1 t} t rho^{1-n-d}`` for ``P = Delta^{d/2} + lower order``."""
    rho = _rho(dist, t, d)
    t = np.asarray(t, float)
    return t * (rho ** (-n - d) + rho ** (-d)) + np.exp(-c1 * t) * t * rho ** (1 - n - d)


def dn_upper_bound(dist, t, n: int = 1) -> np.ndarray:
    """``t / (dist + t) ((dist + t)^{-n} + 1)``."""
    s = np.asarray(dist, float) + np.asarray(t, float)
    return np.asarray(t, float) / s * (s ** (-n) + 1.0)


def dn_lower_bound(dist, t, n: int = 1) -> np.ndarray:
    """``t (dist + t)^{-1-n}``."""
    s = np.asarray(dist, float) + np.asarray(t, float)
    return np.asarray(t, float) * s ** (-1 - n)


def derivative_bound(dist, t, d: float, j: int, gamma_idx: int, n: int = 1) -> np.ndarray:
    """``t (dist + t^{1/d})^{-(1+j)d - |gamma| - n}``."""
    return np.asarray(t, float) * _rho(dist, t, d) ** (-(1 + j) * d - gamma_idx - n)


BOUNDS: dict[str, Callable] = {
    "poisson": poisson_bound,
    "refined": refined_bound,
    "perturbation_upper": perturbation_upper_bound,
    "perturbation_lower": poisson_bound,
    "dn_upper": lambda dist, t, d=1.0, n=1, **kw: dn_upper_bound(dist, t, n),
    "dn_lower": lambda dist, t, d=1.0, n=1, **kw: dn_lower_bound(dist, t, n),
}


# ---------------------------------------------------------------------------
# grids and fits
# ---------------------------------------------------------------------------


def _logspace(lo: float, hi: float, per_decade: int) -> np.ndarray:
    m = int(round(math.log10(hi / lo) * per_decade))
    return np.geomspace(lo, hi, m + 1)


@dataclass(frozen=True)
class GridSpec:
    """Standard scan grid: separations ``{0} u [dist_min, pi]`` and times ``[t_min, t_max]``, log spaced."""

    dist_min: float = 1e-3
    dist_max: float = math.pi
    t_min: float = 1e-2
    t_max: float = 10.0
    per_decade: int = 20

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.dist_min, self.dist_max, self.t_min, self.t_max, self.per_decade * factor)

    @property
    def dist(self) -> np.ndarray:
        return np.concatenate([[0.0], _logspace(self.dist_min, self.dist_max, self.per_decade)])

    @property
    def t(self) -> np.ndarray:
        return _logspace(self.t_min, self.t_max, self.per_decade)

    def describe(self) -> dict:
        return {
            "dist": [0.0, self.dist_min, self.dist_max],
            "t": [self.t_min, self.t_max],
            "per_decade": self.per_decade,
            "n_dist": len(self.dist),
            "n_t": len(self.t),
        }


def standard_grid(refine: int = 1) -> GridSpec:
    return GridSpec(per_decade=20 * refine)


@dataclass
class Fit:
    name: str
    slope: float
    intercept: float
    residual: float
    n: int

    def line(self) -> str:
        return f"{self.name}: slope {self.slope:.4f} (rms residual {self.residual:.2e}, {self.n} samples)"


def loglog_fit(x, y, name: str = "fit") -> Fit:
    """Least-squares line through ``(log x, log |y|)``."""
    lx = np.log(np.asarray(x, float))
    ly = np.log(np.abs(np.asarray(y, float)))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return Fit(name, float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2))), len(lx))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    """Ratio statistics ``|K| / B`` of a kernel against a bound function."""

    name: str
    params: dict
    grid: dict
    dist: np.ndarray
    t: np.ndarray
    kernel: np.ndarray
    bound: np.ndarray
    lower_mask: np.ndarray | None = None
    excluded: int = 0
    fits: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def ratio(self) -> np.ndarray:
        return self.kernel / self.bound

    @property
    def empty(self) -> bool:
        return self.ratio.size == 0

    @property
    def c2(self) -> float:
        return float(np.max(self.ratio)) if not self.empty else float("nan")

    @property
    def c1(self) -> float:
        """Infimum over the lower-bound region (the whole grid when no region is set)."""
        r = self.ratio if self.lower_mask is None else self.ratio[self.lower_mask]
        return float(np.min(r)) if r.size else float("nan")

    def regime(self, d: float) -> np.ndarray:
        """True where ``dist < t^{1/d}`` (near-diagonal stratum)."""
        return self.dist < self.t ** (1.0 / d)

    @property
    def passed(self) -> bool:
        return (not self.empty) and all(self.checks.values())

    def summary(self) -> str:
        lines = [f"[{self.name}] {'PASS' if self.passed else 'FAIL'}"]
        lines.append("  params: " + ", ".join(f"{k}={v}" for k, v in self.params.items()))
        lines.append(f"  samples: {self.ratio.size} (excluded {self.excluded})")
        lines.append(f"  sup ratio c2 = {self.c2:.6g}")
        if self.lower_mask is not None or "inf_positive" in self.checks:
            lines.append(f"  inf ratio c1 = {self.c1:.6g}")
        for f in self.fits:
            lines.append("  " + f.line())
        for k, v in self.checks.items():
            lines.append(f"  check {k}: {'ok' if v else 'FAILED'}")
        lines.extend("  note: " + n for n in self.notes)
        return "\n".join(lines)

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dist", "t", "kernel", "bound", "ratio", "lower_region"])
        low = self.lower_mask if self.lower_mask is not None else np.zeros(self.ratio.shape, bool)
        for a, b, k, bd, r, m in zip(self.dist, self.t, self.kernel, self.bound, self.ratio, low):
            w.writerow([f"{a:.16e}", f"{b:.16e}", f"{k:.16e}", f"{bd:.16e}", f"{r:.16e}", int(m)])
        return buf.getvalue() if fh is None else ""


def _samples(kernel: KernelGrid, use_abs: bool = True):
    """Flatten a kernel grid into ``(dist, t, value)``; t = 0 entries are skipped."""
    dist, ts, vals = [], [], []
    for i, t in enumerate(kernel.t):
        if kernel.identity[i]:
            continue
        if kernel.n == 1:
            D = circle_distance(kernel.x[:, None], kernel.y[None, :])
        else:
            D = torus_distance(kernel.x[:, None, :], kernel.y[None, :, :])
        v = kernel.values[i]
        dist.append(D.ravel())
        ts.append(np.full(D.size, abs(t)))
        vals.append((np.abs(v) if use_abs else v.real).ravel())
    if not dist:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    return np.concatenate(dist), np.concatenate(ts), np.concatenate(vals)


def ratio_scan(
    kernel: KernelGrid,
    bound: Callable[[np.ndarray, np.ndarray], np.ndarray],
    name: str = "ratio",
    region: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    lower_region: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    params: dict | None = None,
    grid: dict | None = None,
    d: float | None = None,
    use_abs: bool = True,
    small_t: float = 0.1,
    far_dist: float | None = None,
) -> BoundReport:
    """Compare ``|K|`` with ``bound(dist, t)`` sample by sample.

    Checks recorded in the report:

    * ``sup_finite`` -- the largest ratio is finite;
    * ``inf_positive`` -- only when ``lower_region`` is given: the smallest
      ratio over that region is positive;
    * ``small_t_upper`` / ``small_t_lower`` -- on the diagonal and on the
      far line (the largest separation, or the one nearest ``far_dist``), the
      log-log slope of the ratio in t over
      ``t <= small_t`` is at least ``-0.2`` (no blow-up as t -> 0), and at
      most ``+0.2`` when a lower bound is claimed there;
    * ``both_regimes`` -- with ``d`` given, the checks hold separately on
      ``dist < t^{1/d}`` and ``dist >= t^{1/d}``.
    """
    dist, ts, vals = _samples(kernel, use_abs)
    if region is not None and dist.size:
        keep = np.asarray(region(dist, ts), bool)
        dist, ts, vals = dist[keep], ts[keep], vals[keep]
    B = np.asarray(bound(dist, ts), float) if dist.size else np.zeros(0)
    ok = np.isfinite(B) & (B > 0)
    excluded = int((~ok).sum())
    dist, ts, vals, B = dist[ok], ts[ok], vals[ok], B[ok]
    lower = np.asarray(lower_region(dist, ts), bool) if lower_region is not None and dist.size else None
    rep = BoundReport(name, dict(params or {}), dict(grid or {}), dist, ts, vals, B, lower, excluded)
    if rep.empty:
        rep.notes.append("empty region")
        rep.checks["non_empty"] = False
        return rep
    r = rep.ratio
    rep.checks["sup_finite"] = bool(np.isfinite(r).all())
    if lower is not None:
        if lower.any():
            rep.checks["inf_positive"] = bool(r[lower].min() > 0)
        else:
            rep.notes.append("lower-bound region is empty")
            rep.checks["inf_positive"] = False
    # scaling toward t -> 0 on the diagonal and on the far line; the largest
    # separation is deepest in the regime t^{1/d} << dist
    uniq = np.unique(dist)
    far = float(uniq.max() if far_dist is None else uniq[np.argmin(np.abs(uniq - far_dist))])
    for label, target in (("diag", 0.0), ("far", far)):
        sel = (np.abs(dist - target) <= 1e-12 * max(1.0, target)) & (ts <= small_t)
        if sel.sum() >= 5:
            f = loglog_fit(ts[sel], r[sel], f"ratio slope in t ({label})")
            rep.fits.append(f)
            rep.checks[f"small_t_upper_{label}"] = f.slope >= -FIT_TOL
            if lower is not None and np.all(lower[sel]):
                rep.checks[f"small_t_lower_{label}"] = f.slope <= FIT_TOL
        else:
            rep.notes.append(f"no small-t slope fit on the {label} line (fewer than 5 samples with t <= {small_t})")
    if d is not None:
        near = rep.regime(d)
        for label, m in (("near", near), ("far", ~near)):
            if m.any():
                good = bool(np.isfinite(r[m]).all())
                if lower is not None and (lower & m).any():
                    good = good and bool(r[lower & m].min() > 0)
                rep.checks[f"regime_{label}"] = good
    return rep


def window_change(a: BoundReport, b: BoundReport) -> float:
    """Relative change of the window ``[c1, c2]`` between two reports."""
    return max(abs(b.c1 - a.c1) / abs(a.c1), abs(b.c2 - a.c2) / abs(a.c2))


def lower_bound_scan(kernel: KernelGrid, d: float, n: int = 1, r: float = 1.0, use_abs: bool = False,
                     bound: Callable | None = None, name: str = "lower") -> BoundReport:
    """Infimum of ``K / (t (dist + t^{1/d})^{-n-d})`` over ``dist + t^{1/d} <= r``."""
    bound = bound or (lambda dist, t: poisson_bound(dist, t, d, n))

    def region(dist, t):
        return _rho(dist, t, d) <= r

    return ratio_scan(kernel, bound, name, region=region, lower_region=region,
                      params={"d": d, "n": n, "r": r}, d=d, use_abs=use_abs)


# ---------------------------------------------------------------------------
# campaigns
# ---------------------------------------------------------------------------


def angle_samples(j_max: int = 8) -> np.ndarray:
    """``theta_j = pi/2 - 2^{-j}``, ``j = 1..j_max``."""
    return np.pi / 2 - 2.0 ** -np.arange(1, j_max + 1)


def _sup_abs_kernel(p: MultiplierSymbol, t: complex, n_coarse: int = 2048) -> float:
    """``sup_z |K(z, t)|`` over separations, refined locally around the coarse maximum."""
    z = np.linspace(0.0, np.pi, n_coarse + 1)
    g = heat_kernel_spectral(p, t, z, [0.0])
    v = np.abs(g.values[0, :, 0])
    i = int(np.argmax(v))
    lo, hi = z[max(i - 1, 0)], z[min(i + 1, n_coarse)]
    K = int(g.k_max[0])

    def neg(s):
        return -abs(heat_kernel_spectral(p, t, [s], [0.0], K_max=K).values[0, 0, 0])

    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(float(v.max()), -float(res.fun))


def angle_exponent_fit(
    p: MultiplierSymbol,
    tmod: float = 1.0,
    thetas=None,
    d: float | None = None,
    n: int = 1,
    mode: str = "offdiagonal",
) -> BoundReport:
    """Fit ``log S(theta)`` against ``-log cos theta`` for ``t = tmod e^{i theta}``.

    ``mode = "diagonal"`` uses ``S = sup_x |K(x, x, t)|``; ``"offdiagonal"``
    takes the supremum over all pairs ``(x, y)``.  Passes when the slope is
    at most ``N(d, n) + 0.2``.  Angles whose kernel cannot be truncated are
    dropped with a note.
    """
    thetas = angle_samples() if thetas is None else np.asarray(thetas, float)
    d = p.order if d is None else d
    S, kept, notes = [], [], []
    for th in thetas:
        t = tmod * complex(math.cos(th), math.sin(th))
        try:
            if mode == "diagonal":
                S.append(float(np.abs(heat_kernel_spectral(p, t, [0.0], [0.0]).values[0, 0, 0])))
            elif mode == "offdiagonal":
                S.append(_sup_abs_kernel(p, t))
            else:
                raise ValueError(f"unknown mode {mode!r}")
            kept.append(th)
        except TruncationError as exc:
            notes.append(f"theta={th:.6f} dropped: {exc}")
    kept = np.asarray(kept)
    S = np.asarray(S)
    x = 1.0 / np.cos(kept)
    N = exponent_N(d, n)
    rep = BoundReport(
        f"angle_{mode}", {"d": d, "n": n, "tmod": tmod, "N": N}, {"theta": kept.tolist()},
        np.zeros(len(kept)), np.full(len(kept), tmod), S, x**N,
    )
    rep.notes.extend(notes)
    if len(kept) < 2:
        rep.checks["enough_angles"] = False
        return rep
    f = loglog_fit(x, S, "log S vs -log cos(theta)")
    rep.fits.append(f)
    rep.checks["slope_below_N"] = f.slope <= N + FIT_TOL
    return rep


def longtime_check(p: MultiplierSymbol, t_grid=None, z_grid=None, tol: float = 1e-6,
                   limit: float | None = None) -> BoundReport:
    """``sup_{x,y} |K(x, y, t)| e^{gamma t}`` over ``t in [1, 20]``.

    Passes when the product stays bounded and, with ``limit`` given, its
    value at the last time is within ``tol`` of ``limit``.  The decay rate
    from a log-linear fit of ``sup|K|`` is recorded.
    """
    t_grid = np.linspace(1.0, 20.0, 39) if t_grid is None else np.asarray(t_grid, float)
    z_grid = np.linspace(0.0, np.pi, 65) if z_grid is None else np.asarray(z_grid, float)
    gamma = gamma_lower_bound(p, 64)
    g = heat_kernel_spectral(p, t_grid, z_grid, [0.0])
    sup = np.abs(g.values[:, :, 0]).max(axis=1)
    prod = sup * np.exp(gamma * t_grid)
    rep = BoundReport("longtime", {"gamma": gamma}, {"t": [float(t_grid[0]), float(t_grid[-1])]},
                      np.zeros(len(t_grid)), t_grid, prod, np.ones(len(t_grid)))
    A = np.vstack([t_grid, np.ones_like(t_grid)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(sup), rcond=None)
    res = np.log(sup) - A @ coef
    tail = t_grid >= t_grid[-1] / 2
    coef2, *_ = np.linalg.lstsq(A[tail], np.log(sup[tail]), rcond=None)
    rep.fits.append(Fit("decay rate (log-linear, second half)", float(coef2[0]), float(coef2[1]),
                        float(np.sqrt(np.mean(res**2))), int(tail.sum())))
    rep.checks["bounded"] = bool(np.isfinite(prod).all() and prod.max() < 1e6 * prod.min())
    if limit is not None:
        err = abs(prod[-1] - limit)
        rep.notes.append(f"|sup|K| e^(gamma t) - limit| at t={t_grid[-1]:g}: {err:.3e}")
        rep.checks["limit"] = err < tol
    return rep


def derivative_bound_scan(p: MultiplierSymbol, j: int, gamma_idx: int, d: float | None = None, n: int = 1,
                          grid: GridSpec | None = None) -> BoundReport:
    """``|D_t^j D_x^gamma K|`` against ``t (dist + t^{1/d})^{-(1+j)d - gamma - n}``."""
    d = p.order if d is None else d
    grid = grid or GridSpec(t_max=1.0)
    k = derivative_kernel(p, j, gamma_idx, grid.t, grid.dist, [0.0])
    # odd x-derivatives vanish at the antipode, so their far line sits at pi/2
    rep = ratio_scan(
        k, lambda dist, t: derivative_bound(dist, t, d, j, gamma_idx, n), f"derivative_j{j}_g{gamma_idx}",
        params={"d": d, "n": n, "j": j, "gamma": gamma_idx}, grid=grid.describe(), d=d,
        far_dist=math.pi / 2 if gamma_idx % 2 else None,
    )
    if gamma_idx % 2:
        # odd x-derivatives vanish on the diagonal; slope fits there are meaningless
        for key in [k for k in rep.checks if k.endswith("_diag")]:
            del rep.checks[key]
        rep.fits = [f for f in rep.fits if "(diag)" not in f.name]
    return rep
