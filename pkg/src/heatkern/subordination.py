"""One-sided stable subordinators and fractional heat kernels.

The density ``eta_t^d`` of the stable subordinator with index ``alpha = d/2``
is characterised by its Laplace transform,

    e^{-t lambda^{d/2}} = int_0^inf e^{-s lambda} eta_t^d(s) ds,

and scales as ``eta_t^d(s) = t^{-2/d} eta_1^d(s / t^{2/d})``.  Fractional
heat kernels follow by averaging Gaussian kernels,
``K_t = int_0^inf G_tau eta_t^d(tau) d tau``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DomainError
from .spectral import TWO_PI, KernelGrid, _wrap, as_times, separations

_ENVELOPE_EXPONENT = 40.0
_SMALL_S_EXPONENT = 70.0


def eta_d1(t, s) -> np.ndarray:
    """Closed form for d = 1: ``t e^{-t^2/(4s)} s^{-3/2} / (2 sqrt(pi))``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t <= 0) or np.any(s <= 0):
        raise DomainError("eta_d1 needs t > 0 and s > 0")
    return t * np.exp(-t * t / (4.0 * s)) * s**-1.5 / (2.0 * math.sqrt(math.pi))


def _check_d(d: float) -> float:
    d = float(d)
    if not 0 < d < 2:
        raise ValueError(f"d = {d} outside (0, 2)")
    return d


def _rotation(alpha: float) -> float:
    # pi is admissible for alpha <= 1/2; beyond that both exponentials must decay
    if alpha <= 0.5:
        return math.pi
    return 0.5 * (math.pi / 2 + math.pi / (2 * alpha))


def _eta1_quad(alpha: float, s: float, epsabs: float = 1e-300, epsrel: float = 1e-12) -> tuple[float, float]:
    """``eta_1(s) = (1/pi) Im int_0^inf exp(s r e^{i psi} - r^alpha e^{i alpha psi} + i psi) dr``.

    The inverse Laplace integral is taken along the rays ``z = r e^{+-i psi}``.
    For ``alpha <= 1/2``, ``psi = pi`` gives the real form
    ``(1/pi) int e^{-s r} e^{-r^alpha cos(pi alpha)} sin(r^alpha sin(pi alpha)) dr``.
    The range is cut where the envelope falls below ``e^{-40}``; the pieces
    double in length from the smallest natural scale.
    """
    psi = _rotation(alpha)
    e1 = complex(math.cos(psi), math.sin(psi))
    ea = complex(math.cos(alpha * psi), math.sin(alpha * psi))
    a = -s * math.cos(psi)
    b = math.cos(alpha * psi)

    def f(r):
        return (np.exp(s * r * e1 - r**alpha * ea + 1j * psi)).imag

    R = min(1.0 / a, b ** (-1.0 / alpha), 1.0)
    start = R
    while -a * R - b * R**alpha > -_ENVELOPE_EXPONENT:
        R *= 2.0
    edges = [0.0, min(start, R)]
    while edges[-1] < R:
        edges.append(min(2.0 * edges[-1], R))
    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=400)
            total += v
            err += e
    return total / math.pi, err / math.pi


@lru_cache(maxsize=None)
def _eta1_cached(alpha: float, s: float) -> tuple[float, float]:
    return _eta1_quad(alpha, s)


def eta_general(d: float, t, s, abs_tol: float = 1e-10) -> np.ndarray:
    """``eta_t^d(s)`` by quadrature of the inverse Laplace integral.

    Raises :class:`AccuracyError` if the quadrature error estimate of
    ``eta_1`` exceeds ``abs_tol`` (relative to ``max(1, |eta_1|)``).
    """
    d = _check_d(d)
    alpha = d / 2
    t_arr, s_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    if np.any(t_arr <= 0) or np.any(s_arr <= 0):
        raise DomainError("eta needs t > 0 and s > 0")
    out = np.empty(t_arr.shape)
    scale = t_arr ** (-2.0 / d)
    for idx in np.ndindex(t_arr.shape):
        u = float(s_arr[idx] * scale[idx])
        v, e = _eta1_cached(alpha, u)
        if e > abs_tol * max(1.0, abs(v)):
            raise AccuracyError(f"eta_1 quadrature error {e:.3g} at s = {u:.4g}, d = {d}")
        out[idx] = max(v, 0.0) * scale[idx]
    return out if out.shape else float(out)


def small_s_cutoff(alpha: float, exponent: float = _SMALL_S_EXPONENT) -> float:
    """``u`` below which ``eta_1(u) < e^{-exponent}`` (leading saddle-point exponent)."""
    c = (1 - alpha) * alpha ** (alpha / (1 - alpha))
    return (c / exponent) ** ((1 - alpha) / alpha)


@dataclass
class SubordinatorDensity:
    """Evaluator for ``eta_t^d``; ``eta_1`` values on the log grid ``u = e^{j h}`` are cached."""

    d: float
    h: float = 0.05
    _grid: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.d = _check_d(self.d)

    @property
    def alpha(self) -> float:
        return self.d / 2

    def __call__(self, t, s) -> np.ndarray:
        return eta_general(self.d, t, s)

    def eta1_nodes(self, j_lo: int, j_hi: int, h: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """``(u_j, eta_1(u_j))`` for ``u_j = e^{j h}``, ``j_lo <= j <= j_hi``."""
        h = self.h if h is None else h
        js = np.arange(j_lo, j_hi + 1)
        vals = np.empty(len(js))
        for i, j in enumerate(js):
            key = (round(h, 12), int(j))
            if key not in self._grid:
                self._grid[key] = float(eta_general(self.d, 1.0, math.exp(j * h)))
            vals[i] = self._grid[key]
        return np.exp(js * h), vals

    def _j_range(self, v_hi: float, h: float) -> tuple[int, int]:
        v_lo = math.log(small_s_cutoff(self.alpha))
        return int(math.floor(v_lo / h)), int(math.ceil(v_hi / h))

    def laplace(self, t: float, lam: float, h: float | None = None) -> float:
        """``int_0^inf e^{-s lam} eta_t(s) ds`` by the trapezoid rule in ``log s``."""
        if lam <= 0:
            raise DomainError("lambda must be positive")
        h = self.h if h is None else h
        T = t ** (2.0 / self.d)
        # e^{-lam T u} < e^{-45} beyond u = 45 / (lam T)
        v_hi = math.log(45.0 / (lam * T))
        u, eta = self.eta1_nodes(*self._j_range(v_hi, h), h)
        return float(h * np.sum(eta * u * np.exp(-lam * T * u)))

    def normalization(self, t: float = 1.0) -> float:
        """``int_0^inf eta_t(s) ds`` (t-independent by scaling), via ``w = s^{-alpha}``."""
        a = self.alpha

        def g(w):
            s = w ** (-1.0 / a)
            return float(eta_general(self.d, 1.0, s)) * s / (a * w)

        w_hi = small_s_cutoff(a) ** (-a)
        edges = [0.0] + list(np.geomspace(1e-3, w_hi, 12))
        total = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for lo, hi in zip(edges[:-1], edges[1:]):
                total += integrate.quad(g, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        return total


@dataclass
class TailReport:
    d: float
    t: float
    s: np.ndarray
    ratio: np.ndarray
    window: float = 1e3

    @property
    def min(self) -> float:
        return float(self.ratio.min())

    @property
    def max(self) -> float:
        return float(self.ratio.max())

    @property
    def passed(self) -> bool:
        return bool(0 < self.min and np.isfinite(self.max) and self.max / self.min < self.window)


def tail_asymptotics_check(d: float, t: float, s_grid) -> TailReport:
    """Ratio ``eta_t^d(s) / (t s^{-1-d/2})`` over ``s_grid`` (which must lie in ``[t^{2/d}, inf)``)."""
    d = _check_d(d)
    s = np.asarray(s_grid, dtype=float)
    if np.any(s < t ** (2.0 / d) * (1 - 1e-12)):
        raise DomainError("tail grid must lie in [t^(2/d), inf)")
    ratio = eta_general(d, t, s) / (t * s ** (-1.0 - d / 2))
    return TailReport(d, t, s, np.atleast_1d(ratio))


# ---------------------------------------------------------------------------
# subordinated kernels
# ---------------------------------------------------------------------------


def _centered_gauss_1d(z: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """``G_tau(z) - 1/(2pi)`` on the circle for every pair, shape ``(len(z), len(taus))``."""
    z = _wrap(np.asarray(z, float))
    taus = np.asarray(taus, float)
    out = np.empty((len(z), len(taus)))
    small = taus < 1.0
    if np.any(small):
        ts = taus[small]
        M = int(math.ceil((math.sqrt(4.0 * ts.max() * 36.0) + np.pi) / TWO_PI))
        acc = np.zeros((len(z), len(ts)))
        for m in range(-M, M + 1):
            zz = (z + TWO_PI * m)[:, None]
            acc += np.exp(-zz * zz / (4.0 * ts[None, :]))
        out[:, small] = acc / np.sqrt(4.0 * np.pi * ts[None, :]) - 1.0 / TWO_PI
    if np.any(~small):
        tb = taus[~small]
        K = int(math.ceil(math.sqrt(40.0 / tb.min()))) + 1
        acc = np.zeros((len(z), len(tb)))
        for k in range(1, K + 1):
            acc += np.cos(k * z)[:, None] * np.exp(-tb * k * k)[None, :]
        out[:, ~small] = acc / np.pi
    return out


def _centered_gauss(z: np.ndarray, taus: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return _centered_gauss_1d(z, taus)
    c = 1.0 / TWO_PI
    a = _centered_gauss_1d(z[:, 0], taus)
    b = _centered_gauss_1d(z[:, 1], taus)
    return a * b + c * (a + b)


_DENSITIES: dict[float, SubordinatorDensity] = {}


def density(d: float) -> SubordinatorDensity:
    d = _check_d(d)
    if d not in _DENSITIES:
        _DENSITIES[d] = SubordinatorDensity(d)
    return _DENSITIES[d]


def _subordinate(d: float, z: np.ndarray, t: float, n: int, h: float) -> np.ndarray:
    dens = density(d)
    T = t ** (2.0 / d)
    # beyond tau = 40 the centred Gaussian is below e^{-40}
    v_hi = math.log(40.0 / T)
    u, eta = dens.eta1_nodes(*dens._j_range(v_hi, h), h)
    G = _centered_gauss(z, T * u, n)
    return (2 * np.pi) ** (-n) + h * (G @ (eta * u))


def subordinated_kernel(d: float, x, y, t: float, n: int = 1, tol: float = 1e-8) -> np.ndarray:
    """Kernel of ``e^{-t Delta^{d/2}}`` on the torus ``T^n`` by subordination.

    ``K = (2pi)^{-n} + int_0^inf (G_tau(x - y) - (2pi)^{-n}) eta_t^d(tau) d tau``;
    subtracting the mean uses the unit mass of ``eta`` and removes the slowly
    decaying tail of the integrand.  With ``tau = t^{2/d} e^v`` the integral
    is a trapezoid sum in ``v``; it is repeated with twice the step and an
    :class:`AccuracyError` is raised if the two differ by more than ``tol``
    (absolute, or relative to the value when that is larger than 1).
    """
    d = _check_d(d)
    if not t > 0:
        raise DomainError("t must be positive")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    z = x - y
    shape = z.shape if n == 1 else z.shape[:-1]
    zf = z.reshape(-1) if n == 1 else z.reshape(-1, 2)
    h = density(d).h
    fine = _subordinate(d, zf, t, n, h)
    coarse = _subordinate(d, zf, t, n, 2 * h)
    err = np.abs(fine - coarse)
    if np.any(err > tol * np.maximum(1.0, np.abs(fine))):
        raise AccuracyError(f"subordination quadrature changed by {err.max():.3g} under step halving")
    return fine.reshape(shape)


def heat_kernel_subordination(d: float, t, x_grid, y_grid, n: int = 1, tol: float = 1e-8) -> KernelGrid:
    """Fractional heat kernel grid for the multiplier ``|k|^d`` via subordination."""
    ts = as_times(t)
    if np.any(ts.imag != 0):
        raise DomainError("subordination is defined for real t only")
    z, inv = separations(x_grid, y_grid, n)
    vals = np.full((len(ts), len(z)), np.nan)
    for i, tt in enumerate(ts.real):
        if tt > 0:
            vals[i] = subordinated_kernel(d, z, np.zeros_like(z), tt, n, tol)
    return KernelGrid(
        np.asarray(x_grid, float), np.asarray(y_grid, float), ts, vals[:, inv].astype(complex),
        "subordination", np.zeros(len(ts), dtype=int), np.zeros(len(ts)), n,
    )
