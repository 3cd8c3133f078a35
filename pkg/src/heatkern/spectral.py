"""Reference heat kernels on the circle and the flat 2-torus.

Fourier multipliers are summed mode by mode.  Variable-coefficient symbols
are represented by their finite section in the basis ``e^{ikx}/sqrt(2 pi)``
and exponentiated as matrices.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, EllipticityError, TruncationError
from .symbols import ClassicalSymbol, require_elliptic

TWO_PI = 2.0 * np.pi
# e^{-27.63} = 1e-12: exponent budget for the default frequency cut-off
_CUTOFF_EXPONENT = math.log(1e12)
# largest cut-off per axis; memory grows linearly in it for the circle
K_CAP = 1 << 23
K_CAP_TORUS = 1 << 11
_CHUNK = 1 << 22


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------


def _label(coef: complex, base: str, shift: complex, n: int) -> str:
    def num(c):
        c = complex(c)
        return f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}i)"

    out = base if complex(coef) == 1 else f"{num(coef)}*{base}"
    if complex(shift) != 0:
        out += f"+{num(shift)}"
    return out + (" on T^2" if n == 2 else "")


@dataclass(frozen=True)
class MultiplierSymbol:
    """x-independent symbol ``k -> p(k)`` on the lattice ``Z^n`` (n = 1 or 2)."""

    func: Callable[[np.ndarray], np.ndarray]
    order: float
    n: int = 1
    name: str = ""
    even: bool = True

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only n = 1 and n = 2 are supported")

    def __call__(self, k) -> np.ndarray:
        return np.asarray(self.func(np.asarray(k)), dtype=complex)

    def norm(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return np.abs(k) if self.n == 1 else np.sqrt((k**2).sum(axis=-1))

    def _sample(self, K: int = 256) -> tuple[np.ndarray, np.ndarray]:
        if self.n == 1:
            k = np.arange(-K, K + 1)
        else:
            r = np.arange(-K // 4, K // 4 + 1)
            k = np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)
        return k, self(k)

    @property
    def is_selfadjoint(self) -> bool:
        _, v = self._sample()
        return bool(np.all(np.abs(v.imag) <= 1e-14 * np.maximum(1, np.abs(v))))

    def ellipticity_constant(self, K: int = 256) -> float:
        k, v = self._sample(K)
        a = self.norm(k)
        m = a >= 1
        return float((v.real[m] / a[m] ** self.order).min())

    def sector_angle(self, K: int = 256) -> float:
        """``theta_0 = max arg p(k)`` over ``|k| >= 1``; ``phi_0 = pi/2 - theta_0``."""
        k, v = self._sample(K)
        m = self.norm(k) >= 1
        return float(np.max(np.abs(np.arctan2(v.imag[m], v.real[m]))))

    def require_elliptic(self) -> float:
        c = self.ellipticity_constant()
        if not c > 0:
            raise EllipticityError(f"multiplier {self.name!r} is not elliptic on the lattice")
        if not self.sector_angle() < np.pi / 2:
            raise EllipticityError(f"multiplier {self.name!r} violates the sector condition")
        return c

    # -- factories ---------------------------------------------------------

    @classmethod
    def power(cls, d: float, n: int = 1, coef: complex = 1.0, shift: complex = 0.0) -> "MultiplierSymbol":
        """``coef * |k|^d + shift``."""
        d = float(d)

        def f(k, _n=n):
            a = np.abs(k) if _n == 1 else np.sqrt((np.asarray(k, float) ** 2).sum(-1))
            return coef * np.power(a.astype(float), d) + shift

        return cls(f, d, n, _label(coef, f"|k|^{d:g}", shift, n))

    @classmethod
    def bracket(cls, d: float = 1.0, n: int = 1, coef: complex = 1.0, shift: complex = 0.0) -> "MultiplierSymbol":
        """``coef * <k>^d + shift`` with ``<k> = (1 + |k|^2)^(1/2)``."""
        d = float(d)

        def f(k, _n=n):
            a2 = np.asarray(k, float) ** 2 if _n == 1 else (np.asarray(k, float) ** 2).sum(-1)
            return coef * (1.0 + a2) ** (d / 2) + shift

        return cls(f, d, n, _label(coef, f"<k>^{d:g}", shift, n))

    @classmethod
    def dirichlet_to_neumann(cls) -> "MultiplierSymbol":
        """DN operator of the unit disc: harmonic extension ``r^|k| e^{ik theta}``."""
        m = cls.power(1.0)
        return cls(m.func, 1.0, 1, "dirichlet_to_neumann")

    @classmethod
    def from_classical(cls, p: ClassicalSymbol) -> "MultiplierSymbol":
        if not p.is_multiplier:
            raise ValueError("symbol depends on x")

        def f(k, _p=p):
            k = np.asarray(k)
            out = np.zeros(k.shape, dtype=complex)
            for h in _p.terms:
                fac, sgn = h.lattice_values(k)
                cp, cm = h.c_plus.coeff(0), h.c_minus.coeff(0)
                branch = np.where(sgn > 0, cp, np.where(sgn < 0, cm, 0.5 * (cp + cm)))
                out += branch * fac
            return out

        even = all(h.c_plus == h.c_minus for h in p.terms)
        return cls(f, p.order, 1, p.name or "classical-multiplier", even)


# ---------------------------------------------------------------------------
# finite sections
# ---------------------------------------------------------------------------


@dataclass
class OperatorMatrix:
    """Matrix of P on span{e^{ikx}/sqrt(2 pi) : |k| <= K}; row/column index k + K."""

    K: int
    A: np.ndarray

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @property
    def is_hermitian(self) -> bool:
        return bool(np.allclose(self.A, self.A.conj().T, atol=1e-12, rtol=0))

    def eigvals(self) -> np.ndarray:
        if self.is_hermitian:
            return np.linalg.eigvalsh(self.A).astype(complex)
        return np.linalg.eigvals(self.A)

    def expm(self, t: complex) -> np.ndarray:
        """``e^{-tA}``: eigendecomposition when Hermitian, Pade scaling-and-squaring otherwise."""
        if self.is_hermitian:
            w, V = np.linalg.eigh(self.A)
            return (V * np.exp(-t * w)) @ V.conj().T
        return scipy.linalg.expm(-t * self.A)


def build_matrix(p: ClassicalSymbol | MultiplierSymbol, K: int) -> OperatorMatrix:
    """Finite section of the left quantization, ``A[j,k] = sum_terms c_{j-k}(k) chi(k)|k|^s``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    modes = np.arange(-K, K + 1)
    if isinstance(p, MultiplierSymbol):
        if p.n != 1:
            raise ValueError("matrices are built on the circle only")
        p.require_elliptic()
        return OperatorMatrix(K, np.diag(p(modes)))
    require_elliptic(p)
    N = 2 * K + 1
    A = np.zeros((N, N), dtype=complex)
    diff = modes[:, None] - modes[None, :]
    for h in p.terms:
        if h.is_zero():
            continue
        fac, sgn = h.lattice_values(modes)
        for tp, mask in ((h.c_plus, sgn > 0), (h.c_minus, sgn < 0)):
            for m, c in tp.coeffs:
                A[:, mask] += np.where(diff[:, mask] == m, c, 0.0) * fac[mask]
        if h.degree == 0 and h.is_polynomial:
            # k = 0 column of a polynomial degree-0 term
            for m, c in h.c_plus.coeffs:
                A[:, K] += np.where(diff[:, K] == m, c, 0.0)
    return OperatorMatrix(K, A)


def gamma_lower_bound(p: ClassicalSymbol | MultiplierSymbol, K: int = 64) -> float:
    """Smallest real part of the spectrum of the truncated operator."""
    if isinstance(p, MultiplierSymbol):
        if p.n == 1:
            k = np.arange(-K, K + 1)
        else:
            r = np.arange(-K, K + 1)
            k = np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)
        return float(p(k).real.min())
    return float(build_matrix(p, K).eigvals().real.min())


# ---------------------------------------------------------------------------
# kernel grids
# ---------------------------------------------------------------------------


@dataclass
class KernelGrid:
    """Sampled kernel ``K(x, y, t)``; ``values[i, a, b]`` is at ``(x[a], y[b], t[i])``."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    values: np.ndarray
    method: str
    k_max: np.ndarray
    tail: np.ndarray
    n: int = 1
    identity: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.identity is None:
            self.identity = self.t == 0

    def rows(self):
        """Flat records ``(x, y, t, K)`` in output order."""
        for i, t in enumerate(self.t):
            for a, x in enumerate(self.x):
                for b, y in enumerate(self.y):
                    yield x, y, t, self.values[i, a, b], int(self.k_max[i])

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "t_re", "t_im", "K_re", "K_im", "method", "K_max"])
        for x, y, t, v, kmax in self.rows():
            xs = _fmt(x) if self.n == 1 else ";".join(_fmt(c) for c in x)
            ys = _fmt(y) if self.n == 1 else ";".join(_fmt(c) for c in y)
            w.writerow([xs, ys, _fmt(t.real), _fmt(t.imag), _fmt(v.real), _fmt(v.imag), self.method, kmax])
        return buf.getvalue() if fh is None else ""


def _fmt(v: float) -> str:
    return f"{float(v):.16e}"


def as_times(t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    if np.any(t.real < 0) or np.any((t.real == 0) & (t.imag != 0)):
        raise DomainError("heat kernels need Re t > 0 (or t = 0)")
    return t


def separations(x_grid, y_grid, n: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Unique values of ``x - y`` over the grid and the index map back."""
    x = np.asarray(x_grid, float)
    y = np.asarray(y_grid, float)
    if n == 1:
        z = x.reshape(-1)[:, None] - y.reshape(-1)[None, :]
        flat = z.reshape(-1)
        uniq, inv = np.unique(flat, return_inverse=True)
        return uniq, inv.reshape(z.shape)
    x = x.reshape(-1, 2)
    y = y.reshape(-1, 2)
    z = x[:, None, :] - y[None, :, :]
    flat = z.reshape(-1, 2)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    return uniq, inv.reshape(z.shape[:2])


def lattice(K: int, n: int = 1) -> np.ndarray:
    """Lattice points with ``|k| <= K`` (n = 2: Euclidean disc)."""
    if n == 1:
        return np.arange(-K, K + 1)
    r = np.arange(-K, K + 1)
    k = np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)
    return k[(k**2).sum(-1) <= K * K]


def mode_sum(coefs: np.ndarray, modes: np.ndarray, z: np.ndarray, n: int = 1) -> np.ndarray:
    """``(2 pi)^{-n} sum_k coefs[..., k] e^{i k.z}`` for every separation z.

    ``coefs`` has shape ``(m, len(modes))``; the result has shape ``(m, len(z))``.
    """
    coefs = np.atleast_2d(coefs)
    out = np.zeros((coefs.shape[0], len(z)), dtype=complex)
    step = max(1, _CHUNK // max(1, len(z)))
    for s in range(0, len(modes), step):
        km = modes[s : s + step]
        phase = (np.asarray(z, float)[:, None] * km[None, :]) if n == 1 else np.asarray(z, float) @ km.T
        out += coefs[:, s : s + step] @ np.exp(1j * phase).T
    return out / TWO_PI**n


def _even_mode_sum(coefs: np.ndarray, K: int, z: np.ndarray) -> np.ndarray:
    """1-D mode sum for even coefficients given on ``k = 0..K``."""
    coefs = np.atleast_2d(coefs)
    out = np.repeat(coefs[:, :1], len(z), axis=1).astype(complex)
    step = max(1, _CHUNK // max(1, len(z)))
    kk = np.arange(1, K + 1)
    for s in range(0, K, step):
        km = kk[s : s + step]
        out += 2.0 * coefs[:, 1 + s : 1 + s + step] @ np.cos(np.asarray(z, float)[:, None] * km[None, :]).T
    return out / TWO_PI


def _require_below_cap(K: int, K_cap: int) -> None:
    if K > K_cap:
        raise TruncationError(f"the requested accuracy needs about {K} modes, above the cap {K_cap}")


def default_kmax(p: MultiplierSymbol, t: complex, exponent: float = _CUTOFF_EXPONENT) -> int:
    """Smallest K with ``e^{-Re t * c * K^d} <= e^{-exponent}`` (c: ellipticity constant)."""
    c = p.ellipticity_constant()
    shift = min(0.0, gamma_lower_bound(p, 4))
    tr = complex(t).real
    if tr <= 0:
        raise DomainError("frequency cut-off needs Re t > 0")
    K = ((exponent / tr - shift) / c) ** (1.0 / p.order)
    return int(max(8, math.ceil(K)))


def _tail(coef_fn: Callable[[np.ndarray], np.ndarray], K: int, n: int) -> tuple[float, float]:
    """Absolute tail ``(2pi)^-n sum_{K<|k|<=2K} |c_k|`` and the bound ``(2pi)^-n sum_{|k|<=K}|c_k|``."""
    inner = lattice(K, n)
    outer = lattice(2 * K, n)
    if n == 1:
        outer = outer[np.abs(outer) > K]
    else:
        outer = outer[(outer**2).sum(-1) > K * K]
    tail = float(np.abs(coef_fn(outer)).sum()) / TWO_PI**n
    mass = float(np.abs(coef_fn(inner)).sum()) / TWO_PI**n
    return tail, mass


def choose_kmax(coef_fn, K0: int, n: int, tol: float, K_cap: int | None = None) -> tuple[int, float]:
    """Double K from ``K0`` until the relative tail is below ``tol``."""
    if K_cap is None:
        K_cap = K_CAP if n == 1 else K_CAP_TORUS
    _require_below_cap(K0, K_cap)
    K = K0
    while True:
        tail, mass = _tail(coef_fn, K, n)
        if tail <= tol * max(mass, 1e-300):
            return K, tail
        if K >= K_cap:
            raise TruncationError(f"tail {tail:.3g} still above tolerance at K={K}")
        K *= 2


def _even_coefficients(coef_fn, K: int, tol: float, fixed: bool, K_cap: int | None = None):
    """Coefficients on ``k = 0..K`` for an even symbol, with the tail test on ``K < k <= 2K``.

    The same evaluation serves the tail test and the synthesis.
    """
    K_cap = K_CAP if K_cap is None else K_cap
    _require_below_cap(K, K_cap)
    c = coef_fn(np.arange(0, 2 * K + 1))
    while True:
        a = np.abs(c)
        tail = 2.0 * a[K + 1 :].sum() / TWO_PI
        mass = (a[0] + 2.0 * a[1 : K + 1].sum()) / TWO_PI
        if tail <= tol * max(mass, 1e-300):
            return K, tail, c[: K + 1]
        if fixed:
            raise TruncationError(f"K_max={K} leaves relative tail {tail / max(mass, 1e-300):.3g} > {tol:.3g}")
        if K >= K_cap:
            raise TruncationError(f"tail {tail:.3g} still above tolerance at K={K}")
        c = np.concatenate([c, coef_fn(np.arange(2 * K + 1, 4 * K + 1))])
        K *= 2


def check_kmax(coef_fn, K: int, n: int, tol: float) -> float:
    tail, mass = _tail(coef_fn, K, n)
    if tail > tol * max(mass, 1e-300):
        raise TruncationError(
            f"K_max={K} leaves relative tail {tail / max(mass, 1e-300):.3g} > {tol:.3g}"
        )
    return tail


# ---------------------------------------------------------------------------
# heat kernels
# ---------------------------------------------------------------------------


def _as_symbol(p):
    if isinstance(p, ClassicalSymbol) and p.is_multiplier:
        return MultiplierSymbol.from_classical(p)
    return p


def multiplier_kernel(
    p: MultiplierSymbol,
    coef_factory: Callable[[complex], Callable[[np.ndarray], np.ndarray]],
    t,
    x_grid,
    y_grid,
    K_max: int | None,
    tol: float,
    method: str,
    tail_factory=None,
) -> KernelGrid:
    """Shared synthesis: ``coef_factory(t)(k)`` gives the mode coefficients.

    The cut-off is tested on ``tail_factory`` when given (a route whose
    coefficients carry a quadrature error floor is truncated according to
    the exact decay of ``e^{-t p(k)}``).
    """
    ts = as_times(t)
    z, inv = separations(x_grid, y_grid, p.n)
    live = [i for i, tt in enumerate(ts) if tt != 0]
    kms = np.zeros(len(ts), dtype=int)
    tails = np.zeros(len(ts))
    vals = np.full((len(ts), len(z)), np.nan, dtype=complex)
    for i in live:
        fn = coef_factory(ts[i])
        tail_fn = fn if tail_factory is None else tail_factory(ts[i])
        if p.n == 1 and p.even:
            K, tails[i], c = _even_coefficients(tail_fn, K_max or default_kmax(p, ts[i]), tol, K_max is not None)
            if tail_factory is not None:
                c = fn(np.arange(0, K + 1))
            vals[i] = _even_mode_sum(c, K, z)[0]
        else:
            if K_max is None:
                K, tails[i] = choose_kmax(tail_fn, default_kmax(p, ts[i]), p.n, tol)
            else:
                K, tails[i] = K_max, check_kmax(tail_fn, K_max, p.n, tol)
            k = lattice(K, p.n)
            vals[i] = mode_sum(fn(k), k, z, p.n)[0]
        kms[i] = K
    x = np.asarray(x_grid, float)
    y = np.asarray(y_grid, float)
    out = vals[:, inv]
    return KernelGrid(x, y, ts, out, method, kms, tails, p.n)


def heat_kernel_spectral(
    p: ClassicalSymbol | MultiplierSymbol,
    t,
    x_grid,
    y_grid,
    K_max: int | None = None,
    tol: float = 1e-10,
) -> KernelGrid:
    """Kernel of ``e^{-tP}`` by eigen-mode summation (multipliers) or matrix exponential.

    For a multiplier ``K(x,y,t) = (2 pi)^{-n} sum_{|k|<=K_max} e^{ik.(x-y)} e^{-t p(k)}``.
    ``K_max`` defaults to the smallest cut-off whose relative tail is below
    ``tol``.  Entries with ``t = 0`` are left as NaN and flagged in
    ``KernelGrid.identity``.
    """
    p = _as_symbol(p)
    if isinstance(p, MultiplierSymbol):
        p.require_elliptic()

        def factory(tt):
            return lambda k: np.exp(-tt * p(k))

        return multiplier_kernel(p, factory, t, x_grid, y_grid, K_max, tol, "spectral")
    return _matrix_kernel(p, t, x_grid, y_grid, K_max or 128, tol, "spectral")


def matrix_tail(p: ClassicalSymbol, t: complex, K: int) -> tuple[float, float]:
    """Tail estimate for a finite section, from the diagonal heat decay of the symbol."""
    xs = np.linspace(0, TWO_PI, 32, endpoint=False)
    k = np.arange(-2 * K, 2 * K + 1)
    X, KK = np.meshgrid(xs, k, indexing="ij")
    re = p(X, KK).real.min(axis=0)
    w = np.exp(-complex(t).real * re) / TWO_PI
    inner = np.abs(k) <= K
    return float(w[~inner].sum()), float(w[inner].sum())


def _matrix_kernel(p: ClassicalSymbol, t, x_grid, y_grid, K: int, tol: float, method: str, propagator=None) -> KernelGrid:
    ts = as_times(t)
    op = build_matrix(p, K)
    x = np.asarray(x_grid, float).reshape(-1)
    y = np.asarray(y_grid, float).reshape(-1)
    modes = op.modes
    Phx = np.exp(1j * np.outer(x, modes))
    Phy = np.exp(1j * np.outer(y, modes))
    vals = np.full((len(ts), len(x), len(y)), np.nan, dtype=complex)
    tails = np.zeros(len(ts))
    for i, tt in enumerate(ts):
        if tt == 0:
            continue
        tail, mass = matrix_tail(p, tt, K)
        if tail > tol * mass:
            raise TruncationError(f"K={K} leaves relative tail {tail / mass:.3g} at t={tt}")
        tails[i] = tail
        E = op.expm(tt) if propagator is None else propagator(op, tt)
        vals[i] = Phx @ E @ Phy.conj().T / TWO_PI
    return KernelGrid(x, y, ts, vals, method, np.full(len(ts), K), tails, 1)


def min_time_for(p: ClassicalSymbol, K: int, tol: float = 1e-10) -> float:
    """Smallest real t (to 1%) for which a K-mode section passes the tail check."""
    lo, hi = 1e-6, 1e3
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        tail, mass = matrix_tail(p, mid, K)
        if tail <= tol * mass:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1.01:
            break
    return hi


def derivative_kernel(
    p: MultiplierSymbol,
    j: int,
    gamma: int,
    t,
    x_grid,
    y_grid,
    K_max: int | None = None,
    tol: float = 1e-10,
) -> KernelGrid:
    """``d_t^j d_x^gamma K`` via the factors ``(-p(k))^j (ik)^gamma`` (circle only)."""
    p = _as_symbol(p)
    if not isinstance(p, MultiplierSymbol) or p.n != 1:
        raise ValueError("derivative kernels are implemented for circle multipliers")
    p.require_elliptic()

    def factory(tt):
        return lambda k: (-p(k)) ** j * (1j * k) ** gamma * np.exp(-tt * p(k))

    q = MultiplierSymbol(p.func, p.order, 1, p.name, even=p.even and gamma % 2 == 0)
    if gamma % 2:
        q = MultiplierSymbol(p.func, p.order, 1, p.name, even=False)
    return multiplier_kernel(q, factory, t, x_grid, y_grid, K_max, tol, f"spectral_d{j}_{gamma}")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def poisson_kernel_closed(z, t) -> np.ndarray:
    """Kernel of ``e^{-t|D|}`` on the circle, ``(1/2pi)(1-r^2)/(1-2r cos z+r^2)``, ``r = e^{-t}``.

    Valid for complex t with Re t > 0.
    """
    z = np.asarray(z, dtype=float)
    r = np.exp(-np.asarray(t, dtype=complex))
    val = (1 - r * r) / (1 - 2 * r * np.cos(z) + r * r) / TWO_PI
    return val if np.iscomplexobj(t) or np.any(np.imag(val) != 0) else val.real


def dn_heat_kernel_closed(theta, theta_prime, t) -> np.ndarray:
    """Dirichlet-to-Neumann heat kernel of the unit disc boundary."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    return np.real(poisson_kernel_closed(np.asarray(theta) - np.asarray(theta_prime), t))


def _wrap(z):
    return np.mod(np.asarray(z, float) + np.pi, TWO_PI) - np.pi


def _gauss_1d(z, tau, subtract_mean: bool = False, method: str = "auto") -> np.ndarray:
    z = _wrap(z)
    if method not in ("auto", "image", "fourier"):
        raise ValueError(f"unknown method {method!r}")
    if method == "fourier" or (method == "auto" and tau >= 1.0):
        # Fourier side converges fastest for large tau
        K = int(math.ceil(math.sqrt(36.0 / tau))) + 1
        k = np.arange(1, K + 1)
        s = (np.exp(-tau * k * k)[None, :] * np.cos(np.outer(z.reshape(-1), k))).sum(1) / np.pi
        s = s.reshape(z.shape)
        return s if subtract_mean else s + 1.0 / TWO_PI
    M = int(math.ceil((math.sqrt(4.0 * tau * 36.0) + np.pi) / TWO_PI))
    m = np.arange(-M, M + 1)
    zz = z[..., None] + TWO_PI * m
    s = np.exp(-zz * zz / (4.0 * tau)).sum(-1) / math.sqrt(4.0 * np.pi * tau)
    return s - 1.0 / TWO_PI if subtract_mean else s


def gaussian_torus_kernel(
    x, y, tau: float, n: int = 1, subtract_mean: bool = False, method: str = "auto"
) -> np.ndarray:
    """Kernel of ``e^{-tau Delta}`` on the flat torus by the periodic image sum.

    Images are kept while ``|x - y + 2 pi m|^2 / (4 tau) < 36`` so the dropped
    tail is below 1e-14.  For ``tau >= 1`` the equivalent Fourier series is
    used instead unless ``method="image"`` forces the image sum.
    ``subtract_mean`` returns ``K - (2pi)^{-n}`` without cancellation.
    """
    if not tau > 0:
        raise DomainError("tau must be positive")
    z = np.asarray(x, float) - np.asarray(y, float)
    if n == 1:
        return _gauss_1d(z, tau, subtract_mean, method)
    if n != 2:
        raise ValueError("n must be 1 or 2")
    c = 1.0 / TWO_PI
    a = _gauss_1d(z[..., 0], tau, True, method)
    b = _gauss_1d(z[..., 1], tau, True, method)
    centered = a * b + c * (a + b)
    return centered if subtract_mean else centered + c * c


def gaussian_fourier_kernel(x, y, tau: float, n: int = 1) -> np.ndarray:
    """Independent Fourier-side value ``(2pi)^-n sum_k e^{ik.(x-y)} e^{-tau|k|^2}``."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    z = np.asarray(x, float) - np.asarray(y, float)
    K = int(math.ceil(math.sqrt(40.0 / tau))) + 2
    k = np.arange(-K, K + 1)
    w = np.exp(-tau * k * k)
    if n == 1:
        return (np.exp(1j * z[..., None] * k) @ w).real / TWO_PI
    f0 = (np.exp(1j * z[..., 0, None] * k) @ w).real / TWO_PI
    f1 = (np.exp(1j * z[..., 1, None] * k) @ w).real / TWO_PI
    return f0 * f1


def flat_poisson_kernel(z, t) -> np.ndarray:
    """Poisson kernel of the upper half-plane, ``(1/pi) t / (t^2 + z^2)``."""
    z = np.asarray(z, float)
    return t / (t * t + z * z) / np.pi


def apply_semigroup(p: MultiplierSymbol, t: complex, u_coefs: dict[int, complex]) -> dict[int, complex]:
    """``e^{-tP} u`` for a trigonometric polynomial given by its Fourier coefficients."""
    return {k: c * complex(np.exp(-t * p(np.array([k]))[0])) for k, c in u_coefs.items()}


def compose_kernels(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Discrete ``int K1(x,z) K2(z,y) dz`` on an equispaced periodic z-grid."""
    N = k1.shape[1]
    return k1 @ k2 * (TWO_PI / N)


def semigroup_defect(p: MultiplierSymbol, t1: complex, t2: complex, tol: float = 1e-14) -> float:
    """Relative sup distance between ``K(t1 + t2)`` and ``K(t1) o K(t2)`` on the circle.

    The kernels are tabulated on an equispaced grid with more points than
    the combined bandwidth ``K1 + K2``, so the trapezoid rule in the
    middle variable is exact for the truncated kernels.
    """
    p = _as_symbol(p)
    if not isinstance(p, MultiplierSymbol) or p.n != 1:
        raise ValueError("semigroup_defect works with circle multipliers")
    probe = np.zeros(1)
    k1 = heat_kernel_spectral(p, t1, probe, probe, tol=tol).k_max[0]
    k2 = heat_kernel_spectral(p, t2, probe, probe, tol=tol).k_max[0]
    N = int(k1 + k2) + 2
    N += N % 2
    z = np.arange(N) * TWO_PI / N
    a = heat_kernel_spectral(p, t1, z, z, tol=tol).values[0]
    b = heat_kernel_spectral(p, t2, z, z, tol=tol).values[0]
    c = heat_kernel_spectral(p, complex(t1) + complex(t2), z, z, tol=tol).values[0]
    return float(np.abs(compose_kernels(a, b) - c).max() / np.abs(c).max())


__all__: Sequence[str] = [
    "MultiplierSymbol",
    "OperatorMatrix",
    "KernelGrid",
    "build_matrix",
    "gamma_lower_bound",
    "heat_kernel_spectral",
    "derivative_kernel",
    "gaussian_torus_kernel",
    "gaussian_fourier_kernel",
    "dn_heat_kernel_closed",
    "poisson_kernel_closed",
    "flat_poisson_kernel",
    "semigroup_defect",
    "min_time_for",
]
