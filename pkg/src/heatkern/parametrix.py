"""Resolvent parametrix and heat-symbol terms for scalar symbols on the circle.

The resolvent of ``P - lambda`` is approximated by
``q_{-d} + q_{-d-1} + ...`` with ``q_{-d} = (p^0 - lambda)^{-1}`` and

    q_{-d-l} = sum_k b_{l,k}(x, xi) q_{-d}^{k+1},

where each ``b_{l,k}`` is homogeneous of degree ``d k - l`` and independent
of lambda.  The terms solve the composition identity

    sum_{alpha + k + l = m} (1/alpha!) D_xi^alpha q_{-d-l} d_x^alpha (p - lambda)_{d-k} = delta_{m0}.

Integrating ``e^{-t lambda} b q^{k+1}`` around the spectrum gives the
heat-symbol terms ``(t^k / k!) b_{l,k} e^{-t p^0}`` in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContourError, DomainError
from .spectral import (
    TWO_PI,
    MultiplierSymbol,
    build_matrix,
    check_kmax,
    choose_kmax,
    heat_kernel_spectral,
)
from .symbols import ClassicalSymbol, HomogTerm, SymbolExpr, require_elliptic


@dataclass(frozen=True)
class ResolventTermPoly:
    """``q_{-d-l}`` as a polynomial in the placeholder ``q_{-d}``.

    ``coeffs[k]`` is ``b_{l,k}``, the coefficient of ``q_{-d}^{k+1}``.  For
    ``l = 0`` the only entry is ``coeffs[0] = 1``.
    """

    l: int
    order: float
    coeffs: dict
    expr: SymbolExpr

    def degree_ok(self) -> bool:
        return all(
            abs(h.degree - (self.order * k - self.l)) < 1e-9
            for k, h in self.coeffs.items()
            if not h.is_zero()
        )

    def b(self, k: int) -> HomogTerm:
        return self.coeffs.get(k, HomogTerm.zero(self.order * k - self.l))

    def __call__(self, x, xi, lam) -> np.ndarray:
        return self.expr(x, xi, lam)

    def rows(self):
        """``(l, k_power, degree, m, re_plus, im_plus, re_minus, im_minus)`` records."""
        for k, h in sorted(self.coeffs.items()):
            for m in sorted(set(h.c_plus.support) | set(h.c_minus.support)):
                cp, cm = h.c_plus.coeff(m), h.c_minus.coeff(m)
                yield self.l, k + 1, h.degree, m, cp.real, cp.imag, cm.real, cm.imag


def _principal_part(p: ClassicalSymbol, k: int) -> SymbolExpr:
    return SymbolExpr.of(p.term(k), p.principal)


def _recursion_sum(p: ClassicalSymbol, qs: list[SymbolExpr], m: int, include_top: bool) -> SymbolExpr:
    """``sum_{alpha+k+l=m} (1/alpha!) D^alpha q_{-d-l} d_x^alpha p~_{d-k}``.

    The ``(alpha, k, l) = (0, 0, m)`` term, ``q_{-d-m} (p^0 - lambda)``, is
    only included when ``include_top`` is set.
    """
    p0 = p.principal
    out = SymbolExpr(p0=p0)
    for l in range(m + 1):
        if l == m:
            if include_top:
                out = out + qs[m].times_p0_minus_lambda()
            continue
        dq = qs[l]
        for alpha in range(m - l + 1):
            if alpha:
                dq = dq.D_xi()
            k = m - l - alpha
            db = _principal_part(p, k)
            for _ in range(alpha):
                db = db.diff_x()
            if db.is_zero(0.0):
                continue
            out = out + (dq * db) * (1.0 / math.factorial(alpha))
    return out


def resolvent_terms(p: ClassicalSymbol, L: int) -> list[ResolventTermPoly]:
    """Parametrix terms ``q_{-d-l}`` for ``l = 0 .. L-1``."""
    if int(L) != L or L < 1:
        raise ValueError("L must be an integer >= 1")
    require_elliptic(p)
    p0 = p.principal
    qs = [SymbolExpr.placeholder(p0, 1)]
    for m in range(1, int(L)):
        # q_{-d-m} (p^0 - lambda) = -(rest), and q (p^0 - lambda) = 1
        qs.append(-(_recursion_sum(p, qs, m, include_top=False) * SymbolExpr.placeholder(p0, 1)))
    out = []
    for l, e in enumerate(qs):
        coeffs = {k - 1: h for k, h in e.powers().items()}
        if any(k < 0 for k in coeffs):
            raise AssertionError("resolvent term has a power-zero part")
        out.append(ResolventTermPoly(l, p.order, coeffs, e))
    return out


def recursion_residual(p: ClassicalSymbol, terms: list[ResolventTermPoly]) -> list[float]:
    """Largest coefficient left over in the m-th composition identity, m = 0 .. L-1."""
    qs = [t.expr for t in terms]
    res = []
    one = SymbolExpr.of(HomogTerm.xi_power(0), p.principal)
    for m in range(len(qs)):
        s = _recursion_sum(p, qs, m, include_top=True)
        if m == 0:
            s = s - one
        res.append(s.max_coeff())
    return res


@dataclass(frozen=True)
class HeatSymbolTerm:
    """``v_{-d-l}(x, xi, t) = sum_k (t^k/k!) b_{l,k}(x, xi) e^{-t p^0(x, xi)}``."""

    l: int
    order: float
    coeffs: dict
    p0: HomogTerm

    def summand(self, k: int, x, xi, t) -> np.ndarray:
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        t = complex(t)
        return (t**k / math.factorial(k)) * self.coeffs[k](x, xi) * np.exp(-t * self.p0(x, xi))

    def __call__(self, x, xi, t) -> np.ndarray:
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        out = np.zeros(x.shape, dtype=complex)
        if complex(t) == 0:
            return out + (1.0 if self.l == 0 else 0.0)
        for k in self.coeffs:
            out += self.summand(k, x, xi, t)
        return out


def heat_symbol_term(q: ResolventTermPoly, p: ClassicalSymbol) -> HeatSymbolTerm:
    """Closed-form heat-symbol term obtained from ``q`` by the residue calculus."""
    return HeatSymbolTerm(q.l, p.order, dict(q.coeffs), p.principal)


def heat_symbol_terms(p: ClassicalSymbol, M: int) -> list[HeatSymbolTerm]:
    return [heat_symbol_term(q, p) for q in resolvent_terms(p, M)]


def _default_kmax(p0: HomogTerm, order: float, t: complex) -> int:
    xs = np.linspace(0, TWO_PI, 64, endpoint=False)
    c = float((p0(xs, 1.0).real).min())
    c = min(c, float((p0(xs, -1.0).real).min()))
    K = (math.log(1e12) / (complex(t).real * max(c, 1e-3))) ** (1.0 / order)
    return int(max(8, math.ceil(K)))


def term_kernel(v: HeatSymbolTerm, x, y, t, K_max: int | None = None, tol: float = 1e-10) -> np.ndarray:
    """Left-quantization kernel ``(1/2pi) sum_{|k|<=K} e^{ik(x-y)} v(x, k, t)``.

    ``x`` and ``y`` are 1-D grids; the result has shape ``(len(x), len(y))``.
    """
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    t = complex(t)
    if t.real <= 0:
        raise DomainError("term kernels need Re t > 0")
    xs = np.unique(np.concatenate([x, np.linspace(0, TWO_PI, 16, endpoint=False)]))

    def mags(k):
        X, Kk = np.meshgrid(xs, k, indexing="ij")
        return np.abs(v(X, Kk, t)).max(axis=0)

    if K_max is None:
        K, _ = choose_kmax(mags, _default_kmax(v.p0, v.order, t), 1, tol)
    else:
        K = int(K_max)
        check_kmax(mags, K, 1, tol)
    k = np.arange(-K, K + 1)
    out = np.zeros((len(x), len(y)), dtype=complex)
    for a, xa in enumerate(x):
        vals = v(np.full(k.shape, xa), k, t)
        out[a] = np.exp(1j * np.outer(xa - y, k)) @ vals / TWO_PI
    return out


def bracket_expansion(L: int, d: float = 1.0) -> ClassicalSymbol:
    """Classical expansion of ``<xi>^d = |xi|^d (1 + |xi|^-2)^{d/2}`` kept to degree ``d - L + 1``."""
    terms = []
    j = 0
    while 2 * j < L:
        terms.append(HomogTerm.abs_power(d - 2 * j, _binom(d / 2, j)))
        j += 1
    return ClassicalSymbol.from_terms(d, terms, f"<xi>^{d} expansion")


def _binom(a: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= (a - i) / (i + 1)
    return out


def remainder_kernel(
    p: ClassicalSymbol,
    M: int,
    x,
    y,
    t,
    K_max: int | None = None,
    exact: MultiplierSymbol | ClassicalSymbol | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """``K_V - sum_{l<M} K_{V_{-d-l}}`` on the grid ``x`` by ``y``.

    ``exact`` is the operator whose semigroup gives ``K_V`` (default: ``p``
    itself); pass the exact multiplier when ``p`` is a truncated expansion.
    """
    t = complex(t)
    if t == 0:
        return np.zeros((np.size(x), np.size(y)), dtype=complex)
    vs = heat_symbol_terms(p, M)
    parts = [term_kernel(v, x, y, t, K_max, tol) for v in vs]
    ref = heat_kernel_spectral(exact if exact is not None else p, t, x, y, K_max=K_max, tol=tol)
    return ref.values[0] - sum(parts)


def parametrix_matrix(p: ClassicalSymbol, L: int, lam: complex, rows: int, cols: int) -> np.ndarray:
    """Left-quantization matrix of ``sum_{l<L} q_{-d-l}(., ., lam)``.

    Rows run over modes ``|j| <= rows``, columns over ``|k| <= cols``.
    Fourier coefficients in x are taken by FFT on a grid fine enough to
    avoid wrap-around.
    """
    expr = SymbolExpr(p0=p.principal)
    for q in resolvent_terms(p, L):
        expr = expr + q.expr
    Nx = 4 * (rows + cols) + 64
    xs = np.arange(Nx) * TWO_PI / Nx
    ks = np.arange(-cols, cols + 1)
    X, Kk = np.meshgrid(xs, ks, indexing="ij")
    vals = expr(X, Kk, lam)
    hat = np.fft.fft(vals, axis=0) / Nx
    js = np.arange(-rows, rows + 1)
    m = (js[:, None] - ks[None, :]) % Nx
    return hat[m, np.arange(len(ks))[None, :]]


def parametrix_residual(p: ClassicalSymbol, L: int, lam: complex, K_max: int = 64, tol: float = 1e-8) -> float:
    """``|| Q_L (A - lambda) - I ||_2`` on the modes ``|k| <= K_max``.

    ``A`` is built on a section widened by the bandwidth of ``p`` so that
    every retained entry of the product is exact.
    """
    b = max(p.bandwidth, 0)
    Kw = K_max + b
    A = build_matrix(p, Kw).A
    N = 2 * K_max + 1
    centre = slice(b, b + N)
    ev = np.linalg.eigvals(A[centre, centre])
    if np.min(np.abs(ev - lam)) < tol * (1 + abs(lam)):
        raise ContourError(f"lambda = {lam} lies on the spectrum of the truncated operator")
    Q = parametrix_matrix(p, L, lam, K_max, Kw)
    R = Q @ (A[:, centre] - lam * np.eye(2 * Kw + 1)[:, centre]) - np.eye(N)
    return float(np.linalg.norm(R, 2))
