"""Scalar classical symbols on the circle.

A symbol ``p(x, xi)`` is stored as a finite list of terms homogeneous in
``xi`` for ``|xi| >= 1``.  The x-dependence of every coefficient is a
trigonometric polynomial, so products and derivatives stay exact (up to
floating point rounding of the coefficients).

Small-frequency modification
----------------------------
Homogeneous functions such as ``|xi|**s`` are singular or non-smooth at the
origin.  Every non-polynomial term is multiplied by the fixed excision
function :func:`excision` (0 on ``|xi| <= 1/2``, 1 on ``|xi| >= 1``).  Terms
that are genuine polynomials ``c(x) * xi**m`` are smooth already and are
evaluated without excision.  On the integer lattice this only matters at
``k = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, EllipticityError

_DEGREE_DIGITS = 10


def _degree_key(s: float) -> float:
    return round(float(s), _DEGREE_DIGITS)


# ---------------------------------------------------------------------------
# trigonometric polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """Finite Fourier series ``sum_m c_m e^{imx}``.

    ``coeffs`` is a sorted tuple of ``(m, c_m)`` pairs with exact zeros
    removed.  Use :meth:`from_dict` or the named constructors rather than
    building the tuple by hand.
    """

    coeffs: tuple[tuple[int, complex], ...] = ()

    @classmethod
    def from_dict(cls, coeffs: Mapping[int, complex]) -> "TrigPoly":
        items = sorted((int(m), complex(c)) for m, c in coeffs.items() if c != 0)
        return cls(tuple(items))

    @classmethod
    def constant(cls, c: complex) -> "TrigPoly":
        return cls.from_dict({0: c})

    @classmethod
    def exp(cls, m: int, c: complex = 1.0) -> "TrigPoly":
        """``c * e^{imx}``."""
        return cls.from_dict({m: c})

    @classmethod
    def cos(cls, m: int = 1, c: complex = 1.0) -> "TrigPoly":
        if m == 0:
            return cls.constant(c)
        return cls.from_dict({m: c / 2, -m: c / 2})

    @classmethod
    def sin(cls, m: int = 1, c: complex = 1.0) -> "TrigPoly":
        if m == 0:
            return cls()
        return cls.from_dict({m: c / 2j, -m: -c / 2j})

    def as_dict(self) -> dict[int, complex]:
        return dict(self.coeffs)

    def coeff(self, m: int) -> complex:
        return self.as_dict().get(m, 0j)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(m for m, _ in self.coeffs)

    @property
    def bandwidth(self) -> int:
        return max((abs(m) for m, _ in self.coeffs), default=0)

    @property
    def is_constant(self) -> bool:
        return all(m == 0 for m, _ in self.coeffs)

    def is_real(self, tol: float = 1e-14) -> bool:
        d = self.as_dict()
        return all(abs(d.get(-m, 0j) - np.conj(c)) <= tol * max(1.0, abs(c)) for m, c in d.items())

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for _, c in self.coeffs)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for m, c in self.coeffs:
            out += c * np.exp(1j * m * x)
        return out

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        if not isinstance(other, TrigPoly):
            return NotImplemented
        d = self.as_dict()
        for m, c in other.coeffs:
            d[m] = d.get(m, 0j) + c
        return TrigPoly.from_dict(d)

    def __neg__(self) -> "TrigPoly":
        return TrigPoly(tuple((m, -c) for m, c in self.coeffs))

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return self + (-other)

    def __mul__(self, other) -> "TrigPoly":
        if isinstance(other, TrigPoly):
            return trig_mul(self, other)
        if np.isscalar(other):
            return TrigPoly.from_dict({m: c * other for m, c in self.coeffs})
        return NotImplemented

    __rmul__ = __mul__

    def diff(self) -> "TrigPoly":
        """x-derivative."""
        return TrigPoly.from_dict({m: 1j * m * c for m, c in self.coeffs})

    def conj(self) -> "TrigPoly":
        """Complex conjugate function ``x -> conj(f(x))``."""
        return TrigPoly.from_dict({-m: np.conj(c) for m, c in self.coeffs})


def trig_mul(a: TrigPoly, b: TrigPoly) -> TrigPoly:
    """Product of two trigonometric polynomials (coefficient convolution)."""
    out: dict[int, complex] = {}
    for m, c in a.coeffs:
        for n, e in b.coeffs:
            out[m + n] = out.get(m + n, 0j) + c * e
    return TrigPoly.from_dict(out)


# ---------------------------------------------------------------------------
# excision
# ---------------------------------------------------------------------------


def excision(xi) -> np.ndarray:
    """C^2 cut-off: 0 for ``|xi| <= 1/2``, 1 for ``|xi| >= 1``.

    Quintic smoothstep in ``2|xi| - 1`` on the transition zone.
    """
    a = np.clip(2.0 * np.abs(np.asarray(xi, dtype=float)) - 1.0, 0.0, 1.0)
    return a**3 * (10.0 - 15.0 * a + 6.0 * a**2)


# ---------------------------------------------------------------------------
# homogeneous terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomogTerm:
    """Term homogeneous of degree ``degree`` in xi for ``|xi| >= 1``.

    Equal to ``c_plus(x) * xi**s`` for ``xi > 0`` and ``c_minus(x) * |xi|**s``
    for ``xi < 0``.
    """

    degree: float
    c_plus: TrigPoly = field(default_factory=TrigPoly)
    c_minus: TrigPoly = field(default_factory=TrigPoly)

    @classmethod
    def abs_power(cls, s: float, coeff: TrigPoly | complex = 1.0) -> "HomogTerm":
        """``coeff(x) * |xi|**s``."""
        c = coeff if isinstance(coeff, TrigPoly) else TrigPoly.constant(coeff)
        return cls(float(s), c, c)

    @classmethod
    def xi_power(cls, m: int, coeff: TrigPoly | complex = 1.0) -> "HomogTerm":
        """Polynomial term ``coeff(x) * xi**m``."""
        c = coeff if isinstance(coeff, TrigPoly) else TrigPoly.constant(coeff)
        return cls(float(m), c, c * ((-1) ** m))

    @classmethod
    def zero(cls, s: float) -> "HomogTerm":
        return cls(float(s))

    @property
    def is_polynomial(self) -> bool:
        s = self.degree
        if s < 0 or s != int(s):
            return self.is_zero()
        return (self.c_minus - self.c_plus * ((-1) ** int(s))).is_zero(1e-14)

    @property
    def is_multiplier(self) -> bool:
        return self.c_plus.is_constant and self.c_minus.is_constant

    @property
    def bandwidth(self) -> int:
        return max(self.c_plus.bandwidth, self.c_minus.bandwidth)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.c_plus.is_zero(tol) and self.c_minus.is_zero(tol)

    def branch_values(self, x, sign: int) -> np.ndarray:
        return (self.c_plus if sign > 0 else self.c_minus)(x)

    def __call__(self, x, xi) -> np.ndarray:
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        a = np.abs(xi)
        safe = np.where(a > 0, a, 1.0)
        mag = safe**self.degree
        val = np.where(xi > 0, self.c_plus(x), self.c_minus(x)) * mag
        if self.is_polynomial:
            at0 = self.c_plus(x) if self.degree == 0 else np.zeros(x.shape, complex)
            return np.where(a > 0, val, at0)
        return np.where(a > 0, val * excision(xi), 0.0)

    def lattice_values(self, k) -> tuple[np.ndarray, np.ndarray]:
        """Scalar factor ``chi(k)|k|^s`` and branch sign for integer ``k``.

        The operator matrix entry is ``coef_branch[j - k] * factor[k]``.
        """
        k = np.asarray(k)
        a = np.abs(k).astype(float)
        safe = np.where(a > 0, a, 1.0)
        fac = safe**self.degree
        if self.is_polynomial:
            fac = np.where(a > 0, fac, 1.0 if self.degree == 0 else 0.0)
        else:
            fac = np.where(a > 0, fac * excision(k), 0.0)
        return fac, np.sign(k)

    def __add__(self, other: "HomogTerm") -> "HomogTerm":
        if not isinstance(other, HomogTerm):
            return NotImplemented
        if _degree_key(self.degree) != _degree_key(other.degree):
            raise ValueError(f"cannot add degrees {self.degree} and {other.degree}")
        return HomogTerm(self.degree, self.c_plus + other.c_plus, self.c_minus + other.c_minus)

    def __neg__(self) -> "HomogTerm":
        return HomogTerm(self.degree, -self.c_plus, -self.c_minus)

    def __sub__(self, other: "HomogTerm") -> "HomogTerm":
        return self + (-other)

    def __mul__(self, other) -> "HomogTerm":
        if isinstance(other, HomogTerm):
            return HomogTerm(
                _degree_key(self.degree + other.degree),
                self.c_plus * other.c_plus,
                self.c_minus * other.c_minus,
            )
        if np.isscalar(other):
            return HomogTerm(self.degree, self.c_plus * other, self.c_minus * other)
        return NotImplemented

    __rmul__ = __mul__

    def diff_x(self) -> "HomogTerm":
        return homog_diff_x(self)

    def diff_xi(self) -> "HomogTerm":
        return homog_diff_xi(self)


def homog_diff_x(h: HomogTerm) -> HomogTerm:
    """x-derivative; the degree is unchanged."""
    return HomogTerm(h.degree, h.c_plus.diff(), h.c_minus.diff())


def homog_diff_xi(h: HomogTerm) -> HomogTerm:
    """xi-derivative, exact for ``|xi| >= 1``; lowers the degree by one."""
    s = h.degree
    # d/dxi |xi|^s = -s |xi|^(s-1) on xi < 0
    return HomogTerm(_degree_key(s - 1), h.c_plus * s, h.c_minus * (-s))


# ---------------------------------------------------------------------------
# classical symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalSymbol:
    """``p ~ p_d + p_{d-1} + ... + p_{d-L+1}`` with ``terms[j]`` of degree ``d - j``."""

    order: float
    terms: tuple[HomogTerm, ...]
    name: str = ""

    def __post_init__(self):
        if not self.order > 0:
            raise ValueError("order must be positive")
        if not self.terms:
            raise ValueError("a classical symbol needs at least its principal term")
        for j, h in enumerate(self.terms):
            if _degree_key(h.degree) != _degree_key(self.order - j):
                raise ValueError(
                    f"term {j} has degree {h.degree}, expected {self.order - j}"
                )

    @classmethod
    def from_terms(cls, order: float, terms: Iterable[HomogTerm], name: str = "") -> "ClassicalSymbol":
        """Collect terms by degree, filling gaps with zero terms."""
        by_deg: dict[int, HomogTerm] = {}
        for h in terms:
            j = round(order - h.degree)
            if j < 0 or _degree_key(order - j) != _degree_key(h.degree):
                raise ValueError(f"degree {h.degree} is not {order} minus an integer")
            by_deg[j] = by_deg[j] + h if j in by_deg else h
        n = max(by_deg) + 1
        seq = tuple(by_deg.get(j, HomogTerm.zero(_degree_key(order - j))) for j in range(n))
        return cls(float(order), seq, name)

    @property
    def principal(self) -> HomogTerm:
        return self.terms[0]

    def term(self, j: int) -> HomogTerm:
        """Term of degree ``order - j`` (zero beyond the stored expansion)."""
        if j < len(self.terms):
            return self.terms[j]
        return HomogTerm.zero(_degree_key(self.order - j))

    @property
    def is_multiplier(self) -> bool:
        return all(h.is_multiplier for h in self.terms)

    @property
    def bandwidth(self) -> int:
        return max(h.bandwidth for h in self.terms)

    def __call__(self, x, xi) -> np.ndarray:
        return sum(h(x, xi) for h in self.terms)

    def lower_order(self, x, xi) -> np.ndarray:
        """``p - p^0`` evaluated at (x, xi)."""
        return sum((h(x, xi) for h in self.terms[1:]), np.zeros(np.broadcast(x, xi).shape, complex))

    def is_selfadjoint_data(self) -> bool:
        """True when every coefficient is a real constant or the symbol is a
        real multiplication operator plus a real multiplier (left quantization
        is then Hermitian)."""
        for h in self.terms:
            if h.is_multiplier:
                if abs(h.c_plus.coeff(0).imag) > 0 or abs(h.c_minus.coeff(0).imag) > 0:
                    return False
            elif not (h.degree == 0 and h.is_polynomial and h.c_plus.is_real()):
                return False
        return True

    def to_config(self) -> dict:
        def enc(tp: TrigPoly):
            return [[m, c.real, c.imag] for m, c in tp.coeffs]

        return {
            "order": self.order,
            "terms": [
                {"degree": h.degree, "coeffs_plus": enc(h.c_plus), "coeffs_minus": enc(h.c_minus)}
                for h in self.terms
            ],
        }

    @classmethod
    def from_config(cls, cfg: Mapping) -> "ClassicalSymbol":
        try:
            unknown = set(cfg) - {"order", "terms", "name"}
            if unknown:
                raise ConfigError(f"unknown symbol keys: {sorted(unknown)}")
            terms = []
            for t in cfg["terms"]:
                extra = set(t) - {"degree", "coeffs_plus", "coeffs_minus"}
                if extra:
                    raise ConfigError(f"unknown term keys: {sorted(extra)}")

                def dec(rows):
                    return TrigPoly.from_dict({int(m): complex(re, im) for m, re, im in rows})

                cp = dec(t["coeffs_plus"])
                cm = dec(t.get("coeffs_minus", t["coeffs_plus"]))
                terms.append(HomogTerm(float(t["degree"]), cp, cm))
            return cls.from_terms(float(cfg["order"]), terms, cfg.get("name", ""))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed symbol config: {exc}") from exc


def ellipticity_constant(p: ClassicalSymbol, x_grid=None, xi_grid=None) -> float:
    """``inf Re p^0(x, xi) / |xi|^d`` over a sampling grid with ``|xi| >= 1``."""
    if x_grid is None:
        x_grid = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    if xi_grid is None:
        mags = np.geomspace(1.0, 1e3, 16)
        xi_grid = np.concatenate([mags, -mags])
    xi_grid = np.asarray(xi_grid, dtype=float)
    xi_grid = xi_grid[np.abs(xi_grid) >= 1.0]
    X, XI = np.meshgrid(np.asarray(x_grid, float), xi_grid, indexing="ij")
    vals = p.principal(X, XI).real / np.abs(XI) ** p.order
    return float(vals.min())


def require_elliptic(p: ClassicalSymbol, **grid) -> float:
    c = ellipticity_constant(p, **grid)
    if not c > 0:
        raise EllipticityError(f"symbol is not strongly elliptic (constant {c:.3g} <= 0)")
    return c


# ---------------------------------------------------------------------------
# polynomials in the resolvent placeholder q = (p^0 - lambda)^{-1}
# ---------------------------------------------------------------------------


class SymbolExpr:
    """Finite sum ``sum_k h_k(x, xi) q^k`` with ``q = (p^0 - lambda)^{-1}``.

    Power-zero expressions are ordinary symbols.  ``p0`` (the principal
    term defining the placeholder) is only needed once a power ``k >= 1``
    appears or derivatives of ``q`` are taken.
    """

    __slots__ = ("p0", "_terms")

    def __init__(self, terms: Mapping[tuple[int, float], HomogTerm] | None = None, p0: HomogTerm | None = None):
        self.p0 = p0
        self._terms: dict[tuple[int, float], HomogTerm] = {}
        for (k, s), h in (terms or {}).items():
            self._add_term(k, h)

    def _add_term(self, k: int, h: HomogTerm) -> None:
        key = (int(k), _degree_key(h.degree))
        if key in self._terms:
            self._terms[key] = self._terms[key] + h
        else:
            self._terms[key] = h

    @classmethod
    def of(cls, obj, p0: HomogTerm | None = None) -> "SymbolExpr":
        if isinstance(obj, SymbolExpr):
            return obj
        if isinstance(obj, HomogTerm):
            return cls({(0, obj.degree): obj}, p0)
        if isinstance(obj, ClassicalSymbol):
            return cls({(0, h.degree): h for h in obj.terms}, p0 or obj.principal)
        raise TypeError(f"cannot convert {type(obj).__name__} to SymbolExpr")

    @classmethod
    def placeholder(cls, p0: HomogTerm, power: int = 1) -> "SymbolExpr":
        """``q^power`` itself."""
        return cls({(power, 0.0): HomogTerm.xi_power(0)}, p0)

    def items(self):
        return sorted(self._terms.items())

    def powers(self) -> dict[int, HomogTerm]:
        """Coefficient per power of q; raises if one power mixes degrees."""
        out: dict[int, HomogTerm] = {}
        for (k, _), h in self.items():
            if h.is_zero():
                continue
            if k in out:
                out[k] = out[k] + h
            else:
                out[k] = h
        return out

    def _p0(self, other: "SymbolExpr | None" = None) -> HomogTerm | None:
        return self.p0 if self.p0 is not None else (other.p0 if other is not None else None)

    def __add__(self, other) -> "SymbolExpr":
        other = SymbolExpr.of(other)
        out = SymbolExpr(dict(self._terms), self._p0(other))
        for (k, _), h in other._terms.items():
            out._add_term(k, h)
        return out

    def __neg__(self) -> "SymbolExpr":
        return SymbolExpr({key: -h for key, h in self._terms.items()}, self.p0)

    def __sub__(self, other) -> "SymbolExpr":
        return self + (-SymbolExpr.of(other))

    def __mul__(self, other) -> "SymbolExpr":
        if np.isscalar(other):
            return SymbolExpr({key: h * other for key, h in self._terms.items()}, self.p0)
        other = SymbolExpr.of(other)
        out = SymbolExpr(p0=self._p0(other))
        for (k1, _), h1 in self._terms.items():
            for (k2, _), h2 in other._terms.items():
                out._add_term(k1 + k2, h1 * h2)
        return out

    __rmul__ = __mul__

    def _require_p0(self) -> HomogTerm:
        if self.p0 is None:
            raise ValueError("placeholder derivative needs the principal symbol p0")
        return self.p0

    def diff_xi(self) -> "SymbolExpr":
        # d_xi q = -(d_xi p0) q^2
        out = SymbolExpr(p0=self.p0)
        for (k, _), h in self._terms.items():
            out._add_term(k, homog_diff_xi(h))
            if k:
                out._add_term(k + 1, h * homog_diff_xi(self._require_p0()) * (-k))
        return out

    def diff_x(self) -> "SymbolExpr":
        out = SymbolExpr(p0=self.p0)
        for (k, _), h in self._terms.items():
            out._add_term(k, homog_diff_x(h))
            if k:
                out._add_term(k + 1, h * homog_diff_x(self._require_p0()) * (-k))
        return out

    def D_xi(self) -> "SymbolExpr":
        """``-i d/dxi``."""
        return self.diff_xi() * (-1j)

    def times_p0_minus_lambda(self) -> "SymbolExpr":
        """Multiply by ``p^0 - lambda`` using ``q (p^0 - lambda) = 1``."""
        out = SymbolExpr(p0=self.p0)
        for (k, _), h in self._terms.items():
            if h.is_zero():
                continue
            if k == 0:
                raise ValueError("power-zero term times (p0 - lambda) leaves the algebra")
            out._add_term(k - 1, h)
        return out

    def is_zero(self, tol: float = 1e-12) -> bool:
        return all(h.is_zero(tol) for h in self._terms.values())

    def max_coeff(self) -> float:
        vals = [abs(c) for h in self._terms.values() for tp in (h.c_plus, h.c_minus) for _, c in tp.coeffs]
        return max(vals, default=0.0)

    def __call__(self, x, xi, lam=None) -> np.ndarray:
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        out = np.zeros(x.shape, dtype=complex)
        q = None
        for (k, _), h in self._terms.items():
            term = h(x, xi)
            if k:
                if q is None:
                    if lam is None:
                        raise ValueError("lambda is required to evaluate powers of q")
                    q = 1.0 / (self._require_p0()(x, xi) - lam)
                term = term * q**k
            out += term
        return out

    def __repr__(self) -> str:
        parts = [f"q^{k}:deg{s}" for (k, s), h in self.items() if not h.is_zero()]
        return f"SymbolExpr({', '.join(parts)})"


def compose_truncated(a, b, M: int) -> SymbolExpr:
    """Leading part of the composition symbol of ``Op(a) Op(b)``.

    Returns ``sum_{alpha < M} (1/alpha!) D_xi^alpha a * d_x^alpha b`` with
    ``D_xi = -i d/dxi``; the remainder is not formed.
    """
    if int(M) != M or M < 1:
        raise ValueError("M must be an integer >= 1")
    a = SymbolExpr.of(a)
    b = SymbolExpr.of(b, a.p0)
    out = SymbolExpr(p0=a.p0 or b.p0)
    da, db = a, b
    for alpha in range(int(M)):
        if alpha:
            da = da.D_xi()
            db = db.diff_x()
            if db.is_zero(0.0):
                break
        out = out + (da * db) * (1.0 / math.factorial(alpha))
    return out
