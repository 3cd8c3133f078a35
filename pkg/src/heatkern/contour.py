"""Heat semigroups from a Dunford integral of the resolvent.

``e^{-tP} = (i/2pi) int_Gamma e^{-t lambda} (P - lambda)^{-1} d lambda``

with Gamma running around the spectrum from ``infinity e^{-i phi}`` to
``infinity e^{+i phi}``.  We use the hyperbola

    lambda(u) = v0 + mu (sin(alpha + i u) - sin(alpha)),   alpha = pi/2 - phi,

whose asymptotes make the angle ``phi`` with the real axis.  Its vertex sits
at ``v0`` to the left of the spectrum and the branches bend round through
two rays of minimal growth, so it plays the role of the two rays joined by
a small arc.  In the parameter ``u`` the integrand decays double
exponentially and the plain trapezoid rule converges geometrically.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContourError, DomainError
from .spectral import (
    KernelGrid,
    MultiplierSymbol,
    _as_symbol,
    _matrix_kernel,
    as_times,
    build_matrix,
    gamma_lower_bound,
    lattice,
    multiplier_kernel,
)
from .symbols import ClassicalSymbol

# integrand at the ends of the contour is below e^{-41.5} ~ 1e-18
_END_EXPONENT = 41.5
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ContourSpec:
    """Quadrature nodes ``lambda_q`` and weights ``w_q`` with ``int f dlambda ~ sum w_q f(lambda_q)``.

    The weights include the sign that makes the sum over q run with the
    orientation required by the ``(i/2pi)`` prefactor.
    """

    phi: float
    vertex: float
    radius: float
    u_max: float
    nodes: np.ndarray
    weights: np.ndarray
    t: complex

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def r_max(self) -> float:
        return float(np.abs(self.nodes).max())

    def integrate(self, f_values: np.ndarray) -> np.ndarray:
        """``(i/2pi) sum_q w_q e^{-t lambda_q} f_q`` along the last axis."""
        return (1j / (2 * np.pi)) * (f_values * (self.weights * np.exp(-self.t * self.nodes))).sum(-1)

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "lambda_re", "lambda_im", "weight_re", "weight_im"])
        for q, (lam, wt) in enumerate(zip(self.nodes, self.weights)):
            w.writerow([q, f"{lam.real:.16e}", f"{lam.imag:.16e}", f"{wt.real:.16e}", f"{wt.imag:.16e}"])
        return buf.getvalue() if fh is None else ""


def ray_angle(t: complex) -> float:
    """``phi`` with ``arg t = pi/2 - 2 phi`` (symmetrised in the sign of arg t)."""
    theta = abs(np.angle(complex(t)))
    return (np.pi / 2 - theta) / 2


def hyperbola(t: complex, vertex: float, radius: float, n_nodes: int, phi: float | None = None) -> ContourSpec:
    t = complex(t)
    if t.real <= 0:
        raise DomainError("contour quadrature needs Re t > 0")
    if phi is None:
        phi = ray_angle(t)
    if not 0 < phi <= np.pi / 2:
        raise ContourError(f"ray angle {phi:.3g} outside (0, pi/2]")
    alpha = np.pi / 2 - phi
    theta = np.angle(t)
    cmin = min(math.cos(theta + phi), math.cos(theta - phi))
    if cmin <= 0:
        raise ContourError("integrand does not decay along the rays for this t")
    U = math.log(2 * (_END_EXPONENT + abs(t * vertex)) / (abs(t) * radius * cmin)) + 0.5
    U = max(U, 1.0)
    u = np.linspace(-U, U, int(n_nodes))
    h = u[1] - u[0]
    nodes = vertex + radius * (np.sin(alpha + 1j * u) - math.sin(alpha))
    weights = -h * radius * 1j * np.cos(alpha + 1j * u)
    return ContourSpec(float(phi), float(vertex), float(radius), float(U), nodes, weights, t)


def truncated_spectrum(p, K: int) -> np.ndarray:
    p = _as_symbol(p)
    if isinstance(p, MultiplierSymbol):
        return p(lattice(K, p.n))
    return build_matrix(p, K).eigvals()


def check_clearance(spec: ContourSpec, sigma: np.ndarray, margin: float | None = None) -> float:
    """Smallest distance from the spectrum to the contour, relative to ``1 + |sigma|``.

    The hyperbola lies outside the cone ``|arg(lambda - v0)| < phi``, so
    ``|sigma - v0| sin(phi - psi)`` bounds the distance from below for a
    point at angle ``psi`` inside the cone.  Points where that bound is too
    small are measured against a dense sampling of the curve.
    """
    sigma = np.asarray(sigma, dtype=complex).ravel()
    z = sigma - spec.vertex
    psi = np.abs(np.angle(z))
    if np.any((psi >= spec.phi) & (np.abs(z) > 0)) or np.any(np.abs(z) == 0):
        worst = float(psi.max())
        raise ContourError(
            f"spectrum leaves the contour sector: arg {worst:.4f} >= ray angle {spec.phi:.4f}"
        )
    scale = 1.0 + np.abs(sigma)
    rel = np.abs(z) * np.sin(spec.phi - psi) / scale
    if margin is None:
        margin = 1e-2
    bad = rel < margin
    if np.any(bad):
        alpha = np.pi / 2 - spec.phi
        u = np.linspace(-spec.u_max, spec.u_max, 20001)
        curve = spec.vertex + spec.radius * (np.sin(alpha + 1j * u) - math.sin(alpha))
        for i in np.flatnonzero(bad):
            rel[i] = np.abs(curve - sigma[i]).min() / scale[i]
        if rel.min() < margin:
            raise ContourError(
                f"contour passes within {rel.min():.3g} (relative) of the spectrum; "
                f"margin {margin:.3g}, ray angle {spec.phi:.4f}"
            )
    return float(rel.min())


def make_contour(p, K: int, t: complex, margin: float | None = None, n_nodes: int = 200,
                 vertex_radius: float = 0.5, phi: float | None = None) -> ContourSpec:
    """Admissible contour for ``e^{-tP}`` on the K-mode section.

    The vertex is placed ``vertex_radius`` to the left of ``gamma(P)``, the
    smallest real part of the truncated spectrum.
    """
    t = complex(t)
    if t.real <= 0:
        raise DomainError("contour quadrature needs Re t > 0")
    sigma = truncated_spectrum(p, K)
    gamma = float(sigma.real.min())
    spec = hyperbola(t, gamma - vertex_radius, vertex_radius, n_nodes, phi)
    check_clearance(spec, sigma, margin)
    return spec


def _resolvent_propagator(specs: dict):
    def prop(op, tt):
        spec = specs[complex(tt)]
        N = op.A.shape[0]
        V = np.zeros((N, N), dtype=complex)
        eye = np.eye(N)
        for lam, w in zip(spec.nodes, spec.weights):
            M = op.A - lam * eye
            R = np.linalg.inv(M)
            cond = np.linalg.norm(M, 1) * np.linalg.norm(R, 1)
            if cond > _COND_LIMIT:
                raise ContourError(f"resolvent condition number {cond:.3g} at lambda = {lam:.6g}")
            V += (w * np.exp(-tt * lam)) * R
        return (1j / (2 * np.pi)) * V

    return prop


def heat_kernel_contour(
    p: ClassicalSymbol | MultiplierSymbol,
    t,
    x_grid,
    y_grid,
    contour: ContourSpec | None = None,
    K: int | None = None,
    n_nodes: int = 200,
    margin: float | None = None,
    tol: float = 1e-10,
) -> KernelGrid:
    """Kernel of ``e^{-tP}`` from the quadrature of the resolvent.

    Multipliers use the scalar resolvent ``1/(p(k) - lambda)`` mode by mode;
    other symbols use dense solves on the K-mode section (default K = 128).
    """
    p = _as_symbol(p)
    ts = as_times(t)
    if np.any(ts == 0):
        raise DomainError("the contour route excludes t = 0")
    if contour is not None and len(ts) != 1:
        raise ValueError("an explicit contour serves a single t")
    if isinstance(p, MultiplierSymbol):
        p.require_elliptic()
        gamma = gamma_lower_bound(p, 8)
        theta0 = p.sector_angle()
        specs = {}
        for tt in ts:
            spec = contour if contour is not None else hyperbola(tt, gamma - 0.5, 0.5, n_nodes)
            if theta0 >= spec.phi:
                raise ContourError(f"sector angle {theta0:.4f} of the symbol exceeds ray angle {spec.phi:.4f}")
            specs[complex(tt)] = spec

        def factory(tt):
            spec = specs[complex(tt)]
            fac = spec.weights * np.exp(-tt * spec.nodes) * (1j / (2 * np.pi))
            nodes = spec.nodes
            # real t: nodes pair up as conjugates, so half the sum suffices for real eigenvalues
            half = tt.imag == 0 and len(nodes) % 2 == 0 and p.is_selfadjoint

            def coef(k):
                k = np.asarray(k)
                # one quadrature per distinct eigenvalue
                vals, inv = np.unique(p(k).ravel(), return_inverse=True)
                out = np.empty(vals.shape, dtype=complex)
                step = 1 << 14
                for s in range(0, len(vals), step):
                    v = vals[s : s + step]
                    check_clearance(spec, v, margin)
                    if half:
                        m = len(nodes) // 2
                        part = (fac[None, m:] / (v.real[:, None] - nodes[None, m:])).sum(1)
                        out[s : s + step] = 2.0 * part.real
                    else:
                        out[s : s + step] = (fac[None, :] / (v[:, None] - nodes[None, :])).sum(1)
                return out[inv].reshape(k.shape[: k.ndim - (p.n == 2)])

            return coef

        def exact(tt):
            return lambda k: np.exp(-tt * p(k))

        grid = multiplier_kernel(p, factory, ts, x_grid, y_grid, K, tol, "contour", exact)
        return grid
    Kc = K or 128
    specs = {}
    for tt in ts:
        specs[complex(tt)] = contour if contour is not None else make_contour(p, Kc, tt, margin, n_nodes)
    return _matrix_kernel(p, ts, x_grid, y_grid, Kc, tol, "contour", _resolvent_propagator(specs))
