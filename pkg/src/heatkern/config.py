"""Run configurations for the command-line interface.

Configs are JSON objects.  Every subcommand has a fixed set of accepted
keys and anything else is rejected before computation starts.  Complex
times are written as ``[modulus, angle]`` pairs, e.g. ``[1.0, 1.0471975511965976]``
for ``e^{i pi/3}``; plain numbers are real times.

Grids accept a literal list or one of

* ``{"linspace": [start, stop, num], "endpoint": true}``
* ``{"logspace": [lo, hi, num]}`` (geometric, endpoints included)
* ``{"standard": true}`` -- separations ``{0}`` plus 20 log-spaced points per
  decade on ``[1e-3, pi]``; for times 20 per decade on ``[1e-2, 10]``.

Symbols are given inline or as a path to a JSON file with the same content:

* ``{"kind": "power", "d": 1.0, "coef": 1.0, "shift": 0.0, "n": 1}`` for ``coef |k|^d + shift``
* ``{"kind": "bracket", ...}`` for ``coef <k>^d + shift``
* ``{"kind": "dn"}`` for the Dirichlet-to-Neumann multiplier ``|k|``
* ``{"kind": "classical", "order": 1, "terms": [...]}`` (see ``ClassicalSymbol.from_config``)
* ``{"kind": "bracket_expansion", "L": 2, "d": 1.0}``
* ``{"kind": "perturbed", "potential": {"0": [0.25, 0], "1": [0.125, 0], ...}}``
  for ``Op(|xi|) + c(x)`` with the Fourier coefficients of ``c`` given as
  ``m: [re, im]``.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bounds import GridSpec
from .errors import ConfigError
from .parametrix import bracket_expansion
from .spectral import MultiplierSymbol
from .symbols import ClassicalSymbol, HomogTerm, TrigPoly

COMMON = {"description", "out", "tol", "kmax"}

SCHEMA: dict[str, dict[str, set]] = {
    "kernel": {
        "required": {"symbol", "t"},
        "optional": {"route", "x", "y", "n_nodes"},
    },
    "verify": {
        "required": {"check"},
        "optional": {
            "symbol", "symbols", "routes", "x", "y", "t", "rel_tol", "abs_tol", "metric",
            "n_nodes", "t_pairs", "taus", "points", "n",
        },
    },
    "parametrix": {
        "required": {"mode", "symbol"},
        "optional": {"L", "M", "exact", "x", "y", "t", "r", "expected_slope", "slope_tol", "max_slope"},
    },
    "subordinator": {
        "required": {"mode"},
        "optional": {"d", "t", "s", "lambdas", "rel_tol", "abs_tol", "identity"},
    },
    "bounds": {
        "required": {"campaign"},
        "optional": {
            "symbol", "symbols", "grid", "gamma", "refine", "radii", "required_radius", "bound",
            "j", "gamma_idx", "limit", "limit_tol", "route", "x",
        },
    },
    "scan-angle": {
        "required": {"symbol"},
        "optional": {"tmod", "j_max", "thetas", "modes"},
    },
}

ROUTES = ("spectral", "contour", "subordination", "closed_form")


@dataclass
class RunConfig:
    """Validated configuration of one CLI run."""

    subcommand: str
    data: dict
    source: str = "<inline>"
    base_dir: str | None = None
    overrides: dict = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        if key in self.overrides and self.overrides[key] is not None:
            return self.overrides[key]
        return self.data.get(key, default)

    def require(self, key: str) -> Any:
        v = self.get(key)
        if v is None:
            raise ConfigError(f"{self.subcommand}: missing key {key!r}")
        return v

    @property
    def tol(self) -> float:
        return _positive(self.get("tol", 1e-10), "tol")

    @property
    def kmax(self) -> int | None:
        k = self.get("kmax")
        if k is None:
            return None
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ConfigError("kmax must be a positive integer")
        return k


def load_config(source, subcommand: str, base_dir: str | None = None) -> RunConfig:
    """Parse and validate a config given as a path, a JSON string or a dict."""
    if subcommand not in SCHEMA:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    name = "<inline>"
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if os.path.exists(text):
            name = text
            base_dir = base_dir or os.path.dirname(os.path.abspath(text))
            try:
                with open(text) as fh:
                    data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{text}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        else:
            try:
                data = json.loads(text)
            except json.JSONDecodeError:
                raise ConfigError(f"config {text!r} is neither a file nor JSON") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    schema = SCHEMA[subcommand]
    allowed = schema["required"] | schema["optional"] | COMMON
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{subcommand}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(schema["required"] - set(data))
    if missing:
        raise ConfigError(f"{subcommand}: missing key(s) {', '.join(missing)}")
    return RunConfig(subcommand, data, name, base_dir)


# ---------------------------------------------------------------------------
# value parsers
# ---------------------------------------------------------------------------


def _number(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{what} must be a number, got {v!r}")
    return float(v)


def _positive(v, what: str) -> float:
    x = _number(v, what)
    if not x > 0:
        raise ConfigError(f"{what} must be positive")
    return x


def parse_time(v) -> complex:
    """A real number or a ``[modulus, angle]`` pair."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex time must be [modulus, angle], got {v!r}")
        r, a = _number(v[0], "time modulus"), _number(v[1], "time angle")
        if r < 0:
            raise ConfigError("time modulus must be non-negative")
        if abs(a) >= math.pi / 2 and r > 0:
            raise ConfigError("time angle must lie in (-pi/2, pi/2)")
        return complex(r * math.cos(a), r * math.sin(a))
    t = _number(v, "time")
    if t < 0:
        raise ConfigError("times must be non-negative")
    return complex(t)


def parse_grid(spec, what: str = "grid", kind: str = "dist") -> np.ndarray:
    """1-D grid from a list or a ``linspace``/``logspace``/``standard`` object."""
    if isinstance(spec, dict):
        keys = set(spec)
        if keys <= {"linspace", "endpoint"} and "linspace" in keys:
            a, b, m = _triple(spec["linspace"], what)
            return np.linspace(a, b, m, endpoint=bool(spec.get("endpoint", True)))
        if keys == {"logspace"}:
            a, b, m = _triple(spec["logspace"], what)
            if not (a > 0 and b > 0):
                raise ConfigError(f"{what}: logspace bounds must be positive")
            return np.geomspace(a, b, m)
        if keys == {"standard"} and spec["standard"] is True:
            g = GridSpec()
            return g.dist if kind == "dist" else g.t
        raise ConfigError(f"{what}: unrecognised grid object {spec!r}")
    if isinstance(spec, (list, tuple)) and spec:
        return np.array([_number(v, what) for v in spec])
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.array([float(spec)])
    raise ConfigError(f"{what}: expected a list or a grid object")


def _triple(v, what):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(f"{what}: expected [start, stop, num]")
    a, b = _number(v[0], what), _number(v[1], what)
    m = v[2]
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ConfigError(f"{what}: num must be a positive integer")
    return a, b, m


def parse_times(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return parse_grid(spec, "t", kind="t").astype(complex)
    if isinstance(spec, (list, tuple)):
        if not spec:
            raise ConfigError("t: empty list")
        return np.array([parse_time(v) for v in spec], dtype=complex)
    return np.array([parse_time(spec)], dtype=complex)


def parse_points(spec, n: int, what: str) -> np.ndarray:
    """Grid points: 1-D grid for n = 1, list of ``[x1, x2]`` pairs (or a ``product``) for n = 2."""
    if n == 1:
        return parse_grid(spec, what)
    if isinstance(spec, dict) and set(spec) == {"product"}:
        a, b = spec["product"]
        ga, gb = parse_grid(a, what), parse_grid(b, what)
        return np.stack(np.meshgrid(ga, gb, indexing="ij"), -1).reshape(-1, 2)
    if isinstance(spec, (list, tuple)) and spec and all(isinstance(v, (list, tuple)) and len(v) == 2 for v in spec):
        return np.array([[_number(c, what) for c in v] for v in spec])
    raise ConfigError(f"{what}: torus points must be [x1, x2] pairs or a product grid")


def parse_grid_spec(spec) -> tuple[GridSpec, bool]:
    """Scan grid and whether ``t_min`` is ``"auto"`` (resolved by the campaign)."""
    if spec is None:
        return GridSpec(), False
    if not isinstance(spec, dict):
        raise ConfigError("grid must be an object")
    allowed = {"dist_min", "dist_max", "t_min", "t_max", "per_decade"}
    bad = sorted(set(spec) - allowed)
    if bad:
        raise ConfigError(f"grid: unknown key(s) {', '.join(bad)}")
    kw = {}
    auto = False
    for k, v in spec.items():
        if k == "per_decade":
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError("grid.per_decade must be a positive integer")
            kw[k] = v
        elif k == "t_min" and v == "auto":
            auto = True
        else:
            kw[k] = _positive(v, f"grid.{k}")
    return GridSpec(**kw), auto


def _complex(v, what: str) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"{what}: complex values are [re, im]")
        return complex(_number(v[0], what), _number(v[1], what))
    return complex(_number(v, what))


SYMBOL_KEYS = {
    "power": {"kind", "d", "coef", "shift", "n"},
    "bracket": {"kind", "d", "coef", "shift", "n"},
    "dn": {"kind"},
    "classical": {"kind", "order", "terms", "name"},
    "bracket_expansion": {"kind", "L", "d"},
    "perturbed": {"kind", "potential", "name"},
}


def symbol_spec(spec, base_dir: str | None = None) -> dict:
    """The symbol object of a config entry, reading it from a file when given a path."""
    if isinstance(spec, str):
        path = spec if os.path.isabs(spec) or base_dir is None else os.path.join(base_dir, spec)
        try:
            with open(path) as fh:
                spec = json.load(fh)
        except OSError:
            raise ConfigError(f"cannot read symbol file {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("symbol must be an object with a 'kind'")
    kind = spec["kind"]
    if kind not in SYMBOL_KEYS:
        raise ConfigError(f"unknown symbol kind {kind!r}")
    bad = sorted(set(spec) - SYMBOL_KEYS[kind])
    if bad:
        raise ConfigError(f"symbol ({kind}): unknown key(s) {', '.join(bad)}")
    return spec


def parse_symbol(spec, base_dir: str | None = None):
    """Build a ``MultiplierSymbol`` or ``ClassicalSymbol`` from a config entry."""
    spec = symbol_spec(spec, base_dir)
    kind = spec["kind"]
    if kind in ("power", "bracket"):
        d = _positive(spec.get("d", 1.0), "symbol.d")
        n = spec.get("n", 1)
        if n not in (1, 2):
            raise ConfigError("symbol.n must be 1 or 2")
        coef = _complex(spec.get("coef", 1.0), "symbol.coef")
        shift = _complex(spec.get("shift", 0.0), "symbol.shift")
        make = MultiplierSymbol.power if kind == "power" else MultiplierSymbol.bracket
        coef = coef.real if coef.imag == 0 else coef
        shift = shift.real if shift.imag == 0 else shift
        return make(d, n, coef, shift)
    if kind == "dn":
        return MultiplierSymbol.dirichlet_to_neumann()
    if kind == "bracket_expansion":
        L = spec.get("L", 2)
        if not isinstance(L, int) or isinstance(L, bool) or L < 1:
            raise ConfigError("symbol.L must be a positive integer")
        return bracket_expansion(L, _positive(spec.get("d", 1.0), "symbol.d"))
    if kind == "perturbed":
        pot = spec.get("potential")
        if not isinstance(pot, dict) or not pot:
            raise ConfigError("symbol.potential must map frequencies to [re, im]")
        try:
            coefs = {int(m): _complex(v, "symbol.potential") for m, v in pot.items()}
        except ValueError:
            raise ConfigError("symbol.potential keys must be integers") from None
        c = TrigPoly.from_dict(coefs)
        return ClassicalSymbol.from_terms(
            1, [HomogTerm.abs_power(1), HomogTerm.xi_power(0, c)], spec.get("name", "|xi| + c(x)")
        )
    try:
        body = {k: v for k, v in spec.items() if k != "kind"}
        return ClassicalSymbol.from_config(body)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid classical symbol: {exc}") from None
