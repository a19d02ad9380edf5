"""Magnetic field profiles B(x), their potentials beta(x), Landau gaps, switches.

A profile depends on x only, is monotone and has nonzero limits ``b_minus``
(x -> -inf) and ``b_plus`` (x -> +inf). In the gauge A = (0, beta(x)) with
beta(x) = int_0^x B(s) ds the Hamiltonian fibers over the y-momentum k into
h(k) = -d^2/dx^2 + (k - beta(x))^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from scipy.interpolate import PchipInterpolator

from ._quad import CumulativeIntegral, mollifier
from .errors import (
    ConfigurationError,
    ExtrapolationError,
    InvalidFieldError,
    InvalidIntervalError,
    NumericError,
)

KINDS = ("constant", "tanh", "smoothstep", "tabulated")

# Beyond center +- _TANH_CORE * scale, tanh equals +-1 in double precision.
_TANH_CORE = 20.0


def _logcosh(u):
    au = np.abs(u)
    return au + np.log1p(np.exp(-2.0 * au)) - math.log(2.0)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_integral(t):
    """int_0^t of the clamped quintic smoothstep."""
    tc = np.clip(t, 0.0, 1.0)
    inner = tc**4 * (2.5 + tc * (-3.0 + tc))
    return inner + np.maximum(t - 1.0, 0.0)


@dataclass(frozen=True)
class FieldProfile:
    kind: str
    b_minus: float
    b_plus: float
    center: float = 0.0
    scale: float = 1.0
    samples: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "tabulated":
            self._init_tabulated()
        if self.b_minus == 0 or self.b_plus == 0:
            raise InvalidFieldError("asymptotic fields must be nonzero")
        if not (math.isfinite(self.b_minus) and math.isfinite(self.b_plus)):
            raise InvalidFieldError("asymptotic fields must be finite")
        if not self.scale > 0:
            raise ConfigurationError("scale must be positive")
        if self.kind == "constant" and self.b_minus != self.b_plus:
            raise InvalidFieldError("constant profile needs b_minus == b_plus")

    def _init_tabulated(self):
        if self.samples is None:
            raise ConfigurationError("tabulated profile needs samples")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4:
            raise ConfigurationError("samples must be at least four (x, B) pairs")
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite value in profile samples")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ConfigurationError("sample positions must be strictly increasing")
        db = np.diff(arr[:, 1])
        if np.any(db > 0) and np.any(db < 0):
            raise InvalidFieldError("tabulated field is not monotone on the sample grid")
        if not arr[0, 0] <= 0.0 <= arr[-1, 0]:
            raise ConfigurationError("sample range must contain x = 0 (beta is anchored there)")
        frozen = tuple((float(x), float(b)) for x, b in arr)
        object.__setattr__(self, "samples", frozen)
        # asymptotes of a table are its end values
        object.__setattr__(self, "b_minus", float(arr[0, 1]))
        object.__setattr__(self, "b_plus", float(arr[-1, 1]))

    @classmethod
    def constant(cls, b):
        return cls("constant", b, b)

    @classmethod
    def tanh(cls, b_minus, b_plus, center=0.0, scale=1.0):
        return cls("tanh", b_minus, b_plus, center, scale)

    @classmethod
    def smoothstep(cls, b_minus, b_plus, center=0.0, scale=1.0):
        return cls("smoothstep", b_minus, b_plus, center, scale)

    @classmethod
    def tabulated(cls, samples):
        return cls("tabulated", 1.0, 1.0, samples=tuple(map(tuple, samples)))

    @property
    def domain(self):
        if self.kind == "tabulated":
            return (self.samples[0][0], self.samples[-1][0])
        return (-math.inf, math.inf)

    def field(self, x):
        """B(x), vectorised."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.b_minus)
        if self.kind == "tanh":
            mid = 0.5 * (self.b_plus + self.b_minus)
            half = 0.5 * (self.b_plus - self.b_minus)
            return mid + half * np.tanh((x - self.center) / self.scale)
        if self.kind == "smoothstep":
            t = (x - self.center + self.scale) / (2.0 * self.scale)
            return self.b_minus + (self.b_plus - self.b_minus) * _smoothstep(t)
        lo, hi = self.domain
        if np.any((x < lo) | (x > hi)):
            raise ExtrapolationError(f"tabulated profile queried outside [{lo}, {hi}]")
        return _pchip(self.samples)(x)

    def check_invariants(self, probes=50.0, tol=1e-10, n_grid=2001):
        """Verify monotonicity and asymptotes numerically; raise on violation."""
        lo, hi = self.domain
        if self.kind == "tabulated":
            xs = np.linspace(lo, hi, n_grid)
        else:
            reach = probes * self.scale
            xs = np.linspace(self.center - reach, self.center + reach, n_grid)
        b = self.field(xs)
        db = np.diff(b)
        if np.any(db > tol) and np.any(db < -tol):
            raise InvalidFieldError("profile is not monotone")
        if self.kind != "tabulated":
            if abs(b[0] - self.b_minus) > tol * max(1.0, abs(self.b_minus)):
                raise InvalidFieldError("profile does not approach b_minus")
            if abs(b[-1] - self.b_plus) > tol * max(1.0, abs(self.b_plus)):
                raise InvalidFieldError("profile does not approach b_plus")
        return True


@lru_cache(maxsize=32)
def _pchip(samples):
    arr = np.asarray(samples, dtype=float)
    return PchipInterpolator(arr[:, 0], arr[:, 1], extrapolate=False)


class Potential:
    """Common interface of beta(x) potentials consumed by the fiber solver.

    Subclasses provide ``__call__`` (beta), ``field`` (B = beta'), the
    asymptotic fields, a ``core`` interval outside of which beta is strictly
    monotone, the admissible ``domain`` and any ``kinks`` (positions where B
    jumps) that the discretisation should place on grid nodes.
    """

    b_minus: float
    b_plus: float
    core: tuple = (0.0, 0.0)
    domain: tuple = (-math.inf, math.inf)
    kinks: tuple = ()
    feature_length: float = 1.0

    def __call__(self, x):
        raise NotImplementedError

    def field(self, x):
        raise NotImplementedError

    @property
    def magnetic_length(self):
        return 1.0 / math.sqrt(min(abs(self.b_minus), abs(self.b_plus)))

    @property
    def has_tails(self):
        return math.isinf(self.domain[0]) and math.isinf(self.domain[1])

    def core_samples(self, max_step=None):
        """Positions covering the core finely enough to see its structure."""
        c0, c1 = self.core
        if c1 <= c0:
            return np.array([c0])
        step = min(self.feature_length, self.magnetic_length) / 8.0
        if max_step is not None:
            step = min(step, max_step)
        n = int(min(max(np.ceil((c1 - c0) / step), 16), 200_000)) + 1
        return np.linspace(c0, c1, n)

    def beta_range(self):
        """(inf beta, sup beta) over the domain, +-inf where beta is unbounded."""
        xs = self.core_samples()
        vals = self(xs)
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if self.has_tails:
            if self.b_minus > 0 or self.b_plus < 0:
                lo = -math.inf
            if self.b_minus < 0 or self.b_plus > 0:
                hi = math.inf
        return lo, hi


class PotentialBeta(Potential):
    """beta(x) = int_0^x B(s) ds for a :class:`FieldProfile`."""

    def __init__(self, profile: FieldProfile):
        self.profile = profile
        self.b_minus = float(profile.b_minus)
        self.b_plus = float(profile.b_plus)
        self.domain = profile.domain
        self.closed_form = profile.kind != "tabulated"
        self.quadrature_table = None
        kind = profile.kind
        if kind == "constant":
            self.core = (0.0, 0.0)
            self.feature_length = 1.0
        elif kind == "tanh":
            reach = _TANH_CORE * profile.scale
            self.core = (profile.center - reach, profile.center + reach)
            self.feature_length = profile.scale
        elif kind == "smoothstep":
            self.core = (profile.center - profile.scale, profile.center + profile.scale)
            self.feature_length = profile.scale
        else:
            arr = np.asarray(profile.samples)
            self.core = (float(arr[0, 0]), float(arr[-1, 0]))
            self.feature_length = float(np.min(np.diff(arr[:, 0])))
            self._build_table(arr)

    def _build_table(self, arr):
        xs, bs = arr[:, 0], arr[:, 1]
        interp = _pchip(self.profile.samples)
        # Trapezoid on each sample cell, one Richardson step using the cell
        # midpoint. Exact for the cubic PCHIP pieces.
        cells = self._richardson_cells(interp, xs[:-1], xs[1:], bs[:-1], bs[1:])
        cum = np.concatenate(([0.0], np.cumsum(cells)))
        if not np.all(np.isfinite(cum)):
            raise NumericError("non-finite value while integrating the profile")
        i0 = min(int(np.searchsorted(xs, 0.0, side="right")) - 1, len(xs) - 2)
        at0 = cum[i0] + self._richardson_cells(interp, xs[i0], 0.0, bs[i0], interp(0.0))
        self.quadrature_table = (xs, bs, cum - at0)
        self._interp = interp

    @staticmethod
    def _richardson_cells(interp, x0, x1, f0, f1):
        h = np.asarray(x1) - np.asarray(x0)
        coarse = 0.5 * h * (f0 + f1)
        fine = 0.25 * h * (f0 + 2.0 * interp(0.5 * (np.asarray(x0) + np.asarray(x1))) + f1)
        return fine + (fine - coarse) / 3.0

    def field(self, x):
        return self.profile.field(x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.profile
        if p.kind == "constant":
            return p.b_minus * x
        if p.kind == "tanh":
            mid = 0.5 * (p.b_plus + p.b_minus)
            half = 0.5 * (p.b_plus - p.b_minus)
            u = (x - p.center) / p.scale
            return mid * x + half * p.scale * (_logcosh(u) - _logcosh(-p.center / p.scale))
        if p.kind == "smoothstep":
            jump = p.b_plus - p.b_minus
            width = 2.0 * p.scale

            def anti(y):
                return p.b_minus * y + jump * width * _smoothstep_integral((y - p.center + p.scale) / width)

            return anti(x) - anti(0.0)
        xs, bs, cum = self.quadrature_table
        lo, hi = self.domain
        if np.any((x < lo) | (x > hi)):
            raise ExtrapolationError(f"tabulated potential queried outside [{lo}, {hi}]")
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        part = self._richardson_cells(self._interp, xs[idx], x, bs[idx], self._interp(x))
        out = cum[idx] + part
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite potential value")
        return out


def eval_field(profile: FieldProfile, x):
    return profile.field(x)


def eval_beta(pb: Potential, x):
    return pb(x)


# --- Landau gaps -----------------------------------------------------------


@dataclass(frozen=True)
class GapInterval:
    """Open Landau gap of index ``n`` for field magnitude ``|b|``."""

    n: int
    b: float
    lower: float
    upper: float

    def contains(self, lo, hi=None):
        hi = lo if hi is None else hi
        return self.lower < lo and hi < self.upper


def landau_gap(n: int, b: float) -> GapInterval:
    if b == 0:
        raise InvalidFieldError("Landau gaps need a nonzero field")
    if n < 0 or int(n) != n:
        raise ConfigurationError("gap index must be a nonnegative integer")
    ab = abs(b)
    lower = -math.inf if n == 0 else (2 * n - 1) * ab
    return GapInterval(int(n), float(b), lower, (2 * n + 1) * ab)


# --- switch functions ------------------------------------------------------


@lru_cache(maxsize=8)
def _mollifier_cdf(power):
    return CumulativeIntegral(lambda t: mollifier(t, power), 0.0, 1.0)


@dataclass(frozen=True)
class SwitchFunction:
    """Smooth decreasing switch: 1 left of ``a``, 0 right of ``b``.

    g(E) = 1 - Phi((E - a) / (b - a)) where Phi is the normalised integral of
    the mollifier exp(-1/(t(1-t))^p), p = ``smoothness_order``.
    """

    a: float
    b: float
    smoothness_order: int = 1
    _cdf: CumulativeIntegral = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidIntervalError(f"switch needs a < b, got [{self.a}, {self.b}]")
        if self.smoothness_order < 1:
            raise ConfigurationError("smoothness_order must be >= 1")
        object.__setattr__(self, "_cdf", _mollifier_cdf(int(self.smoothness_order)))

    @property
    def width(self):
        return self.b - self.a

    def _t(self, e):
        return (np.asarray(e, dtype=float) - self.a) / self.width

    def __call__(self, e):
        return 1.0 - self._cdf(self._t(e)) / self._cdf.total

    def derivative(self, e):
        """g'(E) <= 0, supported in [a, b]."""
        dens = mollifier(self._t(e), self.smoothness_order)
        return -dens / (self._cdf.total * self.width)

    def reflected(self, e):
        """g(a + b - E): the increasing mirror image."""
        return self(self.a + self.b - np.asarray(e, dtype=float))


def make_switch(a: float, b: float, smoothness_order: int = 1) -> SwitchFunction:
    return SwitchFunction(float(a), float(b), smoothness_order)


# --- configuration files ---------------------------------------------------


def profile_from_config(cfg: dict) -> FieldProfile:
    """Build a profile from a mapping with keys kind, b_minus, b_plus, ..."""
    if "kind" not in cfg:
        raise ConfigurationError("profile config needs a 'kind' key")
    kind = cfg["kind"]
    try:
        if kind == "tabulated":
            samples = cfg.get("samples")
            if samples is None:
                raise ConfigurationError("tabulated profile needs 'samples'")
            return FieldProfile.tabulated(samples)
        if kind == "constant":
            b = cfg.get("b", cfg.get("b_minus"))
            return FieldProfile.constant(float(b))
        return FieldProfile(
            kind,
            float(cfg["b_minus"]),
            float(cfg["b_plus"]),
            float(cfg.get("center", 0.0)),
            float(cfg.get("scale", 1.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed profile config: {exc}") from exc


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"profile file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return data


def profile_to_config(profile: FieldProfile) -> dict:
    if profile.kind == "tabulated":
        return {"kind": "tabulated", "samples": [list(s) for s in profile.samples]}
    if profile.kind == "constant":
        return {"kind": "constant", "b": profile.b_minus}
    return {
        "kind": profile.kind,
        "b_minus": profile.b_minus,
        "b_plus": profile.b_plus,
        "center": profile.center,
        "scale": profile.scale,
    }
