"""Compactly supported, y-independent magnetic perturbations.

A perturbing field b(x) vanishing outside [lo, hi] changes the potential to
beta + int_lo^x b: nothing changes left of the support, and right of it the
potential is shifted by the flux c = int b. The edge conductance must not
change.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._quad import CumulativeIntegral, mollifier
from .conductance import ConductanceReport, compute_conductance
from .errors import ConfigurationError, ExtrapolationError, PreconditionError
from .fiber import SolverConfig
from .profiles import FieldProfile, Potential, PotentialBeta, SwitchFunction

PERTURBATION_KINDS = ("zero_flux_bump", "gaussian_truncated", "tabulated")


def _smooth_cutoff(u):
    # exp(1 - 1/(1 - u^2)) on |u| < 1, equal to 1 at u = 0
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass(frozen=True)
class CompactFieldPerturbation:
    """Perturbing field b(x), identically zero outside ``support``.

    ``amplitude`` scales the zero-flux bump; for the truncated Gaussian it is
    the total flux c. ``width`` is the Gaussian standard deviation.
    """

    kind: str
    support: tuple
    amplitude: float = 0.0
    width: Optional[float] = None
    samples: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ConfigurationError(f"unknown perturbation kind {self.kind!r}; expected one of {PERTURBATION_KINDS}")
        lo, hi = (float(v) for v in self.support)
        if not lo < hi:
            raise ConfigurationError(f"perturbation support needs lo < hi, got {self.support}")
        object.__setattr__(self, "support", (lo, hi))
        if not math.isfinite(self.amplitude):
            raise ConfigurationError("perturbation amplitude must be finite")
        if self.kind == "gaussian_truncated":
            w = self.width if self.width is not None else (hi - lo) / 6.0
            if not w > 0:
                raise ConfigurationError("gaussian width must be positive")
            object.__setattr__(self, "width", float(w))
        if self.kind == "tabulated":
            self._check_samples()
        object.__setattr__(self, "_antideriv", self._build_antiderivative())

    def _check_samples(self):
        if self.samples is None:
            raise ConfigurationError("tabulated perturbation needs samples")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
            raise ConfigurationError("samples must be at least three (x, b) pairs")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("non-finite perturbation sample")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ConfigurationError("sample positions must be strictly increasing")
        if arr[0, 1] != 0.0 or arr[-1, 1] != 0.0:
            raise ConfigurationError("tabulated perturbation must be zero at both ends")
        object.__setattr__(self, "samples", tuple((float(x), float(b)) for x, b in arr))
        object.__setattr__(self, "support", (float(arr[0, 0]), float(arr[-1, 0])))

    @classmethod
    def zero(cls, support=(-1.0, 1.0)):
        return cls("zero_flux_bump", support, 0.0)

    @classmethod
    def zero_flux_bump(cls, amplitude, radius=1.0, center=0.0):
        return cls("zero_flux_bump", (center - radius, center + radius), amplitude)

    @classmethod
    def gaussian_truncated(cls, flux, radius=1.0, center=0.0, width=None):
        return cls("gaussian_truncated", (center - radius, center + radius), flux, width)

    @classmethod
    def tabulated(cls, samples):
        arr = np.asarray(samples, dtype=float)
        return cls("tabulated", (arr[0, 0], arr[-1, 0]), 0.0, samples=tuple(map(tuple, arr)))

    @property
    def is_zero(self):
        if self.kind == "tabulated":
            return all(b == 0.0 for _, b in self.samples)
        return self.amplitude == 0.0

    @property
    def feature_length(self):
        lo, hi = self.support
        if self.kind == "gaussian_truncated":
            return min(self.width, hi - lo)
        if self.kind == "tabulated":
            return float(np.min(np.diff(np.asarray(self.samples)[:, 0])))
        return 0.5 * (hi - lo)

    def _shape(self, x):
        lo, hi = self.support
        x = np.asarray(x, dtype=float)
        if self.kind == "zero_flux_bump":
            # odd about the midpoint, so the flux vanishes by symmetry
            t = (x - lo) / (hi - lo)
            return np.sin(2.0 * math.pi * t) * mollifier(t) / mollifier(0.25)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return np.exp(-0.5 * ((x - mid) / self.width) ** 2) * _smooth_cutoff((x - mid) / half)

    def _build_antiderivative(self):
        lo, hi = self.support
        if self.kind == "tabulated":
            arr = np.asarray(self.samples)
            interp = PchipInterpolator(arr[:, 0], arr[:, 1], extrapolate=False)
            object.__setattr__(self, "_interp", interp)
            return interp.antiderivative()
        cum = CumulativeIntegral(self._shape, lo, hi)
        if self.kind == "gaussian_truncated":
            object.__setattr__(self, "_norm", self.amplitude / cum.total)
        else:
            object.__setattr__(self, "_norm", self.amplitude)
        return cum

    @property
    def total_flux(self) -> float:
        """c = int b; exactly zero for the zero-flux bump."""
        if self.kind == "zero_flux_bump":
            return 0.0
        if self.kind == "gaussian_truncated":
            return float(self.amplitude)
        return float(self._antideriv(self.support[1]))

    def field(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x > lo) & (x < hi)
        if self.kind == "tabulated":
            return np.where(inside, self._interp(np.clip(x, lo, hi)), 0.0)
        return np.where(inside, self._norm * self._shape(x), 0.0)

    def antiderivative(self, x):
        """int_lo^x b: 0 left of the support, c right of it."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        if self.kind == "tabulated":
            inner = self._antideriv(np.clip(x, lo, hi))
        else:
            inner = self._norm * self._antideriv(x)
        return np.where(x <= lo, 0.0, np.where(x >= hi, self.total_flux, inner))

    def sup_norms(self, n_grid=4001):
        """(sup |b|, sup |int_lo^x b|) sampled on the support."""
        xs = np.linspace(*self.support, n_grid)
        return float(np.max(np.abs(self.field(xs)))), float(np.max(np.abs(self.antiderivative(xs))))


class PerturbedPotential(Potential):
    """beta(x) + int_lo^x b(s) ds for a base potential and a perturbation."""

    def __init__(self, base: Potential, pert: CompactFieldPerturbation):
        self.base = base
        self.pert = pert
        self.b_minus = base.b_minus
        self.b_plus = base.b_plus
        self.domain = base.domain
        self.kinks = base.kinks
        lo, hi = pert.support
        c0, c1 = base.core
        self.core = (min(c0, lo), max(c1, hi))
        self.feature_length = min(base.feature_length, pert.feature_length)

    def __call__(self, x):
        return self.base(x) + self.pert.antiderivative(x)

    def field(self, x):
        return self.base.field(x) + self.pert.field(x)


def apply_field_perturbation(pb: Potential, pert: CompactFieldPerturbation) -> Potential:
    """The potential of B + b. A perturbation that is identically zero returns ``pb``."""
    d0, d1 = pb.domain
    lo, hi = pert.support
    if lo < d0 or hi > d1:
        raise ExtrapolationError(f"perturbation support [{lo}, {hi}] leaves the profile range [{d0}, {d1}]")
    if pert.is_zero:
        return pb
    return PerturbedPotential(pb, pert)


@dataclass(frozen=True)
class InvarianceReport:
    before: ConductanceReport
    after: ConductanceReport
    tol: float

    @property
    def difference(self):
        """Largest change over the two conductance routes."""
        return max(
            abs(self.after.asymptotic.value - self.before.asymptotic.value),
            abs(self.after.spectral_flow.value - self.before.spectral_flow.value),
        )

    @property
    def passed(self):
        return self.difference < self.tol

    def as_dict(self):
        def side(r):
            return {
                "predicted": r.predicted,
                "asymptotic": r.asymptotic.as_dict(),
                "spectral_flow": r.spectral_flow.as_dict(),
                "j_max": r.j_max,
                "n_k": r.n_k,
            }

        return {"before": side(self.before), "after": side(self.after),
                "difference": self.difference, "tol": self.tol, "passed": self.passed}


def _both(pb, perturbed, g, cfg, j_max):
    def run(p):
        return compute_conductance(p, g.a, g.b, cfg, j_max=j_max, switch=g)

    if cfg.workers > 1:
        with ThreadPoolExecutor(2) as pool:
            return tuple(pool.map(run, (pb, perturbed)))
    return run(pb), run(perturbed)


def invariance_check(pb: Potential, pert: CompactFieldPerturbation, g: SwitchFunction,
                     cfg: SolverConfig = SolverConfig(), tol=1e-2, j_max=None) -> InvarianceReport:
    """Conductance of B and of B + b over the same switch, both routes."""
    perturbed = apply_field_perturbation(pb, pert)
    before, after = _both(pb, perturbed, g, cfg, j_max)
    return InvarianceReport(before, after, tol)


@dataclass(frozen=True)
class StripReport:
    b0: float
    result: ConductanceReport
    tol: float

    @property
    def value(self):
        """The larger in magnitude of the two routes."""
        a, s = self.result.asymptotic.value, self.result.spectral_flow.value
        return a if abs(a) >= abs(s) else s

    @property
    def passed(self):
        return abs(self.result.asymptotic.value) < self.tol and abs(self.result.spectral_flow.value) < self.tol


def strip_zero_check(b0: float, pert: CompactFieldPerturbation, g: SwitchFunction,
                     cfg: SolverConfig = SolverConfig(), tol=1e-3) -> StripReport:
    """Conductance below the bottom b0 of a perturbed constant-field strip."""
    if not b0 > 0:
        raise PreconditionError("strip field b0 must be positive")
    if not g.b < b0:
        raise PreconditionError(f"switch support [{g.a:g}, {g.b:g}] must lie below b0 = {b0:g}")
    pb = apply_field_perturbation(PotentialBeta(FieldProfile.constant(b0)), pert)
    return StripReport(float(b0), compute_conductance(pb, g.a, g.b, cfg, switch=g), tol)


# --- gap persistence -------------------------------------------------------

DEFAULT_K0 = 8.0


@dataclass(frozen=True)
class GapPersistenceSpec:
    n: int
    b_field: float
    a_norm: float
    diva_norm: float = 0.0
    k0: float = DEFAULT_K0

    def __post_init__(self):
        if not self.b_field > 0:
            raise ConfigurationError("b_field must be positive")
        if self.n < 0 or int(self.n) != self.n:
            raise ConfigurationError("n must be a nonnegative integer")
        if self.a_norm < 0 or self.diva_norm < 0 or not self.k0 > 0:
            raise ConfigurationError("norms must be nonnegative and k0 positive")

    @property
    def d_n(self):
        return max(self.diva_norm, self.a_norm * math.sqrt((self.n + 1) * self.b_field))


def gap_persistence_interval(spec: GapPersistenceSpec):
    """Energies still certified to lie in a gap after the perturbation.

    Returns (lower, upper), open, or None when the margins cross. The
    estimate is sufficient, not sharp.
    """
    margin = spec.k0 * spec.d_n
    upper = (2 * spec.n + 1) * spec.b_field - margin
    if spec.n == 0:
        return (-math.inf, upper)
    lower = (2 * spec.n - 1) * spec.b_field + margin
    if not lower < upper:
        return None
    return (lower, upper)


def persistence_spec_for(pert: CompactFieldPerturbation, n: int, b_field: float, k0=DEFAULT_K0):
    """Spec for the y-independent gauge a = (0, int_lo^x b); div a = 0."""
    _, a_norm = pert.sup_norms()
    return GapPersistenceSpec(n, b_field, a_norm, 0.0, k0)


# --- configuration ---------------------------------------------------------


def perturbation_from_config(cfg: dict) -> CompactFieldPerturbation:
    """Mapping with kind, support [lo, hi] (or radius), amplitude, width, samples."""
    if "kind" not in cfg:
        raise ConfigurationError("perturbation config needs a 'kind' key")
    kind = cfg["kind"]
    try:
        if kind == "tabulated":
            return CompactFieldPerturbation.tabulated(cfg["samples"])
        if "support" in cfg:
            support = tuple(float(v) for v in cfg["support"])
        else:
            r = float(cfg.get("radius", 1.0))
            c = float(cfg.get("center", 0.0))
            support = (c - r, c + r)
        width = cfg.get("width")
        return CompactFieldPerturbation(kind, support, float(cfg.get("amplitude", 0.0)),
                                        None if width is None else float(width))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"malformed perturbation config: {exc}") from exc


def perturbation_to_config(pert: CompactFieldPerturbation) -> dict:
    if pert.kind == "tabulated":
        return {"kind": "tabulated", "samples": [list(s) for s in pert.samples]}
    out = {"kind": pert.kind, "support": list(pert.support), "amplitude": pert.amplitude}
    if pert.width is not None:
        out["width"] = pert.width
    return out
