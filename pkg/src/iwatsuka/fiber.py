"""Finite-difference discretisation and spectra of the fiber operator

    h(k) = -d^2/dx^2 + (k - beta(x))^2

on a truncated window with Dirichlet ends.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import sturm
from .errors import ConfigurationError, ConvergenceError, NumericError, WindowError
from .profiles import Potential


class ToleranceClampWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs shared by the fiber solver and everything above it."""

    # window: potential at both ends >= margin_factor * e_max, plus padding
    margin_factor: float = 2.0
    pad_lengths: float = 6.0
    # resolution: grid points per magnetic length; also bounds the phase
    # advance per step at the highest kinetic energy in the window
    points_per_length: int = 40
    max_phase_step: float = 0.3
    max_points: int = 2_000_000
    # bisection bracket width and Richardson convergence (relative)
    tol: float = 1e-8
    convergence_tol: float = 1e-7
    max_levels: int = 5
    # asymptotic limits
    plateau_rel: float = 1e-4
    plateau_abs: float = 1e-6
    probe_budget: int = 30
    probe_k0_factor: float = 4.0
    divergence_factor: float = 100.0
    # conductance quadrature
    n_k: int = 200
    refine_tol: float = 2e-2
    max_refine_rounds: int = 16
    workers: int = 1

    def __post_init__(self):
        for name in ("margin_factor", "tol", "convergence_tol", "plateau_rel", "refine_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.margin_factor < 1:
            raise ConfigurationError("margin_factor must be >= 1")
        if self.points_per_length < 2 or self.max_levels < 2:
            raise ConfigurationError("points_per_length >= 2 and max_levels >= 2 required")

    def with_(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class FiberDiscretization:
    k: float
    window: tuple
    n_points: int
    step: float
    diag: np.ndarray = field(repr=False)
    offdiag: np.ndarray = field(repr=False)
    e_max: float = math.nan

    @property
    def grid(self):
        return self.window[0] + self.step * np.arange(1, self.n_points + 1)


@dataclass(frozen=True)
class SpectrumSlice:
    k: float
    energies: np.ndarray
    residual_estimate: float
    n_points: int = 0

    def __post_init__(self):
        # Mirror-symmetric double wells split exponentially in k, below any
        # bisection tolerance; ties are allowed, inversions are not.
        if np.any(np.diff(self.energies) < 0):
            raise NumericError(f"eigenvalues out of order at k={self.k}: {self.energies}")

    def is_simple(self, tol):
        return bool(np.all(np.diff(self.energies) > 2.0 * tol))


# --- window ----------------------------------------------------------------


def _tail_crossing(pb, k, edge, side, level):
    """Position on the tail beyond ``edge`` where s*(beta - k) == level.

    s is chosen so that s*(beta - k) increases moving outward; returns
    ``edge`` itself when the tail already starts above ``level``.
    """
    if side > 0:
        s = math.copysign(1.0, pb.b_plus)
        slope = abs(pb.b_plus)
    else:
        s = -math.copysign(1.0, pb.b_minus)
        slope = abs(pb.b_minus)

    def f(x):
        return s * (float(pb(x)) - k) - level

    f0 = f(edge)
    if f0 >= 0:
        return edge
    dist = -f0 / slope + pb.magnetic_length
    for _ in range(200):
        far = edge + side * dist
        if f(far) >= 0:
            break
        dist *= 2.0
    else:
        raise WindowError("classically allowed region appears unbounded")
    a, b = (edge, far) if side > 0 else (far, edge)
    return brentq(f, a, b, xtol=1e-13 * max(1.0, abs(far)), rtol=1e-15)


def allowed_hull(pb: Potential, k: float, threshold: float):
    """Smallest interval containing {x : (k - beta(x))^2 <= threshold}, or None."""
    root = math.sqrt(threshold)
    points = []
    xs = pb.core_samples()
    pot = (k - pb(xs)) ** 2
    inside = xs[pot <= threshold]
    if inside.size:
        points += [float(inside[0]), float(inside[-1])]
    if pb.has_tails:
        c0, c1 = pb.core
        for side, edge in ((-1, c0), (1, c1)):
            if side > 0:
                s = math.copysign(1.0, pb.b_plus)
            else:
                s = -math.copysign(1.0, pb.b_minus)
            f0 = s * (float(pb(edge)) - k)
            if f0 > root:
                continue
            points.append(_tail_crossing(pb, k, edge, side, root))
            if f0 < -root:
                points.append(_tail_crossing(pb, k, edge, side, -root))
    if not points:
        return None
    return min(points), max(points)


def potential_floor(pb: Potential, k: float) -> float:
    """inf_x (k - beta(x))^2."""
    lo, hi = pb.beta_range()
    if lo <= k <= hi:
        return 0.0
    return min((k - lo) ** 2, (k - hi) ** 2)


def choose_window(pb: Potential, k: float, e_max: float, cfg: SolverConfig):
    threshold = e_max * cfg.margin_factor
    hull = allowed_hull(pb, k, threshold)
    if hull is None:
        raise WindowError(f"no classically allowed region below {threshold:g} at k={k:g}")
    pad = cfg.pad_lengths * pb.magnetic_length
    lo, hi = hull[0] - pad, hull[1] + pad
    d0, d1 = pb.domain
    if lo < d0 or hi > d1:
        lo, hi = max(lo, d0), min(hi, d1)
        if (k - float(pb(lo))) ** 2 < threshold or (k - float(pb(hi))) ** 2 < threshold:
            raise WindowError(
                f"tabulated range [{d0}, {d1}] exhausted at k={k:g}, e_max={e_max:g}"
            )
    for _ in range(64):
        ok_lo = (k - float(pb(lo))) ** 2 >= threshold
        ok_hi = (k - float(pb(hi))) ** 2 >= threshold
        if ok_lo and ok_hi:
            return lo, hi
        if not ok_lo:
            lo = max(lo - pad, d0)
        if not ok_hi:
            hi = min(hi + pad, d1)
    raise WindowError(f"could not close the window at k={k:g}")


def _grid_step(pb, k, e_max, cfg):
    h = pb.magnetic_length / cfg.points_per_length
    kinetic = max(e_max * cfg.margin_factor - potential_floor(pb, k), 1.0)
    return min(h, cfg.max_phase_step / math.sqrt(kinetic))


def _align(window, h, kinks):
    lo, hi = window
    for x in kinks:
        if lo < x < hi:
            lo = x - math.ceil((x - lo) / h) * h
            hi = x + math.ceil((hi - x) / h) * h
            break
    n = max(int(math.ceil((hi - lo) / h)) - 1, 1)
    if not kinks:
        return (lo, hi), n
    return (lo, lo + (n + 1) * h), n


def discretize(pb: Potential, k: float, window, n_points: int, e_max=math.nan):
    lo, hi = window
    h = (hi - lo) / (n_points + 1)
    x = lo + h * np.arange(1, n_points + 1)
    pot = (k - pb(x)) ** 2
    diag = 2.0 / h**2 + pot
    offdiag = np.full(n_points - 1, -1.0 / h**2)
    if not (np.all(np.isfinite(diag)) and math.isfinite(h)):
        raise NumericError(f"non-finite fiber matrix at k={k}")
    return FiberDiscretization(float(k), (float(lo), float(hi)), int(n_points), h, diag, offdiag, e_max)


def assemble_fiber(pb: Potential, k: float, e_max: float, cfg: SolverConfig = SolverConfig(),
                   n_points=None) -> FiberDiscretization:
    """Window and second-order central-difference matrix for h(k).

    The window holds every x with (k - beta)^2 <= margin_factor * e_max plus
    ``pad_lengths`` magnetic lengths on both sides.
    """
    if not e_max > 0:
        raise ConfigurationError("e_max must be positive")
    window = choose_window(pb, k, e_max, cfg)
    if n_points is None:
        h = _grid_step(pb, k, e_max, cfg)
        window, n_points = _align(window, h, pb.kinks)
        if n_points > cfg.max_points:
            raise ConvergenceError(f"grid of {n_points} points exceeds max_points at k={k:g}")
    return discretize(pb, k, window, n_points, e_max)


def lowest_eigenvalues(fd: FiberDiscretization, j_max: int, tol: float = 1e-8, upper_hint=None):
    """Sturm bisection for the ``j_max`` lowest eigenvalues of the fiber matrix."""
    if j_max < 1:
        raise ConfigurationError("j_max must be >= 1")
    if j_max > fd.n_points:
        raise ConfigurationError(f"j_max={j_max} exceeds n_points={fd.n_points}")
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    if not (np.all(np.isfinite(fd.diag)) and np.all(np.isfinite(fd.offdiag))):
        raise NumericError("non-finite matrix entries")
    floor = 1e-13 * float(np.max(np.abs(fd.diag)))
    if tol < floor:
        warnings.warn(f"tol {tol:g} below rounding floor, clamped to {floor:g}", ToleranceClampWarning,
                      stacklevel=2)
        tol = floor
    return sturm.lowest(fd.diag, fd.offdiag, j_max, tol, upper_hint)


def _level_tol(fd, cfg):
    return max(cfg.tol, 1e-13 * float(np.max(np.abs(fd.diag))))


def _order(energies, fd, cfg):
    # Extrapolation can swap a numerically degenerate pair by a few tol.
    slack = 10.0 * _level_tol(fd, cfg) + 1e-12 * float(np.max(np.abs(energies)))
    if np.any(np.diff(energies) < -slack):
        raise NumericError(f"eigenvalues out of order at k={fd.k}: {energies}")
    return np.sort(energies)


def solve_slice(pb: Potential, k: float, j_max: int, cfg: SolverConfig = SolverConfig()) -> SpectrumSlice:
    """Lowest ``j_max`` eigenvalues of h(k), Richardson-extrapolated in the step.

    Grids are nested (n -> 2n + 1 halves the step). With E_m the raw values
    on level m, R_m = (4 E_m - E_{m-1}) / 3 removes the h^2 term; the slice is
    accepted once successive R_m agree to ``convergence_tol`` and reports
    (16 R_m - R_{m-1}) / 15.
    """
    if j_max < 1:
        raise ConfigurationError("j_max must be >= 1")
    k = float(k)
    bmax = max(abs(pb.b_minus), abs(pb.b_plus))
    e_max = potential_floor(pb, k) + (2 * j_max + 1) * bmax
    for _ in range(40):
        fd = assemble_fiber(pb, k, e_max, cfg)
        if j_max > fd.n_points:
            raise ConfigurationError(f"j_max={j_max} exceeds n_points={fd.n_points}")
        raw = sturm.lowest(fd.diag, fd.offdiag, j_max, _level_tol(fd, cfg), e_max)
        if raw[-1] <= e_max:
            break
        e_max = 1.5 * float(raw[-1])
    else:
        raise WindowError(f"energy bound did not stabilise at k={k:g}")

    window, n = fd.window, fd.n_points
    prev_raw, prev_rich = raw, None
    for level in range(1, cfg.max_levels + 1):
        n = 2 * n + 1
        if n > cfg.max_points:
            raise ConvergenceError(f"grid doubling exceeded max_points at k={k:g}",
                                   coarse=prev_rich, fine=prev_raw)
        fd = discretize(pb, k, window, n, e_max)
        raw = sturm.lowest(fd.diag, fd.offdiag, j_max, _level_tol(fd, cfg), e_max)
        rich = (4.0 * raw - prev_raw) / 3.0
        if prev_rich is not None:
            gap = np.abs(rich - prev_rich)
            if np.all(gap <= cfg.convergence_tol * np.maximum(1.0, np.abs(rich))):
                energies = (16.0 * rich - prev_rich) / 15.0
                return SpectrumSlice(k, _order(energies, fd, cfg), float(np.max(gap)), n)
        prev_raw, prev_rich = raw, rich
    raise ConvergenceError(
        f"no convergence after {cfg.max_levels} grid doublings at k={k:g}",
        coarse=prev_rich, fine=rich,
    )
