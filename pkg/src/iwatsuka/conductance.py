"""Edge conductance of fibered magnetic Hamiltonians.

For a y-translation-invariant Hamiltonian the edge conductance in an
energy window selected by a switch g reduces to a sum over bands:

    sigma = -sum_j int g'(E_j(k)) E_j'(k) dk = sum_j g(E_j(-inf)) - g(E_j(+inf))

The 2*pi of the trace definition is absorbed by the fiber decomposition:
nothing here multiplies or divides by 2*pi, and no 2-D trace is formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .bands import (
    AsymptoticLimits,
    BandTable,
    asymptotic_levels,
    default_k_range,
    estimate_limits,
    sweep_bands,
)
from .errors import (
    ConvergenceError,
    InsufficientBandsError,
    InvalidIntervalError,
    NotInGapError,
    RangeTooShortError,
)
from .fiber import SolverConfig
from .profiles import Potential, SwitchFunction, landau_gap, make_switch

SCHEMA = "iwatsuka.conductance/1"


@dataclass(frozen=True)
class IntervalSpec:
    lo: float
    hi: float
    n_minus: int
    n_plus: int


@dataclass(frozen=True)
class ConductanceResult:
    value: float
    per_band: tuple
    nearest_integer: int
    residual: float
    method: str

    @classmethod
    def from_bands(cls, per_band, method):
        per_band = tuple(float(v) for v in per_band)
        value = math.fsum(per_band)
        nearest = int(round(value))
        return cls(value, per_band, nearest, abs(value - nearest), method)

    def as_dict(self):
        return {
            "method": self.method,
            "value": self.value,
            "per_band": list(self.per_band),
            "nearest_integer": self.nearest_integer,
            "residual": self.residual,
        }


def _gap_index(b, lo, hi, side):
    ab = abs(b)
    n = 0 if hi < ab else max(int(math.floor((lo / ab + 1.0) / 2.0)), 0)
    if landau_gap(n, b).contains(lo, hi):
        return n
    m = max(int(math.ceil((lo / ab - 1.0) / 2.0)), 0)
    level = (2 * m + 1) * ab
    raise NotInGapError(
        f"[{lo:g}, {hi:g}] meets the Landau level {level:g} of |B_{side}| = {ab:g}",
        level=level,
        side=side,
    )


def admissible_gap_indices(b_minus: float, b_plus: float, lo: float, hi: float) -> IntervalSpec:
    """The gap indices (n_-, n_+) with [lo, hi] inside both asymptotic Landau gaps."""
    if not lo < hi:
        raise InvalidIntervalError(f"interval needs lo < hi, got [{lo}, {hi}]")
    n_minus = _gap_index(b_minus, lo, hi, "-")
    n_plus = _gap_index(b_plus, lo, hi, "+")
    return IntervalSpec(float(lo), float(hi), n_minus, n_plus)


def predicted_conductance(spec: IntervalSpec, b_minus: float, b_plus: float) -> int:
    return int(math.copysign(1, b_minus)) * spec.n_minus - int(math.copysign(1, b_plus)) * spec.n_plus


def bands_needed(b_minus: float, b_plus: float, g_hi: float, cap: int = 10_000) -> int:
    """Smallest j_max whose omitted bands start and end above ``g_hi``."""
    for j in range(1, cap):
        nxt_minus = asymptotic_levels(b_minus, b_plus, -1, j + 1)[-1]
        nxt_plus = asymptotic_levels(b_minus, b_plus, +1, j + 1)[-1]
        if nxt_minus > g_hi and nxt_plus > g_hi:
            return j
    raise InsufficientBandsError("no band count certifies the truncation")


def _certify_truncation(b_minus, b_plus, j_max, g):
    nxt_minus = asymptotic_levels(b_minus, b_plus, -1, j_max + 1)[-1]
    nxt_plus = asymptotic_levels(b_minus, b_plus, +1, j_max + 1)[-1]
    if not (nxt_minus > g.b and nxt_plus > g.b):
        need = bands_needed(b_minus, b_plus, g.b)
        raise InsufficientBandsError(
            f"j_max={j_max} leaves band {j_max + 1} with a limit below {g.b:g}; need j_max >= {need}"
        )


def conductance_asymptotic(limits: AsymptoticLimits, g: SwitchFunction, plateau_tol=1e-3) -> ConductanceResult:
    """sum_j g(E_j(-inf)) - g(E_j(+inf)); divergent limits contribute g = 0."""
    _certify_truncation(limits.b_minus, limits.b_plus, limits.j_max, g)
    for lim, res in ((limits.limit_minus, limits.residual_minus), (limits.limit_plus, limits.residual_plus)):
        near = np.isfinite(lim) & (lim >= g.a - 1.0) & (lim <= g.b + 1.0)
        if np.any(res[near] > plateau_tol):
            raise ConvergenceError("a band limit near the switch support has not plateaued")
    per_band = g(limits.limit_minus) - g(limits.limit_plus)
    return ConductanceResult.from_bands(per_band, "asymptotic")


def _check_endpoints(table, g):
    for end, col in (("k_min", 0), ("k_max", -1)):
        e = table.bands[:, col]
        inside = (e > g.a) & (e < g.b)
        if np.any(inside):
            bands = [j + 1 for j in np.flatnonzero(inside)]
            raise RangeTooShortError(f"bands {bands} are inside supp g' at {end}={table.k_grid[col]:g}")


def conductance_spectral_flow(table: BandTable, g: SwitchFunction) -> ConductanceResult:
    """-sum_j of the trapezoid quadrature of g'(E_j(k)) E_j'(k) over the k grid.

    E_j' comes from second-order central differences (one-sided at the ends).
    """
    if table.k_grid.size < 3:
        raise RangeTooShortError("need at least three k samples")
    _check_endpoints(table, g)
    k = table.k_grid
    per_band = []
    for row in table.bands:
        slope = np.gradient(row, k, edge_order=2)
        per_band.append(-trapezoid(g.derivative(row) * slope, k))
    return ConductanceResult.from_bands(per_band, "spectral_flow")


def cells_to_refine(table: BandTable, g: SwitchFunction, refine_tol: float) -> np.ndarray:
    """Indices i of cells [k_i, k_i+1] in which some band meeting supp g' moves
    by more than ``refine_tol * (b - a)`` in energy."""
    e0 = table.bands[:, :-1]
    e1 = table.bands[:, 1:]
    meets = (np.maximum(e0, e1) > g.a) & (np.minimum(e0, e1) < g.b)
    step = np.where(meets, np.abs(e1 - e0) / g.width, 0.0)
    return np.flatnonzero(np.any(step > refine_tol, axis=0))


def refine_for_switch(table: BandTable, pb: Potential, g: SwitchFunction,
                      cfg: SolverConfig = SolverConfig()) -> BandTable:
    """Bisect flagged cells (solving the new k points) until none are flagged."""
    for _ in range(cfg.max_refine_rounds):
        cells = cells_to_refine(table, g, cfg.refine_tol)
        if cells.size == 0:
            return table
        mids = 0.5 * (table.k_grid[cells] + table.k_grid[cells + 1])
        table = table.merged(sweep_bands(pb, mids, table.j_max, cfg))
    raise ConvergenceError(f"switch-driven k refinement still active after {cfg.max_refine_rounds} rounds")


def band_table_for_switch(pb: Potential, g: SwitchFunction, j_max: int,
                          cfg: SolverConfig = SolverConfig(), k_range=None, max_extend=8) -> BandTable:
    """Sweep, extend the k range until every band ends outside supp g', refine."""
    lo, hi = k_range if k_range is not None else default_k_range(pb, g.b)
    table = sweep_bands(pb, np.linspace(lo, hi, cfg.n_k), j_max, cfg)
    step = (hi - lo) / (cfg.n_k - 1)
    for _ in range(max_extend):
        left = table.bands[:, 0]
        right = table.bands[:, -1]
        grow_left = np.any((left > g.a) & (left < g.b))
        grow_right = np.any((right > g.a) & (right < g.b))
        if not (grow_left or grow_right):
            break
        width = table.k_grid[-1] - table.k_grid[0]
        extra = []
        if grow_left:
            extra.append(np.arange(table.k_grid[0] - width, table.k_grid[0] - 0.5 * step, step))
        if grow_right:
            extra.append(np.arange(table.k_grid[-1] + step, table.k_grid[-1] + width + 0.5 * step, step))
        table = table.merged(sweep_bands(pb, np.concatenate(extra), j_max, cfg))
    else:
        _check_endpoints(table, g)
    return refine_for_switch(table, pb, g, cfg)


@dataclass(frozen=True)
class ConductanceReport:
    spec: IntervalSpec
    predicted: int
    asymptotic: ConductanceResult
    spectral_flow: ConductanceResult
    j_max: int
    n_k: int

    @property
    def methods_agree(self):
        return abs(self.asymptotic.value - self.spectral_flow.value)


def compute_conductance(pb: Potential, lo: float, hi: float, cfg: SolverConfig = SolverConfig(),
                        j_max=None, switch=None, limits=None) -> ConductanceReport:
    """Both conductance routes and the predicted integer for the window [lo, hi].

    The switch defaults to the mollifier switch with supp g' = [lo, hi].
    """
    spec = admissible_gap_indices(pb.b_minus, pb.b_plus, lo, hi)
    g = switch if switch is not None else make_switch(lo, hi)
    if j_max is None:
        j_max = bands_needed(pb.b_minus, pb.b_plus, g.b)
    if limits is None:
        limits = estimate_limits(pb, j_max, cfg)
    asym = conductance_asymptotic(limits, g)
    table = band_table_for_switch(pb, g, j_max, cfg)
    flow = conductance_spectral_flow(table, g)
    return ConductanceReport(spec, predicted_conductance(spec, pb.b_minus, pb.b_plus), asym, flow,
                             j_max, table.k_grid.size)
