"""Ground energy of magnetic guides under field scaling.

For the guide field B(x) = b * theta(sqrt(b) x) the fiber satisfies
h(k; b) = b * h(k / sqrt(b); 1) up to the unitary dilation x -> sqrt(b) x,
so inf sigma scales linearly in b: inf sigma = c0 * b.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .bands import fmt
from .errors import ConfigurationError, InconclusiveLimitError, RegimeError
from .fiber import SolverConfig, solve_slice
from .profiles import FieldProfile, Potential, PotentialBeta


class SharpInterfacePotential(Potential):
    """beta(x) = -b |x|: field b for x < 0 and -b for x > 0."""

    def __init__(self, b: float):
        if not b > 0:
            raise ConfigurationError("field strength must be positive")
        self.b = float(b)
        self.b_minus = self.b
        self.b_plus = -self.b
        self.core = (0.0, 0.0)
        self.kinks = (0.0,)
        self.feature_length = 1.0 / math.sqrt(self.b)

    def __call__(self, x):
        return -self.b * np.abs(np.asarray(x, dtype=float))

    def field(self, x):
        return -self.b * np.sign(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class InterfaceShape:
    """Reference switch theta: 1 left of q_minus, -1 right of q_plus.

    ``sharp`` is the jump at 0 (q_minus = q_plus = 0); ``smooth`` is the
    quintic smoothstep between q_minus and q_plus.
    """

    kind: str = "sharp"
    q_minus: float = 0.0
    q_plus: float = 0.0

    def __post_init__(self):
        if self.kind == "sharp":
            if self.q_minus != self.q_plus:
                raise ConfigurationError("a sharp interface needs q_minus == q_plus")
        elif self.kind == "smooth":
            if not self.q_minus < self.q_plus:
                raise ConfigurationError("a smooth interface needs q_minus < q_plus")
        else:
            raise ConfigurationError(f"unknown interface kind {self.kind!r}")

    def theta(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "sharp":
            return np.where(x < self.q_minus, 1.0, np.where(x > self.q_minus, -1.0, 0.0))
        return self._profile(1.0).field(x)

    def _profile(self, b):
        root = math.sqrt(b)
        center = 0.5 * (self.q_minus + self.q_plus) / root
        scale = 0.5 * (self.q_plus - self.q_minus) / root
        return FieldProfile.smoothstep(b, -b, center, scale)

    def potential(self, b: float) -> Potential:
        """Potential of the scaled field b * theta(sqrt(b) x)."""
        if not b > 0:
            raise ConfigurationError("field strength must be positive")
        if self.kind == "sharp":
            if self.q_minus != 0.0:
                raise ConfigurationError("the sharp interface is placed at x = 0")
            return SharpInterfacePotential(b)
        return PotentialBeta(self._profile(b))


def band_infimum(pb: Potential, cfg: SolverConfig = SolverConfig(), j=1, n_scan=41, max_extend=8) -> float:
    """inf_k E_j(k) for a guide (fields of opposite sign).

    A coarse scan over k brackets the minimiser, golden-section search
    polishes it. If the scan minimum sits at a range end the range is
    extended that way until the minimum moves inside or stops improving.
    """
    if pb.b_minus * pb.b_plus > 0:
        raise RegimeError("band_infimum needs fields of opposite sign")
    vals = pb(pb.core_samples())
    root = math.sqrt(max(abs(pb.b_minus), abs(pb.b_plus)))
    if pb.b_minus > 0:
        # beta bounded above: wells form as k decreases
        top = float(np.max(vals))
        lo, hi = top - 6.0 * root, top + 2.0 * root
    else:
        bot = float(np.min(vals))
        lo, hi = bot - 2.0 * root, bot + 6.0 * root

    def energy(k):
        return float(solve_slice(pb, k, j, cfg).energies[j - 1])

    ks = list(np.linspace(lo, hi, n_scan))
    es = [energy(k) for k in ks]
    step = ks[1] - ks[0]
    for _ in range(max_extend):
        i = int(np.argmin(es))
        if 0 < i < len(ks) - 1:
            break
        span = 0.5 * (ks[-1] - ks[0])
        if i == 0:
            new = list(np.arange(ks[0] - span, ks[0] - 0.5 * step, step))
            new_e = [energy(k) for k in new]
            improved = es[0] - min(new_e)
            ks, es = new + ks, new_e + es
        else:
            new = list(np.arange(ks[-1] + step, ks[-1] + span + 0.5 * step, step))
            new_e = [energy(k) for k in new]
            improved = es[-1] - min(new_e)
            ks, es = ks + new, es + new_e
        if improved <= cfg.plateau_rel * abs(min(es)) + cfg.plateau_abs:
            # approached, not attained: the infimum is the plateau value
            return float(min(es))
    else:
        raise InconclusiveLimitError(f"infimum of E_{j} did not stabilise")
    i = int(np.argmin(es))
    res = minimize_scalar(energy, bracket=(ks[i - 1], ks[i], ks[i + 1]), method="golden", tol=1e-10)
    return float(min(res.fun, es[i]))


def scaled_ground_energy(shape: InterfaceShape, b: float, cfg: SolverConfig = SolverConfig()) -> float:
    """inf sigma for the field b * theta(sqrt(b) x), i.e. inf_k E_1(k)."""
    return band_infimum(shape.potential(b), cfg)


@dataclass(frozen=True)
class C0Estimate:
    value: float
    uncertainty: float


def estimate_c0(shape: InterfaceShape, cfg: SolverConfig = SolverConfig()) -> C0Estimate:
    """c0 = inf sigma at b = 1, with the change under a finer grid and wider
    window as the uncertainty."""
    base = scaled_ground_energy(shape, 1.0, cfg)
    finer = cfg.with_(points_per_length=2 * cfg.points_per_length,
                      tol=0.1 * cfg.tol, convergence_tol=0.1 * cfg.convergence_tol,
                      pad_lengths=cfg.pad_lengths + 2.0)
    fine = scaled_ground_energy(shape, 1.0, finer)
    return C0Estimate(fine, abs(fine - base))


@dataclass(frozen=True)
class ScalingRow:
    b: float
    inf_energy: float
    ratio_to_base: float


def scaling_table(shape: InterfaceShape, b_values, cfg: SolverConfig = SolverConfig()):
    """inf sigma for each b; ratios are taken against the first entry."""
    b_values = [float(b) for b in b_values]
    if not b_values:
        raise ConfigurationError("need at least one field strength")
    energies = [scaled_ground_energy(shape, b, cfg) for b in b_values]
    return [ScalingRow(b, e, e / energies[0]) for b, e in zip(b_values, energies)]


def scaling_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["B", "inf_energy", "ratio_to_base"])
    for r in rows:
        writer.writerow([fmt(r.b), fmt(r.inf_energy), fmt(r.ratio_to_base)])
    return buf.getvalue()


def fiber_scaling_residual(shape: InterfaceShape, b: float, k_grid, j_max=1,
                           cfg: SolverConfig = SolverConfig()):
    """max_j,k |E_j(k; b) - b E_j(k / sqrt(b); 1)| / |b E_j(k / sqrt(b); 1)|."""
    pb, p1 = shape.potential(b), shape.potential(1.0)
    root = math.sqrt(b)
    worst = 0.0
    for k in np.asarray(k_grid, dtype=float):
        e_b = solve_slice(pb, k, j_max, cfg).energies
        e_1 = b * solve_slice(p1, k / root, j_max, cfg).energies
        worst = max(worst, float(np.max(np.abs(e_b - e_1) / np.abs(e_1))))
    return worst
