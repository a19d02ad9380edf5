"""Band functions E_j(k), their k -> +-inf limits, and the full spectrum."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InconclusiveLimitError, IwatsukaError, RegimeError
from .fiber import SolverConfig, solve_slice
from .profiles import Potential


@dataclass(frozen=True)
class BandTable:
    """bands[j, i] = E_{j+1}(k_grid[i])."""

    k_grid: np.ndarray
    bands: np.ndarray
    residuals: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.bands.shape != (self.bands.shape[0], self.k_grid.size):
            raise ConfigurationError("band matrix does not match k grid")

    @property
    def j_max(self):
        return self.bands.shape[0]

    def merged(self, other: "BandTable") -> "BandTable":
        """Union of two tables over the same bands, sorted by k."""
        k = np.concatenate((self.k_grid, other.k_grid))
        b = np.concatenate((self.bands, other.bands), axis=1)
        r = np.concatenate((_res(self), _res(other)))
        k, idx = np.unique(k, return_index=True)
        return BandTable(k, b[:, idx], r[idx])


def _res(table):
    if table.residuals is None:
        return np.zeros(table.k_grid.size)
    return table.residuals


def _solve_many(pb, ks, j_max, cfg):
    def one(k):
        try:
            return solve_slice(pb, k, j_max, cfg)
        except IwatsukaError as exc:
            exc.args = (f"{exc.args[0] if exc.args else exc} (k={k:g})",) + exc.args[1:]
            raise

    if cfg.workers > 1 and len(ks) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(one, ks))
    return [one(k) for k in ks]


def sweep_bands(pb: Potential, k_grid, j_max: int, cfg: SolverConfig = SolverConfig()) -> BandTable:
    k_grid = np.asarray(k_grid, dtype=float)
    if k_grid.ndim != 1 or k_grid.size < 1:
        raise ConfigurationError("k_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(k_grid) <= 0):
        raise ConfigurationError("k_grid must be strictly increasing")
    slices = _solve_many(pb, list(k_grid), j_max, cfg)
    bands = np.stack([s.energies for s in slices], axis=1)
    residuals = np.array([s.residual_estimate for s in slices])
    return BandTable(k_grid, bands, residuals)


def default_k_range(pb: Potential, e_top: float, margin_factor: float = 2.0):
    """Symmetric-ish k range wide enough for bands up to ``e_top`` to settle.

    K = 6 sqrt(e_top) + |beta at the core midpoint|, centred on that value.
    On a finite (tabulated) domain the range is cut to the k whose window,
    at threshold margin_factor * e_top plus padding, still fits inside.
    """
    c0, c1 = pb.core
    mid = float(pb(0.5 * (c0 + c1)))
    half = 6.0 * math.sqrt(max(e_top, 1e-12)) + abs(mid)
    lo, hi = mid - half, mid + half
    d0, d1 = pb.domain
    if math.isfinite(d0) or math.isfinite(d1):
        pad = 6.0 * pb.magnetic_length
        reach = math.sqrt(margin_factor * max(e_top, 1e-12))
        ends = sorted(float(pb(x)) for x in (d0 + pad, d1 - pad))
        lo, hi = max(lo, ends[0] + reach), min(hi, ends[1] - reach)
        if not lo < hi:
            raise ConfigurationError(f"profile range [{d0}, {d1}] too short for bands up to E = {e_top:g}")
    return lo, hi


def default_k_grid(pb: Potential, e_top: float, n_k: int = 200):
    lo, hi = default_k_range(pb, e_top)
    return np.linspace(lo, hi, n_k)


# --- asymptotic limits -----------------------------------------------------


def oscillator_levels(b: float, count: int) -> np.ndarray:
    """(2m - 1)|b| for m = 1..count."""
    return (2.0 * np.arange(1, count + 1) - 1.0) * abs(b)


def merged_oscillator_levels(b_minus: float, b_plus: float, j_max: int) -> np.ndarray:
    """Sorted union (with multiplicity) of both oscillator ladders: the mu_j."""
    if not (b_minus < 0 < b_plus):
        raise RegimeError("merged oscillator levels need b_minus < 0 < b_plus")
    return _merge(b_minus, b_plus, j_max)


def _merge(b1, b2, j_max):
    both = np.concatenate((oscillator_levels(b1, j_max), oscillator_levels(b2, j_max)))
    return np.sort(both, kind="stable")[:j_max]


def asymptotic_levels(b_minus: float, b_plus: float, side: int, count: int) -> np.ndarray:
    """Predicted lim_{k -> side*inf} E_j(k), j = 1..count (inf when divergent).

    A well forms where beta(x) = k. For k -> +inf it sits on every end where
    beta -> +inf (right if b_plus > 0, left if b_minus < 0); for k -> -inf on
    every end where beta -> -inf.
    """
    if side > 0:
        ends = [b for b, grows in ((b_minus, b_minus < 0), (b_plus, b_plus > 0)) if grows]
    else:
        ends = [b for b, grows in ((b_minus, b_minus > 0), (b_plus, b_plus < 0)) if grows]
    if not ends:
        return np.full(count, math.inf)
    if len(ends) == 1:
        return oscillator_levels(ends[0], count)
    return _merge(ends[0], ends[1], count)


@dataclass(frozen=True)
class AsymptoticLimits:
    """Band limits at k -> -inf and k -> +inf.

    A divergent band carries ``inf`` as its limit and the probe energies
    that certify monotone growth past the divergence threshold.
    """

    b_minus: float
    b_plus: float
    limit_minus: np.ndarray
    limit_plus: np.ndarray
    residual_minus: np.ndarray
    residual_plus: np.ndarray
    probes_minus: tuple = ()
    probes_plus: tuple = ()

    @property
    def j_max(self):
        return self.limit_minus.size

    @property
    def divergent_minus(self):
        return np.isinf(self.limit_minus)

    @property
    def divergent_plus(self):
        return np.isinf(self.limit_plus)


def _probe_side(pb, side, j_max, cfg):
    bmax = max(abs(pb.b_minus), abs(pb.b_plus))
    k0 = cfg.probe_k0_factor * math.sqrt(bmax)
    # shift the probe origin by beta at the core midpoint so perturbations
    # that add flux do not delay the plateau
    c0, c1 = pb.core
    origin = float(pb(0.5 * (c0 + c1)))
    threshold = cfg.divergence_factor * (2 * j_max + 1) * bmax
    limit = np.full(j_max, math.nan)
    residual = np.full(j_max, math.nan)
    history = []
    prev = None
    for m in range(cfg.probe_budget + 1):
        k = origin + side * k0 * 2.0**m
        energies = solve_slice(pb, k, j_max, cfg).energies
        history.append((k, tuple(float(e) for e in energies)))
        if prev is not None:
            for j in range(j_max):
                if not math.isnan(limit[j]):
                    continue
                diff = abs(energies[j] - prev[j])
                if diff < cfg.plateau_rel * abs(energies[j]) + cfg.plateau_abs:
                    limit[j] = energies[j]
                    residual[j] = diff
                elif energies[j] > threshold and _monotone(history, j):
                    limit[j] = math.inf
                    residual[j] = math.inf
        if not np.any(np.isnan(limit)):
            return limit, residual, tuple(history)
        prev = energies
    bad = [j + 1 for j in range(j_max) if math.isnan(limit[j])]
    raise InconclusiveLimitError(
        f"bands {bad} neither plateaued nor diverged as k -> {'+' if side > 0 else '-'}inf"
    )


def _monotone(history, j):
    vals = [e[j] for _, e in history]
    return all(b > a for a, b in zip(vals, vals[1:]))


def estimate_limits(pb: Potential, j_max: int, cfg: SolverConfig = SolverConfig()) -> AsymptoticLimits:
    lm, rm, hm = _probe_side(pb, -1, j_max, cfg)
    lp, rp, hp = _probe_side(pb, +1, j_max, cfg)
    return AsymptoticLimits(pb.b_minus, pb.b_plus, lm, lp, rm, rp, hm, hp)


# --- spectrum of the full operator -----------------------------------------


def spectrum_bands(b_minus: float, b_plus: float, j_max=None):
    """Union of the band ranges [(2j - 1) b_minus, (2j - 1) b_plus], overlaps merged.

    With ``j_max`` given, only the first j_max bands enter. With ``j_max=None``
    the whole spectrum is returned: from the first j with
    (2j + 1) b_minus <= (2j - 1) b_plus on, every band overlaps the next, so
    the list ends in the ray [., inf).
    """
    if not (0 < b_minus <= b_plus):
        raise RegimeError("spectrum_bands needs 0 < b_minus <= b_plus")
    if j_max is None:
        if b_plus == b_minus:
            raise ConfigurationError("constant field: Landau levels need an explicit j_max")
        j_chain = max(1, math.ceil((b_plus + b_minus) / (2.0 * (b_plus - b_minus))))
        count = j_chain
    else:
        if j_max < 1:
            raise ConfigurationError("j_max must be >= 1")
        count = j_max
    merged = []
    for j in range(1, count + 1):
        lo, hi = (2 * j - 1) * b_minus, (2 * j - 1) * b_plus
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    if j_max is None:
        merged[-1][1] = math.inf
    return [tuple(iv) for iv in merged]


def band_ranges(table: BandTable):
    return [(float(np.min(row)), float(np.max(row))) for row in table.bands]


# --- CSV -------------------------------------------------------------------


def fmt(x) -> str:
    """Fixed 12-significant-digit decimal formatting used in every report."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    out = f"{x:.12g}"
    return "0" if out == "-0" else out


def bands_to_csv(table: BandTable, header: str = "") -> str:
    """CSV with columns k,E_1..E_J; ``header`` lines are written first as '#' comments."""
    buf = io.StringIO()
    for line in header.splitlines():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k"] + [f"E_{j}" for j in range(1, table.j_max + 1)])
    for i, k in enumerate(table.k_grid):
        writer.writerow([fmt(k)] + [fmt(e) for e in table.bands[:, i]])
    return buf.getvalue()


def bands_from_csv(text: str) -> BandTable:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    if header[0] != "k" or any(h != f"E_{j}" for j, h in enumerate(header[1:], 1)):
        raise ConfigurationError("band CSV header must be k,E_1,...,E_J")
    data = np.array([[float(v) for v in r] for r in body])
    return BandTable(data[:, 0].copy(), data[:, 1:].T.copy())
