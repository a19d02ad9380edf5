"""The acceptance matrix, shared by ``iwatsuka verify-all`` and the test suite.

Each criterion returns a :class:`CriterionResult` whose metrics are
deterministic; wall-clock time is kept separately so reports stay
byte-identical between runs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bands import default_k_grid, estimate_limits, merged_oscillator_levels, oscillator_levels, sweep_bands
from .conductance import compute_conductance
from .fiber import SolverConfig, solve_slice
from .perturbation import (
    CompactFieldPerturbation,
    GapPersistenceSpec,
    gap_persistence_interval,
    invariance_check,
    strip_zero_check,
)
from .profiles import PotentialBeta, load_config, make_switch, profile_from_config
from .report import clean, dumps
from .scaling import InterfaceShape, fiber_scaling_residual, scaling_table

SCHEMA = "iwatsuka.acceptance/1"


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.name} ({self.elapsed:.1f} s)"

    def as_dict(self):
        return {"id": self.number, "name": self.name, "passed": self.passed, "metrics": clean(self.metrics)}


def default_examples_dir() -> Path:
    return Path(str(resources.files("iwatsuka") / "examples"))


class ExampleSet:
    """Named profile configurations loaded from a directory of YAML files."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory is not None else default_examples_dir()

    def config(self, name):
        return load_config(self.directory / f"{name}.yaml")

    def potential(self, name):
        return PotentialBeta(profile_from_config(self.config(name)))


def _rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))))


# --- criteria --------------------------------------------------------------


def landau_oracle(ex, cfg):
    worst = 0.0
    for b in (1, 2, 5):
        pb = ex.potential(f"constant_{b}")
        for k in (-3.0, 0.0, 7.0):
            e = solve_slice(pb, k, 5, cfg).energies
            worst = max(worst, _rel(e, oscillator_levels(b, 5)))
    return {"max_rel_error": worst}, worst <= 1e-6


def band_bounds(ex, cfg, eps=1e-4, j_max=6):
    metrics = {}
    ok = True
    for name, bm, bp in (("tanh_1_5", 1, 5), ("tanh_1_3", 1, 3), ("tanh_2_8", 2, 8)):
        pb = ex.potential(name)
        table = sweep_bands(pb, default_k_grid(pb, (2 * j_max + 1) * bp, 200), j_max, cfg)
        lower = oscillator_levels(bm, j_max)[:, None] - eps
        upper = oscillator_levels(bp, j_max)[:, None] + eps
        below = float(np.max(lower - table.bands))
        above = float(np.max(table.bands - upper))
        metrics[name] = {"worst_below_lower": below, "worst_above_upper": above}
        ok &= below <= 0 and above <= 0
    return metrics, ok


def asymptotic_limits(ex, cfg, j_max=4, tol=1e-3):
    metrics = {}
    ok = True
    for name, bm, bp in (("tanh_1_5", 1, 5), ("tanh_1_3", 1, 3), ("tanh_2_8", 2, 8)):
        lim = estimate_limits(ex.potential(name), j_max, cfg)
        err_m = float(np.max(np.abs(lim.limit_minus - oscillator_levels(bm, j_max))))
        err_p = float(np.max(np.abs(lim.limit_plus - oscillator_levels(bp, j_max))))
        metrics[name] = {"limit_minus": lim.limit_minus, "limit_plus": lim.limit_plus,
                         "err_minus": err_m, "err_plus": err_p}
        ok &= err_m <= tol and err_p <= tol
    return metrics, ok


def _conductance_case(ex, name, lo, hi, cfg, switch=None):
    rep = compute_conductance(ex.potential(name), lo, hi, cfg, switch=switch)
    p = rep.predicted
    return rep, {
        "interval": [lo, hi],
        "predicted": p,
        "asymptotic": rep.asymptotic.value,
        "spectral_flow": rep.spectral_flow.value,
        "residual": max(abs(rep.asymptotic.value - p), abs(rep.spectral_flow.value - p)),
        "methods_agree": rep.methods_agree,
        "n_k": rep.n_k,
    }


def barrier_quantization(ex, cfg):
    metrics = {}
    ok = True
    for name, lo, hi, expect in (("tanh_1_5", 2.2, 2.8, 1), ("tanh_1_5", 0.3, 0.7, 0), ("tanh_1_9", 4.2, 4.8, 2)):
        t0 = time.perf_counter()
        _, m = _conductance_case(ex, name, lo, hi, cfg)
        metrics[f"{name}[{lo},{hi}]"] = m
        ok &= (m["predicted"] == expect and m["residual"] < 1e-2 and m["methods_agree"] < 5e-3
               and time.perf_counter() - t0 < 60.0)
    return metrics, ok


def guide_quantization(ex, cfg):
    metrics = {}
    ok = True
    for name, lo, hi, expect in (("guide_m2_2", 2.5, 3.5, -2), ("guide_m2_2", 7.0, 9.0, -4),
                                 ("guide_m1_3", 1.5, 2.5, -1)):
        _, m = _conductance_case(ex, name, lo, hi, cfg)
        metrics[f"{name}[{lo},{hi}]"] = m
        ok &= m["predicted"] == expect and m["residual"] < 2e-2
    return metrics, ok


def mu_limits(ex, cfg, tol=1e-2):
    lim = estimate_limits(ex.potential("guide_m1_2"), 6, cfg)
    mu = merged_oscillator_levels(-1.0, 2.0, 6)
    err = float(np.max(np.abs(lim.limit_plus - mu)))
    divergent = bool(np.all(lim.divergent_minus))
    return {"limit_plus": lim.limit_plus, "mu": mu, "max_error": err, "minus_divergent": divergent}, (
        err <= tol and divergent
    )


def _bumps():
    return {
        "zero_flux": CompactFieldPerturbation.zero_flux_bump(3.0),
        "flux_0.7": CompactFieldPerturbation.gaussian_truncated(0.7),
        "field_reversing": CompactFieldPerturbation.gaussian_truncated(-6.0),
    }


def perturbation_invariance(ex, cfg):
    metrics = {}
    ok = True
    pb = ex.potential("tanh_1_5")
    g = make_switch(2.2, 2.8)
    for label, pert in _bumps().items():
        rep = invariance_check(pb, pert, g, cfg, tol=1e-2)
        metrics[f"tanh_1_5/{label}"] = {"before": rep.before.spectral_flow.value,
                                        "after": rep.after.spectral_flow.value,
                                        "after_asymptotic": rep.after.asymptotic.value,
                                        "difference": rep.difference}
        ok &= rep.passed
    strip_bumps = dict(_bumps())
    strip_bumps["field_reversing"] = CompactFieldPerturbation.gaussian_truncated(-12.0)
    strip_bumps["flux_2"] = CompactFieldPerturbation.gaussian_truncated(2.0)
    g = make_switch(1.0, 2.0)
    b0 = float(ex.config("constant_4")["b"])
    for label, pert in strip_bumps.items():
        rep = strip_zero_check(b0, pert, g, cfg, tol=1e-3)
        metrics[f"strip_4/{label}"] = {"asymptotic": rep.result.asymptotic.value,
                                       "spectral_flow": rep.result.spectral_flow.value}
        ok &= rep.passed
    return metrics, ok


def scaling_law(ex, cfg, fields=(1.0, 4.0, 16.0)):
    metrics = {}
    ok = True
    for shape in (InterfaceShape("sharp"), InterfaceShape("smooth", -1.0, 1.0)):
        rows = scaling_table(shape, fields, cfg)
        ratio_err = max(abs(r.ratio_to_base / (r.b / fields[0]) - 1.0) for r in rows)
        pointwise = max(fiber_scaling_residual(shape, b, np.linspace(-3.0 * math.sqrt(b), 2.0 * math.sqrt(b), 50),
                                               1, cfg) for b in fields[1:])
        metrics[shape.kind] = {"inf_energy": [r.inf_energy for r in rows], "max_ratio_rel_error": ratio_err,
                               "max_pointwise_rel_error": pointwise}
        ok &= ratio_err < 1e-2 and pointwise < 1e-5
    return metrics, ok


def _nested(inner, outer):
    if inner is None:
        return True
    if outer is None:
        return False
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def gap_persistence(ex, cfg, n_random=100, seed=20240601):
    iv = gap_persistence_interval(GapPersistenceSpec(1, 100.0, 0.1, 0.0, 1.0))
    margin = iv[0] - 100.0
    ok = abs(margin - 0.1 * math.sqrt(200.0)) < 1e-5 and abs(300.0 - iv[1] - margin) < 1e-12
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n_random):
        spec = GapPersistenceSpec(int(rng.integers(0, 6)), float(rng.uniform(0.5, 200.0)),
                                  float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 5.0)),
                                  float(rng.uniform(0.5, 10.0)))
        bigger = GapPersistenceSpec(spec.n, spec.b_field, spec.a_norm + float(rng.uniform(0.0, 1.0)),
                                    spec.diva_norm + float(rng.uniform(0.0, 5.0)), spec.k0)
        if not _nested(gap_persistence_interval(bigger), gap_persistence_interval(spec)):
            violations += 1
    return {"margin": margin, "interval": list(iv), "monotonicity_violations": violations}, ok and violations == 0


def switch_independence(ex, cfg):
    g1 = make_switch(2.2, 2.8)
    g2 = make_switch(1.4, 2.9, smoothness_order=2)
    _, m1 = _conductance_case(ex, "tanh_1_5", g1.a, g1.b, cfg, switch=g1)
    _, m2 = _conductance_case(ex, "tanh_1_5", g2.a, g2.b, cfg, switch=g2)
    switch_diff = max(abs(m1["asymptotic"] - m2["asymptotic"]), abs(m1["spectral_flow"] - m2["spectral_flow"]))
    metrics = {"switch_1": m1, "switch_2": m2, "switch_difference": switch_diff}
    ok = switch_diff < 1e-2
    for name, rev, lo, hi in (("tanh_1_5", "tanh_m1_m5", 2.2, 2.8), ("guide_m1_3", "guide_1_m3", 1.5, 2.5)):
        _, a = _conductance_case(ex, name, lo, hi, cfg)
        _, b = _conductance_case(ex, rev, lo, hi, cfg)
        s = max(abs(a["asymptotic"] + b["asymptotic"]), abs(a["spectral_flow"] + b["spectral_flow"]))
        metrics[f"reversal/{name}"] = {"original": a["spectral_flow"], "reversed": b["spectral_flow"],
                                       "sum": s}
        ok &= s < 1e-2
    return metrics, ok


CRITERIA = (
    (1, "Landau-level oracle", landau_oracle),
    (2, "band bounds", band_bounds),
    (3, "asymptotic limits", asymptotic_limits),
    (4, "barrier quantization", barrier_quantization),
    (5, "guide quantization", guide_quantization),
    (6, "merged-ladder limits", mu_limits),
    (7, "perturbation invariance", perturbation_invariance),
    (8, "scaling law", scaling_law),
    (9, "gap-persistence predicate", gap_persistence),
    (10, "switch independence and field reversal", switch_independence),
)

RUNTIME_LIMITS = {1: 1.0, 2: 30.0}


def run_criterion(number, examples=None, cfg: SolverConfig = SolverConfig()) -> CriterionResult:
    ex = examples if isinstance(examples, ExampleSet) else ExampleSet(examples)
    _, name, fn = CRITERIA[number - 1]
    t0 = time.perf_counter()
    metrics, ok = fn(ex, cfg)
    elapsed = time.perf_counter() - t0
    if number in RUNTIME_LIMITS:
        ok = ok and elapsed < RUNTIME_LIMITS[number]
    return CriterionResult(number, name, bool(ok), metrics, elapsed)


DETERMINISM_SAMPLE = (1, 3, 6, 9)


def determinism_check(results, examples=None, cfg: SolverConfig = SolverConfig()) -> CriterionResult:
    """Re-run a sample of criteria and compare their serialised metrics.

    The full check (two complete runs, byte-compared reports) belongs to
    the test suite; this in-run version catches order or state leaks.
    """
    t0 = time.perf_counter()
    first = {r.number: dumps(r.as_dict()) for r in results}
    mismatched = [n for n in DETERMINISM_SAMPLE
                  if n in first and dumps(run_criterion(n, examples, cfg).as_dict()) != first[n]]
    return CriterionResult(11, "determinism", not mismatched,
                           {"rerun": list(DETERMINISM_SAMPLE), "mismatched": mismatched},
                           time.perf_counter() - t0)


def run_all(examples=None, cfg: SolverConfig = SolverConfig(), progress=None):
    ex = examples if isinstance(examples, ExampleSet) else ExampleSet(examples)
    results = []
    for number, _, _ in CRITERIA:
        res = run_criterion(number, ex, cfg)
        if progress is not None:
            progress(res)
        results.append(res)
    det = determinism_check(results, ex, cfg)
    if progress is not None:
        progress(det)
    results.append(det)
    return results


def acceptance_report(results, cfg: SolverConfig, examples_dir) -> dict:
    return {
        "schema": SCHEMA,
        "config": {"solver": cfg.as_dict(), "examples": sorted(p.name for p in Path(examples_dir).glob("*.yaml"))},
        "criteria": [r.as_dict() for r in results],
        "passed": all(r.passed for r in results),
    }
