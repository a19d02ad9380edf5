import math

import numpy as np
import pytest

from iwatsuka.bands import (
    BandTable,
    asymptotic_levels,
    bands_from_csv,
    bands_to_csv,
    default_k_grid,
    default_k_range,
    estimate_limits,
    fmt,
    merged_oscillator_levels,
    spectrum_bands,
    sweep_bands,
)
from iwatsuka.errors import ConfigurationError, InconclusiveLimitError, RegimeError
from iwatsuka.fiber import SolverConfig
from iwatsuka.profiles import FieldProfile, PotentialBeta

CFG = SolverConfig()


def test_constant_band_is_flat():
    pb = PotentialBeta(FieldProfile.constant(3.0))
    table = sweep_bands(pb, np.linspace(-10, 10, 15), 1)
    np.testing.assert_allclose(table.bands[0], 3.0, atol=1e-6)


def test_tanh_band_bounds_and_ranks():
    pb = PotentialBeta(FieldProfile.tanh(1.0, 5.0))
    table = sweep_bands(pb, default_k_grid(pb, 40.0, 60), 4)
    eps = 10 * CFG.tol
    for j in range(4):
        assert table.bands[j].min() >= (2 * j + 1) * 1.0 - eps
        assert table.bands[j].max() <= (2 * j + 1) * 5.0 + eps
    assert np.all(np.diff(table.bands, axis=0) > 0)


def test_reversed_traversal_gives_same_table():
    pb = PotentialBeta(FieldProfile.tanh(-1.0, 3.0))
    k = np.linspace(-4, 8, 13)
    a = sweep_bands(pb, k, 3)
    rev = [sweep_bands(pb, [kk], 3).bands[:, 0] for kk in k[::-1]]
    np.testing.assert_array_equal(a.bands, np.array(rev[::-1]).T)


def test_parallel_sweep_matches_serial():
    pb = PotentialBeta(FieldProfile.tanh(1.0, 3.0))
    k = np.linspace(-6, 6, 9)
    a = sweep_bands(pb, k, 3)
    b = sweep_bands(pb, k, 3, CFG.with_(workers=3))
    np.testing.assert_array_equal(a.bands, b.bands)


def test_sweep_rejects_bad_grid():
    pb = PotentialBeta(FieldProfile.constant(1.0))
    with pytest.raises(ConfigurationError):
        sweep_bands(pb, [1.0, 0.0], 1)


def test_limits_iwatsuka():
    lim = estimate_limits(PotentialBeta(FieldProfile.tanh(1.0, 5.0)), 4)
    np.testing.assert_allclose(lim.limit_minus, [1, 3, 5, 7], atol=1e-3)
    np.testing.assert_allclose(lim.limit_plus, [5, 15, 25, 35], atol=1e-3)
    assert np.all(lim.residual_minus < 1e-3)


def test_limits_symmetric_guide():
    lim = estimate_limits(PotentialBeta(FieldProfile.tanh(-2.0, 2.0)), 4)
    assert np.all(lim.divergent_minus)
    np.testing.assert_allclose(lim.limit_plus, [2, 2, 6, 6], atol=1e-2)
    # the divergence certificate is a monotone probe sequence
    e1 = [e[0] for _, e in lim.probes_minus]
    assert all(b > a for a, b in zip(e1, e1[1:]))


def test_limits_reversed_guide():
    lim = estimate_limits(PotentialBeta(FieldProfile.tanh(2.0, -2.0)), 2)
    assert np.all(lim.divergent_plus)
    np.testing.assert_allclose(lim.limit_minus, [2, 2], atol=1e-2)


def test_inconclusive_limit():
    with pytest.raises(InconclusiveLimitError):
        estimate_limits(PotentialBeta(FieldProfile.tanh(1.0, 5.0)), 2, CFG.with_(probe_budget=1))


def test_merged_levels():
    np.testing.assert_array_equal(merged_oscillator_levels(-1, 1, 4), [1, 1, 3, 3])
    np.testing.assert_array_equal(merged_oscillator_levels(-1, 2, 6), [1, 2, 3, 5, 6, 7])
    with pytest.raises(RegimeError):
        merged_oscillator_levels(1, 2, 3)
    lim = estimate_limits(PotentialBeta(FieldProfile.tanh(-1.0, 2.0)), 6)
    np.testing.assert_allclose(lim.limit_plus, merged_oscillator_levels(-1, 2, 6), atol=1e-2)


def test_asymptotic_levels_cover_all_sign_patterns():
    np.testing.assert_array_equal(asymptotic_levels(1, 5, -1, 2), [1, 3])
    np.testing.assert_array_equal(asymptotic_levels(1, 5, 1, 2), [5, 15])
    np.testing.assert_array_equal(asymptotic_levels(-1, -5, -1, 2), [5, 15])
    np.testing.assert_array_equal(asymptotic_levels(-1, 3, 1, 3), [1, 3, 3])
    assert np.all(np.isinf(asymptotic_levels(-1, 3, -1, 3)))


def test_spectrum_bands_examples():
    assert spectrum_bands(1, 2, 3) == [(1, 2), (3, 10)]
    assert spectrum_bands(1, 3) == [(1, math.inf)]
    assert spectrum_bands(2, 2, 3) == [(2, 2), (6, 6), (10, 10)]
    full = spectrum_bands(1, 1.5)
    assert full[-1][1] == math.inf
    # gaps before the ray are genuine gaps between consecutive bands
    for (a, b), (c, d) in zip(full, full[1:]):
        assert b < c
    with pytest.raises(RegimeError):
        spectrum_bands(-1, 2, 3)


def test_gap_visibility():
    # bands inside I=[2.2,2.8] connect a limit below I to one above it
    pb = PotentialBeta(FieldProfile.tanh(1.0, 5.0))
    table = sweep_bands(pb, default_k_grid(pb, 15.0, 80), 3)
    lim = estimate_limits(pb, 3)
    for j in range(3):
        if np.any((table.bands[j] > 2.2) & (table.bands[j] < 2.8)):
            lo, hi = sorted((lim.limit_minus[j], lim.limit_plus[j]))
            assert lo < 2.2 and hi > 2.8


def test_non_monotone_band_is_handled():
    # a field-reversing bump gives bands with interior extrema
    from iwatsuka.perturbation import CompactFieldPerturbation, apply_field_perturbation

    base = PotentialBeta(FieldProfile.tanh(1.0, 5.0))
    pb = apply_field_perturbation(base, CompactFieldPerturbation.gaussian_truncated(-6.0))
    table = sweep_bands(pb, np.linspace(-10, 25, 120), 2)
    d = np.diff(table.bands[0])
    assert np.any(d > 0) and np.any(d < 0)
    assert np.all(table.bands[0] >= 0)


def test_csv_roundtrip_and_header():
    table = BandTable(np.array([-1.0, 0.0, 2.5]), np.array([[1.0, 1.5, 2.0], [3.0, 3.25, 1 / 3]]))
    text = bands_to_csv(table, header="config line")
    lines = text.splitlines()
    assert lines[0] == "# config line"
    assert lines[1] == "k,E_1,E_2"
    assert lines[-1] == "2.5,2,0.333333333333"
    back = bands_from_csv(text)
    np.testing.assert_allclose(back.bands, table.bands, rtol=1e-12)
    with pytest.raises(ConfigurationError):
        bands_from_csv("x,E_1\n1,2\n")


def test_fmt():
    assert fmt(math.pi) == "3.14159265359"
    assert fmt(-0.0) == "0"
    assert fmt(math.inf) == "inf"
    assert fmt(1e-20) == "1e-20"


def test_default_k_range_tabulated_is_clipped():
    xs = np.linspace(-30, 30, 241)
    pb = PotentialBeta(FieldProfile.tabulated(np.column_stack([xs, 3 + 2 * np.tanh(xs)])))
    lo, hi = default_k_range(pb, 20.0)
    assert float(pb(-30.0)) < lo < hi < float(pb(30.0))
    sweep_bands(pb, np.linspace(lo, hi, 5), 2)
    with pytest.raises(ConfigurationError):
        default_k_range(pb, 1e5)
