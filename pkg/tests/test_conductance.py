import numpy as np
import pytest

from iwatsuka.bands import AsymptoticLimits, BandTable, estimate_limits, sweep_bands
from iwatsuka.conductance import (
    ConductanceResult,
    admissible_gap_indices,
    band_table_for_switch,
    bands_needed,
    cells_to_refine,
    compute_conductance,
    conductance_asymptotic,
    conductance_spectral_flow,
    predicted_conductance,
)
from iwatsuka.errors import InsufficientBandsError, InvalidIntervalError, NotInGapError, RangeTooShortError
from iwatsuka.fiber import SolverConfig
from iwatsuka.profiles import FieldProfile, PotentialBeta, make_switch


def _pb(bm, bp):
    return PotentialBeta(FieldProfile.tanh(bm, bp))


def test_gap_indices_examples():
    s = admissible_gap_indices(1, 5, 2.2, 2.8)
    assert (s.n_minus, s.n_plus) == (1, 0)
    s = admissible_gap_indices(-2, 2, 2.5, 3.5)
    assert (s.n_minus, s.n_plus) == (1, 1)
    with pytest.raises(NotInGapError) as info:
        admissible_gap_indices(1, 5, 0.5, 1.5)
    assert info.value.level == 1.0 and info.value.side == "-"
    with pytest.raises(InvalidIntervalError):
        admissible_gap_indices(1, 5, 2.0, 2.0)


def test_predicted_examples():
    assert predicted_conductance(admissible_gap_indices(1, 5, 2.2, 2.8), 1, 5) == 1
    assert predicted_conductance(admissible_gap_indices(-2, 2, 2.5, 3.5), -2, 2) == -2
    assert predicted_conductance(admissible_gap_indices(-1, 3, 1.5, 2.5), -1, 3) == -1
    assert predicted_conductance(admissible_gap_indices(-1, -5, 2.2, 2.8), -1, -5) == -1


def test_result_invariants():
    r = ConductanceResult.from_bands([0.6, 0.3, 0.2], "asymptotic")
    assert r.value == pytest.approx(1.1)
    assert r.nearest_integer == 1
    assert r.residual <= 0.5


def test_asymptotic_examples():
    g = make_switch(2.2, 2.8)
    r = conductance_asymptotic(estimate_limits(_pb(1, 5), 1), g)
    assert abs(r.value - 1.0) < 1e-3
    g = make_switch(2.5, 3.5)
    lim = estimate_limits(_pb(-2, 2), bands_needed(-2, 2, 3.5))
    r = conductance_asymptotic(lim, g)
    assert abs(r.value + 2.0) < 1e-2
    np.testing.assert_allclose(r.per_band[:2], [-1, -1], atol=1e-6)


def test_asymptotic_no_crossing_is_zero():
    g = make_switch(0.3, 0.7)
    r = conductance_asymptotic(estimate_limits(_pb(1, 5), 1), g)
    assert r.value == 0.0


def test_truncation_certificate():
    g = make_switch(4.2, 4.8)
    lim = estimate_limits(_pb(1, 9), 1)
    with pytest.raises(InsufficientBandsError):
        conductance_asymptotic(lim, g)
    assert bands_needed(1, 9, 4.8) == 2
    # guides: the merged ladder {2,2,6,6,...} needs 2 bands below 3.5
    assert bands_needed(-2, 2, 3.5) == 2


def test_spectral_flow_constant_field_is_exactly_zero():
    pb = PotentialBeta(FieldProfile.constant(2.0))
    table = sweep_bands(pb, np.linspace(-5, 5, 11), 2)
    r = conductance_spectral_flow(table, make_switch(2.5, 3.5))
    assert r.value == 0.0


def test_spectral_flow_range_too_short():
    pb = _pb(1, 5)
    table = sweep_bands(pb, np.linspace(-0.5, 3.0, 5), 1)
    with pytest.raises(RangeTooShortError):
        conductance_spectral_flow(table, make_switch(2.2, 2.8))


def test_both_methods_barrier():
    rep = compute_conductance(_pb(1, 5), 2.2, 2.8)
    assert rep.predicted == 1
    assert abs(rep.asymptotic.value - 1) < 1e-3
    assert abs(rep.spectral_flow.value - 1) < 1e-3
    assert rep.methods_agree < 2e-3


def test_mixed_guide():
    rep = compute_conductance(_pb(-1, 3), 1.5, 2.5)
    assert rep.predicted == -1
    assert abs(rep.spectral_flow.value + 1) < 1e-2
    assert abs(rep.asymptotic.value + 1) < 1e-2


def test_per_band_telescoping():
    pb = _pb(1, 9)
    g = make_switch(4.2, 4.8)
    table = band_table_for_switch(pb, g, 2)
    flow = conductance_spectral_flow(table, g)
    ends = g(table.bands[:, 0]) - g(table.bands[:, -1])
    np.testing.assert_allclose(flow.per_band, ends, atol=1e-4)


def test_refinement_flags_only_cells_meeting_support():
    k = np.linspace(0, 1, 6)
    bands = np.array([[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]])
    table = BandTable(k, bands)
    g = make_switch(2.1, 2.9)
    cells = cells_to_refine(table, g, 0.5)
    np.testing.assert_array_equal(cells, [2])


def test_refinement_convergence_is_second_order():
    pb = _pb(1, 5)
    g = make_switch(2.2, 2.8)
    errs = []
    for tol in (0.04, 0.02, 0.01):
        table = band_table_for_switch(pb, g, 1, SolverConfig(refine_tol=tol))
        errs.append(abs(conductance_spectral_flow(table, g).value - 1.0))
    assert errs[0] / errs[1] > 2.5 and errs[1] / errs[2] > 2.5


def test_limits_with_unconverged_plateau_rejected():
    from iwatsuka.errors import ConvergenceError

    lim = AsymptoticLimits(1.0, 5.0, np.array([1.0]), np.array([5.0]), np.array([0.5]), np.array([0.0]))
    with pytest.raises(ConvergenceError):
        conductance_asymptotic(lim, make_switch(0.3, 1.5 - 0.1))
