import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from iwatsuka.conductance import compute_conductance
from iwatsuka.errors import ConfigurationError, ExtrapolationError, PreconditionError
from iwatsuka.fiber import solve_slice
from iwatsuka.perturbation import (
    CompactFieldPerturbation,
    GapPersistenceSpec,
    PerturbedPotential,
    apply_field_perturbation,
    gap_persistence_interval,
    invariance_check,
    perturbation_from_config,
    perturbation_to_config,
    persistence_spec_for,
    strip_zero_check,
)
from iwatsuka.profiles import FieldProfile, PotentialBeta, make_switch

BASE = PotentialBeta(FieldProfile.tanh(1.0, 5.0))


def test_zero_perturbation_is_identity():
    pert = CompactFieldPerturbation.zero()
    pb = apply_field_perturbation(BASE, pert)
    xs = np.linspace(-5, 5, 21)
    np.testing.assert_array_equal(pb(xs), BASE(xs))


def test_zero_flux_bump_telescopes():
    pert = CompactFieldPerturbation.zero_flux_bump(2.5, radius=1.5, center=0.3)
    assert pert.total_flux == 0.0
    total, _ = quad(lambda x: float(pert.field(x)), *pert.support, points=[0.3], epsabs=1e-13, limit=200)
    assert abs(total) < 1e-12
    pb = apply_field_perturbation(BASE, pert)
    outside = np.array([-5.0, -1.2, 1.8, 9.0])
    np.testing.assert_array_equal(pb(outside), BASE(outside))


def test_gaussian_flux_oracle():
    pert = CompactFieldPerturbation.gaussian_truncated(1.0, radius=2.0)
    pb = apply_field_perturbation(BASE, pert)
    for x in (2.0, 3.0, 40.0):
        np.testing.assert_allclose(float(pb(x) - BASE(x)), 1.0, atol=1e-10)
    # inside the support the antiderivative matches adaptive quadrature
    for x in (-1.3, 0.0, 0.7, 1.9):
        ref, _ = quad(lambda s: float(pert.field(s)), -2.0, x, epsabs=1e-14, epsrel=1e-13)
        np.testing.assert_allclose(float(pert.antiderivative(x)), ref, atol=1e-10)
    assert np.all(pb(np.array([-2.0, -3.0])) == BASE(np.array([-2.0, -3.0])))


def test_tabulated_perturbation():
    xs = np.linspace(-1, 1, 21)
    bs = np.sin(np.pi * (xs + 1)) ** 2
    bs[[0, -1]] = 0.0
    pert = CompactFieldPerturbation.tabulated(np.column_stack([xs, bs]))
    ref, _ = quad(lambda s: float(pert.field(s)), -1, 1, epsabs=1e-14)
    np.testing.assert_allclose(pert.total_flux, ref, atol=1e-10)
    assert float(pert.field(1.5)) == 0.0
    with pytest.raises(ConfigurationError):
        CompactFieldPerturbation.tabulated([[-1, 0.5], [0, 1], [1, 0]])


def test_vanishes_outside_support():
    for pert in (CompactFieldPerturbation.zero_flux_bump(3.0), CompactFieldPerturbation.gaussian_truncated(-2.0)):
        out = np.concatenate([np.linspace(-10, -1, 50), np.linspace(1, 10, 50)])
        assert np.all(pert.field(out) == 0.0)


def test_support_outside_tabulated_range():
    xs = np.linspace(-3, 3, 13)
    pb = PotentialBeta(FieldProfile.tabulated(np.column_stack([xs, 2 + np.tanh(xs)])))
    with pytest.raises(ExtrapolationError):
        apply_field_perturbation(pb, CompactFieldPerturbation.gaussian_truncated(1.0, radius=4.0))


def test_gauge_content_invariance():
    # same field, two declared supports: only the anchor of beta differs,
    # and that is a constant k-shift (here the flux is zero, so nothing)
    a = CompactFieldPerturbation.zero_flux_bump(2.0, radius=1.0)
    xs = np.linspace(-1.0, 1.0, 41)
    samples = np.column_stack([np.concatenate([[-2.0], xs, [2.0]]),
                               np.concatenate([[0.0], a.field(xs), [0.0]])])
    b = CompactFieldPerturbation.tabulated(samples)
    pa, pb = apply_field_perturbation(BASE, a), apply_field_perturbation(BASE, b)
    q = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(pa(q), pb(q), atol=2e-3)


def test_flux_shift_is_k_translation():
    c = 0.8
    shifted = PerturbedPotential(BASE, CompactFieldPerturbation.gaussian_truncated(c, radius=1.0, center=-60.0))
    # right of the support beta_tilde = beta + c, so E_j(k; beta + c) = E_j(k - c; beta)
    for k in (5.0, 12.0):
        np.testing.assert_allclose(solve_slice(shifted, k + c, 2).energies, solve_slice(BASE, k, 2).energies,
                                   rtol=1e-6)


def test_invariance_examples():
    g = make_switch(2.2, 2.8)
    rep = invariance_check(BASE, CompactFieldPerturbation.gaussian_truncated(0.7), g)
    assert rep.passed
    assert abs(rep.after.spectral_flow.value - 1.0) < 1e-2
    zero = invariance_check(BASE, CompactFieldPerturbation.zero(), g)
    assert zero.difference == 0.0


def test_invariance_guide():
    g = make_switch(2.5, 3.5)
    rep = invariance_check(PotentialBeta(FieldProfile.tanh(-2.0, 2.0)),
                           CompactFieldPerturbation.zero_flux_bump(1.5), g, tol=2e-2)
    assert rep.passed
    assert abs(rep.after.asymptotic.value + 2.0) < 2e-2


def test_strip_examples():
    g = make_switch(1.0, 2.0)
    assert strip_zero_check(4.0, CompactFieldPerturbation.zero(), g).value == 0.0
    rep = strip_zero_check(4.0, CompactFieldPerturbation.gaussian_truncated(2.0), g)
    assert abs(rep.value) < 1e-3 and rep.passed
    rep = strip_zero_check(4.0, CompactFieldPerturbation.gaussian_truncated(-12.0), g, tol=1e-2)
    assert rep.passed
    with pytest.raises(PreconditionError):
        strip_zero_check(4.0, CompactFieldPerturbation.zero(), make_switch(3.0, 4.5))


def test_field_reversing_bump_really_reverses():
    pert = CompactFieldPerturbation.gaussian_truncated(-12.0)
    xs = np.linspace(-1, 1, 201)
    assert np.min(4.0 + pert.field(xs)) < 0
    pert = CompactFieldPerturbation.gaussian_truncated(-6.0)
    assert np.min(BASE.field(xs) + pert.field(xs)) < 0


def test_gap_persistence_examples():
    assert gap_persistence_interval(GapPersistenceSpec(1, 2.0, 0.0, 0.0)) == (2.0, 6.0)
    spec = GapPersistenceSpec(1, 100.0, 0.1, 0.0, 1.0)
    np.testing.assert_allclose(spec.d_n, 0.1 * math.sqrt(200.0), rtol=1e-12)
    lo, hi = gap_persistence_interval(spec)
    np.testing.assert_allclose([lo, hi], [101.41421356, 298.58578644], atol=1e-5)
    assert gap_persistence_interval(GapPersistenceSpec(1, 2.0, 100.0)) is None
    lo, hi = gap_persistence_interval(GapPersistenceSpec(0, 4.0, 0.01, 0.0, 8.0))
    assert lo == -math.inf and hi == pytest.approx(4.0 - 8 * 0.01 * 2.0)
    assert GapPersistenceSpec(2, 1.0, 0.0, 0.3).d_n == 0.3


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(0, 6),
    b=st.floats(0.1, 500),
    a=st.floats(0, 2),
    da=st.floats(0, 2),
    dv=st.floats(0, 3),
    ddv=st.floats(0, 3),
    k0=st.floats(0.1, 10),
)
def test_gap_persistence_monotone(n, b, a, da, dv, ddv, k0):
    small = gap_persistence_interval(GapPersistenceSpec(n, b, a, dv, k0))
    big = gap_persistence_interval(GapPersistenceSpec(n, b, a + da, dv + ddv, k0))
    if big is not None:
        assert small is not None
        assert small[0] <= big[0] and big[1] <= small[1]


def test_persistence_spec_from_perturbation():
    pert = CompactFieldPerturbation.gaussian_truncated(0.5)
    spec = persistence_spec_for(pert, 1, 10.0)
    np.testing.assert_allclose(spec.a_norm, 0.5, rtol=1e-6)
    assert spec.diva_norm == 0.0 and spec.k0 == 8.0


def test_config_roundtrip():
    for pert in (CompactFieldPerturbation.zero_flux_bump(2.0, 1.5),
                 CompactFieldPerturbation.gaussian_truncated(0.7, 1.0, width=0.2)):
        assert perturbation_from_config(perturbation_to_config(pert)) == pert
    p = perturbation_from_config({"kind": "gaussian_truncated", "radius": 2.0, "amplitude": 1.0})
    assert p.support == (-2.0, 2.0)
    with pytest.raises(ConfigurationError):
        perturbation_from_config({"kind": "square"})
    with pytest.raises(ConfigurationError):
        perturbation_from_config({"support": [0, 1]})


def test_perturbed_conductance_matches_unperturbed_for_mixed_guide():
    pb = PotentialBeta(FieldProfile.tanh(-1.0, 3.0))
    pert = CompactFieldPerturbation.gaussian_truncated(1.3, radius=1.5)
    rep = compute_conductance(apply_field_perturbation(pb, pert), 1.5, 2.5)
    assert abs(rep.spectral_flow.value + 1) < 1e-2 and abs(rep.asymptotic.value + 1) < 1e-2
