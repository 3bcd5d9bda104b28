from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebin_bsa.bell import (
    CONCLUSIVE,
    SIGMA_X,
    AnalyzerMode,
    Classification,
    CoincidenceOutcome,
    average_success,
)
from timebin_bsa.fock import Mode, marginal, measure_number
from timebin_bsa.teleportation import (
    CLONING_LIMIT,
    ExperimentPhases,
    QubitState,
    apply_correction,
    beats_cloning,
    bob_states,
    build_joint_state,
    class_outcomes,
    conditional_bob_state,
    fidelity,
    fringe_scan,
    outcome_probabilities,
    predicted_offsets,
    visibility_to_fidelity,
    wrap,
)

angle = st.floats(0, 2 * math.pi, allow_nan=False)


def test_joint_state_amplitudes_at_zero():
    s = build_joint_state(ExperimentPhases())
    assert len(s.terms) == 4
    assert all(a == pytest.approx(0.5) for a in s.terms.values())


@settings(max_examples=20, deadline=None)
@given(angle, angle)
def test_joint_state_reduced_states(alpha, gamma):
    s = build_joint_state(ExperimentPhases(alpha=alpha, gamma=gamma))
    assert s.squared_norm == pytest.approx(1.0, abs=1e-12)
    bob = marginal(measure_number(s), ["bob"])
    assert bob == pytest.approx({(Mode("bob", 0),): 0.5, (Mode("bob", 1),): 0.5})
    # port a carries the pure qubit: conditioning on Bob's bin leaves it unchanged
    za = QubitState.equator(alpha)
    for j in (0, 1):
        vec = np.zeros(2, complex)
        for p, amp in s.terms.items():
            (ma,) = [m for m in p if m.port == "a"]
            (mb,) = [m for m in p if m.port == "bob"]
            if mb.time_bin == j:
                vec[ma.time_bin] += amp
        assert fidelity(QubitState.from_vector(vec), za) == pytest.approx(1.0, abs=1e-12)


def test_phi_plus_outcome_returns_input_at_zero_delta():
    alpha = 1.234
    bob, p = conditional_bob_state(ExperimentPhases(alpha=alpha), CoincidenceOutcome.cross(1, 1))
    assert fidelity(bob, QubitState.equator(alpha)) == pytest.approx(1.0, abs=1e-12)
    assert p > 0


def test_psi_plus_outcome_is_bit_flipped():
    alpha = 0.8
    zeta = QubitState.equator(alpha)
    flipped = QubitState.from_vector(SIGMA_X @ zeta.vector)
    for o in class_outcomes(Classification.PSI_PLUS):
        bob, _ = conditional_bob_state(ExperimentPhases(alpha=alpha), o)
        assert fidelity(bob, flipped) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(angle, angle, angle, angle)
def test_outcome_probabilities_sum_to_one(a, b, g, d):
    assert sum(outcome_probabilities(ExperimentPhases(a, b, g, d)).values()) == pytest.approx(1.0, abs=1e-12)


def test_zero_probability_outcome():
    with pytest.raises(ValueError):
        conditional_bob_state(ExperimentPhases(), CoincidenceOutcome.same("D1", 3, 3))


def test_phi_plus_correction_at_zero_is_identity():
    q = QubitState.equator(0.4)
    assert fidelity(apply_correction(q, Classification.PHI_PLUS, 0.0), q) == pytest.approx(1.0, abs=1e-15)


def test_corrections_restore_at_fixed_point():
    ph = ExperimentPhases(alpha=1.1, delta=0.7)
    zeta = QubitState.equator(1.1)
    states = bob_states(ph)
    for c in CONCLUSIVE:
        for o in class_outcomes(c):
            bob, _ = states[o]
            assert fidelity(apply_correction(bob, c, ph.delta), zeta) == pytest.approx(1.0, abs=1e-9)


def test_psi_minus_needs_correction():
    ph = ExperimentPhases(alpha=1.1, delta=0.7)
    bob, _ = conditional_bob_state(ph, class_outcomes(Classification.PSI_MINUS)[0])
    assert fidelity(bob, QubitState.equator(1.1)) < 1 - 1e-3


@settings(max_examples=30, deadline=None)
@given(angle, angle, angle, angle)
def test_post_correction_fidelity_random(a, b, g, d):
    ph = ExperimentPhases(a, b, g, d)
    zeta = QubitState.equator(ph.alpha)
    states = bob_states(ph)
    for c in CONCLUSIVE:
        for o in class_outcomes(c):
            bob, _ = states[o]
            assert fidelity(apply_correction(bob, c, ph.delta, ph.gamma), zeta) == pytest.approx(1.0, abs=1e-9)


def test_bob_states_agree_with_single_outcome():
    ph = ExperimentPhases(0.3, 1.0, 2.0, 0.5)
    for o, (state, p) in bob_states(ph).items():
        s2, p2 = conditional_bob_state(ph, o)
        assert p == pytest.approx(p2, abs=1e-15)
        assert fidelity(state, s2) == pytest.approx(1.0, abs=1e-12)


def test_ideal_fringes():
    r = fringe_scan("alpha", fixed=ExperimentPhases(beta=0.5, gamma=0.2, delta=0.9))
    for c in CONCLUSIVE:
        assert r.fits[c].visibility == pytest.approx(1.0, abs=1e-9)
        assert r.fits[c].residual < 1e-9
    assert abs(r.offset_difference(Classification.PSI_PLUS, Classification.PSI_MINUS)) == pytest.approx(math.pi, abs=1e-9)
    expect = wrap(-2 * (0.5 - 0.2 + 0.9))
    assert r.offset_difference(Classification.PHI_PLUS, Classification.PSI_PLUS) == pytest.approx(expect, abs=1e-9)


@pytest.mark.parametrize("variable", ["alpha", "beta"])
def test_offsets_match_closed_form(variable):
    ph = ExperimentPhases(alpha=0.3, beta=1.7, gamma=0.4, delta=2.2)
    r = fringe_scan(variable, fixed=ph)
    pred = predicted_offsets(variable, ph)
    for c in CONCLUSIVE:
        assert wrap(r.offsets[c] - pred[c]) == pytest.approx(0.0, abs=1e-9)


def test_delta_moves_only_phi_plus():
    r1 = fringe_scan("alpha", fixed=ExperimentPhases(delta=0.2))
    r2 = fringe_scan("alpha", fixed=ExperimentPhases(delta=1.0))
    for c in (Classification.PSI_PLUS, Classification.PSI_MINUS):
        assert wrap(r1.offsets[c] - r2.offsets[c]) == pytest.approx(0.0, abs=1e-9)
    assert wrap(r2.offsets[Classification.PHI_PLUS] - r1.offsets[Classification.PHI_PLUS]) == pytest.approx(-1.6, abs=1e-9)


def test_gamma_shift_covariance():
    eps = 0.45
    grid = np.linspace(0, 2 * math.pi, 12, endpoint=False)
    r1 = fringe_scan("beta", grid, ExperimentPhases(alpha=1.0, gamma=0.3))
    r2 = fringe_scan("beta", grid, ExperimentPhases(alpha=1.0 - eps, gamma=0.3 - eps))
    for c in (Classification.PSI_PLUS, Classification.PSI_MINUS):
        assert np.allclose(r1.rates[c], r2.rates[c], atol=1e-12)


@pytest.mark.parametrize("mode", list(AnalyzerMode))
def test_integrated_class_rates_match_success(mode):
    r = fringe_scan("alpha", fixed=ExperimentPhases(beta=0.3, delta=0.6), mode=mode)
    total = sum(r.class_probability[c].mean() for c in CONCLUSIVE)
    # the input is uniform over the Bell basis, so the total equals the average success
    assert total == pytest.approx(average_success(mode), abs=1e-9)
    # Bob's central bin on one output port is (1 + cos)/4 of his photon
    for c in CONCLUSIVE:
        assert r.rates[c].mean() == pytest.approx(r.class_probability[c].mean() / 4, abs=1e-9)


def test_scan_variable_validation():
    with pytest.raises(ValueError):
        fringe_scan("gamma")


def test_visibility_to_fidelity():
    assert visibility_to_fidelity(0.34) == pytest.approx(0.67, abs=1e-12)
    assert visibility_to_fidelity(1.0) == 1.0
    assert visibility_to_fidelity(0.83) == pytest.approx(0.915, abs=1e-12)
    assert beats_cloning(visibility_to_fidelity(0.83))
    assert not beats_cloning(visibility_to_fidelity(0.34))
    assert CLONING_LIMIT == pytest.approx(5 / 6)
    with pytest.raises(ValueError):
        visibility_to_fidelity(1.2)


def test_qubit_state_requires_norm():
    with pytest.raises(ValueError):
        QubitState(1.0, 1.0)
    with pytest.raises(ValueError):
        QubitState.from_vector([0, 0])


def test_phases_wrap():
    ph = ExperimentPhases(alpha=-0.5, delta=7.0)
    assert ph.alpha == pytest.approx(2 * math.pi - 0.5)
    assert ph.delta == pytest.approx(7.0 - 2 * math.pi)
