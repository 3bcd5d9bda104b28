from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebin_bsa.bell import AnalyzerMode, BellKind, CoincidenceOutcome, bell_state, outcome_distribution
from timebin_bsa.detection import (
    DetectorModel,
    binomial_sigma,
    estimate_visibility,
    net_visibility,
    observed_distribution,
    sample_outcomes,
    subtract_background,
)

X = np.linspace(0, 2 * math.pi, 24, endpoint=False)


def phi_plus_row():
    return outcome_distribution(bell_state(BellKind.PHI_PLUS))


def test_ideal_sampling_of_phi_plus_central_entry():
    rec = sample_outcomes(phi_plus_row(), shots=10**6, seed=7)
    f = rec.frequency(CoincidenceOutcome.cross(1, 1))
    assert abs(f - 0.5) <= 5 * binomial_sigma(0.5, 10**6)
    assert sum(rec.counts.values()) == 10**6


def test_zero_shots_rejected():
    with pytest.raises(ValueError):
        sample_outcomes(phi_plus_row(), shots=0)


def test_invalid_probabilities():
    with pytest.raises(ValueError):
        sample_outcomes({(("D1", 0),): -0.5}, shots=10)
    with pytest.raises(ValueError):
        sample_outcomes({(("D1", 0),): 0.8, (("D2", 0),): 0.8}, shots=10)
    with pytest.raises(ValueError):
        DetectorModel(efficiency=1.5)
    with pytest.raises(ValueError):
        DetectorModel(dark_count=1.0)


def test_same_seed_same_record():
    det = DetectorModel(0.7, 1e-3)
    a = sample_outcomes(phi_plus_row(), det, 200_000, seed=3)
    b = sample_outcomes(phi_plus_row(), det, 200_000, seed=3)
    c = sample_outcomes(phi_plus_row(), det, 200_000, seed=4)
    assert a == b
    assert a.counts != c.counts


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_worker_count_does_not_change_counts(workers):
    det = DetectorModel(0.5, 1e-3, AnalyzerMode.DEAD_TIME)
    one = sample_outcomes(phi_plus_row(), det, 300_000, seed=11, workers=1)
    many = sample_outcomes(phi_plus_row(), det, 300_000, seed=11, workers=workers)
    assert one.counts == many.counts


def test_statistical_soundness_over_seeds():
    det = DetectorModel(0.8, 2e-3)
    exact, _ = observed_distribution(phi_plus_row(), det)
    shots, trials = 20_000, 100
    # the binomial-sigma check needs an expected count of a few events;
    # rarer click tuples are checked pooled
    common = {k: p for k, p in exact.items() if p * shots >= 5}
    rare = [k for k in exact if k not in common]
    p_rare = sum(exact[k] for k in rare)
    passed = 0
    for seed in range(trials):
        rec = sample_outcomes(phi_plus_row(), det, shots, seed=seed)
        ok = all(abs(rec.frequency(k) - p) <= 5 * binomial_sigma(p, shots) for k, p in common.items())
        f_rare = sum(rec.frequency(k) for k in rare)
        ok &= abs(f_rare - p_rare) <= 5 * binomial_sigma(p_rare, shots)
        ok &= all(k in exact for k in rec.counts)
        passed += ok
    assert passed >= 99


def test_efficiency_thinning_exact():
    det = DetectorModel(0.6)
    total, acc = observed_distribution({CoincidenceOutcome.cross(1, 1): 1.0}, det)
    assert total[(("D1", 1), ("D2", 1))] == pytest.approx(0.36, abs=1e-15)
    assert total[(("D1", 1),)] == pytest.approx(0.24, abs=1e-15)
    assert sum(total.values()) == pytest.approx(1 - 0.16, abs=1e-15)
    assert acc == {}


def test_dark_counts_accidental_split():
    d = 1e-2
    total, acc = observed_distribution({}, DetectorModel(1.0, d))
    # vacuum input: every record comes from dark counts
    assert total == pytest.approx(acc)
    assert total[(("D1", 0),)] == pytest.approx(d * (1 - d) ** 5, rel=1e-12)


def test_dead_time_keeps_earliest_click():
    det = DetectorModel(mode=AnalyzerMode.DEAD_TIME)
    total, _ = observed_distribution({CoincidenceOutcome.same("D1", 0, 2): 1.0}, det)
    assert total == pytest.approx({(("D1", 0),): 1.0})
    rec = sample_outcomes({CoincidenceOutcome.same("D1", 0, 2): 1.0}, det, 1000, seed=1)
    assert rec.counts == {(("D1", 0),): 1000}


def test_gates_drop_photons():
    det = DetectorModel(gates={"D1": (1,), "D2": (0, 1, 2)})
    total, _ = observed_distribution({CoincidenceOutcome.cross(0, 0): 1.0}, det)
    assert total == pytest.approx({(("D2", 0),): 1.0})


def test_monte_carlo_matches_exact_channel():
    det = DetectorModel(0.4, 5e-3)
    exact, _ = observed_distribution(phi_plus_row(), det)
    shots = 400_000
    rec = sample_outcomes(phi_plus_row(), det, shots, seed=5, workers=4)
    for k, p in exact.items():
        assert abs(rec.frequency(k) - p) <= 5 * binomial_sigma(p, shots) + 1e-12


# --- fitting -------------------------------------------------------------------


def test_fit_half_visibility():
    f = estimate_visibility(X, 1 + 0.5 * np.cos(X))
    assert f.visibility == pytest.approx(0.5, abs=1e-9)
    assert f.phase == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.1, 10.0), st.floats(-math.pi, math.pi))
def test_constant_background_closed_form(b, scale, phi):
    rates = scale * (1 + np.cos(X + phi)) + b * scale
    raw, net = net_visibility(X, rates, b * scale)
    assert raw.visibility == pytest.approx(1 / (1 + b), rel=1e-9)
    assert net.visibility == pytest.approx(1.0, abs=1e-9)
    assert net.visibility >= raw.visibility - 1e-12


def test_background_equal_to_baseline_halves_visibility():
    raw, net = net_visibility(X, (1 + np.cos(X)) + 1.0, 1.0)
    assert raw.visibility == pytest.approx(0.5, abs=1e-9)
    assert net.visibility == pytest.approx(1.0, abs=1e-9)


def test_zero_accidentals_gives_same_fit():
    raw, net = net_visibility(X, 3 + np.sin(X), 0.0)
    assert raw.visibility == pytest.approx(net.visibility, abs=1e-15)


def test_flat_data_flagged():
    f = estimate_visibility(X, np.full_like(X, 2.0))
    assert f.flat and f.visibility == 0.0


def test_fit_grid_errors():
    with pytest.raises(ValueError):
        estimate_visibility(X[:4], np.ones(4))
    with pytest.raises(ValueError):
        estimate_visibility(np.linspace(0, 2, 10), np.ones(10))


def test_negative_subtraction_clamped(caplog):
    with caplog.at_level(logging.WARNING):
        out = subtract_background([1.0, 0.5], 0.8)
    assert list(out) == [pytest.approx(0.2), 0.0]
    assert "clamped" in caplog.text


def test_raw_visibility_non_increasing_in_dark_counts():
    from timebin_bsa.noise import NoiseModel, noisy_fringe_scan

    vis = [noisy_fringe_scan(NoiseModel(dark_count=d), points=8).mean_raw for d in (0.0, 1e-4, 1e-3)]
    assert vis[0] >= vis[1] >= vis[2]
