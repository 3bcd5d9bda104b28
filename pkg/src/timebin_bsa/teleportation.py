"""Teleportation of a time-bin qubit through the three-state analyzer.

Alice's qubit sits on port ``a``; the entangled pair is shared between port
``b`` (to the analyzer) and port ``bob``.  Bob analyzes with his own
unbalanced interferometer and keeps only central-bin detections on
``bob:d`` (detector D3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .bell import (
    CONCLUSIVE,
    AnalyzerMode,
    Classification,
    CoincidenceOutcome,
    all_outcomes,
    classify,
    correction_unitary,
    outcome_of_pattern,
)
from .detection import FringeFit, estimate_visibility
from .fock import Mode, PhotonicState, apply_transform, condition, make_state, measure_number, superpose
from .optics import bsa_interferometer, qubit_analyzer

TWO_PI = 2 * math.pi
CLONING_LIMIT = 5 / 6

BOB = "bob"
BOB_DETECTOR_PORT = "bob:d"
BOB_CENTRAL_BIN = 1


def wrap(phi: float) -> float:
    """Angle mapped to (-pi, pi]."""
    w = math.remainder(phi, TWO_PI)
    return math.pi if math.isclose(w, -math.pi, abs_tol=1e-15) else w


@dataclass(frozen=True)
class ExperimentPhases:
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)) % TWO_PI)

    def replace(self, **kw) -> ExperimentPhases:
        d = {k: getattr(self, k) for k in ("alpha", "beta", "gamma", "delta")}
        d.update(kw)
        return ExperimentPhases(**d)


@dataclass(frozen=True)
class QubitState:
    """Time-bin qubit ``c0|0> + c1|1>``."""

    c0: complex
    c1: complex

    def __post_init__(self):
        n = abs(self.c0) ** 2 + abs(self.c1) ** 2
        if not math.isclose(n, 1.0, abs_tol=1e-12):
            raise ValueError(f"qubit not normalized (norm^2 = {n})")

    @classmethod
    def from_vector(cls, v: Sequence[complex]) -> QubitState:
        v = np.asarray(v, dtype=complex)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero vector")
        v = v / n
        return cls(complex(v[0]), complex(v[1]))

    @classmethod
    def equator(cls, phase: float) -> QubitState:
        s = 1 / math.sqrt(2)
        return cls(s, s * np.exp(1j * phase))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c0, self.c1], dtype=complex)

    def overlap(self, other: QubitState) -> complex:
        return complex(np.vdot(self.vector, other.vector))


def fidelity(a: QubitState, b: QubitState) -> float:
    return abs(a.overlap(b)) ** 2


def visibility_to_fidelity(v: float) -> float:
    if not 0.0 <= v <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    return (1 + v) / 2


def beats_cloning(f: float) -> bool:
    return f > CLONING_LIMIT


def build_joint_state(phases: ExperimentPhases) -> PhotonicState:
    """Alice's qubit on ``a`` times the pair ``(|00> + e^{i gamma}|11>)/sqrt 2`` on (b, bob)."""
    zeta = QubitState.equator(phases.alpha)
    s = 1 / math.sqrt(2)
    comps = []
    for i, ci in enumerate(zeta.vector):
        for j, cj in enumerate((s, s * np.exp(1j * phases.gamma))):
            modes = [(Mode("a", i), 1), (Mode("b", j), 1), (Mode(BOB, j), 1)]
            comps.append((ci * cj, make_state(modes)))
    return superpose(comps)


@lru_cache(maxsize=64)
def _bsa(delta: float):
    return bsa_interferometer(delta)


@lru_cache(maxsize=64)
def _bob_analyzer(beta: float):
    return qubit_analyzer(BOB, beta, out_ports=(BOB_DETECTOR_PORT, "bob:aux"), input_bins=(0, 1))


def after_analyzer(phases: ExperimentPhases) -> PhotonicState:
    return apply_transform(build_joint_state(phases), _bsa(phases.delta), passthrough=True)


def class_outcomes(c: Classification, mode: AnalyzerMode = AnalyzerMode.IDEAL) -> list[CoincidenceOutcome]:
    return [o for o in all_outcomes() if classify(o, mode) is c]


def conditional_bob_state(phases: ExperimentPhases, outcome: CoincidenceOutcome) -> tuple[QubitState, float]:
    """Bob's normalized qubit given ``outcome``, and the outcome probability."""
    rest = condition(after_analyzer(phases), ("e", "f"), outcome.pattern())
    prob = rest.squared_norm
    if prob <= 1e-15:
        raise ValueError(f"outcome {outcome!r} has zero probability")
    vec = np.zeros(2, dtype=complex)
    for pattern, amp in rest.terms.items():
        (m,) = pattern
        vec[m.time_bin] += amp
    return QubitState.from_vector(vec), prob


def bob_states(phases: ExperimentPhases) -> dict[CoincidenceOutcome, tuple[QubitState, float]]:
    """``conditional_bob_state`` for every possible outcome, from one propagation."""
    out = after_analyzer(phases)
    result = {}
    for o in all_outcomes():
        rest = condition(out, ("e", "f"), o.pattern())
        if rest.squared_norm <= 1e-15:
            continue
        vec = np.zeros(2, dtype=complex)
        for (m,), amp in rest.terms.items():
            vec[m.time_bin] += amp
        result[o] = (QubitState.from_vector(vec), rest.squared_norm)
    return result


def outcome_probabilities(phases: ExperimentPhases) -> dict[CoincidenceOutcome, float]:
    dist = {o: 0.0 for o in all_outcomes()}
    for pattern, p in measure_number(after_analyzer(phases)).items():
        dist[outcome_of_pattern(pattern)] += p
    return dist


def pair_frame(gamma: float) -> np.ndarray:
    """Phase the shared pair imprints on Bob's late bin."""
    return np.diag([1.0, np.exp(1j * gamma)])


def apply_correction(state: QubitState, c: Classification, delta: float, gamma: float = 0.0) -> QubitState:
    """Undo the pair phase, then the rotation tied to result ``c``."""
    u = correction_unitary(c, delta)
    v = u.conj().T @ pair_frame(gamma).conj().T @ state.vector
    return QubitState.from_vector(v)


@dataclass(frozen=True)
class ScanResult:
    """Fringe scan with per-class joint rates P(class, Bob central click).

    ``offsets`` are fitted phases with the convention constant removed; the
    constant is the ``PSI_PLUS`` phase of a scan with all phases at zero.
    """

    variable: str
    grid: np.ndarray
    rates: Mapping[Classification, np.ndarray]
    class_probability: Mapping[Classification, np.ndarray]
    fits: Mapping[Classification, FringeFit]
    offsets: Mapping[Classification, float]
    calibration: float
    phases: ExperimentPhases
    mode: AnalyzerMode = AnalyzerMode.IDEAL
    extra: Mapping[str, object] = field(default_factory=dict)

    def conditional_rates(self, c: Classification) -> np.ndarray:
        return self.rates[c] / self.class_probability[c]

    def offset_difference(self, c1: Classification, c2: Classification) -> float:
        return wrap(self.offsets[c1] - self.offsets[c2])


def _rates_at(phases: ExperimentPhases, mode: AnalyzerMode) -> tuple[dict, dict]:
    state = apply_transform(after_analyzer(phases), _bob_analyzer(phases.beta), passthrough=True)
    rates = {c: 0.0 for c in CONCLUSIVE}
    totals = {c: 0.0 for c in CONCLUSIVE}
    for pattern, p in measure_number(state).items():
        c = classify(outcome_of_pattern(pattern), mode)
        if c is Classification.INCONCLUSIVE:
            continue
        totals[c] += p
        bob = [m for m in pattern if m.port == BOB_DETECTOR_PORT]
        if len(bob) == 1 and bob[0].time_bin == BOB_CENTRAL_BIN:
            rates[c] += p
    return rates, totals


def _scan_raw(variable: str, grid: np.ndarray, fixed: ExperimentPhases, mode: AnalyzerMode):
    rates = {c: np.zeros(len(grid)) for c in CONCLUSIVE}
    totals = {c: np.zeros(len(grid)) for c in CONCLUSIVE}
    for i, x in enumerate(grid):
        r, t = _rates_at(fixed.replace(**{variable: x}), mode)
        for c in CONCLUSIVE:
            rates[c][i] = r[c]
            totals[c][i] = t[c]
    return rates, totals


@lru_cache(maxsize=8)
def calibration_phase(variable: str, points: int = 16) -> float:
    """Convention constant: fitted PSI_PLUS phase with every phase at zero."""
    grid = np.linspace(0, TWO_PI, points, endpoint=False)
    rates, _ = _scan_raw(variable, grid, ExperimentPhases(), AnalyzerMode.IDEAL)
    return estimate_visibility(grid, rates[Classification.PSI_PLUS]).phase


def fringe_scan(
    variable: str = "alpha",
    grid: Sequence[float] | None = None,
    fixed: ExperimentPhases | None = None,
    mode: AnalyzerMode = AnalyzerMode.IDEAL,
    points: int = 16,
) -> ScanResult:
    """Scan ``alpha`` or ``beta`` and fit ``1 + V cos(x + phi0)`` per conclusive class."""
    if variable not in ("alpha", "beta"):
        raise ValueError("scan variable must be 'alpha' or 'beta'")
    fixed = fixed or ExperimentPhases()
    grid = np.linspace(0, TWO_PI, points, endpoint=False) if grid is None else np.asarray(grid, float)
    rates, totals = _scan_raw(variable, grid, fixed, mode)
    fits = {c: estimate_visibility(grid, rates[c]) for c in CONCLUSIVE}
    cal = calibration_phase(variable)
    offsets = {c: wrap(f.phase - cal) for c, f in fits.items()}
    return ScanResult(variable, grid, rates, totals, fits, offsets, cal, fixed, mode)


def predicted_offsets(variable: str, phases: ExperimentPhases) -> dict[Classification, float]:
    """Closed-form fringe phases: psi-classes cos(alpha + beta - gamma [+ pi]),
    phi+ cos(alpha - beta + gamma - 2 delta)."""
    a, b, g, d = phases.alpha, phases.beta, phases.gamma, phases.delta
    if variable == "alpha":
        psi, phi = b - g, -b + g - 2 * d
    else:
        psi, phi = a - g, -a - g + 2 * d
    return {
        Classification.PSI_PLUS: wrap(psi),
        Classification.PSI_MINUS: wrap(psi + math.pi),
        Classification.PHI_PLUS: wrap(phi),
    }
