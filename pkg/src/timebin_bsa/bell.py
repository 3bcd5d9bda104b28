"""Bell states, the 21 two-photon coincidence outcomes and their classification.

The analyzer maps ports ``a, b`` to detector ports ``e -> D1`` and
``f -> D2``.  Which outcomes are conclusive is not hard-coded: it is derived
once by propagating the four Bell states and marking every outcome that only
one of them can produce.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np

from .fock import Mode, PhotonicState, apply_transform, make_state, measure_number, superpose
from .optics import bsa_beamsplitter, bsa_interferometer

DETECTOR_OF_PORT = {"e": "D1", "f": "D2"}
PORT_OF_DETECTOR = {v: k for k, v in DETECTOR_OF_PORT.items()}
DETECTORS = ("D1", "D2")

# probability below which an outcome counts as impossible
PROB_TOL = 1e-12


class BellKind(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"


class Classification(enum.Enum):
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    INCONCLUSIVE = "inconclusive"

    @property
    def kind(self) -> BellKind | None:
        return None if self is Classification.INCONCLUSIVE else BellKind(self.value)

    @classmethod
    def of(cls, kind: BellKind) -> Classification:
        return cls(kind.value)


CONCLUSIVE = (Classification.PSI_PLUS, Classification.PSI_MINUS, Classification.PHI_PLUS)


class AnalyzerMode(enum.Enum):
    IDEAL = "ideal"
    DEAD_TIME = "deadtime"


class Analyzer(enum.Enum):
    """Which optics sit in front of the two detectors."""

    INTERFEROMETER = "interferometer"
    BEAMSPLITTER = "beamsplitter"

    @property
    def times(self) -> int:
        return 3 if self is Analyzer.INTERFEROMETER else 2

    def transform(self, delta: float):
        if self is Analyzer.INTERFEROMETER:
            return bsa_interferometer(delta)
        return bsa_beamsplitter()


@dataclass(frozen=True, order=True)
class Detection:
    detector: str
    time: int


@dataclass(frozen=True, order=True)
class CoincidenceOutcome:
    """Unordered pair of detections; stored sorted."""

    first: Detection
    second: Detection

    def __post_init__(self):
        for d in (self.first, self.second):
            if d.detector not in DETECTORS or d.time < 0:
                raise ValueError(f"invalid detection {d}")
        if self.second < self.first:
            a, b = self.second, self.first
            object.__setattr__(self, "first", a)
            object.__setattr__(self, "second", b)

    @classmethod
    def of(cls, d1: tuple[str, int], d2: tuple[str, int]) -> CoincidenceOutcome:
        return cls(Detection(*d1), Detection(*d2))

    @classmethod
    def same(cls, detector: str, t1: int, t2: int) -> CoincidenceOutcome:
        return cls(Detection(detector, t1), Detection(detector, t2))

    @classmethod
    def cross(cls, t_d1: int, t_d2: int) -> CoincidenceOutcome:
        return cls(Detection("D1", t_d1), Detection("D2", t_d2))

    @property
    def same_detector(self) -> bool:
        return self.first.detector == self.second.detector

    @property
    def label(self) -> str:
        if self.same_detector:
            return f"{self.first.detector}:{self.first.time}{self.second.time}"
        return f"D1:{self.first.time}+D2:{self.second.time}"

    @classmethod
    def from_label(cls, label: str) -> CoincidenceOutcome:
        if "+" in label:
            left, right = label.split("+")
            return cls.of((left[:2], int(left[3:])), (right[:2], int(right[3:])))
        det, times = label.split(":")
        return cls.same(det, int(times[0]), int(times[1]))

    def pattern(self, internal: int = 0) -> tuple[Mode, ...]:
        return tuple(
            sorted(Mode(PORT_OF_DETECTOR[d.detector], d.time, internal) for d in (self.first, self.second))
        )

    @property
    def clicks(self) -> tuple[tuple[str, int], ...]:
        return ((self.first.detector, self.first.time), (self.second.detector, self.second.time))

    def __repr__(self) -> str:
        return f"<{self.label}>"


def all_outcomes(times: int = 3) -> list[CoincidenceOutcome]:
    """Outcomes in the column order of the published table."""
    pairs = [(t, t) for t in range(times)] + list(itertools.combinations(range(times), 2))
    out = []
    for t1, t2 in pairs:
        for det in DETECTORS:
            out.append(CoincidenceOutcome.same(det, t1, t2))
    cross_pairs = [(t, t) for t in (0, 2, 1) if t < times]
    cross_pairs += [(1, 0), (0, 1), (1, 2), (2, 1), (0, 2), (2, 0)]
    out += [CoincidenceOutcome.cross(*p) for p in cross_pairs if max(p) < times]
    return out


def outcome_of_pattern(pattern) -> CoincidenceOutcome | None:
    """Coincidence class of a two-photon detector pattern; internal index ignored."""
    hits = [m for m in pattern if m.port in DETECTOR_OF_PORT]
    if len(hits) != 2:
        return None
    (m1, m2) = hits
    return CoincidenceOutcome.of(
        (DETECTOR_OF_PORT[m1.port], m1.time_bin), (DETECTOR_OF_PORT[m2.port], m2.time_bin)
    )


def bell_state(kind: BellKind, delta: float = 0.0, ports: tuple[str, str] = ("a", "b")) -> PhotonicState:
    """Bell state with ``|1>`` replaced by ``exp(i delta)|1>`` on both photons."""
    pa, pb = ports
    e1, e2 = np.exp(1j * delta), np.exp(2j * delta)
    sign = -1.0 if kind in (BellKind.PHI_MINUS, BellKind.PSI_MINUS) else 1.0
    if kind in (BellKind.PHI_PLUS, BellKind.PHI_MINUS):
        terms = [(1.0, (0, 0)), (sign * e2, (1, 1))]
    else:
        terms = [(e1, (0, 1)), (sign * e1, (1, 0))]
    s = 1 / math.sqrt(2)
    return superpose(
        [(s * c, make_state([(Mode(pa, i), 1), (Mode(pb, j), 1)])) for c, (i, j) in terms]
    )


def outcome_distribution(
    state: PhotonicState,
    delta: float = 0.0,
    analyzer: Analyzer = Analyzer.INTERFEROMETER,
) -> dict[CoincidenceOutcome, float]:
    """Probability of each coincidence for a two-photon input on ports a, b."""
    if state.photon_numbers() != {2}:
        raise ValueError(f"analyzer input must hold exactly two photons, got {state.photon_numbers()}")
    if {m.port for m in state.modes()} - {"a", "b"}:
        raise ValueError("analyzer input must live on ports a and b")
    out = apply_transform(state, analyzer.transform(delta))
    dist = {o: 0.0 for o in all_outcomes(analyzer.times)}
    for pattern, p in measure_number(out).items():
        dist[outcome_of_pattern(pattern)] += p
    return dist


@lru_cache(maxsize=None)
def _possible_kinds(analyzer: Analyzer) -> Mapping[CoincidenceOutcome, frozenset]:
    rows = {k: outcome_distribution(bell_state(k), 0.0, analyzer) for k in BellKind}
    return {
        o: frozenset(k for k in BellKind if rows[k][o] > PROB_TOL) for o in all_outcomes(analyzer.times)
    }


def possible_kinds(outcome: CoincidenceOutcome, analyzer: Analyzer = Analyzer.INTERFEROMETER) -> frozenset:
    """Bell states that can produce ``outcome``."""
    return _possible_kinds(analyzer)[outcome]


def classify(
    outcome: CoincidenceOutcome,
    mode: AnalyzerMode = AnalyzerMode.IDEAL,
    analyzer: Analyzer = Analyzer.INTERFEROMETER,
) -> Classification:
    if mode is AnalyzerMode.DEAD_TIME and outcome.same_detector:
        return Classification.INCONCLUSIVE
    kinds = possible_kinds(outcome, analyzer)
    if len(kinds) == 1:
        return Classification.of(next(iter(kinds)))
    return Classification.INCONCLUSIVE


def success_rate(
    kind: BellKind,
    delta: float = 0.0,
    mode: AnalyzerMode = AnalyzerMode.IDEAL,
    analyzer: Analyzer = Analyzer.INTERFEROMETER,
) -> float:
    dist = outcome_distribution(bell_state(kind, delta), delta, analyzer)
    return sum(p for o, p in dist.items() if classify(o, mode, analyzer).kind is kind)


def average_success(
    mode: AnalyzerMode = AnalyzerMode.IDEAL,
    delta: float = 0.0,
    analyzer: Analyzer = Analyzer.INTERFEROMETER,
) -> float:
    return sum(success_rate(k, delta, mode, analyzer) for k in BellKind) / 4


def as_dyadic(p: float, tol: float = 1e-12, max_denominator: int = 1 << 16) -> Fraction | None:
    """Exact rational behind ``p`` if one with a power-of-two denominator is within ``tol``."""
    f = Fraction(p).limit_denominator(max_denominator)
    d = f.denominator
    if abs(float(f) - p) <= tol and d & (d - 1) == 0:
        return f
    return None


_F = Fraction
_S, _E, _Q, _H = _F(1, 16), _F(1, 8), _F(1, 4), _F(1, 2)

# published outcome table, keyed by outcome label; absent entries are zero
REFERENCE_TABLE: dict[BellKind, dict[str, Fraction]] = {
    BellKind.PHI_PLUS: {
        "D1:00": _S, "D2:00": _S, "D1:22": _S, "D2:22": _S,
        "D1:0+D2:0": _E, "D1:2+D2:2": _E, "D1:1+D2:1": _H,
    },
    BellKind.PHI_MINUS: {
        "D1:00": _S, "D2:00": _S, "D1:11": _Q, "D2:11": _Q, "D1:22": _S, "D2:22": _S,
        "D1:0+D2:0": _E, "D1:2+D2:2": _E,
    },
    BellKind.PSI_PLUS: {
        "D1:01": _E, "D2:01": _E, "D1:12": _E, "D2:12": _E,
        "D1:1+D2:0": _E, "D1:0+D2:1": _E, "D1:1+D2:2": _E, "D1:2+D2:1": _E,
    },
    BellKind.PSI_MINUS: {
        "D1:11": _Q, "D2:11": _Q, "D1:02": _E, "D2:02": _E, "D1:0+D2:2": _E, "D1:2+D2:0": _E,
    },
}

# bold entries of the published table
REFERENCE_CONCLUSIVE: dict[str, BellKind] = {
    "D1:01": BellKind.PSI_PLUS, "D2:01": BellKind.PSI_PLUS,
    "D1:12": BellKind.PSI_PLUS, "D2:12": BellKind.PSI_PLUS,
    "D1:1+D2:0": BellKind.PSI_PLUS, "D1:0+D2:1": BellKind.PSI_PLUS,
    "D1:1+D2:2": BellKind.PSI_PLUS, "D1:2+D2:1": BellKind.PSI_PLUS,
    "D1:02": BellKind.PSI_MINUS, "D2:02": BellKind.PSI_MINUS,
    "D1:0+D2:2": BellKind.PSI_MINUS, "D1:2+D2:0": BellKind.PSI_MINUS,
    "D1:1+D2:1": BellKind.PHI_PLUS,
}


def reference_probability(kind: BellKind, outcome: CoincidenceOutcome) -> Fraction:
    return REFERENCE_TABLE[kind].get(outcome.label, Fraction(0))


def table(delta: float = 0.0, rotated: bool = True) -> dict[BellKind, dict[CoincidenceOutcome, float]]:
    """4 x 21 outcome matrix; inputs are the delta-rotated Bell states when ``rotated``."""
    return {
        k: outcome_distribution(bell_state(k, delta if rotated else 0.0), delta) for k in BellKind
    }


def compare_to_reference(
    matrix: Mapping[BellKind, Mapping[CoincidenceOutcome, float]],
    tol: float = 1e-12,
    swap_detectors: bool = False,
) -> list[tuple[BellKind, CoincidenceOutcome, float, Fraction]]:
    """Entries that differ from the published table by more than ``tol``."""
    bad = []
    for kind, row in matrix.items():
        for outcome, p in row.items():
            key = _swapped(outcome) if swap_detectors else outcome
            ref = reference_probability(kind, key)
            if abs(p - float(ref)) > tol:
                bad.append((kind, outcome, p, ref))
    return bad


def _swapped(o: CoincidenceOutcome) -> CoincidenceOutcome:
    flip = {"D1": "D2", "D2": "D1"}
    return CoincidenceOutcome.of(
        (flip[o.first.detector], o.first.time), (flip[o.second.detector], o.second.time)
    )


# --- corrections ---------------------------------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def sigma_2delta(delta: float) -> np.ndarray:
    """P0 + exp(-2i delta) P1: phase shift of the late time bin."""
    return np.diag([1.0, np.exp(-2j * delta)])


def correction_candidates(delta: float) -> dict[str, np.ndarray]:
    s = sigma_2delta(delta)
    return {
        "sigma_2delta": s,
        "sigma_z sigma_2delta": SIGMA_Z @ s,
        "sigma_x": SIGMA_X.copy(),
        "sigma_z sigma_x": SIGMA_Z @ SIGMA_X,
    }


def correction_unitary(c: Classification, delta: float) -> np.ndarray:
    """Member of the correction set tied to a conclusive result.

    The matrix is the rotation Bob's photon carries relative to Alice's input
    in the pair's reference frame; Bob undoes it by applying its adjoint (see
    ``teleportation.apply_correction``).  The pairing is found by trying every
    candidate on teleported states, not assumed.
    """
    if c is Classification.INCONCLUSIVE:
        raise ValueError("no correction exists for an inconclusive result")
    name = _correction_assignment(round(float(delta) % (2 * math.pi), 12))[c]
    return correction_candidates(delta)[name]


@lru_cache(maxsize=256)
def _correction_assignment(delta: float) -> dict[Classification, str]:
    from .teleportation import ExperimentPhases, QubitState, class_outcomes, conditional_bob_state

    rng = np.random.default_rng(20240521)
    alphas = rng.uniform(0, 2 * math.pi, 20)
    cands = correction_candidates(delta)
    found = {}
    for c in CONCLUSIVE:
        outcome = class_outcomes(c)[0]
        good = []
        for name, u in cands.items():
            ok = True
            for alpha in alphas:
                bob, _ = conditional_bob_state(ExperimentPhases(alpha, 0.0, 0.0, delta), outcome)
                restored = QubitState.from_vector(u.conj().T @ bob.vector)
                if abs(QubitState.equator(alpha).overlap(restored)) ** 2 < 1 - 1e-9:
                    ok = False
                    break
            if ok:
                good.append(name)
        if len(good) != 1:
            raise RuntimeError(f"correction for {c} is not unique: {good}")
        found[c] = good[0]
    return found
