"""Teleportation fringes from SPDC sources with realistic imperfections.

Alice's crystal emits a pair whose signal passes her preparation
interferometer (phase alpha) into port ``a``; the entangled crystal is
pumped by two pulses with relative phase gamma and sends one photon to port
``b`` and its twin to Bob.  Both crystals are expanded to double pairs.

Cycles are conditioned on two pairs having been emitted in total: that is
the lowest order that can give a genuine threefold coincidence, and it
contains the double-pair noise.  Detector effects (efficiency, dark counts,
dead time) are then applied exactly or by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .bell import CONCLUSIVE, AnalyzerMode, Classification, CoincidenceOutcome, classify
from .detection import (
    CountRecord,
    DetectorModel,
    FringeFit,
    event_probability,
    net_visibility,
    observed_distribution,
    sample_outcomes,
)
from .fock import apply_transform, measure_number, photon_sector, tensor
from .optics import bsa_interferometer, qubit_analyzer
from .sources import SourceSpec, spdc_state
from .teleportation import BOB_CENTRAL_BIN, BOB_DETECTOR_PORT, ExperimentPhases, visibility_to_fidelity

DETECTOR_PORTS = {"e": "D1", "f": "D2", BOB_DETECTOR_PORT: "D3"}
GATES = {"D1": (0, 1, 2), "D2": (0, 1, 2), "D3": (BOB_CENTRAL_BIN,)}


@dataclass(frozen=True)
class NoiseModel:
    chi: float = 0.05
    overlap: float = 0.9
    order: int = 2
    efficiency: float = 0.1
    dark_count: float = 1e-4
    mode: AnalyzerMode = AnalyzerMode.IDEAL
    pairs: int = 2

    def detector(self) -> DetectorModel:
        return DetectorModel(self.efficiency, self.dark_count, self.mode, dict(GATES))


@lru_cache(maxsize=32)
def _source_state(chi: float, overlap: float, order: int, gamma: float, pairs: int):
    s = 1 / math.sqrt(2)
    alice = spdc_state(SourceSpec(chi, "alice", "alice:idler", order, overlap))
    pair = spdc_state(SourceSpec(chi, "b", "bob", order, 1.0, {0: s, 1: s * np.exp(1j * gamma)}))
    joint = tensor(alice, pair, truncate=True)
    return photon_sector(joint, 2 * pairs).normalize()


@lru_cache(maxsize=32)
def _optics(beta: float, delta: float):
    bsa = bsa_interferometer(delta)
    bob = qubit_analyzer("bob", beta, out_ports=(BOB_DETECTOR_PORT, "bob:aux"), input_bins=(0, 1))
    return bsa.direct_sum(bob)


def click_distribution(phases: ExperimentPhases, noise: NoiseModel) -> dict[tuple, float]:
    """True (pre-detector) click tuples on D1, D2, D3."""
    state = _source_state(noise.chi, noise.overlap, noise.order, phases.gamma, noise.pairs)
    prep = qubit_analyzer("alice", phases.alpha, out_ports=("a", "alice:aux"), input_bins=(0,))
    state = apply_transform(state, prep, passthrough=True)
    state = apply_transform(state, _optics(phases.beta, phases.delta), passthrough=True)
    dist: dict[tuple, float] = {}
    for pattern, p in measure_number(state).items():
        clicks = tuple(sorted((DETECTOR_PORTS[m.port], m.time_bin) for m in pattern if m.port in DETECTOR_PORTS))
        if clicks:
            dist[clicks] = dist.get(clicks, 0.0) + p
    return dist


def threefold(c: Classification, mode: AnalyzerMode):
    """Predicate: analyzer coincidence of class ``c`` with a central-bin click at Bob."""

    def event(clicks) -> bool:
        bsa = [x for x in clicks if x[0] in ("D1", "D2")]
        if len(bsa) != 2 or ("D3", BOB_CENTRAL_BIN) not in clicks:
            return False
        return classify(CoincidenceOutcome.of(*bsa), mode) is c

    return event


@dataclass(frozen=True)
class NoisyScan:
    grid: np.ndarray
    expected: Mapping[Classification, np.ndarray]
    accidental: Mapping[Classification, np.ndarray]
    counts: Mapping[Classification, np.ndarray] | None
    raw: Mapping[Classification, FringeFit]
    net: Mapping[Classification, FringeFit]
    shots: int | None

    @property
    def mean_raw(self) -> float:
        return float(np.mean([f.visibility for f in self.raw.values()]))

    @property
    def mean_net(self) -> float:
        return float(np.mean([f.visibility for f in self.net.values()]))

    @property
    def fidelity_raw(self) -> float:
        return visibility_to_fidelity(self.mean_raw)

    @property
    def fidelity_net(self) -> float:
        return visibility_to_fidelity(self.mean_net)


def noisy_fringe_scan(
    noise: NoiseModel,
    fixed: ExperimentPhases | None = None,
    grid: Sequence[float] | None = None,
    points: int = 16,
    shots: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> NoisyScan:
    """Scan Alice's phase.

    Without ``shots`` the fits use exact expected event probabilities; with
    ``shots`` each phase point is sampled and fitted from counts.  The
    accidental floor subtracted for the net fit is the exact model rate of
    events that include a dark count.
    """
    fixed = fixed or ExperimentPhases()
    grid = np.linspace(0, 2 * math.pi, points, endpoint=False) if grid is None else np.asarray(grid, float)
    det = noise.detector()
    events = {c: threefold(c, noise.mode) for c in CONCLUSIVE}
    expected = {c: np.zeros(len(grid)) for c in CONCLUSIVE}
    accidental = {c: np.zeros(len(grid)) for c in CONCLUSIVE}
    counts = {c: np.zeros(len(grid)) for c in CONCLUSIVE} if shots else None
    seeds = np.random.SeedSequence(seed).generate_state(len(grid), dtype=np.uint64)
    for i, alpha in enumerate(grid):
        dist = click_distribution(fixed.replace(alpha=alpha), noise)
        total, acc = observed_distribution(dist, det)
        for c, ev in events.items():
            expected[c][i] = event_probability(total, ev)
            accidental[c][i] = event_probability(acc, ev)
        if shots:
            rec: CountRecord = sample_outcomes(dist, det, shots, int(seeds[i]), workers)
            for c, ev in events.items():
                counts[c][i] = rec.total(ev)
    raw, net = {}, {}
    for c in CONCLUSIVE:
        if shots:
            raw[c], net[c] = net_visibility(grid, counts[c], accidental[c] * shots)
        else:
            raw[c], net[c] = net_visibility(grid, expected[c], accidental[c])
    return NoisyScan(grid, expected, accidental, counts, raw, net, shots)
