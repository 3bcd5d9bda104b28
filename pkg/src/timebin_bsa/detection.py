"""Detector imperfections, Monte Carlo shot sampling and fringe fitting.

Detection events are *click tuples*: sorted tuples of ``(detector, time)``
pairs.  A ``CoincidenceOutcome`` is accepted wherever a click tuple is, via
its ``clicks`` attribute.

Sampling is reproducible under sharding: shots are cut into fixed-size
blocks and block ``i`` draws from a Philox stream keyed by ``(seed, i)``, so
the worker count only changes which process draws a block, never what it
draws.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .bell import AnalyzerMode

log = logging.getLogger(__name__)

Clicks = tuple  # sorted tuple[(detector, time), ...]

BLOCK_SIZE = 1 << 16
DEFAULT_GATES = {"D1": (0, 1, 2), "D2": (0, 1, 2)}


def as_clicks(key) -> Clicks:
    clicks = getattr(key, "clicks", key)
    return tuple(sorted((str(d), int(t)) for d, t in clicks))


@dataclass(frozen=True)
class DetectorModel:
    """Gated detectors with efficiency, dark counts and optional dead time.

    ``gates`` lists the time bins each detector is open for; photons outside
    a gate are not registered.  In ``DEAD_TIME`` mode a detector registers
    at most one click per cycle, the earliest.
    """

    efficiency: float | Mapping[str, float] = 1.0
    dark_count: float = 0.0
    mode: AnalyzerMode = AnalyzerMode.IDEAL
    gates: Mapping[str, tuple[int, ...]] = field(default_factory=lambda: dict(DEFAULT_GATES))

    def __post_init__(self):
        for det in self.gates:
            if not 0.0 <= self.eta(det) <= 1.0:
                raise ValueError(f"efficiency of {det} outside [0, 1]")
        if not 0.0 <= self.dark_count < 1.0:
            raise ValueError("dark-count probability must lie in [0, 1)")

    def eta(self, detector: str) -> float:
        if isinstance(self.efficiency, Mapping):
            return float(self.efficiency.get(detector, 1.0))
        return float(self.efficiency)

    @property
    def gate_list(self) -> list[tuple[str, int]]:
        return [(d, t) for d in sorted(self.gates) for t in self.gates[d]]

    @property
    def ideal(self) -> bool:
        return self.dark_count == 0 and all(self.eta(d) == 1.0 for d in self.gates)


@dataclass(frozen=True)
class CountRecord:
    """Observed click tuples with counts; shots without clicks are not listed."""

    counts: Mapping[Clicks, int]
    shots: int
    seed: int

    def __post_init__(self):
        if sum(self.counts.values()) > self.shots:
            raise ValueError("more recorded events than shots")

    def frequency(self, key) -> float:
        return self.counts.get(as_clicks(key), 0) / self.shots

    def count(self, key) -> int:
        return self.counts.get(as_clicks(key), 0)

    def total(self, predicate: Callable[[Clicks], bool]) -> int:
        return sum(n for c, n in self.counts.items() if predicate(c))


def _validate(dist: Mapping) -> tuple[list[Clicks], np.ndarray]:
    keys, probs = [], []
    for k, p in dist.items():
        if not (p >= -1e-15) or not math.isfinite(p):
            raise ValueError(f"invalid probability {p} for {k!r}")
        if p > 0:
            keys.append(as_clicks(k))
            probs.append(float(p))
    probs = np.asarray(probs, dtype=float)
    total = probs.sum()
    if total > 1 + 1e-9:
        raise ValueError(f"probabilities sum to {total} > 1")
    return keys, probs


class _Channel:
    """Index tables shared by the sampler and the exact enumerator."""

    def __init__(self, keys: Sequence[Clicks], det: DetectorModel):
        self.det = det
        self.gates = det.gate_list
        self.gate_index = {g: i for i, g in enumerate(self.gates)}
        self.n_gates = len(self.gates)
        self.max_photons = max((len(k) for k in keys), default=0)
        p = max(self.max_photons, 1)
        # one extra row for the no-photon outcome
        self.slot_gate = np.full((len(keys) + 1, p), -1, dtype=np.int64)
        self.slot_eta = np.zeros((len(keys) + 1, p))
        for i, key in enumerate(keys):
            for j, click in enumerate(key):
                g = self.gate_index.get(click)
                if g is not None:
                    self.slot_gate[i, j] = g
                    self.slot_eta[i, j] = det.eta(click[0])
        self.base = self.max_photons + 2
        self.det_rows = defaultdict(list)
        for i, (d, _) in enumerate(self.gates):
            self.det_rows[d].append(i)

    def finish(self, counts: np.ndarray) -> np.ndarray:
        if self.det.mode is AnalyzerMode.DEAD_TIME:
            counts = counts.copy()
            for cols in self.det_rows.values():
                sub = counts[:, cols]
                first = np.argmax(sub > 0, axis=1)
                hit = sub.max(axis=1) > 0
                sub[:] = 0
                sub[np.flatnonzero(hit), first[hit]] = 1
                counts[:, cols] = sub
        return counts

    def encode(self, counts: np.ndarray) -> np.ndarray:
        weights = self.base ** np.arange(self.n_gates, dtype=np.int64)
        return counts.astype(np.int64) @ weights

    def decode(self, code: int) -> Clicks:
        out = []
        for g in range(self.n_gates):
            code, n = divmod(int(code), self.base)
            out.extend([self.gates[g]] * n)
        return tuple(sorted(out))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _sample_block(ch: _Channel, cum: np.ndarray, n: int, seed: int, block: int) -> Counter:
    rng = _block_rng(seed, block)
    idx = np.searchsorted(cum, rng.random(n), side="right")
    idx = np.minimum(idx, len(cum))  # past the end: no photons
    gate = ch.slot_gate[idx]
    survive = rng.random(gate.shape) < ch.slot_eta[idx]
    survive &= gate >= 0
    counts = np.zeros((n, ch.n_gates), dtype=np.int64)
    rows = np.broadcast_to(np.arange(n)[:, None], gate.shape)
    np.add.at(counts, (rows[survive], gate[survive]), 1)
    if ch.det.dark_count > 0:
        counts += rng.random((n, ch.n_gates)) < ch.det.dark_count
    counts = ch.finish(counts)
    codes, freq = np.unique(ch.encode(counts), return_counts=True)
    return Counter(dict(zip(codes.tolist(), freq.tolist())))


def sample_outcomes(
    dist: Mapping,
    det: DetectorModel | None = None,
    shots: int = 1,
    seed: int = 0,
    workers: int = 1,
) -> CountRecord:
    """Draw ``shots`` detection cycles.

    Each cycle draws a true event from ``dist`` (leftover probability means
    no photon), thins each photon with its detector efficiency, adds dark
    counts per open gate, and applies dead time.  Identical
    ``(dist, det, shots, seed)`` give identical records for any ``workers``.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    det = det or DetectorModel()
    keys, probs = _validate(dist)
    ch = _Channel(keys, det)
    cum = np.cumsum(probs)
    blocks = [(b, min(BLOCK_SIZE, shots - b * BLOCK_SIZE)) for b in range(-(-shots // BLOCK_SIZE))]

    def run(item):
        b, n = item
        return _sample_block(ch, cum, n, seed, b)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(item) for item in blocks]
    total: Counter = Counter()
    for part in parts:
        total.update(part)
    counts = {ch.decode(code): n for code, n in total.items() if code != 0}
    return CountRecord(counts, shots, seed)


def observed_distribution(dist: Mapping, det: DetectorModel) -> tuple[dict[Clicks, float], dict[Clicks, float]]:
    """Exact click-tuple probabilities after the detector model.

    Returns ``(total, accidental)`` where ``accidental`` holds the part of
    each probability coming from cycles whose recorded clicks include a dark
    count.
    """
    keys, probs = _validate(dist)
    ch = _Channel(keys, det)
    g = ch.n_gates
    d = det.dark_count
    if d > 0:
        dark = ((np.arange(1 << g)[:, None] >> np.arange(g)) & 1).astype(np.int64)
        k = dark.sum(axis=1)
        dark_p = d**k * (1 - d) ** (g - k)
    else:
        dark = np.zeros((1, g), dtype=np.int64)
        dark_p = np.ones(1)
    total: dict[int, float] = defaultdict(float)
    acc: dict[int, float] = defaultdict(float)
    rows = list(zip(range(len(keys)), probs)) + [(len(keys), max(0.0, 1.0 - probs.sum()))]
    for i, p in rows:
        if p <= 0:
            continue
        slots = [(ch.slot_gate[i, j], ch.slot_eta[i, j]) for j in range(ch.slot_gate.shape[1]) if ch.slot_gate[i, j] >= 0]
        for mask in range(1 << len(slots)):
            w = p
            photon_counts = np.zeros(g, dtype=np.int64)
            for j, (gi, eta) in enumerate(slots):
                if mask >> j & 1:
                    w *= eta
                    photon_counts[gi] += 1
                else:
                    w *= 1 - eta
            if w == 0:
                continue
            codes = ch.encode(ch.finish(photon_counts[None, :] + dark))
            # a dark click made it into the record iff the record differs from the dark-free one
            clean = ch.encode(ch.finish(photon_counts[None, :]))[0]
            has_dark = codes != clean
            for code, pw, hd in zip(codes.tolist(), (w * dark_p).tolist(), has_dark.tolist()):
                total[code] += pw
                if hd:
                    acc[code] += pw
    decode = ch.decode
    return (
        {decode(c): p for c, p in total.items() if c != 0},
        {decode(c): p for c, p in acc.items() if c != 0},
    )


# --- fringe fitting ------------------------------------------------------


@dataclass(frozen=True)
class FringeFit:
    """``rate = baseline * (1 + visibility * cos(x + phase))``."""

    visibility: float
    phase: float
    baseline: float
    residual: float
    flat: bool = False
    clamped: bool = False

    def __call__(self, x):
        return self.baseline * (1 + self.visibility * np.cos(np.asarray(x) + self.phase))


def estimate_visibility(x: Sequence[float], rates: Sequence[float], flat_tol: float = 1e-12) -> FringeFit:
    """Linear least-squares fit of a single-frequency fringe.

    Needs at least five points spanning a full period.  Flat data returns
    ``visibility=0`` with ``flat=True``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(rates, dtype=float)
    if x.shape != y.shape or x.size < 5:
        raise ValueError("need at least five (x, rate) points")
    step = float(np.median(np.diff(np.sort(x))))
    if np.ptp(x) + step < 2 * math.pi - 1e-9:
        raise ValueError("scan grid must cover a full period")
    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    c0, c1, c2 = coef
    resid = float(np.max(np.abs(design @ coef - y))) if y.size else 0.0
    amp = math.hypot(c1, c2)
    if c0 <= 0 or amp <= flat_tol * max(abs(c0), 1.0):
        return FringeFit(0.0, 0.0, float(max(c0, 0.0)), resid, flat=True)
    v = amp / c0
    clamped = v > 1
    if v > 1 + 1e-9:
        log.warning("fitted visibility %.6f exceeds 1; clamped", v)
    return FringeFit(min(v, 1.0), math.atan2(-c2, c1), float(c0), resid, clamped=clamped)


def subtract_background(rates: Sequence[float], background: float | Sequence[float]) -> np.ndarray:
    """Remove an accidental floor; negative results are clamped to zero with a warning."""
    net = np.asarray(rates, dtype=float) - np.asarray(background, dtype=float)
    if np.any(net < 0):
        log.warning("background subtraction produced negative rates; clamped to zero")
        net = np.clip(net, 0.0, None)
    return net


def net_visibility(
    x: Sequence[float],
    raw: Sequence[float],
    accidental: float | Sequence[float],
) -> tuple[FringeFit, FringeFit]:
    """Raw fit and fit after subtracting the accidental rate (per point or constant).

    ``raw`` holds counts or rates per phase point, e.g. event counts pulled
    from one ``CountRecord`` per phase.
    """
    raw = np.asarray(raw, dtype=float)
    return estimate_visibility(x, raw), estimate_visibility(x, subtract_background(raw, accidental))


def event_counts(records: Iterable[CountRecord], event: Callable[[Clicks], bool]) -> np.ndarray:
    return np.array([r.total(event) for r in records], dtype=float)


def event_probability(dist: Mapping[Clicks, float], event: Callable[[Clicks], bool]) -> float:
    return float(sum(p for c, p in dist.items() if event(c)))


def binomial_sigma(p: float, shots: int) -> float:
    return math.sqrt(p * (1 - p) / shots)
