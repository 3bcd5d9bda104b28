"""SPDC pair sources truncated at double pairs, and the antidip delay scan.

A source with pair amplitude ``chi`` produces ``exp(chi X)|vac>`` with
``X = sum_t w_t s_t^dag i_t^dag`` over pump time bins ``t``, truncated at
``order`` pairs.  For a single pump pulse this is ``|vac> + chi|1,1> +
chi^2|2,2>``, the two-mode squeezed vacuum to second order with weight 1 on
the double pair.

Partial distinguishability: the signal photon of a source with overlap
``v`` is created as ``v s_0^dag + sqrt(1 - v^2) s_1^dag`` over the internal
wavepacket index, so it interferes with reference photons (index 0) only
through ``v``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bell import CoincidenceOutcome, outcome_of_pattern
from .fock import (
    DEFAULT_N_MAX,
    DEFAULT_WINDOW,
    DegenerateStateError,
    Mode,
    PhotonicState,
    apply_transform,
    canonical,
    from_creation_polynomial,
    marginal,
    measure_number,
    tensor,
)
from .optics import bsa_interferometer


@dataclass(frozen=True)
class SourceSpec:
    chi: float
    signal: str = "a"
    idler: str = "a:idler"
    order: int = 2
    overlap: float = 1.0
    pump: Mapping[int, complex] = field(default_factory=lambda: {0: 1.0})

    def __post_init__(self):
        if not 0.0 <= self.chi < 1.0:
            raise ValueError("pair amplitude chi must lie in [0, 1)")
        if self.order not in (1, 2):
            raise ValueError("only single- and double-pair expansions are supported")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")
        norm = sum(abs(w) ** 2 for w in self.pump.values())
        if not math.isclose(norm, 1.0, abs_tol=1e-12):
            raise ValueError("pump time-bin amplitudes must be normalized")


def _pair_operator(spec: SourceSpec) -> list[tuple[complex, tuple[Mode, Mode]]]:
    v = spec.overlap
    w_perp = math.sqrt(max(0.0, 1.0 - v * v))
    ops = []
    for t, w in spec.pump.items():
        for k, amp in ((0, v), (1, w_perp)):
            if amp:
                ops.append((spec.chi * w * amp, (Mode(spec.signal, t, k), Mode(spec.idler, t, 0))))
    return ops


def spdc_state(spec: SourceSpec, window: int = DEFAULT_WINDOW, n_max: int = DEFAULT_N_MAX) -> PhotonicState:
    """Normalized truncated pair state of one crystal."""
    if 2 * spec.order > n_max:
        raise ValueError(f"order {spec.order} needs n_max >= {2 * spec.order}")
    x = _pair_operator(spec)
    poly: dict[tuple, complex] = {(): 1.0}
    power: dict[tuple, complex] = {(): 1.0}
    for n in range(1, spec.order + 1):
        nxt: dict[tuple, complex] = defaultdict(complex)
        for mono, c in power.items():
            for cx, pair in x:
                nxt[canonical(mono + pair)] += c * cx
        power = dict(nxt)
        for mono, c in power.items():
            poly[mono] = poly.get(mono, 0) + c / math.factorial(n)
    return from_creation_polynomial(poly, window, n_max).normalize()


@dataclass(frozen=True)
class DelayModel:
    """Gaussian wavepacket overlap versus relative delay."""

    coherence: float = 1.0

    def __post_init__(self):
        if self.coherence <= 0:
            raise ValueError("coherence scale must be positive")

    def overlap(self, delay: float | np.ndarray):
        return np.exp(-np.square(delay) / (2 * self.coherence**2))


def coincidence_rates(
    overlap: float,
    chi: float,
    chi_b: float | None = None,
    order: int = 2,
    time_bin: int = 0,
    herald: bool = False,
) -> dict[CoincidenceOutcome, float]:
    """Two-fold analyzer coincidences for one photon pair source on each input.

    Source A feeds port ``a`` (idler ignored) with wavepacket overlap
    ``overlap``; source B feeds port ``b`` and sends its twin to ``bob``.
    With ``herald`` only cycles with a photon at ``bob`` count.
    """
    chi_b = chi if chi_b is None else chi_b
    if chi == 0 or chi_b == 0:
        raise DegenerateStateError("both sources need a nonzero pair amplitude")
    pump = {time_bin: 1.0}
    a = spdc_state(SourceSpec(chi, "a", "a:idler", order, overlap, pump))
    b = spdc_state(SourceSpec(chi_b, "b", "bob", order, 1.0, pump))
    joint = tensor(a, b, truncate=True)
    out = apply_transform(joint, bsa_interferometer(0.0), passthrough=True)
    kept = ("e", "f", "bob") if herald else ("e", "f")
    rates: dict[CoincidenceOutcome, float] = defaultdict(float)
    for pattern, p in marginal(measure_number(out), kept).items():
        if herald and not any(m.port == "bob" for m in pattern):
            continue
        o = outcome_of_pattern(pattern)
        if o is not None and len(pattern) - sum(m.port == "bob" for m in pattern) == 2:
            rates[o] += p
    return dict(rates)


ANTIDIP_OUTCOMES = {
    "00": (CoincidenceOutcome.cross(0, 0), 0),
    "22": (CoincidenceOutcome.cross(2, 2), 1),
}


@dataclass(frozen=True)
class AntidipScan:
    delays: np.ndarray
    overlaps: np.ndarray
    rates: Mapping[str, np.ndarray]
    baseline: Mapping[str, float]
    visibility: Mapping[str, float]


def antidip_visibility(peak: float, baseline: float) -> float:
    """Relative coincidence increase over the distinguishable baseline."""
    return (peak - baseline) / baseline


def antidip_scan(
    delays: Sequence[float],
    chi: float,
    model: DelayModel | None = None,
    order: int = 2,
    chi_b: float | None = None,
    herald: bool = False,
) -> AntidipScan:
    """Cross-detector "00" and "22" coincidence rates versus delay."""
    model = model or DelayModel()
    delays = np.asarray(delays, dtype=float)
    overlaps = model.overlap(delays)
    rates, baseline, vis = {}, {}, {}
    for name, (outcome, t) in ANTIDIP_OUTCOMES.items():
        def rate(v, outcome=outcome, t=t):
            return coincidence_rates(float(v), chi, chi_b, order, t, herald).get(outcome, 0.0)

        cache = {}
        rates[name] = np.array([cache.setdefault(round(v, 15), rate(v)) for v in overlaps])
        baseline[name] = rate(0.0)
        vis[name] = antidip_visibility(float(rates[name].max()), baseline[name])
    return AntidipScan(delays, overlaps, rates, baseline, vis)
