"""Beamsplitters, phase shifters, delay lines and unbalanced interferometers.

Every element acts identically on all time bins and internal indices it is
built for.  Beamsplitter convention (used everywhere, never mixed)::

    in1^dag -> sqrt(T) out1^dag + i sqrt(R) out2^dag
    in2^dag -> i sqrt(R) out1^dag + sqrt(T) out2^dag

A phase shifter multiplies a creation operator by ``exp(i phi)``; the long
arm of an interferometer carries both the one-bin delay and its phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fock import DEFAULT_WINDOW, Mode, ModeTransform, WindowError

INTERNAL_DIM = 2


def _bins(time_bins: Iterable[int] | None, window: int) -> tuple[int, ...]:
    bins = tuple(range(window)) if time_bins is None else tuple(time_bins)
    for t in bins:
        if not 0 <= t < window:
            raise WindowError(f"time bin {t} outside window [0, {window})")
    return bins


def beamsplitter(
    in1: str,
    in2: str,
    out1: str,
    out2: str,
    reflectivity: float = 0.5,
    time_bins: Iterable[int] | None = None,
    window: int = DEFAULT_WINDOW,
    internal_dim: int = INTERNAL_DIM,
) -> ModeTransform:
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"reflectivity {reflectivity} outside [0, 1]")
    if len({in1, in2}) != 2 or len({out1, out2}) != 2:
        raise ValueError("beamsplitter ports must be distinct")
    t_amp = math.sqrt(1.0 - reflectivity)
    r_amp = 1j * math.sqrt(reflectivity)
    images = {}
    for t in _bins(time_bins, window):
        for k in range(internal_dim):
            u, w = Mode(out1, t, k), Mode(out2, t, k)
            images[Mode(in1, t, k)] = {u: t_amp, w: r_amp}
            images[Mode(in2, t, k)] = {u: r_amp, w: t_amp}
    return ModeTransform.from_images(images)


def phase_shift(
    port: str,
    phi: float,
    time_bins: Iterable[int] | None = None,
    window: int = DEFAULT_WINDOW,
    internal_dim: int = INTERNAL_DIM,
) -> ModeTransform:
    ph = np.exp(1j * phi)
    return ModeTransform.from_images(
        {
            Mode(port, t, k): {Mode(port, t, k): ph}
            for t in _bins(time_bins, window)
            for k in range(internal_dim)
        }
    )


def delay_line(
    port: str,
    k: int,
    time_bins: Iterable[int] | None = None,
    window: int = DEFAULT_WINDOW,
    internal_dim: int = INTERNAL_DIM,
) -> ModeTransform:
    """Shift every listed time bin of ``port`` by ``k``.

    Defaults to the bins that stay inside the window after the shift.
    """
    if k < 0:
        raise ValueError("delay must be non-negative")
    bins = tuple(range(window - k)) if time_bins is None else _bins(time_bins, window)
    for t in bins:
        if t + k >= window:
            raise WindowError(f"delaying bin {t} by {k} leaves the window [0, {window})")
    return ModeTransform.from_images(
        {
            Mode(port, t, i): {Mode(port, t + k, i): 1.0}
            for t in bins
            for i in range(internal_dim)
        }
    )


def attenuator(
    port: str,
    transmission: float,
    time_bins: Iterable[int] | None = None,
    window: int = DEFAULT_WINDOW,
    internal_dim: int = INTERNAL_DIM,
) -> ModeTransform:
    """Amplitude damping of ``port``; lost light goes to ``port + ':lost'``."""
    if not 0.0 <= transmission <= 1.0:
        raise ValueError("transmission must lie in [0, 1]")
    lost = f"{port}:lost"
    t_amp, l_amp = math.sqrt(transmission), math.sqrt(1.0 - transmission)
    return ModeTransform.from_images(
        {
            Mode(port, t, k): {Mode(port, t, k): t_amp, Mode(lost, t, k): l_amp}
            for t in _bins(time_bins, window)
            for k in range(internal_dim)
        }
    )


def restrict_domain(t: ModeTransform, modes: Iterable[Mode]) -> ModeTransform:
    keep = set(modes)
    return ModeTransform.from_images({m: dict(t.image(m)) for m in t.domain if m in keep})


@dataclass(frozen=True)
class InterferometerSpec:
    """Unbalanced interferometer; the long arm has ``delay`` bins and phase ``phase``."""

    input_ports: tuple[str, ...]
    output_ports: tuple[str, str]
    phase: float = 0.0
    delay: int = 1

    def __post_init__(self):
        if self.delay < 1:
            raise ValueError("interferometer delay must be at least one time bin")
        if len(self.input_ports) not in (1, 2):
            raise ValueError("interferometer takes one or two input ports")
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))


def interferometer(
    spec: InterferometerSpec,
    window: int = DEFAULT_WINDOW,
    input_bins: Sequence[int] | None = None,
    internal_dim: int = INTERNAL_DIM,
) -> ModeTransform:
    """Beamsplitter, long arm (delay + phase), beamsplitter.

    A single-input interferometer leaves the second input port dark; its
    domain only covers the used port.
    """
    if input_bins is None:
        input_bins = range(window - spec.delay)
    input_bins = tuple(input_bins)
    if not input_bins or max(input_bins) + spec.delay >= window:
        raise WindowError(
            f"window {window} too small for input bins {input_bins} and delay {spec.delay}"
        )
    in1 = spec.input_ports[0]
    in2 = spec.input_ports[1] if len(spec.input_ports) == 2 else f"{in1}:dark"
    tag = f"{in1}|{in2}"
    short, long = f"{tag}:short", f"{tag}:long"
    out1, out2 = spec.output_ports
    kw = dict(window=window, internal_dim=internal_dim)

    first = beamsplitter(in1, in2, short, long, time_bins=input_bins, **kw)
    shifted = [t + spec.delay for t in input_bins]
    arm = delay_line(long, spec.delay, time_bins=input_bins, **kw).then(
        phase_shift(long, spec.phase, time_bins=shifted, **kw)
    )
    second = beamsplitter(short, long, out1, out2, **kw)
    total = first.then(arm).then(second)
    if len(spec.input_ports) == 1:
        total = restrict_domain(total, (m for m in total.domain if m.port == in1))
    return total


def bsa_interferometer(
    delta: float,
    in_ports: tuple[str, str] = ("a", "b"),
    out_ports: tuple[str, str] = ("e", "f"),
    window: int = DEFAULT_WINDOW,
    delay: int = 1,
) -> ModeTransform:
    """Two-input time-bin interferometer of the three-state Bell analyzer."""
    return interferometer(InterferometerSpec(in_ports, out_ports, delta, delay), window)


def bsa_beamsplitter(
    in_ports: tuple[str, str] = ("a", "b"),
    out_ports: tuple[str, str] = ("e", "f"),
    window: int = DEFAULT_WINDOW,
) -> ModeTransform:
    """Plain 50/50 beamsplitter analyzer, the two-state baseline."""
    return beamsplitter(*in_ports, *out_ports, window=window)


def qubit_analyzer(
    in_port: str,
    phase: float,
    out_ports: tuple[str, str] | None = None,
    window: int = DEFAULT_WINDOW,
    input_bins: Sequence[int] | None = None,
) -> ModeTransform:
    """Single-input unbalanced interferometer.

    Used to prepare a time-bin qubit from a photon in bin 0 (Alice, pump)
    and to analyze one (Bob).  Outputs default to ``in_port + ':0'`` and
    ``in_port + ':1'``.
    """
    if out_ports is None:
        out_ports = (f"{in_port}:0", f"{in_port}:1")
    return interferometer(InterferometerSpec((in_port,), out_ports, phase), window, input_bins)
