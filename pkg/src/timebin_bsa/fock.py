"""Bosonic states over discrete (port, time-bin, internal) modes.

A state is a sparse map from occupation patterns to complex amplitudes in
the normalized Fock basis.  A pattern is a sorted tuple of ``Mode`` objects,
one entry per photon, so ``(m, m)`` is two photons in mode ``m``.

Linear optics acts on creation operators, ``a_in^dag -> sum_out c[out, in]
a_out^dag``.  ``apply_transform`` expands the product of creation operators
for each term and restores the ``sqrt(n!)`` factors of the Fock basis.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_WINDOW = 3
DEFAULT_N_MAX = 4

# amplitudes below this are treated as exact cancellations
ZERO_TOL = 1e-14


class FockError(ValueError):
    pass


class WindowError(FockError):
    """A time bin falls outside the configured window."""


class PhotonBudgetError(FockError):
    """A term carries more photons than ``n_max``."""


class DegenerateStateError(FockError):
    """A state with zero norm where a physical state is required."""


class ModeDomainError(FockError):
    """A transform was applied to a mode it does not act on."""


@dataclass(frozen=True, order=True)
class Mode:
    """One optical mode.  Ordering is lexicographic on (port, time_bin, internal)."""

    port: str
    time_bin: int
    internal: int = 0

    def shifted(self, k: int) -> Mode:
        return Mode(self.port, self.time_bin + k, self.internal)

    def __repr__(self) -> str:
        suffix = f"'{self.internal}" if self.internal else ""
        return f"{self.port}{self.time_bin}{suffix}"


Pattern = tuple  # sorted tuple[Mode, ...]


def canonical(modes: Iterable[Mode]) -> Pattern:
    return tuple(sorted(modes))


def occupations(pattern: Pattern) -> dict[Mode, int]:
    occ: dict[Mode, int] = defaultdict(int)
    for m in pattern:
        occ[m] += 1
    return dict(occ)


def _factorial_weight(pattern: Pattern) -> float:
    w = 1
    for n in occupations(pattern).values():
        w *= math.factorial(n)
    return float(w)


@dataclass(frozen=True)
class PhotonicState:
    """Pure state, or an unnormalized conditional state.

    When ``normalized`` is False the squared norm is the probability of the
    post-selection that produced the state.
    """

    terms: Mapping[Pattern, complex]
    window: int = DEFAULT_WINDOW
    n_max: int = DEFAULT_N_MAX
    normalized: bool = True

    def __post_init__(self):
        clean = {}
        for pattern, amp in self.terms.items():
            pattern = canonical(pattern)
            if len(pattern) > self.n_max:
                raise PhotonBudgetError(
                    f"{len(pattern)} photons in {pattern!r} exceeds n_max={self.n_max}"
                )
            for m in pattern:
                if not 0 <= m.time_bin < self.window:
                    raise WindowError(f"mode {m!r} outside time window [0, {self.window})")
            amp = complex(amp)
            if abs(amp) > ZERO_TOL:
                clean[pattern] = clean.get(pattern, 0j) + amp
        object.__setattr__(self, "terms", MappingProxyType(clean))
        if self.normalized and not math.isclose(self.squared_norm, 1.0, abs_tol=1e-9):
            raise FockError(f"state flagged normalized has squared norm {self.squared_norm}")

    @property
    def squared_norm(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def amplitude(self, modes: Iterable[Mode]) -> complex:
        return self.terms.get(canonical(modes), 0j)

    def modes(self) -> set[Mode]:
        return {m for pattern in self.terms for m in pattern}

    def photon_numbers(self) -> set[int]:
        return {len(p) for p in self.terms}

    def scaled(self, c: complex) -> PhotonicState:
        return PhotonicState(
            {p: c * a for p, a in self.terms.items()}, self.window, self.n_max, normalized=False
        )

    def normalize(self) -> PhotonicState:
        n2 = self.squared_norm
        if n2 <= ZERO_TOL**2:
            raise DegenerateStateError("cannot normalize a zero-norm state")
        s = 1.0 / math.sqrt(n2)
        return PhotonicState(
            {p: s * a for p, a in self.terms.items()}, self.window, self.n_max, normalized=True
        )

    def inner(self, other: PhotonicState) -> complex:
        """<self|other>."""
        return sum(np.conj(a) * other.terms.get(p, 0j) for p, a in self.terms.items())

    def allclose(self, other: PhotonicState, atol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) <= atol for k in keys)

    def __repr__(self) -> str:
        body = " + ".join(f"({a:.4g})|{','.join(map(repr, p)) or 'vac'}>" for p, a in self.terms.items())
        return f"PhotonicState({body or '0'})"


def vacuum(window: int = DEFAULT_WINDOW, n_max: int = DEFAULT_N_MAX) -> PhotonicState:
    return PhotonicState({(): 1.0}, window, n_max)


def make_state(
    placements: Sequence[tuple[Mode, int]],
    window: int = DEFAULT_WINDOW,
    n_max: int = DEFAULT_N_MAX,
) -> PhotonicState:
    """Single Fock-basis term with ``count`` photons in each listed mode."""
    modes = []
    for mode, count in placements:
        if count < 0:
            raise ValueError(f"negative photon count for {mode!r}")
        modes.extend([mode] * count)
    return PhotonicState({canonical(modes): 1.0}, window, n_max)


def superpose(
    components: Sequence[tuple[complex, PhotonicState]],
    normalize: bool = True,
) -> PhotonicState:
    """Linear combination of states sharing a window and photon budget."""
    if not components:
        raise DegenerateStateError("empty superposition")
    window = components[0][1].window
    n_max = components[0][1].n_max
    acc: dict[Pattern, complex] = defaultdict(complex)
    for c, s in components:
        if s.window != window or s.n_max != n_max:
            raise FockError("superposed states must share window and n_max")
        for p, a in s.terms.items():
            acc[p] += c * a
    out = PhotonicState(dict(acc), window, n_max, normalized=False)
    if out.squared_norm <= ZERO_TOL**2:
        raise DegenerateStateError("superposition has zero norm")
    return out.normalize() if normalize else out


def tensor(*states: PhotonicState, truncate: bool = False) -> PhotonicState:
    """Product of states on disjoint modes.

    With ``truncate`` terms beyond ``n_max`` photons are dropped instead of
    raising; the result is then unnormalized.
    """
    window = states[0].window
    n_max = states[0].n_max
    acc: dict[Pattern, complex] = {(): 1.0 + 0j}
    used: set[Mode] = set()
    for s in states:
        if used & s.modes():
            raise FockError("tensor factors must act on disjoint modes")
        used |= s.modes()
        nxt: dict[Pattern, complex] = defaultdict(complex)
        for p1, a1 in acc.items():
            for p2, a2 in s.terms.items():
                if len(p1) + len(p2) > n_max:
                    if truncate:
                        continue
                    raise PhotonBudgetError(f"product exceeds n_max={n_max}")
                nxt[canonical(p1 + p2)] += a1 * a2
        acc = nxt
    out = PhotonicState(dict(acc), window, n_max, normalized=False)
    if not truncate and all(s.normalized for s in states):
        return out.normalize()
    return out


@dataclass(frozen=True)
class ModeTransform:
    """Linear map on creation operators; ``matrix[out, in]``."""

    domain: tuple[Mode, ...]
    codomain: tuple[Mode, ...]
    matrix: np.ndarray
    _images: Mapping[Mode, tuple[tuple[Mode, complex], ...]] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (len(self.codomain), len(self.domain)):
            raise ValueError(f"matrix shape {m.shape} does not match codomain x domain")
        if len(set(self.domain)) != len(self.domain) or len(set(self.codomain)) != len(self.codomain):
            raise ValueError("duplicate modes in transform")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        images = {}
        for j, mi in enumerate(self.domain):
            col = m[:, j]
            images[mi] = tuple(
                (self.codomain[i], complex(col[i])) for i in np.flatnonzero(np.abs(col) > ZERO_TOL)
            )
        object.__setattr__(self, "_images", MappingProxyType(images))

    @classmethod
    def from_images(cls, images: Mapping[Mode, Mapping[Mode, complex]]) -> ModeTransform:
        domain = tuple(sorted(images))
        codomain = tuple(sorted({o for img in images.values() for o in img}))
        index = {o: i for i, o in enumerate(codomain)}
        mat = np.zeros((len(codomain), len(domain)), dtype=complex)
        for j, mi in enumerate(domain):
            for o, c in images[mi].items():
                mat[index[o], j] += c
        return cls(domain, codomain, mat)

    @classmethod
    def identity(cls, modes: Iterable[Mode]) -> ModeTransform:
        modes = tuple(sorted(set(modes)))
        return cls(modes, modes, np.eye(len(modes)))

    @property
    def domain_set(self):
        return self._images.keys()

    def image(self, mode: Mode) -> tuple[tuple[Mode, complex], ...]:
        try:
            return self._images[mode]
        except KeyError:
            raise ModeDomainError(f"mode {mode!r} is not in the transform domain") from None

    def is_isometry(self, atol: float = 1e-12) -> bool:
        g = self.matrix.conj().T @ self.matrix
        return bool(np.allclose(g, np.eye(len(self.domain)), atol=atol, rtol=0))

    def is_unitary(self, atol: float = 1e-12) -> bool:
        return len(self.domain) == len(self.codomain) and self.is_isometry(atol)

    def then(self, other: ModeTransform, passthrough: bool = True) -> ModeTransform:
        """``other`` applied after ``self``.

        Output modes of ``self`` that ``other`` does not act on pass through
        unchanged when ``passthrough`` is set.
        """
        images: dict[Mode, dict[Mode, complex]] = {}
        for mi in self.domain:
            acc: dict[Mode, complex] = defaultdict(complex)
            for mid, c in self.image(mi):
                if mid in other._images:
                    for mo, c2 in other._images[mid]:
                        acc[mo] += c * c2
                elif passthrough:
                    acc[mid] += c
                else:
                    raise ModeDomainError(f"intermediate mode {mid!r} not in second transform")
            images[mi] = dict(acc)
        # keep all-zero columns representable
        for mi in self.domain:
            images.setdefault(mi, {})
        return ModeTransform.from_images(images)

    def direct_sum(self, other: ModeTransform) -> ModeTransform:
        if set(self.domain) & set(other.domain):
            raise ValueError("direct sum needs disjoint domains")
        if set(self.codomain) & set(other.codomain):
            raise ValueError("direct sum needs disjoint codomains")
        images = {m: dict(self.image(m)) for m in self.domain}
        images.update({m: dict(other.image(m)) for m in other.domain})
        return ModeTransform.from_images(images)


def apply_transform(
    state: PhotonicState, t: ModeTransform, passthrough: bool = False
) -> PhotonicState:
    """Propagate ``state`` through ``t``.

    Modes outside ``t.domain`` raise ``ModeDomainError`` unless
    ``passthrough`` is set, in which case they are left untouched.
    """
    out: dict[Pattern, complex] = defaultdict(complex)
    for pattern, amp in state.terms.items():
        poly: dict[Pattern, complex] = {(): amp / math.sqrt(_factorial_weight(pattern))}
        for mode in pattern:
            if passthrough and mode not in t.domain_set:
                img: tuple[tuple[Mode, complex], ...] = ((mode, 1.0 + 0j),)
            else:
                img = t.image(mode)
            nxt: dict[Pattern, complex] = defaultdict(complex)
            for mono, c in poly.items():
                for om, oc in img:
                    nxt[canonical(mono + (om,))] += c * oc
            poly = nxt
        for mono, c in poly.items():
            out[mono] += c * math.sqrt(_factorial_weight(mono))
    for pattern in out:
        for m in pattern:
            if not 0 <= m.time_bin < state.window:
                raise WindowError(f"transform moved a photon to {m!r}, outside the window")
    result = PhotonicState(dict(out), state.window, state.n_max, normalized=False)
    if state.normalized and math.isclose(result.squared_norm, 1.0, abs_tol=1e-9):
        return PhotonicState(result.terms, state.window, state.n_max, normalized=True)
    return result


def measure_number(state: PhotonicState) -> dict[Pattern, float]:
    """Photon-number detection on every mode: pattern -> |amplitude|^2."""
    return {p: abs(a) ** 2 for p, a in state.terms.items()}


def restrict(pattern: Pattern, ports: Iterable[str]) -> Pattern:
    ports = set(ports)
    return tuple(m for m in pattern if m.port in ports)


def marginal(probs: Mapping[Pattern, float], ports: Iterable[str]) -> dict[Pattern, float]:
    """Sum out every port not listed (trace over unobserved modes)."""
    ports = set(ports)
    out: dict[Pattern, float] = defaultdict(float)
    for p, w in probs.items():
        out[restrict(p, ports)] += w
    return dict(out)


def condition(state: PhotonicState, ports: Iterable[str], observed: Iterable[Mode]) -> PhotonicState:
    """Project the listed ports onto the Fock pattern ``observed``.

    Returns the unnormalized state of the remaining modes; its squared norm
    is the probability of the observation.
    """
    ports = set(ports)
    target = canonical(observed)
    out: dict[Pattern, complex] = defaultdict(complex)
    for p, a in state.terms.items():
        if restrict(p, ports) == target:
            out[tuple(m for m in p if m.port not in ports)] += a
    return PhotonicState(dict(out), state.window, state.n_max, normalized=False)


def from_creation_polynomial(
    poly: Mapping[Pattern, complex],
    window: int = DEFAULT_WINDOW,
    n_max: int = DEFAULT_N_MAX,
) -> PhotonicState:
    """State ``sum_k c_k prod(a^dag) |vac>`` from monomials of creation operators.

    Unnormalized; terms beyond ``n_max`` photons must already be dropped.
    """
    out: dict[Pattern, complex] = defaultdict(complex)
    for mono, c in poly.items():
        mono = canonical(mono)
        out[mono] += c * math.sqrt(_factorial_weight(mono))
    return PhotonicState(dict(out), window, n_max, normalized=False)


def photon_sector(state: PhotonicState, n: int) -> PhotonicState:
    """Unnormalized projection onto terms with exactly ``n`` photons."""
    return PhotonicState(
        {p: a for p, a in state.terms.items() if len(p) == n}, state.window, state.n_max, normalized=False
    )
