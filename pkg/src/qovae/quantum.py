"""Exact simulation of sequential four-photon OAM experiments.

A setup is an ordered sequence of devices acting on the double-SPDC seed
state |0>_a|0>_b + |0>_c|0>_d.  Devices rewrite two-photon kets term by
term; at the end the state is squared (tensored with itself) and only the
four-fold coincidence terms survive: exactly one photon in each detector
path a, b, c, d and none in the empty paths e, f.

Device action on a single ket component, with p the acted-on path and l
the photon's OAM:

    beam splitter   |l>_p -> (|l>_p' + i|-l>_p) / sqrt(2)   (both directions)
    mirror          |l>_p -> i |-l>_p
    dove prism      |l>_p -> i (-1)**l |-l>_p
    hologram(n)     |l>_p -> |l+n>_p
    down-conversion adds sum_l |l>_p |-l>_p' as new terms

All amplitudes stay in the exact ring (see :mod:`qovae.ring`); cancelling
terms vanish identically, which is what makes the unentangled/empty
classification sharp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .ring import (Amplitude, AmplitudeOverflowError, COMPONENT_BUDGET_BITS,
                   INV_SQRT2, ONE)

PATH_LETTERS = "abcdef"
N_PATHS = 6
DETECTOR_PATHS = (0, 1, 2, 3)  # a, b, c, d
EMPTY_PATHS = (4, 5)           # e, f

# A ket is a sorted tuple of (path, oam) photons; multiplicity allowed.
Ket = tuple[tuple[int, int], ...]


class EmptyStateError(ValueError):
    """No four-fold coincidence term survives post-selection."""


def path_index(letter: str) -> int:
    i = PATH_LETTERS.find(letter)
    if i < 0:
        raise ValueError(f"unknown path {letter!r}")
    return i


@dataclass(frozen=True)
class Device:
    """One optical element: kind, acted-on path(s), optional OAM shift."""

    kind: str                 # "BS" | "DC" | "REF" | "DP" | "HOLO"
    paths: tuple[int, ...]
    shift: int = 0

    def __str__(self) -> str:
        letters = ",".join(PATH_LETTERS[p] for p in self.paths)
        if self.kind == "HOLO":
            return f"HOLO({letters},{self.shift:+d})"
        return f"{self.kind}({letters})"


def _check_path(p: int) -> int:
    if not 0 <= p < N_PATHS:
        raise ValueError(f"path index {p} out of range")
    return p


def _pair(p: int, q: int) -> tuple[int, int]:
    _check_path(p)
    _check_path(q)
    if p == q:
        raise ValueError("two-path device needs two distinct paths")
    return (p, q) if p < q else (q, p)


def beam_splitter(p: int, q: int) -> Device:
    return Device("BS", _pair(p, q))


def down_converter(p: int, q: int) -> Device:
    return Device("DC", _pair(p, q))


def mirror(p: int) -> Device:
    return Device("REF", (_check_path(p),))


def dove_prism(p: int) -> Device:
    return Device("DP", (_check_path(p),))


def hologram(p: int, n: int) -> Device:
    if n == 0:
        raise ValueError("hologram shift must be nonzero")
    return Device("HOLO", (_check_path(p),), n)


class QuantumState:
    """Sparse superposition of photon kets with exact amplitudes.

    Before squaring every ket holds exactly two photons and `normalized`
    is False.  After :func:`square_and_postselect` every ket holds one
    photon per detector path, `normalized` is True and `norm` carries the
    float normalization constant sqrt(sum |amp|^2).
    """

    __slots__ = ("terms", "normalized", "norm")

    def __init__(self, terms: dict[Ket, Amplitude], normalized: bool = False,
                 norm: float = 1.0):
        self.terms = terms
        self.normalized = normalized
        self.norm = norm

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[Ket, Amplitude]]:
        return iter(sorted(self.terms.items()))

    def amplitudes(self) -> dict[Ket, complex]:
        """Kets mapped to float amplitudes, normalized if the state is."""
        scale = self.norm if self.normalized else 1.0
        return {ket: complex(amp) / scale for ket, amp in self.terms.items()}

    def check_budget(self, bits: int = COMPONENT_BUDGET_BITS) -> None:
        for amp in self.terms.values():
            if not amp.fits_budget(bits):
                raise AmplitudeOverflowError(
                    f"amplitude component exceeds {bits}-bit budget")


def initial_state() -> QuantumState:
    """Double-SPDC seed |0>_a|0>_b + |0>_c|0>_d (unnormalized)."""
    return QuantumState({
        ((0, 0), (1, 0)): ONE,
        ((2, 0), (3, 0)): ONE,
    })


def _merge(acc: dict[Ket, Amplitude], ket: Ket, amp: Amplitude) -> None:
    cur = acc.get(ket)
    if cur is None:
        acc[ket] = amp
    else:
        s = cur + amp
        if s.is_zero:
            del acc[ket]
        else:
            acc[ket] = s


def apply_device(state: QuantumState, dev: Device, dc_order: int = 1) -> QuantumState:
    """Apply one device to every term of a pre-squaring state."""
    if state.normalized:
        raise ValueError("devices act before squaring and post-selection")
    kind = dev.kind
    out: dict[Ket, Amplitude] = {}

    if kind == "DC":
        p, q = dev.paths
        out = dict(state.terms)
        for l in range(-dc_order, dc_order + 1):
            ket = ((p, l), (q, -l)) if p < q else ((q, -l), (p, l))
            _merge(out, tuple(sorted(ket)), ONE)

    elif kind == "BS":
        p, q = dev.paths
        for ket, amp in state.terms.items():
            # Expand each photon on p or q into its two output branches.
            branches: list[tuple[list[tuple[int, int]], Amplitude]] = [([], amp)]
            for path, oam in ket:
                if path == p:
                    other = q
                elif path == q:
                    other = p
                else:
                    for photons, _ in branches:
                        photons.append((path, oam))
                    continue
                new_branches = []
                for photons, a in branches:
                    a = a.div_sqrt2()
                    new_branches.append((photons + [(other, oam)], a))
                    new_branches.append((photons + [(path, -oam)], a.times_i()))
                branches = new_branches
            for photons, a in branches:
                _merge(out, tuple(sorted(photons)), a)

    elif kind in ("REF", "DP", "HOLO"):
        (p,) = dev.paths
        n = dev.shift
        for ket, amp in state.terms.items():
            photons = []
            for path, oam in ket:
                if path != p:
                    photons.append((path, oam))
                elif kind == "HOLO":
                    photons.append((path, oam + n))
                else:
                    photons.append((path, -oam))
                    amp = amp.times_i()
                    if kind == "DP" and oam & 1:
                        amp = -amp
            _merge(out, tuple(sorted(photons)), amp)

    else:
        raise ValueError(f"unknown device kind {kind!r}")

    new = QuantumState(out)
    new.check_budget()
    return new


# Complementary detector path pairs: products across one of these three
# splits are the only way two 2-photon kets cover a, b, c, d exactly once.
_COMPLEMENT = {(0, 1): (2, 3), (0, 2): (1, 3), (0, 3): (1, 2)}


def square_and_postselect(state: QuantumState) -> QuantumState:
    """Tensor the state with itself and keep four-fold coincidences.

    Every surviving ket has exactly one photon per detector path; the
    result is normalized in floating point while the exact amplitudes are
    retained for zero detection and state comparison.
    """
    if state.normalized:
        raise ValueError("state already squared")
    buckets: dict[tuple[int, int], list[tuple[int, int, Amplitude]]] = {}
    for ket, amp in state.terms.items():
        if len(ket) != 2:
            raise ValueError("pre-squaring kets must hold exactly 2 photons")
        (p1, o1), (p2, o2) = ket
        if p1 != p2 and p2 <= 3:  # ket is sorted, so p1 < p2 <= 3
            buckets.setdefault((p1, p2), []).append((o1, o2, amp))

    out: dict[Ket, Amplitude] = {}
    for pair, comp in _COMPLEMENT.items():
        left = buckets.get(pair)
        right = buckets.get(comp)
        if not left or not right:
            continue
        for o1, o2, a1 in left:
            for o3, o4, a2 in right:
                photons = sorted(((pair[0], o1), (pair[1], o2),
                                  (comp[0], o3), (comp[1], o4)))
                # both orderings of the pairwise product contribute
                _merge(out, tuple(photons), (a1 * a2).double())

    if not out:
        raise EmptyStateError("no four-fold coincidence term survives")
    norm2 = sum(amp.abs2() for amp in out.values())
    new = QuantumState(out, normalized=True, norm=norm2 ** 0.5)
    new.check_budget()
    return new


def run_setup(devices: Iterable[Device], dc_order: int = 1) -> QuantumState:
    """Seed state, devices in listed order, then square and post-select."""
    state = initial_state()
    for dev in devices:
        state = apply_device(state, dev, dc_order=dc_order)
    return square_and_postselect(state)


def four_photon_table(state: QuantumState) -> dict[tuple[int, int, int, int], complex]:
    """Post-selected state as {(oam_a, oam_b, oam_c, oam_d): amplitude}."""
    if not state.normalized:
        raise ValueError("state must be post-selected")
    table = {}
    for ket, amp in state.terms.items():
        oams = tuple(oam for _, oam in ket)
        table[oams] = complex(amp) / state.norm
    return table


def phase_aligned(state: QuantumState) -> dict[tuple[int, int, int, int], complex]:
    """Normalized amplitudes with the global phase fixed.

    The first nonzero amplitude in canonical ket order is rotated onto the
    positive real axis, so two states that differ only by a global phase
    compare equal entrywise.
    """
    table = four_photon_table(state)
    first = table[min(table)]
    phase = first / abs(first)
    return {ket: amp / phase for ket, amp in table.items()}


def states_proportional(s1: QuantumState, s2: QuantumState) -> bool:
    """Exact test that two post-selected states agree up to a scalar.

    Uses cross-multiplication in the ring, so no floats are involved:
    amp1[k] * amp2[k0] == amp2[k] * amp1[k0] for every ket k.
    """
    if set(s1.terms) != set(s2.terms):
        return False
    k0 = min(s1.terms)
    a0, b0 = s1.terms[k0], s2.terms[k0]
    return all(s1.terms[k] * b0 == s2.terms[k] * a0 for k in s1.terms)
