"""Bipartition spectra, von Neumann entropies and Schmidt ranks.

A post-selected four-photon state is split across the seven inequivalent
bipartitions a|bcd, b|acd, c|abd, d|abc, ab|cd, ac|bd, ad|bc.  For each,
the reduced density operator's spectrum equals the eigenvalues of the Gram
matrix M M* built from the coefficient matrix M whose rows are indexed by
the OAM tuples of the kept subsystem and columns by those of the traced-out
complement.  The total measure is the sum of the seven entropies (natural
log); an experiment is entangled iff the total is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import QuantumState, four_photon_table

# kept side of each bipartition, as detector path indices
BIPARTITIONS = ((0,), (1,), (2,), (3,), (0, 1), (0, 2), (0, 3))
BIPARTITION_NAMES = ("a", "b", "c", "d", "ab", "ac", "ad")

# Relative tolerance separating true zeros (exact upstream arithmetic)
# from eigensolver float noise.
RANK_TOL = 1e-9

_JACOBI_OFF_TOL = 1e-12
_MAX_SWEEPS = 60


def jacobi_eigvalsh(h: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.

    Complex off-diagonal entries are handled with the standard 2x2 unitary
    rotation (phase factored out, then a real Jacobi angle).  Convergence:
    off-diagonal Frobenius norm below 1e-12.
    """
    a = np.array(h, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 1:
        return a.real.reshape(1).copy()

    for _ in range(_MAX_SWEEPS):
        off = math.sqrt(max(0.0, np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2)))
        if off < _JACOBI_OFF_TOL:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                f = a[p, q]
                fabs = abs(f)
                if fabs < 1e-15:
                    # negligible against the 1e-12 convergence target and
                    # rotating on a subnormal pivot is numerically unsafe
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                phase = f / fabs
                alpha = a[p, p].real
                beta = a[q, q].real
                tau = (beta - alpha) / (2.0 * fabs)
                if abs(tau) > 1e8:
                    t = 1.0 / (2.0 * tau)
                elif tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # columns: H <- H R with R[p,p]=c, R[q,q]=c, R[p,q]=s*phase,
                # R[q,p]=-s*conj(phase); then rows: H <- R^dagger H
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * np.conj(phase) * col_q
                a[:, q] = s * phase * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * phase * row_q
                a[q, :] = s * np.conj(phase) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
    return np.diag(a).real.copy()


def bipartition_spectrum(state: QuantumState, part: tuple[int, ...]) -> list[float]:
    """Descending eigenvalues of the reduced density operator for `part`."""
    if not state.normalized:
        raise ValueError("state must be normalized (post-selected)")
    table = four_photon_table(state)
    comp = tuple(i for i in range(4) if i not in part)
    rows: dict[tuple[int, ...], int] = {}
    cols: dict[tuple[int, ...], int] = {}
    entries = []
    for oams, amp in table.items():
        r = tuple(oams[i] for i in part)
        ccol = tuple(oams[i] for i in comp)
        ri = rows.setdefault(r, len(rows))
        ci = cols.setdefault(ccol, len(cols))
        entries.append((ri, ci, amp))
    m = np.zeros((len(rows), len(cols)), dtype=complex)
    for ri, ci, amp in entries:
        m[ri, ci] = amp
    # same nonzero spectrum either way; the smaller Gram side is cheaper
    gram = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.conj().T @ m
    eigs = jacobi_eigvalsh(gram)
    eigs = np.clip(eigs, 0.0, None)
    eigs[::-1].sort()
    return eigs.tolist()


def entropy(eigs: list[float]) -> float:
    """Natural-log von Neumann entropy of a density spectrum."""
    if not eigs:
        return 0.0
    top = max(eigs)
    if top <= 0.0:
        return 0.0
    tol = RANK_TOL * top
    total = 0.0
    for p in eigs:
        if p > tol:
            total -= p * math.log(p)
    return max(0.0, total)


def schmidt_rank(eigs: list[float]) -> int:
    """Number of spectrum entries above the rank tolerance."""
    if not eigs:
        return 1
    tol = RANK_TOL * max(eigs)
    return max(1, sum(1 for p in eigs if p > tol))


@dataclass(frozen=True)
class EntanglementSummary:
    """Entropy vector, Schmidt rank vector and scalar total for one state."""

    s: tuple[float, ...]    # 7 entropies, bipartition order above
    srv: tuple[int, ...]    # 7 Schmidt ranks, same order
    total: float            # sum of the 7 entropies

    @property
    def entangled(self) -> bool:
        return self.total > 0.0


UNENTANGLED = EntanglementSummary(s=(0.0,) * 7, srv=(1,) * 7, total=0.0)


def summarize(state: QuantumState | None) -> EntanglementSummary:
    """All seven bipartition entropies and ranks.

    `None` stands for the empty post-selected state; it and single-ket
    states are unentangled by convention.
    """
    if state is None or len(state.terms) <= 1:
        return UNENTANGLED
    entropies = []
    ranks = []
    for part in BIPARTITIONS:
        eigs = bipartition_spectrum(state, part)
        entropies.append(entropy(eigs))
        ranks.append(schmidt_rank(eigs))
    return EntanglementSummary(s=tuple(entropies), srv=tuple(ranks),
                               total=sum(entropies))
