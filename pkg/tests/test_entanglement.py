import math

import numpy as np
import pytest

from conftest import GHZ_SETUP, GOLDEN_SETUP, random_setup
from oracles import dense_bipartition_spectrum, dense_entropy
from qovae.entanglement import (BIPARTITIONS, bipartition_spectrum, entropy,
                                jacobi_eigvalsh, schmidt_rank, summarize)
from qovae.quantum import (EmptyStateError, QuantumState, dove_prism,
                           down_converter, four_photon_table, hologram,
                           mirror, run_setup)
from qovae.ring import ONE


def state_from_kets(kets):
    """Equal-weight normalized state on the given (i,j,k,l) tuples."""
    terms = {tuple(sorted(zip(range(4), k))): ONE for k in kets}
    return QuantumState(terms, normalized=True, norm=math.sqrt(len(kets)))


GHZ_STATE = state_from_kets([(0, 0, 0, 0), (1, 1, 1, 1)])
PRODUCT_STATE = state_from_kets([(0, 0, 0, 0)])


def test_jacobi_matches_numpy(rng):
    for n in (1, 2, 3, 5, 9, 18, 30):
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h = x @ x.conj().T
        ours = np.sort(jacobi_eigvalsh(h))
        ref = np.sort(np.linalg.eigvalsh(h))
        assert np.max(np.abs(ours - ref)) < 1e-9 * max(1.0, np.max(np.abs(ref)))


def test_spectrum_product_state():
    assert bipartition_spectrum(PRODUCT_STATE, (0,)) == [1.0]


def test_spectrum_ghz_pair():
    eigs = bipartition_spectrum(GHZ_STATE, (0, 1))
    assert np.allclose(eigs, [0.5, 0.5])


def test_spectrum_golden_single_photon_factor():
    # photon a is |1> in every ket of the golden state
    st = run_setup(GOLDEN_SETUP)
    eigs = bipartition_spectrum(st, (0,))
    assert np.allclose(eigs, [1.0], atol=1e-12)


def test_entropy_values():
    assert abs(entropy([0.5, 0.5]) - 0.693147) < 1e-6
    assert entropy([1.0]) == 0.0
    assert abs(entropy([1 / 3] * 3) - math.log(3)) < 1e-12


def test_entropy_clips_noise():
    assert entropy([1.0, -1e-13, 1e-14]) == 0.0


def test_schmidt_rank_values():
    assert schmidt_rank([0.5, 0.5, 0.0]) == 2
    assert schmidt_rank(bipartition_spectrum(PRODUCT_STATE, (0, 2))) == 1


def test_three_party_srv_422_adaptation():
    # (|000> + |101> + |210> + |311>)/2: particle 1 vs rest has rank 4,
    # particles 2 and 3 have rank 2 each.
    kets = [(0, 0, 0), (1, 0, 1), (2, 1, 0), (3, 1, 1)]
    amps = np.full(4, 0.5)
    for axis, expected in ((0, 4), (1, 2), (2, 2)):
        rows = {}
        cols = {}
        m = np.zeros((4, 4), dtype=complex)
        for ket, a in zip(kets, amps):
            r = rows.setdefault(ket[axis], len(rows))
            rest = tuple(v for i, v in enumerate(ket) if i != axis)
            c = cols.setdefault(rest, len(cols))
            m[r, c] = a
        m = m[:len(rows), :len(cols)]
        eigs = jacobi_eigvalsh(m @ m.conj().T).tolist()
        assert schmidt_rank(eigs) == expected


def test_summarize_ghz():
    summ = summarize(GHZ_STATE)
    for s in summ.s:
        assert abs(s - 0.693147) < 1e-6
    assert summ.srv == (2,) * 7
    assert abs(summ.total - 4.852) < 1e-3


def test_summarize_unentangled_conventions():
    assert summarize(None).total == 0.0
    assert summarize(None).srv == (1,) * 7
    summ = summarize(PRODUCT_STATE)
    assert summ.total == 0.0 and summ.srv == (1,) * 7


def test_summarize_golden_matches_dense_oracle():
    st = run_setup(GOLDEN_SETUP)
    table = four_photon_table(st)
    summ = summarize(st)
    total = 0.0
    for part, s in zip(BIPARTITIONS, summ.s):
        ref = dense_entropy(dense_bipartition_spectrum(table, part))
        assert abs(s - ref) < 1e-9
        total += ref
    assert abs(summ.total - total) < 1e-9


def test_gram_vs_dense_oracle_random_setups(rng, vocab):
    checked = 0
    attempts = 0
    while checked < 30 and attempts < 500:
        attempts += 1
        setup = random_setup(rng, vocab)
        try:
            st = run_setup(setup)
        except EmptyStateError:
            continue
        table = four_photon_table(st)
        for part in BIPARTITIONS:
            ours = np.array(bipartition_spectrum(st, part))
            ref = dense_bipartition_spectrum(table, part)
            k = min(len(ours), len(ref))
            assert np.max(np.abs(ours[:k] - ref[:k])) < 1e-9
        checked += 1
    assert checked == 30


def test_pure_state_duality(rng, vocab):
    checked = 0
    while checked < 10:
        setup = random_setup(rng, vocab)
        try:
            st = run_setup(setup)
        except EmptyStateError:
            continue
        checked += 1
        for part in BIPARTITIONS:
            comp = tuple(i for i in range(4) if i not in part)
            a = [e for e in bipartition_spectrum(st, part) if e > 1e-12]
            b = [e for e in bipartition_spectrum(st, comp) if e > 1e-12]
            assert np.allclose(a, b, atol=1e-10)


def test_local_unitary_invariance(rng, vocab):
    singles = [mirror(0), dove_prism(2), hologram(1, 1), hologram(3, -2)]
    checked = 0
    while checked < 8:
        setup = random_setup(rng, vocab)
        try:
            base = summarize(run_setup(setup))
        except EmptyStateError:
            continue
        checked += 1
        for dev in singles:
            summ = summarize(run_setup(setup + (dev,)))
            assert summ.srv == base.srv
            assert np.allclose(summ.s, base.s, atol=1e-9)


def test_single_two_photon_device_can_entangle():
    # Path-identity effects: one cross-pair beam splitter after an OAM
    # marking, or one bare down-converter, already produce S > 0.  Kept as
    # a regression anchor for the sampling statistics.
    from qovae.quantum import beam_splitter
    summ = summarize(run_setup((hologram(1, 1), beam_splitter(1, 2))))
    assert abs(summ.total - 4 * math.log(2)) < 1e-9
    summ = summarize(run_setup((down_converter(2, 3),)))
    assert summ.total > 0.5


def test_spectrum_requires_normalized_state():
    from qovae.quantum import initial_state
    with pytest.raises(ValueError):
        bipartition_spectrum(initial_state(), (0,))
