import math
import time

import pytest

from conftest import GHZ_SETUP, GOLDEN_SETUP, random_setup
from qovae.quantum import (EmptyStateError, QuantumState, apply_device,
                           beam_splitter, dove_prism, down_converter,
                           four_photon_table, hologram, initial_state, mirror,
                           phase_aligned, run_setup, square_and_postselect,
                           states_proportional)
from qovae.ring import Amplitude, AmplitudeOverflowError, I, INV_SQRT2, ONE


def test_initial_state():
    st = initial_state()
    assert len(st) == 2
    assert st.terms[((0, 0), (1, 0))] == ONE
    assert st.terms[((2, 0), (3, 0))] == ONE
    assert all(len(ket) == 2 for ket in st.terms)
    assert not st.normalized


def test_beam_splitter_rule_matches_table():
    # |0>_a |0>_b with BS on (b,c): |0>_b -> (|0>_c + i|0>_b)/sqrt(2)
    st = QuantumState({((0, 0), (1, 0)): ONE})
    out = apply_device(st, beam_splitter(1, 2))
    assert out.terms[((0, 0), (2, 0))] == INV_SQRT2
    assert out.terms[((0, 0), (1, 0))] == INV_SQRT2.times_i()
    assert len(out) == 2


def test_hologram_inverse_pair_is_identity(rng, vocab):
    setup = random_setup(rng, vocab)
    st = initial_state()
    for dev in setup[:3]:
        st = apply_device(st, dev)
    roundtrip = apply_device(apply_device(st, hologram(1, 1)), hologram(1, -1))
    assert roundtrip.terms == st.terms


def test_down_conversion_adds_three_terms():
    st = initial_state()
    out = apply_device(st, down_converter(2, 3))
    # existing 2 terms kept; l = -1, 1 added; l = 0 merges with |0>_c|0>_d
    assert len(out) == 4
    assert out.terms[((2, 0), (3, 0))] == Amplitude(2)
    assert out.terms[((2, -1), (3, 1))] == ONE
    assert out.terms[((2, 1), (3, -1))] == ONE
    assert out.terms[((0, 0), (1, 0))] == ONE


def test_down_conversion_order_knob():
    out = apply_device(initial_state(), down_converter(2, 3), dc_order=2)
    assert ((2, -2), (3, 2)) in out.terms and ((2, 2), (3, -2)) in out.terms


def test_dove_prism_phase():
    # DP on |1>_p: i * e^{i pi} |-1>_p = -i |-1>_p
    st = QuantumState({((0, 1), (2, 0)): ONE})
    out = apply_device(st, dove_prism(0))
    assert out.terms[((0, -1), (2, 0))] == -I
    # and on |0>_p the phase is +i
    st = QuantumState({((0, 0), (2, 0)): ONE})
    out = apply_device(st, dove_prism(0))
    assert out.terms[((0, 0), (2, 0))] == I


def test_mirror_flips_and_phases():
    st = QuantumState({((0, 2), (1, 0)): ONE})
    out = apply_device(st, mirror(0))
    assert out.terms[((0, -2), (1, 0))] == I


def test_photon_count_conserved(rng, vocab):
    for _ in range(25):
        setup = random_setup(rng, vocab)
        st = initial_state()
        for dev in setup:
            st = apply_device(st, dev)
            assert all(len(ket) == 2 for ket in st.terms)


def test_square_of_bare_initial_state():
    st = square_and_postselect(initial_state())
    assert len(st) == 1
    table = phase_aligned(st)
    assert abs(table[(0, 0, 0, 0)] - 1.0) < 1e-12


def test_hong_ou_mandel_cancellation():
    # BS on the two photons of one crystal bunches them; squaring then
    # leaves no four-fold coincidence at all.
    st = apply_device(initial_state(), beam_splitter(0, 1))
    assert ((0, 0), (1, 0)) not in st.terms  # exact cancellation
    with pytest.raises(EmptyStateError):
        square_and_postselect(st)


def test_golden_example_exact():
    t0 = time.monotonic()
    st = run_setup(GOLDEN_SETUP)
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0
    expected_kets = {(1, 1, -1, -1), (1, 1, 0, 0), (1, 1, 1, 1)}
    table = four_photon_table(st)
    assert set(table) == expected_kets
    # exact amplitudes all equal (-sqrt2 with this convention)
    amps = set(st.terms.values())
    assert amps == {Amplitude(0, -1)}
    aligned = phase_aligned(st)
    for ket in expected_kets:
        assert abs(aligned[ket] - 1 / math.sqrt(3)) < 1e-12
    expected = QuantumState({tuple(sorted(zip(range(4), k))): ONE
                             for k in expected_kets}, normalized=True,
                            norm=math.sqrt(3))
    assert states_proportional(st, expected)


def test_ghz_setup_state():
    t0 = time.monotonic()
    st = run_setup(GHZ_SETUP)
    assert time.monotonic() - t0 < 5.0
    table = phase_aligned(st)
    assert set(table) == {(0, 0, 0, 0), (1, 1, 1, 1)}
    assert abs(table[(0, 0, 0, 0)] - 1 / math.sqrt(2)) < 1e-12
    assert abs(table[(1, 1, 1, 1)] - 1 / math.sqrt(2)) < 1e-12


def test_empty_setup():
    st = run_setup(())
    assert set(four_photon_table(st)) == {(0, 0, 0, 0)}


def test_device_order_matters():
    # hologram before the beam splitter marks the photons and yields an
    # entangled 2-ket state; after it, the interference closes every
    # coincidence channel
    b = run_setup((hologram(0, 1), beam_splitter(0, 1)))
    assert len(b) == 2
    with pytest.raises(EmptyStateError):
        run_setup((beam_splitter(0, 1), hologram(0, 1)))
    # and between two surviving orders the states differ
    x = run_setup((down_converter(2, 3), hologram(2, 1)))
    y = run_setup((hologram(2, 1), down_converter(2, 3)))
    assert not states_proportional(x, y)


def test_postselection_and_normalization(rng, vocab):
    checked = 0
    for _ in range(60):
        setup = random_setup(rng, vocab)
        try:
            st = run_setup(setup)
        except EmptyStateError:
            continue
        checked += 1
        for ket in st.terms:
            assert tuple(p for p, _ in ket) == (0, 1, 2, 3)
        total = sum(abs(a) ** 2 for a in st.amplitudes().values())
        assert abs(total - 1.0) < 1e-12
    assert checked > 10


def test_budget_enforcement():
    # repeated down-conversion piles amplitude onto the l = 0 ket until it
    # exceeds a (deliberately tiny) component budget
    st = initial_state()
    with pytest.raises(AmplitudeOverflowError):
        for _ in range(12):
            st = apply_device(st, down_converter(0, 1))
            st.check_budget(bits=4)


def test_apply_after_postselect_rejected():
    st = run_setup(GOLDEN_SETUP)
    with pytest.raises(ValueError):
        apply_device(st, mirror(0))
    with pytest.raises(ValueError):
        square_and_postselect(st)
