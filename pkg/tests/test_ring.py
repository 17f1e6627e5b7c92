import math

from hypothesis import given, strategies as st

from qovae.ring import Amplitude, AmplitudeOverflowError, I, INV_SQRT2, ONE, ZERO

small_int = st.integers(min_value=-50, max_value=50)
amp_strategy = st.builds(Amplitude, small_int, small_int, small_int, small_int,
                         st.integers(min_value=0, max_value=6))


def close(x: complex, y: complex, tol=1e-12) -> bool:
    return abs(x - y) <= tol * max(1.0, abs(x), abs(y))


def test_canonical_reduction():
    a = Amplitude(2, 4, 6, 8, 2)
    assert (a.a, a.b, a.c, a.d, a.m) == (1, 2, 3, 4, 1)


def test_zero_canonicalizes_denominator():
    z = Amplitude(0, 0, 0, 0, 7)
    assert z.is_zero and z.m == 0
    assert z == ZERO


def test_constants():
    assert complex(ONE) == 1
    assert complex(I) == 1j
    assert close(complex(INV_SQRT2), 1 / math.sqrt(2))
    assert INV_SQRT2 * INV_SQRT2 == Amplitude(1, 0, 0, 0, 1)


def test_exact_destructive_interference():
    # 1 + i*i = 0 exactly, no residue
    assert (ONE + I * I).is_zero


def test_times_i_twice_negates():
    a = Amplitude(3, -2, 1, 5, 2)
    assert a.times_i().times_i() == -a


def test_div_sqrt2_twice_halves():
    a = Amplitude(3, -2, 1, 5, 0)
    assert a.div_sqrt2().div_sqrt2() == Amplitude(3, -2, 1, 5, 1)


@given(amp_strategy, amp_strategy)
def test_add_matches_complex(x, y):
    assert close(complex(x + y), complex(x) + complex(y))


@given(amp_strategy, amp_strategy)
def test_mul_matches_complex(x, y):
    assert close(complex(x * y), complex(x) * complex(y))


@given(amp_strategy)
def test_neg_sub_conj_abs2(x):
    assert close(complex(-x), -complex(x))
    assert close(complex(x - x), 0)
    assert (x - x).is_zero
    assert close(complex(x.conjugate()), complex(x).conjugate())
    assert close(x.abs2(), abs(complex(x)) ** 2)


@given(amp_strategy)
def test_i_and_sqrt2_channels(x):
    assert close(complex(x.times_i()), 1j * complex(x))
    assert close(complex(x.div_sqrt2()), complex(x) / math.sqrt(2))


@given(amp_strategy, amp_strategy, amp_strategy)
def test_ring_axioms(x, y, z):
    assert (x + y) == (y + x)
    assert (x * y) == (y * x)
    assert ((x + y) + z) == (x + (y + z))
    assert (x * (y + z)) == (x * y + x * z)


def test_budget_check():
    big = Amplitude(1 << 130, 0, 0, 0, 0)
    assert not big.fits_budget()
    assert Amplitude(1 << 100, 1, 1, 1, 0).fits_budget()
    assert ONE.fits_budget(bits=8)


def test_negative_denominator_rejected():
    import pytest
    with pytest.raises(ValueError):
        Amplitude(1, 0, 0, 0, -1)
