"""Exact amplitude arithmetic over Z[i, sqrt(2)] with power-of-two denominators.

Every amplitude a linear-optics device sequence can produce lives in the ring

    (a + b*sqrt(2) + (c + d*sqrt(2))*i) / 2**m

with integer a, b, c, d and m >= 0.  The ring is closed under addition,
multiplication, negation, multiplication by i and division by sqrt(2)
(1/sqrt(2) = sqrt(2)/2), which covers every device rule in the toolbox.
Keeping amplitudes exact means destructive interference produces literal
zeros instead of float residue, so dropped terms are provably gone.
"""

from __future__ import annotations

import math

# Setups beyond this coefficient budget are rejected rather than silently
# degraded; 20-device experiments stay orders of magnitude below it.
COMPONENT_BUDGET_BITS = 128

_SQRT2 = math.sqrt(2.0)


class AmplitudeOverflowError(ArithmeticError):
    """An amplitude component exceeded the exact-arithmetic budget."""


class Amplitude:
    """Immutable element of Z[i, sqrt(2)] / 2**m, kept in canonical form.

    Canonical form: either all four integer components share no common
    factor of 2 with the denominator, or the value is exactly zero with
    m == 0.  Zero testing is therefore a plain component check.
    """

    __slots__ = ("a", "b", "c", "d", "m")

    def __init__(self, a: int, b: int = 0, c: int = 0, d: int = 0, m: int = 0):
        if m < 0:
            raise ValueError("denominator exponent must be non-negative")
        while m > 0 and not ((a | b | c | d) & 1):
            a >>= 1
            b >>= 1
            c >>= 1
            d >>= 1
            m -= 1
        if a == b == c == d == 0:
            m = 0
        self.a = a
        self.b = b
        self.c = c
        self.d = d
        self.m = m

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "Amplitude") -> "Amplitude":
        m1, m2 = self.m, other.m
        if m1 == m2:
            return Amplitude(self.a + other.a, self.b + other.b,
                             self.c + other.c, self.d + other.d, m1)
        if m1 < m2:
            s = 1 << (m2 - m1)
            return Amplitude(self.a * s + other.a, self.b * s + other.b,
                             self.c * s + other.c, self.d * s + other.d, m2)
        s = 1 << (m1 - m2)
        return Amplitude(self.a + other.a * s, self.b + other.b * s,
                         self.c + other.c * s, self.d + other.d * s, m1)

    def __sub__(self, other: "Amplitude") -> "Amplitude":
        return self + (-other)

    def __neg__(self) -> "Amplitude":
        return Amplitude(-self.a, -self.b, -self.c, -self.d, self.m)

    def __mul__(self, other: "Amplitude") -> "Amplitude":
        a1, b1, c1, d1 = self.a, self.b, self.c, self.d
        a2, b2, c2, d2 = other.a, other.b, other.c, other.d
        # (x1 + y1 i)(x2 + y2 i) with x, y in Z[sqrt(2)] as (int, sqrt2) pairs.
        ra = a1 * a2 + 2 * (b1 * b2) - (c1 * c2 + 2 * (d1 * d2))
        rb = a1 * b2 + b1 * a2 - (c1 * d2 + d1 * c2)
        ia = a1 * c2 + 2 * (b1 * d2) + c1 * a2 + 2 * (d1 * b2)
        ib = a1 * d2 + b1 * c2 + c1 * b2 + d1 * a2
        return Amplitude(ra, rb, ia, ib, self.m + other.m)

    def times_i(self) -> "Amplitude":
        return Amplitude(-self.c, -self.d, self.a, self.b, self.m)

    def div_sqrt2(self) -> "Amplitude":
        # multiply by sqrt(2)/2: sqrt(2)*(a + b*sqrt(2)) = 2b + a*sqrt(2)
        return Amplitude(2 * self.b, self.a, 2 * self.d, self.c, self.m + 1)

    def double(self) -> "Amplitude":
        return Amplitude(2 * self.a, 2 * self.b, 2 * self.c, 2 * self.d, self.m)

    def conjugate(self) -> "Amplitude":
        return Amplitude(self.a, self.b, -self.c, -self.d, self.m)

    # -- queries -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0 and self.c == 0 and self.d == 0

    def abs2(self) -> float:
        """|amplitude|^2 as a float; exact up to the final float conversion."""
        x = self.a * self.a + 2 * self.b * self.b + self.c * self.c + 2 * self.d * self.d
        y = 2 * (self.a * self.b + self.c * self.d)
        return (x + y * _SQRT2) / float(4 ** self.m)

    def __complex__(self) -> complex:
        scale = float(2 ** self.m)
        return complex((self.a + self.b * _SQRT2) / scale,
                       (self.c + self.d * _SQRT2) / scale)

    def fits_budget(self, bits: int = COMPONENT_BUDGET_BITS) -> bool:
        bound = 1 << (bits - 1)
        return (-bound <= self.a < bound and -bound <= self.b < bound
                and -bound <= self.c < bound and -bound <= self.d < bound)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Amplitude):
            return NotImplemented
        return (self.a == other.a and self.b == other.b and self.c == other.c
                and self.d == other.d and self.m == other.m)

    def __hash__(self) -> int:
        return hash((self.a, self.b, self.c, self.d, self.m))

    def __repr__(self) -> str:
        num = []
        if self.a:
            num.append(f"{self.a}")
        if self.b:
            num.append(f"{self.b}*sqrt2")
        if self.c:
            num.append(f"{self.c}*i")
        if self.d:
            num.append(f"{self.d}*i*sqrt2")
        body = " + ".join(num) if num else "0"
        if self.m:
            return f"({body})/2^{self.m}"
        return body


ZERO = Amplitude(0)
ONE = Amplitude(1)
I = Amplitude(0, 0, 1, 0)
INV_SQRT2 = Amplitude(0, 1, 0, 0, 1)  # sqrt(2)/2
