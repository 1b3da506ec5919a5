"""Exact rationals split as ``odd fraction * 2**-e`` and closed intervals over them.

The interval construction produces lengths like ``2**-3453192 / 6``.  Keeping
the power of two as a separate exponent means additions only shift
numerators, and every gcd runs against a small odd denominator instead of a
multi-megabit one.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Number = Union["ExactScalar", int, Fraction]

if hasattr(sys, "set_int_max_str_digits"):
    # materialized endpoints can have millions of decimal digits
    sys.set_int_max_str_digits(0)


def _odd_part(x: int) -> tuple[int, int]:
    """Return ``(odd, t)`` with ``x == odd * 2**t`` for nonzero ``x``."""
    t = (x & -x).bit_length() - 1
    return x >> t, t


def _normalize(n: int, d: int, e: int) -> tuple[int, int, int]:
    # d must already be odd and positive; e may be negative
    if n == 0:
        return 0, 1, 0
    if d != 1:
        # reduce the (usually huge) numerator modulo the small odd part first
        g = math.gcd(d, n % d)
        if g != 1:
            n //= g
            d //= g
    if e > 0:
        tz = (n & -n).bit_length() - 1
        k = tz if tz < e else e
        if k:
            n >>= k
            e -= k
    elif e < 0:
        n <<= -e
        e = 0
    return n, d, e


def _int_text(x: int) -> str:
    return str(x) if x.bit_length() <= 256 else hex(x)


class ExactScalar:
    """Exact rational ``n / (d * 2**e)`` with ``d`` odd and ``e >= 0``.

    The representation is canonical: ``gcd(n, d) == 1`` and ``n`` is odd
    whenever ``e > 0``.  Zero is ``(0, 1, 0)``.
    """

    __slots__ = ("n", "d", "e")

    def __init__(self, numerator: int = 0, denominator: int = 1) -> None:
        if denominator == 0:
            raise ZeroDivisionError("ExactScalar with zero denominator")
        if denominator < 0:
            numerator, denominator = -numerator, -denominator
        odd, t = _odd_part(denominator)
        self.n, self.d, self.e = _normalize(numerator, odd, t)

    @classmethod
    def _raw(cls, n: int, d: int, e: int) -> "ExactScalar":
        obj = cls.__new__(cls)
        obj.n, obj.d, obj.e = _normalize(n, d, e)
        return obj

    @classmethod
    def pow2(cls, k: int) -> "ExactScalar":
        """Exactly ``2**k`` for any integer ``k``."""
        return cls._raw(1, 1, -k)

    @classmethod
    def coerce(cls, x: Number) -> "ExactScalar":
        if isinstance(x, ExactScalar):
            return x
        if isinstance(x, int):
            return cls._raw(x, 1, 0)
        if isinstance(x, Fraction):
            return cls(x.numerator, x.denominator)
        raise TypeError(f"cannot convert {type(x).__name__} to ExactScalar")

    @classmethod
    def from_record(cls, rec: dict) -> "ExactScalar":
        """Inverse of :meth:`to_record`; rejects non-canonical input."""
        sign = int(rec["sign"])
        num = int(rec["num"], 0)
        den = int(rec["den"], 0)
        e = int(rec["pow2"])
        if sign not in (1, -1) or num < 0 or den < 1 or den % 2 == 0 or e < 0:
            raise ValueError(f"malformed ExactScalar record: {rec!r}")
        x = cls._raw(sign * num, den, e)
        if (abs(x.n), x.d, x.e) != (num, den, e) or (num == 0 and sign != 1):
            raise ValueError(f"non-canonical ExactScalar record: {rec!r}")
        return x

    def to_record(self) -> dict:
        """Integers above 256 bits are written in hex; decimal conversion is quadratic."""
        return {
            "sign": -1 if self.n < 0 else 1,
            "num": _int_text(abs(self.n)),
            "den": _int_text(self.d),
            "pow2": self.e,
        }

    def to_fraction(self) -> Fraction:
        return Fraction(self.n, self.d << self.e)

    def log2_abs(self) -> float:
        """Approximate ``log2(|x|)``; ``-inf`` for zero.  Never used to certify."""
        if self.n == 0:
            return -math.inf
        return math.log2(abs(self.n)) - math.log2(self.d) - self.e

    def approx(self) -> float:
        """Nearest float, for plotting only; underflows to 0.0 for tiny values."""
        n, e = self.n, self.e
        if e > 1100:
            # drop low bits that cannot affect a double
            n, e = n >> (e - 1100), 1100
        return n / (self.d << e)

    def floor_log2(self) -> int:
        """Largest ``k`` with ``2**k <= |x|``, computed exactly."""
        if self.n == 0:
            raise ValueError("floor_log2 of zero")
        n, d = abs(self.n), self.d
        k = n.bit_length() - d.bit_length()
        # 2**k * d <= n < 2**(k+2) * d; fix up the single possible off-by-one
        if (d << k if k >= 0 else d) > (n if k >= 0 else n << -k):
            k -= 1
        return k - self.e

    def sign(self) -> int:
        return (self.n > 0) - (self.n < 0)

    def is_zero(self) -> bool:
        return self.n == 0

    # arithmetic

    def __add__(self, other: Number) -> "ExactScalar":
        if not isinstance(other, ExactScalar):
            try:
                other = ExactScalar.coerce(other)
            except TypeError:
                return NotImplemented
        a, b = self, other
        if a.e >= b.e:
            e = a.e
            na, nb = a.n, b.n << (a.e - b.e)
        else:
            e = b.e
            na, nb = a.n << (b.e - a.e), b.n
        if a.d == b.d:
            return ExactScalar._raw(na + nb, a.d, e)
        return ExactScalar._raw(na * b.d + nb * a.d, a.d * b.d, e)

    __radd__ = __add__

    def __neg__(self) -> "ExactScalar":
        obj = ExactScalar.__new__(ExactScalar)
        obj.n, obj.d, obj.e = -self.n, self.d, self.e
        return obj

    def __sub__(self, other: Number) -> "ExactScalar":
        if not isinstance(other, ExactScalar):
            try:
                other = ExactScalar.coerce(other)
            except TypeError:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Number) -> "ExactScalar":
        return ExactScalar.coerce(other) - self

    def __mul__(self, other: Number) -> "ExactScalar":
        if not isinstance(other, ExactScalar):
            try:
                other = ExactScalar.coerce(other)
            except TypeError:
                return NotImplemented
        return ExactScalar._raw(self.n * other.n, self.d * other.d, self.e + other.e)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> "ExactScalar":
        if not isinstance(other, ExactScalar):
            try:
                other = ExactScalar.coerce(other)
            except TypeError:
                return NotImplemented
        if other.n == 0:
            raise ZeroDivisionError("ExactScalar division by zero")
        odd, t = _odd_part(abs(other.n))
        sgn = 1 if other.n > 0 else -1
        return ExactScalar._raw(
            sgn * self.n * other.d, self.d * odd, self.e + t - other.e
        )

    def __rtruediv__(self, other: Number) -> "ExactScalar":
        return ExactScalar.coerce(other) / self

    def __abs__(self) -> "ExactScalar":
        return -self if self.n < 0 else self

    def shift(self, k: int) -> "ExactScalar":
        """Multiply by ``2**k``."""
        return ExactScalar._raw(self.n, self.d, self.e - k)

    # comparisons

    def _cmp(self, other: Number) -> int:
        if not isinstance(other, ExactScalar):
            other = ExactScalar.coerce(other)
        sa, sb = self.sign(), other.sign()
        if sa != sb or sa == 0:
            return (sa > sb) - (sa < sb)
        if self.d == other.d and self.e == other.e:
            return (self.n > other.n) - (self.n < other.n)
        # |x| lies strictly between 2**(m-1) and 2**(m+1) for the bit-length estimate m
        ma = self.n.bit_length() - self.d.bit_length() - self.e
        mb = other.n.bit_length() - other.d.bit_length() - other.e
        if ma >= mb + 2:
            return sa
        if mb >= ma + 2:
            return -sa
        e = max(self.e, other.e)
        lhs = (self.n * other.d) << (e - self.e)
        rhs = (other.n * self.d) << (e - other.e)
        return (lhs > rhs) - (lhs < rhs)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ExactScalar):
            return self.n == other.n and self.d == other.d and self.e == other.e
        if isinstance(other, (int, Fraction)):
            return self._cmp(other) == 0
        return NotImplemented

    def __lt__(self, other: Number) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other: Number) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other: Number) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other: Number) -> bool:
        return self._cmp(other) >= 0

    def __hash__(self) -> int:
        return hash((self.n, self.d, self.e))

    def __bool__(self) -> bool:
        return self.n != 0

    def __repr__(self) -> str:
        if self.n.bit_length() <= 64:
            body = f"{self.n}/{self.d}" if self.d != 1 else f"{self.n}"
            return f"ExactScalar({body} * 2**-{self.e})" if self.e else f"ExactScalar({body})"
        return f"ExactScalar(~2**{self.log2_abs():.6g}, sign={self.sign()})"


def exact(x: Number) -> ExactScalar:
    return ExactScalar.coerce(x)


ZERO = ExactScalar(0)
ONE = ExactScalar(1)


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with exact endpoints."""

    lo: ExactScalar
    hi: ExactScalar

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError("interval with lo > hi")

    @property
    def length(self) -> ExactScalar:
        return self.hi - self.lo

    @property
    def midpoint(self) -> ExactScalar:
        return (self.lo + self.hi).shift(-1)

    def contains(self, x: Number) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def strictly_contains_interval(self, other: "Interval") -> bool:
        """``other`` lies in the interior of ``self``."""
        return self.lo < other.lo and other.hi < self.hi

    def disjoint(self, other: "Interval") -> bool:
        return self.hi < other.lo or other.hi < self.lo

    def gap(self, other: "Interval") -> ExactScalar:
        """Least distance between a point of ``self`` and a point of ``other``."""
        if self.hi < other.lo:
            return other.lo - self.hi
        if other.hi < self.lo:
            return self.lo - other.hi
        return ZERO

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def span(self, other: "Interval") -> ExactScalar:
        """Greatest distance between a point of ``self`` and a point of ``other``."""
        return max(self.hi, other.hi) - min(self.lo, other.lo)

    def to_record(self) -> dict:
        return {"lo": self.lo.to_record(), "hi": self.hi.to_record()}

    @classmethod
    def from_record(cls, rec: dict) -> "Interval":
        return cls(ExactScalar.from_record(rec["lo"]), ExactScalar.from_record(rec["hi"]))
