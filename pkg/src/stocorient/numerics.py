"""Exact scalar arithmetic shared by every module.

Everything downstream computes with three kinds of scalars:

  - plain Python ``int`` for sizes, distances and budgets (these get
    astronomically large, e.g. 2^(2^13), so exactness is non-negotiable),
  - ``fractions.Fraction`` for probabilities and rewards,
  - ``SqrtRational`` for values of the form a + b*sqrt(d): the lower-bound
    family uses success probability 1/sqrt(L), and keeping sqrt(L) symbolic
    makes every policy value exact (e.g. the best line value at L=2 is the
    honest rational 3/2, not a 2^-30 neighbour of it).

``SqrtRational`` is a tiny quadratic-extension field element: closed under
+, -, *, / and exactly comparable.  When d is a perfect square or b == 0 the
value collapses to a rational and compares/hashes equal to the corresponding
``Fraction``.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Union

Rational = Union[int, Fraction]
ExactScalar = Union[int, Fraction, "SqrtRational"]

_TERM_RE = re.compile(
    r"^(?P<a>[+-]?\d+(?:/\d+)?)?"
    r"(?P<op>[+-])?"
    r"(?:(?P<b>\d+(?:/\d+)?)\*)?sqrt\((?P<d>\d+)\)$"
)


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


class SqrtRational:
    """Exact number a + b*sqrt(d), with a, b rational and d a nonnegative int."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a: Rational, b: Rational = 0, d: int = 0):
        a = Fraction(a)
        b = Fraction(b)
        if b != 0 and _is_square(d):
            a += b * math.isqrt(d)
            b = Fraction(0)
        if b == 0:
            d = 0
        elif d < 0:
            raise ValueError("negative radicand")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    def __setattr__(self, *_):
        raise AttributeError("SqrtRational is immutable")

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def as_fraction(self) -> Fraction:
        if self.b != 0:
            raise ValueError(f"{self} is irrational")
        return self.a

    # -- coercion ---------------------------------------------------------

    def _coerce(self, other) -> "SqrtRational | None":
        if isinstance(other, SqrtRational):
            if other.b != 0 and self.b != 0 and other.d != self.d:
                raise ValueError(f"mixed radicands sqrt({self.d}) and sqrt({other.d})")
            return other
        if isinstance(other, (int, Fraction)):
            return SqrtRational(other)
        return None

    def _d(self, other: "SqrtRational") -> int:
        return self.d if self.b != 0 else other.d

    # -- ring/field operations -------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return SqrtRational(self.a + o.a, self.b + o.b, self._d(o))

    __radd__ = __add__

    def __neg__(self):
        return SqrtRational(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return SqrtRational(self.a - o.a, self.b - o.b, self._d(o))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return SqrtRational(o.a - self.a, o.b - self.b, self._d(o))

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._d(o)
        return SqrtRational(
            self.a * o.a + self.b * o.b * d,
            self.a * o.b + self.b * o.a,
            d,
        )

    __rmul__ = __mul__

    def _inverse(self) -> "SqrtRational":
        if self.b == 0:
            return SqrtRational(1 / self.a)
        norm = self.a * self.a - self.b * self.b * self.d
        if norm == 0:
            raise ZeroDivisionError("division by zero")
        return SqrtRational(self.a / norm, -self.b / norm, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o._inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self._inverse()

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            return NotImplemented
        result = SqrtRational(1)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    # -- exact comparisons -------------------------------------------------

    def _sign(self) -> int:
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 against b^2 * d
        lhs, rhs = a * a, b * b * self.d
        if lhs == rhs:
            return 0
        bigger_is_a = lhs > rhs
        return (1 if a > 0 else -1) if bigger_is_a else (1 if b > 0 else -1)

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o)._sign()

    def __eq__(self, other):
        c = self._cmp(other)
        return c == 0 if c is not NotImplemented else NotImplemented

    def __lt__(self, other):
        c = self._cmp(other)
        return c < 0 if c is not NotImplemented else NotImplemented

    def __le__(self, other):
        c = self._cmp(other)
        return c <= 0 if c is not NotImplemented else NotImplemented

    def __gt__(self, other):
        c = self._cmp(other)
        return c > 0 if c is not NotImplemented else NotImplemented

    def __ge__(self, other):
        c = self._cmp(other)
        return c >= 0 if c is not NotImplemented else NotImplemented

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __repr__(self):
        return f"SqrtRational({format_exact(self)!r})"


def sqrt_of(d: int) -> SqrtRational:
    """Exact sqrt(d) for a nonnegative integer d."""
    return SqrtRational(0, 1, d)


def as_exact(value) -> ExactScalar:
    """Normalize int/Fraction/SqrtRational; reject floats (no silent rounding)."""
    if isinstance(value, (int, Fraction)):
        return value
    if isinstance(value, SqrtRational):
        return value.as_fraction() if value.is_rational else value
    raise TypeError(f"not an exact scalar: {value!r}")


def to_float(value) -> float:
    return float(value)


def format_exact(value) -> str:
    """Serialize an exact scalar: "5", "3/4", or "1/2+1/4*sqrt(2)"."""
    if isinstance(value, SqrtRational):
        if value.is_rational:
            return format_exact(value.a)
        a, b = value.a, value.b
        sign = "-" if b < 0 else "+"
        return f"{format_exact(a)}{sign}{format_exact(abs(b))}*sqrt({value.d})"
    frac = Fraction(value)
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{frac.numerator}/{frac.denominator}"


def parse_exact(text: str) -> ExactScalar:
    """Inverse of format_exact."""
    text = text.strip()
    if "sqrt" in text:
        m = _TERM_RE.match(text)
        if not m:
            raise ValueError(f"bad exact scalar: {text!r}")
        a = Fraction(m.group("a")) if m.group("a") else Fraction(0)
        b = Fraction(m.group("b")) if m.group("b") else Fraction(1)
        if m.group("op") == "-":
            b = -b
        return SqrtRational(a, b, int(m.group("d")))
    frac = Fraction(text)
    return frac.numerator if frac.denominator == 1 else frac
