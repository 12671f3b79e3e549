"""Exact arithmetic helpers: rationals, Gamma values at half-integers, quadratic surds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational

import gmpy2

Number = int | Fraction | float


def is_exact(x) -> bool:
    return isinstance(x, Rational)


def to_fraction(x) -> Fraction:
    """Coerce ints, Fractions and strings like "3/4" or "0.25" to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {x!r} to an exact rational")


def fmt_rational(x) -> str:
    """Canonical "p/q" string (integers keep the "/1" suffix off)."""
    x = to_fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rising(a, n: int):
    """Pochhammer symbol (a)_n."""
    out = Fraction(1) if is_exact(a) else 1.0
    for k in range(n):
        out *= a + k
    return out


def binom_shift(alpha, n: int):
    """binomial(n + alpha, n) for real or rational alpha."""
    if is_exact(alpha):
        return _binom_shift_exact(Fraction(alpha), n)
    out = 1.0
    for k in range(1, n + 1):
        out = out * (alpha + k) / k
    return out


@lru_cache(maxsize=4096)
def _binom_shift_exact(alpha: Fraction, n: int) -> Fraction:
    a = gmpy2.mpq(alpha.numerator, alpha.denominator)
    out = gmpy2.mpq(1)
    for k in range(1, n + 1):
        out = out * (a + k) / k
    return Fraction(int(out.numerator), int(out.denominator))


@dataclass(frozen=True)
class PiPower:
    """A number of the form coef * pi**(half_power / 2)."""

    coef: Fraction
    half_power: int = 0

    def __mul__(self, other: "PiPower") -> "PiPower":
        return PiPower(self.coef * other.coef, self.half_power + other.half_power)

    def __truediv__(self, other: "PiPower") -> "PiPower":
        return PiPower(self.coef / other.coef, self.half_power - other.half_power)

    def scale(self, q) -> "PiPower":
        return PiPower(self.coef * q, self.half_power)

    @property
    def rational(self) -> bool:
        return self.half_power == 0

    def __float__(self) -> float:
        return float(self.coef) * math.pi ** (self.half_power / 2)


def gamma_exact(x) -> PiPower:
    """Gamma at a positive integer or half-integer, as rational * sqrt(pi)^k."""
    x = to_fraction(x)
    if x <= 0:
        raise ValueError(f"gamma_exact needs a positive argument, got {x}")
    if x.denominator == 1:
        return PiPower(Fraction(math.factorial(x.numerator - 1)))
    if x.denominator == 2:
        m = (x.numerator - 1) // 2
        # Gamma(m + 1/2) = (2m)! / (4^m m!) * sqrt(pi)
        return PiPower(Fraction(math.factorial(2 * m), 4**m * math.factorial(m)), 1)
    raise ValueError(f"gamma_exact supports integers and half-integers only, got {x}")


def gamma_ratio(num: list, den: list) -> PiPower:
    """prod Gamma(num) / prod Gamma(den) for integer or half-integer arguments."""
    out = PiPower(Fraction(1))
    for a in num:
        out = out * gamma_exact(a)
    for a in den:
        out = out / gamma_exact(a)
    return out


@dataclass(frozen=True)
class Surd:
    """The real number a + b*sqrt(r) with rational a, b and rational r >= 0."""

    a: Fraction
    b: Fraction = Fraction(0)
    r: Fraction = Fraction(0)

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(float(self.r))

    def sign(self) -> int:
        """Exact sign of a + b*sqrt(r)."""
        sa = (self.a > 0) - (self.a < 0)
        irr = self.b * self.b * self.r
        sb = (self.b > 0) - (self.b < 0) if self.r != 0 else 0
        if sb == 0 or irr == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with b^2 r
        a2 = self.a * self.a
        if a2 == irr:
            return 0
        return sa if a2 > irr else sb

    def __sub__(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.b != 0 and self.b != 0 and other.r != self.r:
                raise ValueError("cannot subtract surds with different radicands")
            r = self.r if self.b != 0 else other.r
            return Surd(self.a - other.a, self.b - other.b, r)
        return Surd(self.a - to_fraction(other), self.b, self.r)

    def compare(self, other) -> int:
        return (self - other).sign()

    def as_dict(self) -> dict:
        return {"rational": fmt_rational(self.a), "coef": fmt_rational(self.b),
                "radicand": fmt_rational(self.r), "approx": float(self)}
