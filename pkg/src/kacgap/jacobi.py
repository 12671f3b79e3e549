"""Legendre and Jacobi polynomials with exact rational evaluation, plus pointwise bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np
from scipy.special import roots_jacobi

from .exact import binom_shift, gamma_ratio, is_exact, to_fraction


@dataclass(frozen=True)
class PolyValue:
    exact: Fraction | None
    approx: float

    def __float__(self) -> float:
        return self.approx


@dataclass(frozen=True)
class JacobiParams:
    n: int
    alpha: Fraction | float
    beta: Fraction | float

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("degree must be nonnegative")
        if not self.alpha > -1 or not self.beta > -1:
            raise ValueError("alpha and beta must exceed -1")

    @classmethod
    def of(cls, n, alpha, beta) -> "JacobiParams":
        conv = lambda t: to_fraction(t) if isinstance(t, (int, str, Fraction)) else float(t)
        return cls(int(n), conv(alpha), conv(beta))

    @property
    def exact(self) -> bool:
        return is_exact(self.alpha) and is_exact(self.beta)


def _value(v) -> PolyValue:
    if is_exact(v):
        return PolyValue(Fraction(v), float(v))
    return PolyValue(None, float(v))


def _legendre(n: int, x):
    one = Fraction(1) if is_exact(x) else 1.0
    p0, p1 = one, x * one
    if n == 0:
        return p0
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    return p1


def legendre_eval(n: int, x) -> PolyValue:
    """P_n(x) normalized by P_n(1) = 1; exact for rational x."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    return _value(_legendre(n, x))


def _jacobi(n: int, a, b, x):
    """Three-term recurrence in the Rodrigues normalization.

    Works elementwise on numpy arrays as well as on scalars.
    """
    if is_exact(a) and is_exact(b) and is_exact(x):
        return _jacobi_exact(n, Fraction(a), Fraction(b), Fraction(x))
    one = 1.0
    p0 = one + 0 * x
    if n == 0:
        return p0
    p1 = (a + 1) * one + (a + b + 2) * (x - 1) / 2
    for k in range(2, n + 1):
        c = 2 * k + a + b
        A = 2 * k * (k + a + b) * (c - 2)
        B = (c - 1) * (c * (c - 2) * x + a * a - b * b)
        C = 2 * (k + a - 1) * (k + b - 1) * c
        p0, p1 = p1, (B * p1 - C * p0) / A
    return p1


def _jacobi_halfint(n: int, a2: int, b2: int, X: int, M: int) -> Fraction:
    """Recurrence for alpha = a2/2, beta = b2/2, x = X/M on integers only.

    With p_k = q_k / (M^k D_k) every step stays integral, so the single gcd
    happens at the end.
    """
    q0, q1 = 1, 2 * (a2 + 2) * M + (a2 + b2 + 4) * (X - M)
    if n == 1:
        return Fraction(q1, 4 * M)
    A_prev, D = 4, 4
    dd = a2 * a2 - b2 * b2
    for k in range(2, n + 1):
        c2 = 4 * k + a2 + b2
        A = 4 * k * (2 * k + a2 + b2) * (c2 - 4)
        B = (c2 - 2) * (c2 * (c2 - 4) * X + dd * M)
        C = 2 * M * M * (2 * k + a2 - 2) * (2 * k + b2 - 2) * c2
        q0, q1 = q1, B * q1 - C * A_prev * q0
        A_prev = A
        D *= A
    return Fraction(q1, M**n * D)


def _jacobi_exact(n: int, a: Fraction, b: Fraction, x: Fraction) -> Fraction:
    if n == 0:
        return Fraction(1)
    if (2 * a).denominator == 1 and (2 * b).denominator == 1:
        return _jacobi_halfint(n, int(2 * a), int(2 * b), x.numerator, x.denominator)
    # general rationals: same recurrence on GMP rationals, much faster than Fraction
    q = gmpy2.mpq
    a, b, x = q(a.numerator, a.denominator), q(b.numerator, b.denominator), q(x.numerator, x.denominator)
    p0, p1 = q(1), (a + 1) + (a + b + 2) * (x - 1) / 2
    for k in range(2, n + 1):
        c = 2 * k + a + b
        A = 2 * k * (k + a + b) * (c - 2)
        B = (c - 1) * (c * (c - 2) * x + a * a - b * b)
        C = 2 * (k + a - 1) * (k + b - 1) * c
        p0, p1 = p1, (B * p1 - C * p0) / A
    return Fraction(int(p1.numerator), int(p1.denominator))


def jacobi_eval(p: JacobiParams, x) -> PolyValue:
    """P_n^(alpha,beta)(x); exact when alpha, beta and x are rational."""
    return _value(_jacobi(p.n, p.alpha, p.beta, x))


def jacobi_values(p: JacobiParams, x: np.ndarray) -> np.ndarray:
    """Vectorized float evaluation."""
    return _jacobi(p.n, float(p.alpha), float(p.beta), np.asarray(x, dtype=float))


def jacobi_at_one(p: JacobiParams):
    """binomial(n + alpha, n), exact for rational alpha."""
    return binom_shift(p.alpha, p.n)


def polya_bound(n: int, x: float) -> float:
    """Upper bound 2/(n pi sqrt(1-x^2)) on P_n(x)^2."""
    if n < 1:
        raise ValueError("polya_bound needs n >= 1")
    if abs(x) >= 1:
        raise ValueError("polya_bound needs |x| < 1")
    return 2.0 / (n * math.pi * math.sqrt(1.0 - x * x))


def nem_bound(p: JacobiParams) -> float:
    """Uniform bound on sqrt(1-x^2) w(x) p_n(x)^2 for the orthonormal Jacobi polynomial."""
    a, b = float(p.alpha), float(p.beta)
    if a < -0.5 or b < -0.5:
        raise ValueError("nem_bound requires alpha, beta >= -1/2")
    return 2 * math.e * (2 + math.hypot(a, b)) / math.pi


def _log_gamma_sum(num, den) -> float:
    return sum(math.lgamma(float(t)) for t in num) - sum(math.lgamma(float(t)) for t in den)


def orthonormalizer_sq(p: JacobiParams):
    """l_n^2; exact when the powers of two and sqrt(pi) cancel, else a float."""
    n, a, b = p.n, p.alpha, p.beta
    s = a + b
    if n == 0:
        # (s+1) Gamma(s+1) = Gamma(s+2) keeps the s = -1 case finite
        num, den = [s + 2], [a + 1, b + 1]
        lead = 1
    else:
        num, den = [n + 1, n + s + 1], [n + a + 1, n + b + 1]
        lead = 2 * n + s + 1
    if p.exact and (s + 1).denominator == 1:
        g = gamma_ratio(num, den)
        if g.rational:
            return Fraction(lead) * g.coef / Fraction(2) ** int(s + 1)
    return float(lead) * math.exp(_log_gamma_sum(num, den) - float(s + 1) * math.log(2))


def orthonormalizer(p: JacobiParams) -> float:
    """l_n with p_n = l_n P_n orthonormal for the weight (1-x)^alpha (1+x)^beta."""
    return math.sqrt(float(orthonormalizer_sq(p)))


def _gauss_jacobi(m: int, a: float, b: float):
    x, w = roots_jacobi(m, a, b)
    return x, w


def _koornwinder_integral(n, a, b, x, m):
    # substitute u = r^2 and t = cos(theta): both weights become Jacobi weights
    tu, wu = _gauss_jacobi(m, a - b - 1, b)
    u = (tu + 1) / 2
    tc, wc = _gauss_jacobi(m, b - 0.5, b - 0.5)
    wu = wu / wu.sum()
    wc = wc / wc.sum()
    base = (1 + x - (1 - x) * u[:, None]) / 2
    imag = math.sqrt(max(0.0, 1 - x * x)) * np.sqrt(u)[:, None] * tc[None, :]
    vals = (base + 1j * imag) ** n
    return complex(wu @ vals @ wc)


def koornwinder_ratio(p: JacobiParams, x: float, tol: float = 1e-8, max_nodes: int = 2**14) -> float:
    """P_n(x)/P_n(1) from the two-dimensional integral representation (alpha > beta > -1/2)."""
    a, b = float(p.alpha), float(p.beta)
    if not (a > b > -0.5):
        raise ValueError("koornwinder_ratio requires alpha > beta > -1/2")
    if not -1 <= x <= 1:
        raise ValueError("x must lie in [-1, 1]")
    m = max(8, p.n // 2 + 2)
    prev = _koornwinder_integral(p.n, a, b, x, m)
    while True:
        m *= 2
        if m > max_nodes:
            raise RuntimeError("Koornwinder quadrature did not converge")
        cur = _koornwinder_integral(p.n, a, b, x, m)
        if abs(cur - prev) <= tol:
            break
        prev = cur
    if abs(cur.imag) > tol:
        raise RuntimeError(f"imaginary part {cur.imag:.3g} did not vanish")
    return cur.real


@dataclass(frozen=True)
class BoundComparison:
    n: int
    alpha: float
    beta: float
    b: float
    nem_side: float
    trivial_side: float
    actual: float
    winner: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def markov_vs_nem_region(p: JacobiParams, b: float) -> BoundComparison:
    """Compare the NEM-derived bound with the trivial bound 1.

    The bounded quantity is b^(2 beta) * (P_n(-1+2b^2)/P_n(1))^2, the square
    of the scaled ratio that the Markov property caps at 1.
    """
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    n, a, be = p.n, float(p.alpha), float(p.beta)
    log_g = _log_gamma_sum([n + 1, n + be + 1, a + 1, a + 1], [n + a + be + 1, n + a + 1])
    nem = (2 * math.e / math.pi) * (2 + math.hypot(a, be)) / (2 * n + a + be + 1)
    nem *= math.exp(log_g - math.log(b) - (a + 0.5) * math.log1p(-b * b))
    x = -1 + 2 * b * b
    ratio = _jacobi(n, a, be, x) / float(binom_shift(a, n))
    actual = b ** (2 * be) * ratio**2
    return BoundComparison(n, a, be, b, nem, 1.0, actual, "trivial-wins" if nem > 1 else "nem-wins")
