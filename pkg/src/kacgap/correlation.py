"""Eigenvalues of the correlation operator K, their Gamma-function bounds, and finite sweeps.

K acts on functions of one velocity on the unit ball. Its eigenvalues are
labelled by a radial degree n and an angular degree l and are exact rationals.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product

from .exact import binom_shift, fmt_rational, gamma_ratio, is_exact, to_fraction
from .jacobi import _jacobi

SLACK = 1e-9
TWO_E_OVER_PI = 2 * math.e / math.pi


def jacobi_alpha(N: int) -> Fraction:
    return Fraction(3 * N - 8, 2)


def ell_star(N: int) -> Fraction:
    """Angular degree below which alpha > beta."""
    return Fraction(3 * N - 9, 2)


@dataclass(frozen=True)
class KEigenvalue:
    n: int
    l: int
    N: int
    value: Fraction

    def as_dict(self) -> dict:
        return {"n": self.n, "l": self.l, "N": self.N, "kappa": fmt_rational(self.value)}


@lru_cache(maxsize=None)
def kappa_value(n: int, l: int, N: int) -> Fraction:
    if N < 3 or n < 0 or l < 0:
        raise ValueError("kappa needs n, l >= 0 and N >= 3")
    b = Fraction(-1, N - 1)
    a = jacobi_alpha(N)
    beta = Fraction(2 * l + 1, 2)
    ratio = _jacobi(n, a, beta, -1 + 2 * b * b) / binom_shift(a, n)
    return ratio * b**l


def kappa(n: int, l: int, N: int) -> KEigenvalue:
    """kappa_{n,l}(N) = P_n(-1+2b^2)/P_n(1) * b^l with b = -1/(N-1)."""
    return KEigenvalue(n, l, N, kappa_value(n, l, N))


def kappa_general(n: int, l: int, a, b, alpha):
    """Eigenvalue of the generalized operator with parameters a, b (a^2 + b^2 = 1) and alpha."""
    if abs(float(a) ** 2 + float(b) ** 2 - 1) > 1e-12:
        raise ValueError("kappa_general needs a^2 + b^2 = 1")
    beta = Fraction(2 * l + 1, 2)
    if is_exact(b) and is_exact(alpha):
        b, alpha = Fraction(b), Fraction(alpha)
    else:
        b, alpha = float(b), float(alpha)
    return _jacobi(n, alpha, beta, -1 + 2 * b * b) / binom_shift(alpha, n) * b**l


def closed_form_kappa_row(n: int, l: int, N: int) -> Fraction:
    """Closed forms of kappa_{1,l}(N) and kappa_{2,l}(N)."""
    m = N - 1
    if n == 1:
        return Fraction((-1) ** (l + 1) * (2 * l * N + 3 * m), 3 * m ** (l + 2))
    if n == 2:
        num = ((4 * l * l + 16 * l + 15) * N**3 - (8 * l * l + 44 * l + 60) * N**2
               + (49 + 16 * l) * N - 12)
        return Fraction((-1) ** l * num, 3 * (3 * N - 4) * m ** (l + 4))
    raise ValueError("closed forms exist for n in {1, 2} only")


def exact_kappa(n: int, l: int, N: int) -> tuple[Fraction, str]:
    if n == 0:
        return Fraction(-1, N - 1) ** l, "closed-form"
    if n <= 2:
        return closed_form_kappa_row(n, l, N), "closed-form"
    return kappa_value(n, l, N), "exact"


# -- Gamma-function bounds ---------------------------------------------------

def g1(n: int, l: int, N: int) -> float:
    return (4 + math.sqrt(9 * N * N - 48 * N + 65 + 4 * l * l + 4 * l)) / (3 * N + 4 * n + 2 * l - 5)


def g1_simplified(n: int, l: int, N: int) -> Fraction:
    return Fraction(4, 3 * N + 4 * n + 2 * l - 5) + 1


def g2(N: int) -> float:
    base = Fraction((N - 1) ** 2, N * (N - 2))
    return math.exp((3 * N - 7) / 2 * math.log(base))


def g3(n: int, N: int) -> Fraction:
    h = Fraction(3 * N - 6, 2)
    g = gamma_ratio([n + 1, h], [n + h])
    assert g.rational
    return g.coef


def g4(m: int, N: int):
    """(N-1)^2 Gamma(m+3/2) Gamma(3N/2-3) / Gamma(m+3N/2-5/2) as rational * pi^k."""
    g = gamma_ratio([Fraction(2 * m + 3, 2), Fraction(3 * N - 6, 2)], [Fraction(2 * m + 3 * N - 5, 2)])
    return g.scale((N - 1) ** 2)


def f_envelope(N: int):
    """Bound on g4 over the region n + l >= 3(N-3)/2, as rational * sqrt(pi)."""
    from .exact import PiPower
    return PiPower(Fraction((N - 1) ** 2 * (3 * N - 8), 2 * 2 ** (3 * N - 8)), 1)


def _hat(n: int, l: int, N: int, simplified: bool = True) -> float:
    first = float(g1_simplified(n, l, N)) if simplified else g1(n, l, N)
    rest = g4(n + l, N).scale(g3(n, N))
    # rest = rational * pi^(k/2); fold in 2e/pi without losing the exact part
    return 2 * math.e * first * g2(N) * float(rest.coef) * math.pi ** (rest.half_power / 2 - 1)


def envelope_kappa_sq(N: int) -> float:
    f = f_envelope(N)
    return TWO_E_OVER_PI * (Fraction(4, 6 * N - 14) + 1) * g2(N) * float(f)


@dataclass(frozen=True)
class KappaBound:
    n: int
    l: int
    N: int
    hat_kappa_sq: float
    tilde_kappa_sq: float
    envelope_kappa_sq: float
    applicable: bool


def kappa_hat_sq(n: int, l: int, N: int) -> KappaBound:
    """Bounds on kappa_{n,l}(N)^2 from the uniform Jacobi estimate."""
    if N < 3:
        raise ValueError("kappa_hat_sq needs N >= 3")
    applicable = 2 * (n + l) >= 3 * (N - 3)
    env = envelope_kappa_sq(N) if N > 3 else math.inf
    return KappaBound(n, l, N, _hat(n, l, N), _hat(n, l, N, simplified=False), env, applicable)


def hat_table(N: int, threshold_sq: float, n_range) -> list[tuple[int, int, float]]:
    """For each n, the least l with hat kappa^2 below threshold_sq, and the value there."""
    rows = []
    for n in n_range:
        l = _least_certified_l(n, N, threshold_sq, 0, slack=0.0)
        rows.append((n, l, _hat(n, l, N)))
    return rows


# -- finite sweeps -------------------------------------------------------------

def default_workers() -> int:
    env = os.environ.get("KACGAP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _certified(n, l, N, threshold_sq, slack=SLACK) -> bool:
    return _hat(n, l, N) * (1 + slack) < threshold_sq


def _least_certified_l(n, N, threshold_sq, start, slack=SLACK) -> int:
    """Least l >= start certified by the hat bound (which decreases in l)."""
    if _certified(n, start, N, threshold_sq, slack):
        return start
    lo, step = start, 1
    while not _certified(n, start + step, N, threshold_sq, slack):
        lo = start + step
        step *= 2
        if step > 10**7:
            raise RuntimeError("hat bound never drops below the threshold")
    hi = start + step
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _certified(n, mid, N, threshold_sq, slack):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class Cell:
    n: int
    l: int
    method: str
    value: Fraction | float
    scope: str = "cell"

    def as_dict(self) -> dict:
        v = fmt_rational(self.value) if isinstance(self.value, Fraction) else self.value
        return {"n": self.n, "l": self.l, "method": self.method, "value": v, "scope": self.scope}


@dataclass
class Sweep:
    """All cells of one N, split into exact evaluations and bound-certified regions."""

    N: int
    threshold: Fraction
    exact: dict = field(default_factory=dict)
    bounds: list = field(default_factory=list)
    n_stop: int = 0

    def cells(self) -> list[Cell]:
        out = [Cell(n, l, m, v) for (n, l), (v, m) in sorted(self.exact.items())]
        return out + self.bounds

    @property
    def rectangle(self) -> tuple[int, int]:
        """Largest n and l evaluated exactly with n >= 3 or l large."""
        if not self.exact:
            return (-1, -1)
        return max(n for n, _ in self.exact), max(l for _, l in self.exact)


def _row(args):
    n, N, threshold_sq, level0 = args
    start = max(0, level0 - n)
    cut = _least_certified_l(n, N, threshold_sq, start)
    vals = [(l,) + exact_kappa(n, l, N) for l in range(cut)]
    return n, cut, vals


def sweep(N: int, threshold, workers: int | None = None) -> Sweep:
    """Exact kappa on every cell not certified |kappa| < threshold by the bounds.

    Cells with n + l >= 3(N-3)/2 are certified by the envelope when it is small
    enough, otherwise row by row by the hat bound, which is non-increasing in
    both n and l. Everything else is evaluated exactly.
    """
    threshold = to_fraction(threshold)
    if threshold <= 0:
        raise ValueError("sweep threshold must be positive")
    t2 = float(threshold) ** 2
    level0 = math.ceil(Fraction(3 * (N - 3), 2))
    out = Sweep(N, threshold)
    if N > 3 and envelope_kappa_sq(N) * (1 + SLACK) < t2:
        out.bounds.append(Cell(0, level0, "envelope", envelope_kappa_sq(N), f"n+l>={level0}"))
        for n in range(level0):
            for l in range(level0 - n):
                v, m = exact_kappa(n, l, N)
                out.exact[(n, l)] = (v, m)
        out.n_stop = level0
        return out
    n_stop = level0
    while not _certified(n_stop, 0, N, t2):
        n_stop += 1
    out.bounds.append(Cell(n_stop, 0, "hat", _hat(n_stop, 0, N), f"n>={n_stop}"))
    jobs = [(n, N, t2, level0) for n in range(n_stop)]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 4:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row, jobs, chunksize=1))
    else:
        rows = [_row(j) for j in jobs]
    for n, cut, vals in rows:
        for l, v, m in vals:
            out.exact[(n, l)] = (v, m)
        out.bounds.append(Cell(n, cut, "hat", _hat(n, cut, N), f"n={n},l>={cut}"))
    out.n_stop = n_stop
    return out


@lru_cache(maxsize=64)
def cached_sweep(N: int, threshold: Fraction) -> Sweep:
    return sweep(N, threshold)


def mono_threshold(N: int) -> Fraction:
    if N == 3:
        return Fraction(13, 40)
    if N == 4:
        return kappa_value(2, 0, 4)
    return Fraction(1, (N - 1) ** 2)


@dataclass
class MonoReport:
    N: int
    threshold: Fraction
    lower: Fraction
    cells: list
    verdict: str
    counterexample: Cell | None = None
    most_negative: tuple | None = None
    envelope_ratio: float | None = None
    kblem_checked: int = 0

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "threshold": fmt_rational(self.threshold),
            "lower": fmt_rational(self.lower),
            "verdict": self.verdict,
            "counterexample": None if self.counterexample is None else self.counterexample.as_dict(),
            "most_negative": None if self.most_negative is None else
            {"n": self.most_negative[0], "l": self.most_negative[1], "kappa": fmt_rational(self.most_negative[2])},
            "envelope_ratio": self.envelope_ratio,
            "kblem_cells_checked": self.kblem_checked,
            "cells": [c.as_dict() for c in self.cells],
        }


def _in_scope(n, l, N) -> bool:
    if N == 3:
        return n + l > 0 and (n, l) != (1, 1)
    return n + l > 2


def kblem_spot_check(N: int, n_max: int = 40) -> int:
    """Check |kappa| < 1/(N-1)^2 for 2 <= l < l*, 1 <= n <= n_max; returns cells checked."""
    bound = Fraction(1, (N - 1) ** 2)
    count = 0
    for l in range(2, math.ceil(ell_star(N))):
        for n in range(1, n_max + 1):
            if abs(kappa_value(n, l, N)) >= bound:
                raise AssertionError(f"|kappa_{n},{l}({N})| >= 1/(N-1)^2")
            count += 1
    return count


def verify_mono(N: int, report_sink=None, workers: int | None = None) -> MonoReport:
    """Certify the ordering bound on kappa_{n,l}(N) over all (n, l) for one N.

    N = 3: -1/2 <= kappa <= 13/40 for n + l > 0 except (1, 1).
    N = 4: -1/3 <= kappa < kappa_{2,0}(4) for n + l > 2.
    N >= 5: -1/(N-1) <= kappa < kappa_{0,2}(N) for n + l > 2.
    """
    if N < 3:
        raise ValueError("verify_mono needs N >= 3")
    T = mono_threshold(N)
    lower = Fraction(-1, N - 1)
    sw = cached_sweep(N, T)
    report = MonoReport(N, T, lower, [], "certified")
    if N > 3:
        report.envelope_ratio = (N - 1) ** 4 * envelope_kappa_sq(N)
    worst = None
    for (n, l), (v, method) in sorted(sw.exact.items()):
        if not _in_scope(n, l, N):
            continue
        report.cells.append(Cell(n, l, method, v))
        ok = lower <= v and (v <= T if N == 3 else v < T)
        if not ok and report.counterexample is None:
            report.counterexample = Cell(n, l, method, v)
            report.verdict = "counterexample"
        if worst is None or v < worst[2]:
            worst = (n, l, v)
    report.cells.extend(sw.bounds)
    report.most_negative = worst
    if N >= 4:
        report.kblem_checked = kblem_spot_check(N)
    if report_sink is not None:
        report_sink(report)
    return report


# -- exact matrix of K on polynomials -------------------------------------------

def _monomials(d: int) -> list[tuple[int, int, int]]:
    out = []
    for k in range(d + 1):
        for i in range(k, -1, -1):
            for j in range(k - i, -1, -1):
                out.append((i, j, k - i - j))
    return out


def _double_factorial_odd(m: int) -> int:
    # (2m-1)!!
    out = 1
    for t in range(1, 2 * m, 2):
        out *= t
    return out


def _ball_moment(j, gamma: Fraction) -> Fraction:
    """E[y^j] for the probability density proportional to (1-|y|^2)^gamma on the unit ball."""
    if any(t % 2 for t in j):
        return Fraction(0)
    M = sum(j) // 2
    radial = Fraction(1)
    for t in range(M):
        radial *= (t + Fraction(3, 2)) / (t + gamma + Fraction(5, 2))
    sphere = Fraction(math.prod(_double_factorial_odd(t // 2) for t in j), _double_factorial_odd(M + 1))
    return radial * sphere


def _energy_power(M: int) -> dict:
    """(1 - |v|^2)^M as a monomial dictionary."""
    out: dict = {}
    for p in range(M + 1):
        c = math.comb(M, p) * (-1) ** p
        for q1 in range(p + 1):
            for q2 in range(p - q1 + 1):
                q3 = p - q1 - q2
                mult = math.factorial(p) // (math.factorial(q1) * math.factorial(q2) * math.factorial(q3))
                key = (2 * q1, 2 * q2, 2 * q3)
                out[key] = out.get(key, 0) + c * mult
    return out


def k_matrix_general(b, alpha, d: int) -> tuple[list, list]:
    """Matrix of K (parameters b, a^2 = 1-b^2, alpha) on monomials of degree <= d.

    Column c holds the coordinates of K applied to the c-th monomial.
    """
    if d > 6:
        raise ValueError("k_matrix_oracle supports total degree d <= 6")
    b, alpha = to_fraction(b), to_fraction(alpha)
    a2 = 1 - b * b
    gamma = alpha - Fraction(3, 2)
    basis = _monomials(d)
    index = {m: i for i, m in enumerate(basis)}
    mat = [[Fraction(0)] * len(basis) for _ in basis]
    for col, k in enumerate(basis):
        for j in product(*(range(0, t + 1, 2) for t in k)):
            M = sum(j) // 2
            coef = math.prod(math.comb(k[i], j[i]) for i in range(3)) * _ball_moment(j, gamma)
            coef *= a2**M * b ** (sum(k) - 2 * M)
            if coef == 0:
                continue
            rest = tuple(k[i] - j[i] for i in range(3))
            for e, c in _energy_power(M).items():
                mono = tuple(rest[i] + e[i] for i in range(3))
                mat[index[mono]][col] += coef * c
    return basis, mat


def _block_eigenvalues(block) -> list[tuple[Fraction | float, int]]:
    from sympy import QQ, Poly, symbols
    from sympy.polys.matrices import DomainMatrix

    size = len(block)
    dm = DomainMatrix([[QQ(x.numerator, x.denominator) for x in row] for row in block], (size, size), QQ)
    coeffs = dm.charpoly()
    t = symbols("t")
    poly = Poly([QQ(c) for c in coeffs], t, domain=QQ)
    out = []
    for factor, mult in poly.factor_list()[1]:
        if factor.degree() == 1:
            c1, c0 = factor.all_coeffs()
            root = -Fraction(int(c0.numerator), int(c0.denominator)) / Fraction(int(c1.numerator), int(c1.denominator))
            out.append((root, mult))
        else:
            for r in factor.nroots():
                out.append((float(r), mult))
    return out


@dataclass
class OracleResult:
    basis: list
    matrix: list
    eigenvalues: dict  # value -> multiplicity
    block_triangular: bool


def k_matrix_oracle_general(b, alpha, d: int) -> OracleResult:
    basis, mat = k_matrix_general(b, alpha, d)
    degree = [sum(m) for m in basis]
    triangular = all(mat[r][c] == 0 for r in range(len(basis)) for c in range(len(basis))
                     if degree[r] > degree[c])
    eig: dict = {}
    for k in range(d + 1):
        idx = [i for i, g in enumerate(degree) if g == k]
        block = [[mat[r][c] for c in idx] for r in idx]
        for val, mult in _block_eigenvalues(block):
            eig[val] = eig.get(val, 0) + mult
    return OracleResult(basis, mat, eig, triangular)


def k_matrix_oracle(N: int, d: int) -> OracleResult:
    """Exact matrix of K for N particles on polynomials of degree <= d, with its eigenvalues."""
    if N < 3:
        raise ValueError("k_matrix_oracle needs N >= 3")
    return k_matrix_oracle_general(Fraction(-1, N - 1), jacobi_alpha(N), d)
