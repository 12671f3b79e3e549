"""Top of the spectrum of the projection-average operator P, lifted from K."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .correlation import Sweep, cached_sweep, exact_kappa, kappa_value
from .exact import fmt_rational, to_fraction

SYMMETRIC, ANTISYMMETRIC = "symmetric", "antisymmetric"


@dataclass(frozen=True)
class EigenspaceDescriptor:
    kind: str
    dimension: int
    n: int | None = None
    l: int | None = None

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "dimension": self.dimension}
        if self.kind == "Other":
            out.update(n=self.n, l=self.l)
        return out


def eigenspace(n: int, l: int, N: int, symmetry: str) -> EigenspaceDescriptor:
    """Descriptor of the span of lifted eigenfunctions for kappa_{n,l}(N)."""
    if symmetry == ANTISYMMETRIC:
        if (n, l) == (0, 1):
            return EigenspaceDescriptor("Antisym01", 3 * (N - 1))
        if (n, l) == (1, 0):
            return EigenspaceDescriptor("Antisym10", N - 1)
        return EigenspaceDescriptor("Other", (N - 1) * (2 * l + 1), n, l)
    named = {(0, 2): "Sym02", (1, 1): "Sym11", (2, 0): "Sym20"}
    if (n, l) in named:
        return EigenspaceDescriptor(named[(n, l)], 2 * l + 1)
    return EigenspaceDescriptor("Other", 2 * l + 1, n, l)


@dataclass(frozen=True)
class PEigenvalue:
    n: int
    l: int
    N: int
    symmetry: str
    value: Fraction
    eigenspace: EigenspaceDescriptor

    def as_dict(self) -> dict:
        return {"n": self.n, "l": self.l, "symmetry": self.symmetry, "mu": fmt_rational(self.value),
                "eigenspace": self.eigenspace.kind, "dimension": self.eigenspace.dimension}


def lift(kappa, N: int, symmetry: str) -> Fraction:
    kappa = to_fraction(kappa)
    if symmetry == SYMMETRIC:
        return (1 + (N - 1) * kappa) / N
    if symmetry == ANTISYMMETRIC:
        return (1 - kappa) / N
    raise ValueError(f"unknown symmetry {symmetry!r}")


def larger_symmetry(kappa) -> str:
    return SYMMETRIC if kappa >= 0 else ANTISYMMETRIC


def mu_from_kappa(n: int, l: int, N: int, symmetry: str | None = None, kappa=None) -> PEigenvalue:
    """Eigenvalue of P obtained from kappa_{n,l}(N); symmetry None picks the larger lift."""
    k = kappa_value(n, l, N) if kappa is None else to_fraction(kappa)
    sym = larger_symmetry(k) if symmetry is None else symmetry
    return PEigenvalue(n, l, N, sym, lift(k, N, sym), eigenspace(n, l, N, sym))


def gap_eigenvalue(N: int) -> Fraction:
    return Fraction(3 * N - 1, 3 * (N - 1) ** 2)


def mu22(N: int) -> Fraction:
    if N < 3:
        raise ValueError("mu22 needs N >= 3")
    return (1 + (N - 1) * kappa_value(2, 2, N)) / N


def _lifts(n: int, l: int, N: int, k: Fraction):
    """Nonzero lifts of one K eigenvalue.

    The symmetric lifts of kappa_{0,1} and kappa_{1,0} vanish identically
    (momentum and energy conservation), and (0,0) gives the constants.
    """
    if (n, l) == (0, 0):
        return [(SYMMETRIC, Fraction(1))]
    out = [(ANTISYMMETRIC, lift(k, N, ANTISYMMETRIC))]
    if (n, l) not in ((0, 1), (1, 0)):
        out.append((SYMMETRIC, lift(k, N, SYMMETRIC)))
    return out


@dataclass
class TopSpectrum:
    N: int
    mu_star: Fraction
    entries: list
    sweep_threshold: Fraction

    @property
    def strictly_above(self) -> list:
        return [e for e in self.entries if e.value > self.mu_star]

    @property
    def at_threshold(self) -> list:
        return [e for e in self.entries if e.value == self.mu_star]

    def as_dict(self) -> dict:
        return {"N": self.N, "mu_star": fmt_rational(self.mu_star),
                "entries": [e.as_dict() for e in self.entries]}


def p_top_spectrum(N: int, mu_star) -> TopSpectrum:
    """All eigenvalues mu of P with mu_star <= mu < 1, certified complete.

    A lift reaches mu_star only if |kappa| >= (N mu_star - 1)/(N - 1); the sweep
    certifies that all cells outside a finite set stay strictly below that.
    """
    mu_star = to_fraction(mu_star)
    if N < 3:
        raise ValueError("p_top_spectrum needs N >= 3")
    tau = (N * mu_star - 1) / (N - 1)
    if tau <= 0 or mu_star >= 1:
        raise ValueError(f"cannot certify completeness above mu_star = {mu_star}: eigenvalues accumulate at 1/N")
    sw: Sweep = cached_sweep(N, tau)
    entries = []
    for (n, l), (k, _) in sorted(sw.exact.items()):
        for sym, mu in _lifts(n, l, N, k):
            if mu_star <= mu < 1:
                entries.append(PEigenvalue(n, l, N, sym, mu, eigenspace(n, l, N, sym)))
    entries.sort(key=lambda e: (-e.value, e.n, e.l, e.symmetry))
    return TopSpectrum(N, mu_star, entries, tau)


@dataclass(frozen=True)
class LevelTwoSup:
    N: int
    value: Fraction
    n: int
    l: int
    symmetry: str


def level_two_sup(N: int) -> LevelTwoSup:
    """Certified sup of the P eigenvalues lifted from cells with n + l > 2.

    Every cell outside the exact sweep at threshold kappa_{2,2}(N) has both
    lifts strictly below mu_{2,2}(N), so the sup is attained on the sweep.
    """
    if N < 3:
        raise ValueError("level_two_sup needs N >= 3")
    sw = cached_sweep(N, kappa_value(2, 2, N))
    best = None
    for (n, l), (k, _) in sorted(sw.exact.items()):
        if n + l <= 2:
            continue
        for sym, mu in _lifts(n, l, N, k):
            if best is None or mu > best.value:
                best = LevelTwoSup(N, mu, n, l, sym)
    return best


@dataclass
class TwoTwoReport:
    N: int
    mu22: Fraction
    verdict: str
    rectangle: tuple
    cells_checked: int
    counterexample: dict | None
    sup: LevelTwoSup | None = None

    def as_dict(self) -> dict:
        out = {"N": self.N, "mu22": fmt_rational(self.mu22), "verdict": self.verdict,
               "rectangle": {"n_max": self.rectangle[0], "l_max": self.rectangle[1]},
               "cells_checked": self.cells_checked, "counterexample": self.counterexample}
        if self.sup is not None:
            out["sup"] = {"n": self.sup.n, "l": self.sup.l, "symmetry": self.sup.symmetry,
                          "mu": fmt_rational(self.sup.value)}
        return out


# blocks swept exactly on top of what the sweep demands, as a cross-check;
# at N=7 the hat bound is weak for small n + l
GUIDE_RECTANGLE = {7: (6, 27)}


def verify_twotwo(N: int) -> TwoTwoReport:
    """Check that every lift with n + l > 2 is at most mu_{2,2}(N).

    A failing cell is reported as a counterexample together with the true sup.
    """
    if not 3 <= N <= 7:
        raise ValueError("verify_twotwo covers N in 3..7")
    m22 = mu22(N)
    sw = cached_sweep(N, kappa_value(2, 2, N))
    cells = dict(sw.exact)
    if N in GUIDE_RECTANGLE:
        n_max, l_max = GUIDE_RECTANGLE[N]
        for n in range(n_max + 1):
            for l in range(l_max + 1):
                if (n, l) not in cells:
                    cells[(n, l)] = exact_kappa(n, l, N)
    bad = None
    checked = 0
    for (n, l), (k, method) in sorted(cells.items()):
        if n + l <= 2:
            continue
        checked += 1
        top = max(mu for _, mu in _lifts(n, l, N, k))
        if top > m22 and bad is None:
            bad = {"n": n, "l": l, "kappa": fmt_rational(k), "mu": fmt_rational(top), "method": method}
    high = [(n, l) for (n, l) in cells if n + l > 2 and n >= 3]
    rect = (max((n for n, _ in high), default=-1), max((l for _, l in high), default=-1))
    return TwoTwoReport(N, m22, "certified" if bad is None else "counterexample", rect, checked, bad,
                        level_two_sup(N))


def lift_check(n: int, l: int, N: int) -> bool:
    """Symmetric minus antisymmetric lift equals kappa exactly."""
    k, _ = exact_kappa(n, l, N)
    return lift(k, N, SYMMETRIC) - lift(k, N, ANTISYMMETRIC) == k
