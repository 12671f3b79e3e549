"""Scattering rate functions, their moments, direction sampling and the two-particle spectrum."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn

from .exact import fmt_rational, is_exact, rising, to_fraction
from .jacobi import _legendre

UNIFORM, POWER, HALFPOWER, TABULATED, DIRAC = "uniform", "power", "halfpower", "tabulated", "dirac"


@dataclass(frozen=True)
class ScatteringKernel:
    """A density b on [-1, 1] for the cosine of the scattering angle, with (1/2) int b = 1."""

    family: str
    alpha: Fraction | None = None
    xs: tuple = ()
    bs: tuple = ()
    name: str = ""
    normalization: float = 1.0

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.family in (POWER, HALFPOWER):
            return f"{self.family}:{fmt_rational(self.alpha)}"
        return self.family

    @property
    def exact(self) -> bool:
        return self.family != TABULATED

    def density(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.family == UNIFORM:
            return np.ones_like(s)
        if self.family == POWER:
            a = float(self.alpha)
            with np.errstate(divide="ignore"):
                return (1 - a) * 2**a * (1 - s) ** (-a)
        if self.family == HALFPOWER:
            a = float(self.alpha)
            return np.where(s >= 0, 2 * (a + 1) * np.clip(s, 0, None) ** a, 0.0)
        if self.family == TABULATED:
            return np.interp(s, self.xs, self.bs, left=0.0, right=0.0)
        raise ValueError("the Dirac kernel has no density")


def uniform() -> ScatteringKernel:
    return ScatteringKernel(UNIFORM)


def power_family(alpha) -> ScatteringKernel:
    alpha = to_fraction(alpha)
    if not 0 <= alpha < 1:
        raise ValueError("power family needs 0 <= alpha < 1")
    if alpha == 0:
        return ScatteringKernel(UNIFORM)
    return ScatteringKernel(POWER, alpha)


def morgenstern() -> ScatteringKernel:
    return ScatteringKernel(POWER, Fraction(1, 2), name="morgenstern")


def half_power(alpha) -> ScatteringKernel:
    alpha = to_fraction(alpha)
    if alpha < 0:
        raise ValueError("half-power family needs alpha >= 0")
    return ScatteringKernel(HALFPOWER, alpha)


def dirac() -> ScatteringKernel:
    """Point mass at x = 1: every collision leaves the state unchanged."""
    return ScatteringKernel(DIRAC)


def tabulated(xs, bs, name: str = "") -> ScatteringKernel:
    """Piecewise-linear density through the points (xs, bs), renormalized."""
    xs = np.asarray(xs, dtype=float)
    bs = np.asarray(bs, dtype=float)
    if xs.ndim != 1 or xs.shape != bs.shape or len(xs) < 2:
        raise ValueError("tabulated kernel needs two equal-length columns with at least 2 rows")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("x values must be strictly increasing")
    if xs[0] < -1 or xs[-1] > 1:
        raise ValueError("x values must lie in [-1, 1]")
    if np.any(bs < 0):
        raise ValueError("b must be nonnegative")
    half_mass = 0.5 * float(np.trapezoid(bs, xs))
    if half_mass <= 0:
        raise ValueError("tabulated kernel has zero mass")
    bs = bs / half_mass
    return ScatteringKernel(TABULATED, xs=tuple(xs), bs=tuple(bs), name=name, normalization=half_mass)


def load_tabulated(path) -> ScatteringKernel:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header line
    if not rows:
        raise ValueError(f"no numeric rows in {path}")
    xs, bs = zip(*rows)
    return tabulated(xs, bs, name=f"file:{Path(path)}")


def positive_near_one(k: ScatteringKernel) -> bool:
    """For tabulated kernels, whether b stays positive on a neighbourhood of x = 1."""
    if k.family != TABULATED:
        return True
    return k.xs[-1] == 1.0 and k.bs[-1] > 0


def parse_kernel(selector: str) -> ScatteringKernel:
    """Parse "uniform", "morgenstern", "dirac", "power:A", "halfpower:A" or "file:PATH"."""
    kind, _, arg = selector.partition(":")
    kind = kind.strip().lower()
    if kind == UNIFORM and not arg:
        return uniform()
    if kind == "morgenstern" and not arg:
        return morgenstern()
    if kind == DIRAC and not arg:
        return dirac()
    if kind == POWER and arg:
        return power_family(arg)
    if kind == HALFPOWER and arg:
        return half_power(arg)
    if kind == "file" and arg:
        return load_tabulated(arg)
    raise ValueError(f"unknown kernel selector {selector!r}; expected uniform, morgenstern, "
                     "power:ALPHA, halfpower:ALPHA or file:PATH")


# -- moments ---------------------------------------------------------------

@dataclass(frozen=True)
class KernelMoments:
    B1: Fraction | float
    B2: Fraction | float

    def __post_init__(self):
        if not (abs(self.B1) <= 1 and 0 <= self.B2 <= 1):
            raise ValueError(f"invalid moments B1={self.B1}, B2={self.B2}")


def _segment_moment(x0, x1, y0, y1, j):
    # int of x^j times the line through (x0,y0), (x1,y1)
    c1 = (y1 - y0) / (x1 - x0)
    c0 = y0 - c1 * x0
    return c0 * (x1 ** (j + 1) - x0 ** (j + 1)) / (j + 1) + c1 * (x1 ** (j + 2) - x0 ** (j + 2)) / (j + 2)


def _tabulated_moment(k, j):
    xs, bs = k.xs, k.bs
    return 0.5 * sum(_segment_moment(xs[i], xs[i + 1], bs[i], bs[i + 1], j) for i in range(len(xs) - 1))


def moments(k: ScatteringKernel) -> KernelMoments:
    """B_j = (1/2) int x^j b(x) dx for j = 1, 2."""
    if k.family == UNIFORM:
        return KernelMoments(Fraction(0), Fraction(1, 3))
    if k.family == DIRAC:
        return KernelMoments(Fraction(1), Fraction(1))
    if k.family == POWER:
        a = k.alpha
        return KernelMoments(1 - 2 * (1 - a) / (2 - a), 1 - 4 * (1 - a) / ((2 - a) * (3 - a)))
    if k.family == HALFPOWER:
        a = k.alpha
        return KernelMoments((a + 1) / (a + 2), (a + 1) / (a + 3))
    norm = _tabulated_moment(k, 0)
    if abs(norm - 1) > 1e-10:
        raise ValueError(f"tabulated kernel is not normalized ((1/2) int b = {norm})")
    return KernelMoments(_tabulated_moment(k, 1), _tabulated_moment(k, 2))


# -- two-particle spectrum ---------------------------------------------------

def legendre_coefficients(n: int) -> list[Fraction]:
    """Monomial coefficients c_j of P_n(x) = sum c_j x^j."""
    c = [Fraction(0)] * (n + 1)
    for k in range(n // 2 + 1):
        c[n - 2 * k] = Fraction((-1) ** k * math.comb(n, k) * math.comb(2 * n - 2 * k, n), 2**n)
    return c


def n2_eigenvalue(k: ScatteringKernel, n: int):
    """lambda_n = (1/2) int P_n(s) b(s) ds."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if n == 0 or k.family == DIRAC:
        return Fraction(1)
    if k.family == UNIFORM:
        return Fraction(0)
    if k.family == POWER:
        return rising(k.alpha, n) / rising(2 - k.alpha, n)
    if k.family == HALFPOWER:
        a = k.alpha
        return (a + 1) * sum(c / (j + a + 1) for j, c in enumerate(legendre_coefficients(n)) if c)
    # piecewise linear density: Gauss-Legendre is exact segment by segment
    nodes, weights = np.polynomial.legendre.leggauss(n // 2 + 2)
    total = 0.0
    for i in range(len(k.xs) - 1):
        x0, x1 = k.xs[i], k.xs[i + 1]
        s = 0.5 * (x1 - x0) * nodes + 0.5 * (x1 + x0)
        total += 0.5 * (x1 - x0) * float(weights @ (_legendre(n, s) * k.density(s)))
    return 0.5 * total


def n2_eigenvalue_quadrature(k: ScatteringKernel, n: int) -> float:
    """Independent adaptive-quadrature evaluation of lambda_n."""
    P = lambda s: _legendre(n, s)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    if k.family == UNIFORM:
        return 0.5 * integrate.quad(P, -1, 1, **opts)[0]
    if k.family == POWER:
        a = float(k.alpha)
        # weight (1-s)^(-a) handled by the algebraic-singularity rule
        val = integrate.quad(P, -1, 1, weight="alg", wvar=(0, -a), **opts)[0]
        return 0.5 * (1 - a) * 2**a * val
    if k.family == HALFPOWER:
        a = float(k.alpha)
        return (a + 1) * integrate.quad(P, 0, 1, weight="alg", wvar=(a, 0), **opts)[0]
    if k.family == DIRAC:
        return 1.0
    return 0.5 * integrate.quad(lambda s: P(s) * float(k.density(s)), k.xs[0], k.xs[-1],
                                points=k.xs[1:-1], **opts)[0]


def polya_integral(k: ScatteringKernel) -> float:
    """int b(x) (1-x^2)^(-1/4) dx, infinite when it diverges."""
    if k.family == UNIFORM:
        return math.sqrt(2) * beta_fn(0.75, 0.75)
    if k.family == POWER:
        a = float(k.alpha)
        if a >= 0.75:
            return math.inf
        return (1 - a) * math.sqrt(2) * beta_fn(0.75, 0.75 - a)
    if k.family == HALFPOWER:
        a = float(k.alpha)
        return (a + 1) * beta_fn((a + 1) / 2, 0.75)
    if k.family == DIRAC:
        return math.inf
    total = 0.0
    for i in range(len(k.xs) - 1):
        x0, x1 = k.xs[i], k.xs[i + 1]
        f = lambda s: float(k.density(s))
        if x0 == -1.0:
            total += integrate.quad(lambda s: f(s) * (1 - s) ** -0.25, x0, x1, weight="alg", wvar=(-0.25, 0))[0]
        elif x1 == 1.0:
            total += integrate.quad(lambda s: f(s) * (1 + s) ** -0.25, x0, x1, weight="alg", wvar=(0, -0.25))[0]
        else:
            total += integrate.quad(lambda s: f(s) * (1 - s * s) ** -0.25, x0, x1)[0]
    return total


def polya_envelope(k: ScatteringKernel, n: int) -> float:
    """Upper bound on |lambda_n| from the pointwise Legendre bound."""
    return polya_integral(k) / math.sqrt(2 * math.pi * n)


@dataclass(frozen=True)
class Delta2:
    value: Fraction | float
    witness: int
    cutoff: int
    method: str
    eigenvalues: tuple = field(default=(), repr=False)


def delta2(k: ScatteringKernel, max_cutoff: int = 100_000) -> Delta2:
    """Two-particle gap 2(1 - max_{n>=1} lambda_n) and the maximizing degree."""
    if k.family == DIRAC:
        return Delta2(Fraction(0), 1, 1, "trivial")
    if k.family in (UNIFORM, POWER):
        # lambda_{n+1}/lambda_n = (alpha+n)/(2-alpha+n) <= 1, so the max is at n = 1
        lam1 = n2_eigenvalue(k, 1)
        return Delta2(2 * (1 - lam1), 1, 1, "monotone-ratio", (lam1,))
    integral = polya_integral(k)
    if not math.isfinite(integral):
        raise ValueError("the Polya cutoff integral diverges for this kernel")
    lams = []
    best, witness = None, 0
    n = 1
    while True:
        lam = n2_eigenvalue(k, n)
        lams.append(lam)
        margin = 0 if is_exact(lam) else 1e-12
        if best is None or lam > best + margin:
            best, witness = lam, n
        # every later degree satisfies |lambda_m| < envelope(m) <= envelope(n+1)
        if integral / math.sqrt(2 * math.pi * (n + 1)) + 1e-9 <= float(best):
            break
        n += 1
        if n > max_cutoff:
            raise RuntimeError("Polya cutoff exceeded the configured maximum degree")
    return Delta2(2 * (1 - best), witness, n, "polya-cutoff", tuple(lams))


@dataclass(frozen=True)
class Theorem1Gate:
    holds: bool
    moments_ordered: bool
    gap_condition: bool
    delta2: Fraction | float
    required: Fraction | float


def theorem1_gate(k: ScatteringKernel) -> Theorem1Gate:
    m = moments(k)
    d2 = delta2(k).value
    need = Fraction(20, 9) * (1 - m.B2) if is_exact(m.B2) else 20 / 9 * (1 - m.B2)
    ordered = m.B2 > m.B1
    gap = d2 >= need
    return Theorem1Gate(ordered and gap, ordered, gap, d2, need)


def check_theorem1_condition(k: ScatteringKernel) -> bool:
    """B2 > B1 and Delta_2 >= (20/9)(1 - B2)."""
    return theorem1_gate(k).holds


# -- sampling ----------------------------------------------------------------

def sample_cosines(k: ScatteringKernel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw s = cos(theta) with density b(s)/2 on [-1, 1]."""
    if k.family == DIRAC:
        return np.ones(size)
    if k.family == UNIFORM:
        return 2 * rng.random(size) - 1
    u = 1.0 - rng.random(size)  # in (0, 1]
    if k.family == POWER:
        return 1 - 2 * u ** (1 / (1 - float(k.alpha)))
    if k.family == HALFPOWER:
        return u ** (1 / (float(k.alpha) + 1))
    lo, hi = k.xs[0], k.xs[-1]
    bound = max(k.bs)
    out = np.empty(size)
    filled, proposed = 0, 0
    while filled < size:
        m = max(2 * (size - filled), 64)
        s = lo + (hi - lo) * rng.random(m)
        keep = s[rng.random(m) * bound < k.density(s)]
        proposed += m
        take = min(len(keep), size - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
        if filled == 0 and proposed >= 10**6:
            raise RuntimeError("rejection sampler accepted nothing in 10^6 trials")
    return out


def _frames(e: np.ndarray):
    helper = np.zeros_like(e)
    use_x = np.abs(e[..., 0]) < 0.9
    helper[..., 0] = use_x
    helper[..., 1] = ~use_x
    u1 = helper - np.sum(helper * e, axis=-1, keepdims=True) * e
    u1 /= np.linalg.norm(u1, axis=-1, keepdims=True)
    u2 = np.cross(e, u1)
    return u1, u2


def directions_from(e: np.ndarray, s: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Unit vectors with cosine s to the axes e and azimuth phi around them."""
    u1, u2 = _frames(e)
    st = np.sqrt(np.clip(1 - s * s, 0, None))[..., None]
    return s[..., None] * e + st * (np.cos(phi)[..., None] * u1 + np.sin(phi)[..., None] * u2)


def sample_directions(k: ScatteringKernel, e: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One direction per row of the (m, 3) array of unit axes."""
    e = np.atleast_2d(np.asarray(e, dtype=float))
    if np.any(np.abs(np.linalg.norm(e, axis=1) - 1) > 1e-12):
        raise ValueError("axis must be a unit vector")
    s = sample_cosines(k, rng, len(e))
    phi = 2 * math.pi * rng.random(len(e))
    return directions_from(e, s, phi)


def sample_direction(k: ScatteringKernel, e, rng: np.random.Generator) -> np.ndarray:
    """sigma on the unit sphere with density b(sigma . e)."""
    return sample_directions(k, np.asarray(e, dtype=float)[None, :], rng)[0]
