"""Eigenvalues of the collision operator Q on low-degree invariant subspaces.

Also provides an exact pointwise evaluation of Qf for a small set of
polynomial observables, replacing the sphere integral in each pair term by
its closed form in the kernel moments B1, B2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exact import Surd, fmt_rational, is_exact
from .kernel import KernelMoments

SUPPORTED = ((0, 1), (1, 0), (1, 1), (0, 2), (2, 0))


def _frac(x):
    return Fraction(x) if is_exact(x) else float(x)


@dataclass(frozen=True)
class QSubspaceSpectrum:
    label: tuple
    N: int
    eigenvalues: tuple  # of Surd
    coupling: tuple | None = None
    degenerate: bool = False

    @property
    def top(self) -> Surd:
        best = self.eigenvalues[0]
        for e in self.eigenvalues[1:]:
            if e.compare(best) > 0:
                best = e
        return best

    def as_dict(self) -> dict:
        out = {"label": list(self.label), "N": self.N,
               "eigenvalues": [_surd_json(e) for e in self.eigenvalues]}
        if self.coupling is not None:
            out["coupling"] = [[_num_json(x) for x in row] for row in self.coupling]
        if self.degenerate:
            out["degenerate"] = True
        return out


def _num_json(x):
    return fmt_rational(x) if is_exact(x) else float(x)


def _surd_json(s: Surd):
    if s.b == 0:
        return _num_json(s.a)
    return {"rational": _num_json(s.a), "coef": _num_json(s.b), "radicand": _num_json(s.r)}


def v20_matrix(N: int, m: KernelMoments):
    """N(I - Q) on the centred span of sum |v|^4 and sum_{i!=j} (v_i.v_j)^2."""
    c = (1 - _frac(m.B2)) / (N - 1)
    return ((c * (N + 1), c * 1), (c * (N - 3), c * (3 * N - 3)))


@dataclass(frozen=True)
class V20Block:
    N: int
    matrix: tuple
    generator_eigenvalues: tuple  # eigenvalues of N(I - Q), as Surd
    trace_ok: bool
    determinant_ok: bool


def v20_block(N: int, m: KernelMoments) -> V20Block:
    """The 2x2 coupling block and the two eigenvalues of N(I - Q) on it."""
    if N == 3:
        raise ValueError("for N = 3 the two functions are dependent: psi = 2 phi - 1/2")
    if N < 3:
        raise ValueError("v20_block needs N >= 4")
    mat = v20_matrix(N, m)
    c = (1 - _frac(m.B2)) / (N - 1)
    r = Fraction(N * N - 3 * N + 1)
    lo = Surd(c * (2 * N - 1), -c, r)
    hi = Surd(c * (2 * N - 1), c, r)
    # exact identities: sum = trace, product = determinant
    tr = mat[0][0] + mat[1][1]
    det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    tr_ok = lo.a + hi.a == tr and lo.b + hi.b == 0
    det_ok = lo.a * hi.a - c * c * r == det
    return V20Block(N, mat, (hi, lo), tr_ok, det_ok)


def q_subspace_spectrum(n: int, l: int, N: int, m: KernelMoments) -> QSubspaceSpectrum:
    """Eigenvalues of Q on the invariant subspace V_{n,l}."""
    if (n, l) not in SUPPORTED:
        raise ValueError(f"unsupported subspace ({n},{l}); supported: {SUPPORTED}")
    if N < 3:
        raise ValueError("q_subspace_spectrum needs N >= 3")
    B1, B2 = _frac(m.B1), _frac(m.B2)
    if (n, l) in ((0, 1), (1, 0)):
        return QSubspaceSpectrum((n, l), N, (Surd(1 - (1 - B1) / (N - 1)),))
    if (n, l) == (1, 1):
        return QSubspaceSpectrum((n, l), N, (Surd(1 - (1 - B2) / (N - 1)),))
    if (n, l) == (0, 2):
        return QSubspaceSpectrum((n, l), N, (Surd(1 - 3 * (1 - B2) / (2 * (N - 1))),))
    c = (1 - B2) / (N * (N - 1))
    r = Fraction(N * N - 3 * N + 1)
    # listed as (faster decaying, slower decaying) mode
    fast = Surd(1 - c * (2 * N - 1), -c, r)
    slow = Surd(1 - c * (2 * N - 1), c, r)
    if N == 3:
        # only one function survives; its eigenvalue is B2
        return QSubspaceSpectrum((2, 0), N, (fast,), v20_matrix(N, m), degenerate=True)
    return QSubspaceSpectrum((2, 0), N, (fast, slow), v20_matrix(N, m))


def phi_mean(N: int) -> Fraction:
    """Average of sum |v_j|^4 over the uniform law on the constrained sphere."""
    return Fraction(5 * (N - 1), N * (3 * N - 1))


def psi_mean(N: int) -> Fraction:
    return 2 - (N + 1) * phi_mean(N)


# -- pointwise application ------------------------------------------------------
#
# Post-collision velocities are affine in sigma: v_i* = w + (r/2) sigma and
# v_j* = w - (r/2) sigma. Every observable below is at most quadratic in sigma
# once |sigma| = 1 is used, so its sigma-average needs only B1 and B2.

class _Aff:
    """Scalar c + l.sigma (arrays over states)."""

    __slots__ = ("c", "l")

    def __init__(self, c, l):
        self.c, self.l = c, l


class _AffVec:
    """Vector p + q sigma."""

    __slots__ = ("p", "q")

    def __init__(self, p, q):
        self.p, self.q = p, q

    def dot(self, other: "_AffVec") -> _Aff:
        c = np.sum(self.p * other.p, axis=-1) + self.q * other.q
        return _Aff(c, other.q[:, None] * self.p + self.q[:, None] * other.p)

    def comp(self, a: int) -> _Aff:
        l = np.zeros_like(self.p)
        l[:, a] = self.q
        return _Aff(self.p[:, a], l)


def _fixed(v):
    return _AffVec(v, np.zeros(len(v)))


class _Moments:
    def __init__(self, e, B1, B2):
        self.e, self.B1, self.B2 = e, float(B1), float(B2)

    def lin(self, f: _Aff):
        return f.c + self.B1 * np.sum(f.l * self.e, axis=-1)

    def prod(self, f: _Aff, g: _Aff):
        le = np.sum(f.l * self.e, axis=-1)
        ge = np.sum(g.l * self.e, axis=-1)
        out = f.c * g.c + self.B1 * (f.c * ge + g.c * le)
        out += np.sum(f.l * g.l, axis=-1) * (1 - self.B2) / 2 + le * ge * (3 * self.B2 - 1) / 2
        return out


def _post(v, i, j):
    vi, vj = v[:, i], v[:, j]
    w = (vi + vj) / 2
    d = vi - vj
    r = np.linalg.norm(d, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    e = d / safe[:, None]
    e[r == 0] = (1.0, 0.0, 0.0)
    return _AffVec(w, r / 2), _AffVec(w, -r / 2), e


@dataclass(frozen=True)
class Descriptor:
    """A polynomial observable on the constrained sphere with exact Q-application."""

    kind: str
    a: int = 0
    b: int = 1
    weight: float = 0.0  # psi coefficient for the V_{2,0} combinations

    @property
    def name(self) -> str:
        if self.kind in ("sym11", "anti01"):
            return f"{self.kind}:{self.a}"
        if self.kind == "sym02":
            return f"sym02:{self.a}{self.b}"
        if self.kind == "v20":
            return f"v20:{self.weight!r}"
        return self.kind

    def mean(self, N: int):
        if self.kind == "const":
            return 1.0
        if self.kind == "phi":
            return float(phi_mean(N))
        if self.kind == "psi":
            return float(psi_mean(N))
        return 0.0

    @property
    def centered(self) -> bool:
        return self.kind not in ("const", "phi", "psi")

    def value(self, v: np.ndarray) -> np.ndarray:
        return _value(self, np.asarray(v, dtype=float))

    def apply_q(self, v: np.ndarray, m: KernelMoments) -> np.ndarray:
        return _apply_q(self, np.asarray(v, dtype=float), m)


def _sq(v):
    return np.sum(v * v, axis=-1)


def _psi(v):
    gram = np.einsum("sia,sja->sij", v, v)
    return np.sum(gram**2, axis=(1, 2)) - np.sum(np.diagonal(gram, axis1=1, axis2=2) ** 2, axis=1)


def _value(d: Descriptor, v):
    if d.kind == "const":
        return np.ones(len(v))
    if d.kind == "phi":
        return np.sum(_sq(v) ** 2, axis=1)
    if d.kind == "psi":
        return _psi(v)
    if d.kind == "phi-centered":
        return np.sum(_sq(v) ** 2, axis=1) - float(phi_mean(v.shape[1]))
    if d.kind == "v20":
        N = v.shape[1]
        return (np.sum(_sq(v) ** 2, axis=1) - float(phi_mean(N))) + d.weight * (_psi(v) - float(psi_mean(N)))
    if d.kind == "sym11":
        return np.sum(_sq(v) * v[:, :, d.a], axis=1)
    if d.kind == "sym02":
        return np.sum(v[:, :, d.a] * v[:, :, d.b], axis=1)
    if d.kind == "anti01":
        return v[:, 0, d.a] - v[:, 1, d.a]
    if d.kind == "anti10":
        return _sq(v[:, 0]) - _sq(v[:, 1])
    raise ValueError(f"unknown descriptor {d.kind!r}")


def _single(kind, a, b):
    """Single-particle term g and its sigma-average at a post-collision velocity."""
    if kind == "phi":
        return lambda x: _sq(x) ** 2, lambda X, mo: mo.prod(X.dot(X), X.dot(X))
    if kind == "sym11":
        return lambda x: _sq(x) * x[:, a], lambda X, mo: mo.prod(X.dot(X), X.comp(a))
    if kind == "sym02":
        return lambda x: x[:, a] * x[:, b], lambda X, mo: mo.prod(X.comp(a), X.comp(b))
    raise ValueError(kind)


def _pair_change(kind, a, b, v, i, j, m):
    """E_sigma f(R_ij v) - f(v) for one pair."""
    Xi, Xj, e = _post(v, i, j)
    mo = _Moments(e, m.B1, m.B2)
    if kind in ("phi", "sym11", "sym02"):
        g, eg = _single(kind, a, b)
        return eg(Xi, mo) + eg(Xj, mo) - g(v[:, i]) - g(v[:, j])
    if kind == "psi":
        N = v.shape[1]
        new = 2 * mo.prod(Xi.dot(Xj), Xi.dot(Xj))
        old = 2 * np.sum(v[:, i] * v[:, j], axis=-1) ** 2
        for k in range(N):
            if k in (i, j):
                continue
            vk = _fixed(v[:, k])
            for X, idx in ((Xi, i), (Xj, j)):
                d = X.dot(vk)
                new = new + 2 * mo.prod(d, d)
                old = old + 2 * np.sum(v[:, idx] * v[:, k], axis=-1) ** 2
        return new - old
    if kind in ("anti01", "anti10"):
        out = np.zeros(len(v))
        for slot, sign in ((0, 1.0), (1, -1.0)):
            X = Xi if slot == i else Xj if slot == j else None
            if X is None:
                continue
            if kind == "anti01":
                out += sign * (mo.lin(X.comp(a)) - v[:, slot, a])
            else:
                out += sign * (mo.lin(X.dot(X)) - _sq(v[:, slot]))
        return out
    raise ValueError(kind)


def _apply_q(d: Descriptor, v, m):
    f0 = _value(d, v)
    if d.kind == "const":
        return f0
    N = v.shape[1]
    w = 2.0 / (N * (N - 1))
    out = f0.copy()
    for i in range(N):
        for j in range(i + 1, N):
            if d.kind in ("anti01", "anti10") and i > 1:
                continue  # pairs away from particles 1 and 2 leave f unchanged
            if d.kind in ("phi-centered", "v20"):
                ch = _pair_change("phi", 0, 1, v, i, j, m)
                if d.kind == "v20" and d.weight:
                    ch = ch + d.weight * _pair_change("psi", 0, 1, v, i, j, m)
            else:
                ch = _pair_change(d.kind, d.a, d.b, v, i, j, m)
            out += w * ch
    return out


def check_state(v, tol: float = 1e-12):
    v = np.asarray(v, dtype=float)
    if v.ndim == 2:
        v = v[None]
    mom = np.abs(v.sum(axis=1)).max()
    en = np.abs(_sq(v).sum(axis=1) - 1).max()
    if mom > tol or en > tol:
        raise ValueError(f"state violates the constraints (momentum {mom:.2e}, energy {en:.2e})")
    return v


def apply_q_pointwise(f: Descriptor, state, k) -> np.ndarray | float:
    """(Qf)(state) for one state (N, 3) or a batch (S, N, 3)."""
    from .kernel import moments
    single = np.asarray(state).ndim == 2
    v = check_state(state)
    m = k if isinstance(k, KernelMoments) else moments(k)
    out = _apply_q(f, v, m)
    return float(out[0]) if single else out


def parse_descriptor(name: str) -> Descriptor:
    kind, _, arg = name.partition(":")
    if kind in ("sym11", "anti01"):
        return Descriptor(kind, a=int(arg or 0))
    if kind == "sym02":
        arg = arg or "01"
        return Descriptor(kind, a=int(arg[0]), b=int(arg[1]))
    if kind == "v20":
        return Descriptor(kind, weight=float(arg or 0.0))
    if kind in ("const", "phi", "psi", "phi-centered", "anti10"):
        return Descriptor(kind)
    raise ValueError(f"unknown observable {name!r}")


def v20_weights(N: int) -> tuple[float, float]:
    """psi coefficients y for which phi~ + y psi~ is an eigenfunction (N >= 4)."""
    s = math.sqrt(N * N - 3 * N + 1)
    return (N - 2 + s) / (N - 3), (N - 2 - s) / (N - 3)


def eigen_descriptors(N: int, m: KernelMoments) -> list[tuple[Descriptor, float]]:
    """The eigen-observables of the five subspaces with their Q eigenvalues."""
    val = lambda n, l, idx=0: float(q_subspace_spectrum(n, l, N, m).eigenvalues[idx])
    out = [(Descriptor("anti01", a=0), val(0, 1)), (Descriptor("anti10"), val(1, 0)),
           (Descriptor("sym11", a=0), val(1, 1)), (Descriptor("sym02", a=0, b=1), val(0, 2))]
    if N == 3:
        out.append((Descriptor("phi-centered"), val(2, 0)))
    else:
        # eigenvalue c((2N-1) + s) of N(I-Q) pairs with weight (N-2+s)/(N-3)
        y_plus, y_minus = v20_weights(N)
        out.append((Descriptor("v20", weight=y_plus), val(2, 0, 0)))
        out.append((Descriptor("v20", weight=y_minus), val(2, 0, 1)))
    return out
