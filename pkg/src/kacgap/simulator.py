"""Monte Carlo Kac walk: uniform states, binary collisions, Rayleigh quotients and relaxation runs.

Random streams come from numpy's Philox generator. A seed maps to a
SeedSequence whose spawned children feed fixed-size replica chunks, so results
do not depend on how many threads run the chunks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from .kernel import ScatteringKernel, moments, sample_cosines
from .qspec import Descriptor, apply_q_pointwise, check_state

CHUNK = 4096
TINY = 1e-14


def philox(seed, n_streams: int | None = None):
    """One Philox generator, or a list of n_streams independent ones."""
    ss = np.random.SeedSequence(seed)
    if n_streams is None:
        return np.random.Generator(np.random.Philox(ss))
    return [np.random.Generator(np.random.Philox(c)) for c in ss.spawn(n_streams)]


@dataclass
class VelocityState:
    velocities: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.velocities, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 2:
            raise ValueError("velocities must have shape (N, 3) with N >= 2")
        check_state(v)
        self.velocities = v

    @property
    def N(self) -> int:
        return self.velocities.shape[0]


def _project(v: np.ndarray) -> np.ndarray:
    """Subtract the mean velocity and rescale to unit energy (batched on the leading axes)."""
    v = v - v.mean(axis=-2, keepdims=True)
    return v / np.sqrt(np.sum(v * v, axis=(-2, -1), keepdims=True))


def sample_states(N: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """size states drawn uniformly from the constrained sphere, shape (size, N, 3)."""
    if N < 2:
        raise ValueError("N must be at least 2")
    g = rng.standard_normal((size, N, 3))
    g -= g.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.sum(g * g, axis=(1, 2)))
    bad = norm < 1e-300
    while np.any(bad):  # measure-zero, but never divide by zero
        redo = rng.standard_normal((int(bad.sum()), N, 3))
        g[bad] = redo - redo.mean(axis=1, keepdims=True)
        norm = np.sqrt(np.sum(g * g, axis=(1, 2)))
        bad = norm < 1e-300
    return g / norm[:, None, None]


def sample_state(N: int, rng: np.random.Generator) -> VelocityState:
    return VelocityState(sample_states(N, rng, 1)[0])


def speed_cdf(N: int, u):
    """CDF of |pi_1| = sqrt(N/(N-1)) |v_1| under the uniform law; u^2 is Beta(3/2, (3N-6)/2)."""
    alpha = (3 * N - 8) / 2
    return stats.beta.cdf(np.asarray(u, dtype=float) ** 2, 1.5, alpha + 1)


# -- collision kernels ------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _collide(v, i, j, s, phi):
    d0 = v[i, 0] - v[j, 0]
    d1 = v[i, 1] - v[j, 1]
    d2 = v[i, 2] - v[j, 2]
    r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    if r < TINY:
        return
    e0, e1, e2 = d0 / r, d1 / r, d2 / r
    if abs(e0) < 0.9:
        h0, h1, h2 = 1.0, 0.0, 0.0
    else:
        h0, h1, h2 = 0.0, 1.0, 0.0
    p = h0 * e0 + h1 * e1 + h2 * e2
    a0, a1, a2 = h0 - p * e0, h1 - p * e1, h2 - p * e2
    an = math.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
    a0, a1, a2 = a0 / an, a1 / an, a2 / an
    b0 = e1 * a2 - e2 * a1
    b1 = e2 * a0 - e0 * a2
    b2 = e0 * a1 - e1 * a0
    st = math.sqrt(max(0.0, 1.0 - s * s))
    c, sn = math.cos(phi), math.sin(phi)
    s0 = s * e0 + st * (c * a0 + sn * b0)
    s1 = s * e1 + st * (c * a1 + sn * b1)
    s2 = s * e2 + st * (c * a2 + sn * b2)
    w0 = 0.5 * (v[i, 0] + v[j, 0])
    w1 = 0.5 * (v[i, 1] + v[j, 1])
    w2 = 0.5 * (v[i, 2] + v[j, 2])
    h = 0.5 * r
    v[i, 0], v[i, 1], v[i, 2] = w0 + h * s0, w1 + h * s1, w2 + h * s2
    v[j, 0], v[j, 1], v[j, 2] = w0 - h * s0, w1 - h * s1, w2 - h * s2


@numba.njit(cache=True, nogil=True)
def _renormalize(v):
    N = v.shape[0]
    for a in range(3):
        m = 0.0
        for k in range(N):
            m += v[k, a]
        m /= N
        for k in range(N):
            v[k, a] -= m
    e = 0.0
    for k in range(N):
        for a in range(3):
            e += v[k, a] * v[k, a]
    e = math.sqrt(e)
    for k in range(N):
        for a in range(3):
            v[k, a] /= e


@numba.njit(cache=True, nogil=True)
def _walk(v, I, J, S, PHI, cadence, count):
    for t in range(I.shape[0]):
        _collide(v, I[t], J[t], S[t], PHI[t])
        count += 1
        if cadence > 0 and count % cadence == 0:
            _renormalize(v)
    return count


@numba.njit(cache=True, nogil=True)
def _collide_batch(v, reps, I, J, S, PHI):
    for t in range(reps.shape[0]):
        _collide(v[reps[t]], I[t], J[t], S[t], PHI[t])


def _draws(N: int, k: ScatteringKernel, rng: np.random.Generator, m: int):
    i = rng.integers(0, N, m)
    j = rng.integers(0, N - 1, m)
    j = j + (j >= i)
    s = sample_cosines(k, rng, m)
    phi = 2 * math.pi * rng.random(m)
    return i.astype(np.int64), j.astype(np.int64), np.ascontiguousarray(s, dtype=float), phi


def collision_step(s: VelocityState, k: ScatteringKernel, rng: np.random.Generator) -> VelocityState:
    """One collision of a uniformly chosen pair; returns a new state."""
    v = s.velocities.copy()
    i, j, c, phi = _draws(s.N, k, rng, 1)
    _collide(v, i[0], j[0], c[0], phi[0])
    return _unchecked(v)


def _unchecked(v) -> VelocityState:
    out = VelocityState.__new__(VelocityState)
    out.velocities = v
    return out


@dataclass
class WalkResult:
    state: VelocityState
    steps: int
    momentum_drift: float
    energy_drift: float


def walk(s: VelocityState, k: ScatteringKernel, steps: int, rng: np.random.Generator,
         cadence: int | None = None, batch: int = 1 << 20) -> WalkResult:
    """Run `steps` collisions on one state, re-projecting every `cadence` steps (None: never)."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    v = s.velocities.copy()
    cad = 0 if cadence is None or cadence == math.inf else int(cadence)
    if cad < 0:
        raise ValueError("cadence must be positive or None")
    done = 0
    while done < steps:
        m = min(batch, steps - done)
        i, j, c, phi = _draws(s.N, k, rng, m)
        done = _walk(v, i, j, c, phi, cad, done)
    mom = float(np.abs(v.sum(axis=0)).max())
    en = float(abs(np.sum(v * v) - 1))
    return WalkResult(_unchecked(v), steps, mom, en)


# -- Rayleigh quotients -----------------------------------------------------------

@dataclass
class RayleighEstimate:
    mean: float
    std_error: float
    samples: int
    blocks: int

    def __iter__(self):
        return iter((self.mean, self.std_error))


def rayleigh_estimate(f: Descriptor, N: int, k, samples: int, rng: np.random.Generator,
                      block: int = 10_000) -> RayleighEstimate:
    """<f, Qf>/<f, f> over uniform states with Qf evaluated exactly per state.

    The standard error is a block jackknife of the ratio. For exact
    eigenfunctions the sample variance is pure rounding, so a floor of
    64 ulp of the estimate is added in quadrature.
    """
    if not f.centered:
        raise ValueError(f"observable {f.name} is not centered; subtract its mean first")
    if samples < 2 * block:
        block = max(1, samples // 2)
    m = k if not isinstance(k, ScatteringKernel) else moments(k)
    num, den = [], []
    left = samples
    while left > 0:
        b = min(block, left)
        v = sample_states(N, rng, b)
        fv = f.value(v)
        qf = apply_q_pointwise(f, v, m)
        num.append(float(np.sum(fv * qf)))
        den.append(float(np.sum(fv * fv)))
        left -= b
    num, den = np.array(num), np.array(den)
    est = num.sum() / den.sum()
    B = len(num)
    if B > 1:
        loo = (num.sum() - num) / (den.sum() - den)
        se = math.sqrt((B - 1) / B * np.sum((loo - loo.mean()) ** 2))
    else:
        se = math.inf
    floor = 64 * np.finfo(float).eps * abs(est)
    return RayleighEstimate(float(est), math.hypot(se, floor), samples, B)


# -- relaxation ---------------------------------------------------------------------

@dataclass
class WalkConfig:
    N: int
    kernel: ScatteringKernel
    steps: int | None = None
    horizon: float | None = None
    cadence: int | None = None
    seed: int = 0
    replicas: int = 1
    points: int = 41
    ensemble: str = "positive"

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.replicas < 1:
            raise ValueError("replica count must be at least 1")
        if self.steps is not None and self.steps < 0:
            raise ValueError("steps must be non-negative")
        if (self.steps is None) == (self.horizon is None):
            raise ValueError("give exactly one of steps or horizon")
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        if self.points < 2:
            raise ValueError("need at least two output times")

    @property
    def t_max(self) -> float:
        # with rate-N Poisson clocks, `steps` collisions take steps/N time on average
        return float(self.horizon) if self.horizon is not None else self.steps / self.N


@dataclass
class DecayFit:
    observable: str
    rate: float
    rate_se: float
    r2: float
    window: tuple
    warning: str | None = None

    def as_dict(self) -> dict:
        lo, hi = self.window
        return {"observable": self.observable, "rate": self.rate, "rate_se": self.rate_se,
                "ci95": [self.rate - 1.96 * self.rate_se, self.rate + 1.96 * self.rate_se],
                "r2": self.r2, "window": [lo, hi], "warning": self.warning}


@dataclass
class RelaxationResult:
    times: np.ndarray
    names: list
    means: np.ndarray
    ses: np.ndarray
    fits: list = field(default_factory=list)

    def to_csv(self) -> str:
        head = ["t"] + [x for n in self.names for x in (n, f"{n}_se")]
        rows = [",".join(head)]
        for p, t in enumerate(self.times):
            vals = [f"{t:.6g}"] + [f"{x:.10g}" for o in range(len(self.names))
                                   for x in (self.means[o, p], self.ses[o, p])]
            rows.append(",".join(vals))
        return "\n".join(rows) + "\n"

    def summary(self) -> dict:
        return {"fits": [f.as_dict() for f in self.fits]}


def fit_decay(times, means, ses, name: str = "", min_ratio: float = 4.0) -> DecayFit:
    """Weighted least squares of log(mean) on t while the mean stays min_ratio SE above zero."""
    times, means, ses = map(np.asarray, (times, means, ses))
    keep = 0
    for m, s in zip(means, ses):
        if m > 0 and (s == 0 or m > min_ratio * s):
            keep += 1
        else:
            break
    if keep < 3:
        raise ValueError(f"{name}: fewer than three usable points for the decay fit")
    t, y = times[:keep], np.log(means[:keep])
    rel = np.where(ses[:keep] > 0, ses[:keep] / means[:keep], 0.0)
    floor = max(rel.max(), 1e-12) * 1e-6
    w = 1 / np.maximum(rel, floor) ** 2
    W = w.sum()
    tb, yb = (w * t).sum() / W, (w * y).sum() / W
    stt = (w * (t - tb) ** 2).sum()
    slope = (w * (t - tb) * (y - yb)).sum() / stt
    resid = y - (yb + slope * (t - tb))
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (y - yb) ** 2).sum()
    # a flat series (up to rounding) is fitted perfectly by slope zero
    r2 = 1.0 if np.ptp(y) < 1e-12 else 1 - ss_res / ss_tot
    se = math.sqrt(1 / stt)
    warn = None
    if r2 < 0.99:
        warn = f"{name}: log-linear fit has R^2 = {r2:.4f} < 0.99 over t in [{t[0]:.3g}, {t[-1]:.3g}]"
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    return DecayFit(name, float(-slope), se, float(r2), (float(t[0]), float(t[-1])), warn)


def _initial(cfg: WalkConfig, observables, rng, n: int) -> np.ndarray:
    kind, _, arg = cfg.ensemble.partition(":")
    if kind == "uniform":
        return sample_states(cfg.N, rng, n)
    if kind != "positive":
        raise ValueError(f"unknown ensemble {cfg.ensemble!r}; use uniform or positive[:OBSERVABLE]")
    from .qspec import parse_descriptor
    g = parse_descriptor(arg) if arg else observables[0]
    out, filled = np.empty((n, cfg.N, 3)), 0
    while filled < n:
        v = sample_states(cfg.N, rng, 2 * (n - filled) + 16)
        v = v[g.value(v) > 0]
        take = min(len(v), n - filled)
        out[filled:filled + take] = v[:take]
        filled += take
    return out


def _run_chunk(cfg: WalkConfig, observables, rng, n: int, times: np.ndarray):
    v = _initial(cfg, observables, rng, n)
    vals = np.empty((len(observables), len(times), n))
    next_t = rng.exponential(1 / cfg.N, n)
    for p, t in enumerate(times):
        while True:
            due = np.flatnonzero(next_t <= t)
            if len(due) == 0:
                break
            i, j, s, phi = _draws(cfg.N, cfg.kernel, rng, len(due))
            _collide_batch(v, due.astype(np.int64), i, j, s, phi)
            next_t[due] += rng.exponential(1 / cfg.N, len(due))
        if cfg.cadence:
            v = _project(v)
        for o, f in enumerate(observables):
            vals[o, p] = f.value(v)
    return vals.sum(axis=2), (vals**2).sum(axis=2)


def relaxation_run(cfg: WalkConfig, observables: list, threads: int = 1, fit: bool = True) -> RelaxationResult:
    """Continuous-time walk (rate-N Poisson collisions) over independent replicas.

    Returns replica-averaged observables on an even time grid with standard
    errors, plus a log-linear decay fit for each observable. The plain
    "positive" ensemble conditions each observable's replicas on that
    observable being positive, so every observable gets its own replica set.
    """
    times = np.linspace(0.0, cfg.t_max, cfg.points)
    sizes = [CHUNK] * (cfg.replicas // CHUNK)
    if cfg.replicas % CHUNK:
        sizes.append(cfg.replicas % CHUNK)
    groups = [[f] for f in observables] if cfg.ensemble == "positive" else [list(observables)]
    rngs = philox(cfg.seed, len(sizes) * len(groups))
    jobs = [(g, a) for g in range(len(groups)) for a in range(len(sizes))]
    job = lambda ga: _run_chunk(cfg, groups[ga[0]], rngs[ga[0] * len(sizes) + ga[1]], sizes[ga[1]], times)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(job, jobs))
    else:
        parts = [job(ga) for ga in jobs]
    # fixed-order reduction keeps results independent of the thread count
    s1, s2 = [], []
    for g, grp in enumerate(groups):
        mine = [p for (gg, _), p in zip(jobs, parts) if gg == g]
        s1.append(sum((p[0] for p in mine), np.zeros((len(grp), len(times)))))
        s2.append(sum((p[1] for p in mine), np.zeros((len(grp), len(times)))))
    s1, s2 = np.vstack(s1), np.vstack(s2)
    R = cfg.replicas
    mean = s1 / R
    var = np.maximum(s2 / R - mean**2, 0.0) * (R / max(R - 1, 1))
    se = np.sqrt(var / R)
    res = RelaxationResult(times, [f.name for f in observables], mean, se)
    if fit:
        for o, f in enumerate(observables):
            try:
                res.fits.append(fit_decay(times, mean[o], se[o], f.name))
            except ValueError as exc:
                warnings.warn(str(exc), RuntimeWarning, stacklevel=2)
    return res
