"""Inductive determination of the spectral gap, emitted as a replayable certificate.

For each N the gap of N(I - Q) is either read off the invariant subspaces that
carry the top eigenvalues of P, or bounded below from the gap at N - 1 by
N/(N-1) (1 - mu*) Delta_{N-1}. When that lower bound reaches the trial-function
upper bound min(1-B1, 1-B2) N/(N-1), the gap equals the upper bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .exact import Surd, fmt_rational, is_exact
from .kernel import ScatteringKernel, delta2, moments, theorem1_gate
from .pspec import TopSpectrum, level_two_sup, mu22, p_top_spectrum
from .qspec import q_subspace_spectrum

FORMAT = "kacgap-certificate/1"
KIND_TO_SUBSPACE = {"Sym11": (1, 1), "Sym02": (0, 2), "Sym20": (2, 0), "Antisym01": (0, 1), "Antisym10": (1, 0)}
SUBSPACE_TO_KIND = {v: k for k, v in KIND_TO_SUBSPACE.items()}


def _num(x):
    if isinstance(x, Surd):
        if x.b == 0:
            return _num(x.a)
        return {"rational": _num(x.a), "coef": _num(x.b), "radicand": _num(x.r)}
    return fmt_rational(x) if is_exact(x) else float(x)


def _parse(x):
    if isinstance(x, dict):
        return Surd(_parse(x["rational"]), _parse(x["coef"]), _parse(x["radicand"]))
    if isinstance(x, str):
        return Fraction(x)
    return x


def _label(sub) -> str:
    return f"{sub[0]},{sub[1]}"


def recursion_step(delta_prev, mu_star, N: int):
    """Lower bound N/(N-1) (1 - mu*) Delta_{N-1}."""
    if not mu_star < 1:
        raise ValueError("mu_star must be below 1")
    return Fraction(N, N - 1) * (1 - mu_star) * delta_prev if is_exact(delta_prev) and is_exact(mu_star) \
        else N / (N - 1) * (1 - float(mu_star)) * float(delta_prev)


def trial_upper_bound(N: int, m) -> Fraction | float:
    return min(1 - m.B1, 1 - m.B2) * Fraction(N, N - 1)


def _top_nu(subspaces, N, m):
    best = None
    for sub in subspaces:
        top = q_subspace_spectrum(*sub, N, m).top
        if best is None or top.compare(best) > 0:
            best = top
    return best


@dataclass
class Decision:
    N: int
    mu_star: Fraction
    subspaces: list
    strict: bool
    set_value: Surd | None
    upper: Fraction
    recursion: Fraction
    forced: bool
    exclusive: bool
    eigenspace: list

    @property
    def branch(self) -> str:
        return "upper-bound-matches" if self.forced else "recursion"


def _select_set(spec: TopSpectrum):
    """Subspaces entering the dichotomy and whether the recursion bound is strict.

    Listing every eigenvalue >= mu* makes the complement strictly below mu*.
    If an eigenvalue at mu* has no known Q spectrum, only those strictly above
    are used and the recursion bound is not strict.
    """
    above = spec.strictly_above
    at = spec.at_threshold
    if all(e.eigenspace.kind in KIND_TO_SUBSPACE for e in at):
        chosen, strict = above + at, True
    else:
        chosen, strict = above, False
    kinds = [e.eigenspace.kind for e in chosen]
    known = all(k in KIND_TO_SUBSPACE for k in kinds)
    subs = sorted({KIND_TO_SUBSPACE[k] for k in kinds if k in KIND_TO_SUBSPACE})
    return chosen, subs, strict, known


def dichotomy(N: int, mu_star, p_spec: TopSpectrum, m, delta_prev) -> Decision:
    """Decide which alternative of the two-way bound holds at N."""
    chosen, subs, strict, known = _select_set(p_spec)
    upper = trial_upper_bound(N, m)
    rec = recursion_step(delta_prev, mu_star, N)
    forced = rec >= upper
    set_value = None
    eig = []
    if known and subs:
        nu = _top_nu(subs, N, m)
        set_value = Surd(N * (1 - nu.a), -N * nu.b, nu.r)
        eig = [SUBSPACE_TO_KIND[s] for s in subs
               if q_subspace_spectrum(*s, N, m).top.compare(nu) == 0]
    exclusive = forced and known and (strict or rec > upper) and set_value is not None \
        and set_value.compare(upper) == 0
    return Decision(N, Fraction(mu_star), subs, strict, set_value, upper, rec, forced, exclusive, eig)


def _eigenspace_dims(kinds, N):
    dims = {"Sym11": 3, "Sym02": 5, "Sym20": 1, "Antisym01": 3 * (N - 1), "Antisym10": N - 1}
    return [{"kind": k, "dimension": dims[k]} for k in kinds]


def _record(dec: Decision, spec: TopSpectrum, m, delta_prev, source: str) -> dict:
    N = dec.N
    rec = {
        "id": f"N={N}",
        "N": N,
        "mu_star": _num(dec.mu_star),
        "mu_star_source": source,
        "spectrum_above_star": [e.as_dict() for e in spec.entries],
        "subspaces": [_label(s) for s in dec.subspaces],
        "strict": dec.strict,
        "q_gaps": {_label(s): [_num(e) for e in q_subspace_spectrum(*s, N, m).eigenvalues]
                   for s in dec.subspaces},
        "set_value": None if dec.set_value is None else _num(dec.set_value),
        "trial_upper": _num(dec.upper),
        "delta_prev": _num(delta_prev),
        "recursion_bound": _num(dec.recursion),
        "branch": dec.branch,
        "exclusive": dec.exclusive,
    }
    if dec.forced:
        rec["delta_N"] = {"exact": _num(dec.upper)}
        rec["eigenspace"] = _eigenspace_dims(dec.eigenspace, N) if dec.exclusive else []
    else:
        rec["delta_N"] = {"lower": _num(dec.recursion), "upper": _num(dec.upper)}
        rec["eigenspace"] = []
    return rec


def _moments_dict(m):
    return {"B1": _num(m.B1), "B2": _num(m.B2)}


def _skeleton(k, theorem, N_max, m, base):
    return {"format": FORMAT, "kernel": k.label, "theorem": theorem, "N_max": N_max,
            "moments": _moments_dict(m), "base": base, "records": [], "verdict": "certified"}


def _induction(doc, k, m, start: int, N_max: int, prev_exact):
    """Steps N = start..N_max with mu* = 1/(N-1), from an exact Delta_{start-1}."""
    prev = prev_exact
    for N in range(start, N_max + 1):
        mu = Fraction(1, N - 1)
        spec = p_top_spectrum(N, mu)
        dec = dichotomy(N, mu, spec, m, prev)
        doc["records"].append(_record(dec, spec, m, prev, "1/(N-1)"))
        if not dec.forced:
            doc["verdict"] = "inconclusive"
            doc["reason"] = {"record": f"N={N}", "inequality": "recursion_bound >= trial_upper",
                             "shortfall": _num(dec.upper - dec.recursion)}
            return None
        prev = dec.upper
    return prev


def _base(k):
    d2 = delta2(k)
    return {"id": "N=2", "delta2": _num(d2.value), "witness": d2.witness, "cutoff": d2.cutoff,
            "method": d2.method}


@dataclass
class GapCertificate:
    doc: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return self.doc["verdict"]

    def delta(self, N: int):
        for r in self.doc["records"]:
            if r["N"] == N:
                d = r["delta_N"]
                return _parse(d["exact"]) if "exact" in d else None
        return None

    def to_json(self) -> str:
        return canonical_json(self.doc)


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=True) + "\n"


class GateError(ValueError):
    pass


def _exact_moments(k):
    """Moments as rationals; quadrature-backed (tabulated) kernels cannot be certified exactly."""
    m = moments(k)
    if not (is_exact(m.B1) and is_exact(m.B2)):
        raise ValueError(f"kernel {k.label} has floating-point moments; exact certificates need rational ones")
    return m


def certify_theorem1(k: ScatteringKernel, N_max: int) -> GapCertificate:
    """Delta_N = (1 - B2) N/(N-1) for 3 <= N <= N_max when the gate holds."""
    gate = theorem1_gate(k)
    if not gate.holds:
        failed = []
        if not gate.moments_ordered:
            failed.append("B2 > B1")
        if not gate.gap_condition:
            failed.append(f"Delta2 >= (20/9)(1-B2): {gate.delta2} < {gate.required}")
        raise GateError("gate failed: " + "; ".join(failed))
    m = _exact_moments(k)
    base = _base(k)
    base["gate"] = {"delta2": _num(gate.delta2), "required": _num(gate.required)}
    doc = _skeleton(k, "T1", N_max, m, base)
    d2 = gate.delta2
    mu3 = mu22(3)
    spec = p_top_spectrum(3, mu3)
    dec = dichotomy(3, mu3, spec, m, d2)
    doc["records"].append(_record(dec, spec, m, d2, "mu22"))
    if not dec.forced:
        doc["verdict"] = "inconclusive"
        doc["reason"] = {"record": "N=3", "inequality": "recursion_bound >= trial_upper",
                         "shortfall": _num(dec.upper - dec.recursion)}
        return GapCertificate(doc)
    _induction(doc, k, m, 4, N_max, dec.upper)
    return GapCertificate(doc)


def mu22_product() -> Fraction:
    """prod_{j=4}^{7} (1 - mu_{2,2}(j)) / (1 - mu_{0,2}(j))."""
    return math.prod(((1 - mu22(j)) / (1 - Fraction(1, j - 1)) for j in range(4, 8)), start=Fraction(1))


def certified_product() -> Fraction:
    """Same product with mu* set to the certified sup over cells with n + l > 2."""
    return math.prod(((1 - level_two_sup(j).value) / (1 - Fraction(1, j - 1)) for j in range(4, 8)),
                     start=Fraction(1))


def certify_theorem2(k: ScatteringKernel, N_max: int) -> GapCertificate:
    """Delta_N = min(1-B1, 1-B2) N/(N-1) for 7 <= N <= N_max when Delta_2 = 2(1 - B1)."""
    d2 = delta2(k)
    if d2.witness != 1:
        raise GateError(f"theorem 2 needs the two-particle gap at degree 1, witness is {d2.witness}")
    if N_max < 7:
        raise ValueError("theorem 2 certificates need N_max >= 7")
    m = _exact_moments(k)
    doc = _skeleton(k, "T2", N_max, m, _base(k))
    sups = {j: level_two_sup(j) for j in range(3, 8)}
    doc["product"] = {
        "mu22": {str(j): _num(mu22(j)) for j in range(3, 8)},
        "mu22_product": _num(mu22_product()),
        "level_two_sup": {str(j): {"mu": _num(s.value), "n": s.n, "l": s.l} for j, s in sups.items()},
        "certified_product": _num(certified_product()),
        "threshold": "10/9",
    }
    prev = d2.value
    exact_at = None
    for j in range(3, 8):
        mu = sups[j].value
        spec = p_top_spectrum(j, mu)
        dec = dichotomy(j, mu, spec, m, prev)
        doc["records"].append(_record(dec, spec, m, prev, "level-two-sup"))
        if dec.forced:
            exact_at = j
            prev = dec.upper
            break
        prev = dec.recursion
    if exact_at is None:
        doc["verdict"] = "inconclusive"
        doc["reason"] = {"record": "N=7", "inequality": "recursion_bound >= trial_upper",
                         "shortfall": _num(dec.upper - dec.recursion)}
        return GapCertificate(doc)
    _induction(doc, k, m, exact_at + 1, N_max, prev)
    return GapCertificate(doc)


def certify(k: ScatteringKernel, N_max: int, theorem: str = "auto") -> GapCertificate:
    if theorem == "1":
        return certify_theorem1(k, N_max)
    if theorem == "2":
        return certify_theorem2(k, N_max)
    m = moments(k)
    if not (is_exact(m.B1) and is_exact(m.B2)):
        doc = _skeleton(k, "none", N_max, m, _base(k))
        doc["verdict"] = "inconclusive"
        doc["reason"] = {"record": "moments", "inequality": "moments are floating point, not rational"}
        return GapCertificate(doc)
    if check_gate := theorem1_gate(k).holds:
        return certify_theorem1(k, N_max)
    if delta2(k).witness == 1 and N_max >= 7:
        return certify_theorem2(k, N_max)
    doc = _skeleton(k, "none", N_max, m, _base(k))
    doc["verdict"] = "inconclusive"
    doc["reason"] = {"record": "N=2", "inequality": "neither gate holds", "theorem1_gate": check_gate}
    return GapCertificate(doc)


def telescoping_identity_check(N_max: int) -> bool:
    """(N1/2) prod_{j=4}^{N1} (1 - 1/(j-1)) == N1/(N1-1) for 4 <= N1 <= N_max."""
    if N_max < 4:
        raise ValueError("telescoping check needs N_max >= 4")
    prod = Fraction(1)
    for N1 in range(4, N_max + 1):
        prod *= 1 - Fraction(1, N1 - 1)
        if Fraction(N1, 2) * prod != Fraction(N1, N1 - 1):
            return False
    return True


# -- replay ---------------------------------------------------------------------

@dataclass
class ReplayResult:
    ok: bool
    record: str | None = None
    message: str = ""


def _max_surd(values):
    best = None
    for v in values:
        v = v if isinstance(v, Surd) else Surd(v)
        if best is None or v.compare(best) > 0:
            best = v
    return best


def _replay_record(r: dict, m, prev):
    """Return an error string, or None when the stored record is self-consistent."""
    N = r["N"]
    mu = _parse(r["mu_star"])
    if _parse(r["delta_prev"]) != prev:
        return "delta_prev does not match the previous record"
    if _parse(r["recursion_bound"]) != Fraction(N, N - 1) * (1 - mu) * prev:
        return "recursion bound arithmetic"
    upper = min(1 - m.B1, 1 - m.B2) * Fraction(N, N - 1)
    if _parse(r["trial_upper"]) != upper:
        return "trial upper bound"
    entries = r["spectrum_above_star"]
    if any(Fraction(e["mu"]) < mu for e in entries):
        return "spectrum entry below mu_star"
    used = [e for e in entries if Fraction(e["mu"]) > mu or r["strict"]]
    kinds = {KIND_TO_SUBSPACE.get(e["eigenspace"]) for e in used}
    if None not in kinds and sorted(_label(s) for s in kinds) != sorted(r["subspaces"]):
        return "subspaces do not match the listed spectrum"
    for lab, vals in r["q_gaps"].items():
        sub = tuple(int(t) for t in lab.split(","))
        expect = [_num(e) for e in q_subspace_spectrum(*sub, N, m).eigenvalues]
        if expect != vals:
            return f"Q eigenvalues on V_{lab}"
    if r["set_value"] is not None and r["q_gaps"]:
        top = _max_surd(_parse(v) for vals in r["q_gaps"].values() for v in vals)
        sv = Surd(N * (1 - top.a), -N * top.b, top.r)
        if _num(sv) != r["set_value"]:
            return "set value"
    rec = _parse(r["recursion_bound"])
    forced = rec >= upper
    d = r["delta_N"]
    if forced != (r["branch"] == "upper-bound-matches"):
        return "branch decision"
    if forced and _parse(d["exact"]) != upper:
        return "exact gap differs from the trial upper bound"
    if not forced and (_parse(d["lower"]) != rec or _parse(d["upper"]) != upper):
        return "stored bounds"
    return None


def replay_certificate(doc: dict) -> ReplayResult:
    """Re-verify every stored decision from the certificate's own numbers."""
    from .kernel import KernelMoments
    if doc.get("format") != FORMAT:
        return ReplayResult(False, None, "unknown certificate format")
    m = KernelMoments(_parse(doc["moments"]["B1"]), _parse(doc["moments"]["B2"]))
    prev = _parse(doc["base"]["delta2"])
    if doc["theorem"] == "T1":
        gate = doc["base"].get("gate", {})
        if not (m.B2 > m.B1 and prev >= Fraction(20, 9) * (1 - m.B2)):
            return ReplayResult(False, "N=2", "theorem 1 gate")
        if _parse(gate.get("delta2", doc["base"]["delta2"])) != prev:
            return ReplayResult(False, "N=2", "gate delta2")
    if doc["theorem"] == "T2":
        if prev != 2 * (1 - m.B1):
            return ReplayResult(False, "N=2", "two-particle gap is not 2(1-B1)")
        p = doc["product"]
        from_mu22 = math.prod(((1 - Fraction(p["mu22"][str(j)])) / (1 - Fraction(1, j - 1))
                           for j in range(4, 8)), start=Fraction(1))
        cert = math.prod(((1 - Fraction(p["level_two_sup"][str(j)]["mu"])) / (1 - Fraction(1, j - 1))
                          for j in range(4, 8)), start=Fraction(1))
        if _num(from_mu22) != p["mu22_product"] or _num(cert) != p["certified_product"]:
            return ReplayResult(False, "product", "product arithmetic")
        if not cert > Fraction(10, 9):
            return ReplayResult(False, "product", "certified product does not exceed 10/9")
    for r in doc["records"]:
        err = _replay_record(r, m, prev)
        if err:
            return ReplayResult(False, r["id"], err)
        d = r["delta_N"]
        prev = _parse(d["exact"]) if "exact" in d else _parse(d["lower"])
    return ReplayResult(True)
