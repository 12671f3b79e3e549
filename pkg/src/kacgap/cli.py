"""Command-line front end: `kacgap SUBCOMMAND ...`.

Exit status is 0 on success, 2 when a check is inconclusive or fails its
criterion, and 1 on errors (bad usage, tampered certificates).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from importlib import resources

from . import certifier, correlation, jacobi, kernel, pspec, qspec, simulator
from .exact import fmt_rational, is_exact

OK, FAIL, INCONCLUSIVE = 0, 1, 2


class UsageError(Exception):
    pass


def _n_values(spec: str) -> list[int]:
    """'5', '3-12' or '3,5,7'."""
    out = []
    for part in spec.split(","):
        lo, sep, hi = part.partition("-")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise UsageError(f"cannot read N from {spec!r}; use 5, 3-12 or 3,5,7") from None
    return out


def _num(x):
    return fmt_rational(x) if is_exact(x) else float(x)


def _kernel(args) -> kernel.ScatteringKernel:
    if not getattr(args, "kernel", None):
        raise UsageError(f"{args.command} needs --kernel (uniform, morgenstern, power:ALPHA, "
                         "halfpower:ALPHA or file:PATH)")
    try:
        return kernel.parse_kernel(args.kernel)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None


def _write(text: str, args) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rows_text(rows: list[dict], fmt: str) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    cells = [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def emit(args, doc: dict, rows: list[dict] | None = None) -> None:
    """JSON for the whole document; csv/table for its row list."""
    if args.format == "json" or rows is None:
        _write(json.dumps(doc, sort_keys=True, indent=1) + "\n", args)
    else:
        _write(_rows_text(rows, args.format), args)


def stated_values(command: str) -> list[dict]:
    data = json.loads(resources.files("kacgap").joinpath("fixtures/stated_values.json").read_text())
    return [v for v in data["values"] if v["command"] == command]


def hatkappa_fixture() -> str:
    return resources.files("kacgap").joinpath("fixtures/hatkappa_N3.csv").read_text()


# -- subcommands ------------------------------------------------------------------

def cmd_delta2(args) -> int:
    k = _kernel(args)
    d = kernel.delta2(k)
    m = kernel.moments(k)
    gate = kernel.theorem1_gate(k)
    doc = {"kernel": k.label, "delta2": _num(d.value), "witness": d.witness, "cutoff": d.cutoff,
           "method": d.method, "B1": _num(m.B1), "B2": _num(m.B2),
           "theorem1_gate": {"holds": gate.holds, "B2>B1": gate.moments_ordered,
                             "delta2>=20/9(1-B2)": gate.gap_condition, "required": _num(gate.required)}}
    emit(args, doc, [{"kernel": k.label, "delta2": doc["delta2"], "witness": d.witness,
                      "cutoff": d.cutoff, "B1": doc["B1"], "B2": doc["B2"], "gate": gate.holds}])
    return OK


def cmd_spectrum_k(args) -> int:
    rows = []
    for N in _n_values(args.N):
        for level in range(args.max_level + 1):
            for n in range(level + 1):
                l = level - n
                rows.append({"N": N, "n": n, "l": l, "kappa": fmt_rational(correlation.kappa_value(n, l, N)),
                             "multiplicity": 2 * l + 1})
    emit(args, {"eigenvalues": rows}, rows)
    return OK


def cmd_verify_mono(args) -> int:
    reports = [correlation.verify_mono(N) for N in _n_values(args.N)]
    rows = [{"N": r.N, "verdict": r.verdict, "threshold": fmt_rational(r.threshold),
             "exact_cells": sum(1 for c in r.cells if c.scope == "cell"),
             "envelope_ratio": "" if r.envelope_ratio is None else r.envelope_ratio} for r in reports]
    doc = {"reports": [r.as_dict() if args.cells else {k: v for k, v in r.as_dict().items() if k != "cells"}
                       for r in reports]}
    emit(args, doc, rows)
    return OK if all(r.verdict == "certified" for r in reports) else INCONCLUSIVE


def _hatkappa_rows(N: int) -> list[tuple[int, int, float]]:
    T = float(correlation.mono_threshold(N))
    rows, n = [], 3
    while True:
        row = correlation.hat_table(N, T * T, [n])[0]
        rows.append(row)
        if row[1] == 0:
            return rows
        n += 1


def cmd_table_hatkappa(args) -> int:
    N = args.N
    rows = [{"n": n, "l": l, "hat_kappa_sq": f"{v:.5f}"} for n, l, v in _hatkappa_rows(N)]
    emit(args, {"N": N, "threshold_sq": float(correlation.mono_threshold(N)) ** 2, "rows": rows}, rows)
    return OK


def cmd_spectrum_p(args) -> int:
    N = int(args.N)
    mu = Fraction(args.mu_star) if args.mu_star else Fraction(1, N - 1)
    spec = pspec.p_top_spectrum(N, mu)
    rows = [e.as_dict() for e in spec.entries]
    emit(args, spec.as_dict(), rows)
    return OK


def cmd_verify_twotwo(args) -> int:
    reports = [pspec.verify_twotwo(N) for N in _n_values(args.N)]
    rows = [{"N": r.N, "verdict": r.verdict, "mu22": fmt_rational(r.mu22),
             "sup": fmt_rational(r.sup.value), "sup_cell": f"{r.sup.n},{r.sup.l}",
             "n_max": r.rectangle[0], "l_max": r.rectangle[1]} for r in reports]
    emit(args, {"reports": [r.as_dict() for r in reports]}, rows)
    return OK if all(r.verdict == "certified" for r in reports) else INCONCLUSIVE


def cmd_spectrum_q(args) -> int:
    k = _kernel(args)
    m = kernel.moments(k)
    docs, rows = [], []
    for N in _n_values(args.N):
        for sub in qspec.SUPPORTED:
            s = qspec.q_subspace_spectrum(*sub, N, m)
            docs.append(s.as_dict())
            for e in s.eigenvalues:
                rows.append({"N": N, "subspace": f"{sub[0]},{sub[1]}", "eigenvalue": float(e),
                             "gap_rate": N * (1 - float(e))})
    emit(args, {"kernel": k.label, "spectra": docs}, rows)
    return OK


def cmd_certify(args) -> int:
    k = _kernel(args)
    try:
        cert = certifier.certify(k, args.Nmax, args.theorem)
    except certifier.GateError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return INCONCLUSIVE
    doc = cert.doc
    if args.format == "json":
        _write(cert.to_json(), args)
    else:
        rows = [{"N": r["N"], "branch": r["branch"], "exact": r["delta_N"].get("exact", ""),
                 "lower": r["delta_N"].get("lower", ""), "upper": r["delta_N"].get("upper", ""),
                 "eigenspace": "+".join(e["kind"] for e in r["eigenspace"])} for r in doc["records"]]
        _write(_rows_text(rows, args.format), args)
    if doc["verdict"] != "certified":
        print(f"inconclusive at {doc['reason']['record']}: {doc['reason']['inequality']}", file=sys.stderr)
        return INCONCLUSIVE
    return OK


def _first_difference(a: dict, b: dict) -> str:
    for key in ("base", "product"):
        if a.get(key) != b.get(key):
            return key
    for ra, rb in zip(a.get("records", []), b.get("records", [])):
        if ra != rb:
            return ra.get("id", "?")
    return "header"


def cmd_check(args) -> int:
    try:
        text = open(args.certificate).read()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read certificate: {exc}", file=sys.stderr)
        return FAIL
    try:
        res = certifier.replay_certificate(doc)
    except (KeyError, ValueError, TypeError, ZeroDivisionError) as exc:
        print(f"FAIL: malformed certificate ({exc!r})", file=sys.stderr)
        return FAIL
    if not res.ok:
        print(f"FAIL record {res.record}: {res.message}", file=sys.stderr)
        return FAIL
    theorem = {"T1": "1", "T2": "2"}.get(doc["theorem"], "auto")
    fresh = certifier.certify(kernel.parse_kernel(doc["kernel"]), doc["N_max"], theorem)
    if fresh.to_json() != text:
        print(f"FAIL record {_first_difference(doc, fresh.doc)}: certificate differs from regeneration",
              file=sys.stderr)
        return FAIL
    print(f"OK {doc['kernel']} {doc['theorem']} N_max={doc['N_max']} verdict={doc['verdict']}")
    return OK


def cmd_simulate(args) -> int:
    k = _kernel(args)
    obs = [qspec.parse_descriptor(o) for o in args.observables.split(",")]
    cfg = simulator.WalkConfig(args.N, k, steps=args.steps, horizon=args.horizon, cadence=args.cadence,
                               seed=args.seed, replicas=args.replicas, points=args.points,
                               ensemble=args.ensemble)
    res = simulator.relaxation_run(cfg, obs, threads=args.threads or 1)
    summary = {"kernel": k.label, "N": args.N, "seed": args.seed, "replicas": args.replicas,
               "t_max": cfg.t_max, **res.summary()}
    if args.format == "json":
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(res.to_csv())
        sys.stdout.write(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    else:
        _write(res.to_csv(), args)
    return OK


def cmd_bounds_jacobi(args) -> int:
    p = jacobi.JacobiParams.of(args.n, args.alpha, args.beta)
    b = float(Fraction(args.b))
    cmp = jacobi.markov_vs_nem_region(p, b)
    doc = cmp.as_dict()
    x = -1 + 2 * b * b
    direct = float(jacobi.jacobi_eval(p, x)) / float(jacobi.jacobi_at_one(p))
    doc["direct_ratio"] = direct
    if float(p.alpha) > float(p.beta) > -0.5:
        doc["koornwinder_ratio"] = jacobi.koornwinder_ratio(p, x)
    emit(args, doc, [doc])
    return OK


def cmd_stated(args) -> int:
    vals = stated_values(args.command)
    if args.command == "table-hatkappa":
        _write(hatkappa_fixture(), args)
        return OK
    emit(args, {"values": vals}, vals)
    return OK


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kernel", help="uniform, morgenstern, power:ALPHA, halfpower:ALPHA or file:PATH")
    common.add_argument("--format", choices=("json", "csv", "table"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", "-o", help="write the main artifact here instead of stdout")
    common.add_argument("--threads", type=int, help="worker count (default: $KACGAP_THREADS or all cores)")
    common.add_argument("--paper-fixtures", action="store_true",
                        help="print only the vendored reference values for this command")

    p = argparse.ArgumentParser(prog="kacgap", description="Exact eigenvalue certificates and Monte Carlo checks for a momentum-conserving Kac walk.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    add = lambda name, helptext: sub.add_parser(name, parents=[common], help=helptext)

    add("delta2", "two-particle gap and the B2 > B1 gap gate for a kernel")
    s = add("spectrum-k", "eigenvalues kappa_{n,l}(N) of the correlation operator")
    s.add_argument("--N", required=True)
    s.add_argument("--max-level", type=int, default=4, help="largest n + l listed")
    s = add("verify-mono", "certify the ordering bound on kappa over all (n, l)")
    s.add_argument("--N", required=True)
    s.add_argument("--cells", action="store_true", help="include every cell in the JSON report")
    s = add("table-hatkappa", "least l per n with the hat-kappa bound below threshold")
    s.add_argument("--N", type=int, required=True)
    s = add("spectrum-p", "eigenvalues of P at or above mu*")
    s.add_argument("--N", required=True)
    s.add_argument("--mu-star", help="threshold as p/q (default 1/(N-1))")
    s = add("verify-twotwo", "check lifts with n + l > 2 against mu_{2,2}(N)")
    s.add_argument("--N", required=True)
    s = add("spectrum-q", "Q eigenvalues on the five low-degree subspaces")
    s.add_argument("--N", required=True)
    s = add("certify", "emit a gap certificate")
    s.add_argument("--theorem", choices=("1", "2", "auto"), default="auto")
    s.add_argument("--Nmax", type=int, required=True)
    s = add("check", "replay and regenerate a certificate")
    s.add_argument("certificate")
    s = add("simulate", "continuous-time relaxation run")
    s.add_argument("--N", type=int, required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--steps", type=int)
    g.add_argument("--horizon", type=float)
    s.add_argument("--observables", default="sym11", help="comma list, e.g. sym11,anti01,anti10")
    s.add_argument("--replicas", type=int, default=10_000)
    s.add_argument("--points", type=int, default=41)
    s.add_argument("--cadence", type=int, help="re-project onto the constraints every time point")
    s.add_argument("--ensemble", default="positive", help="positive[:OBSERVABLE] or uniform")
    s = add("bounds-jacobi", "compare the NEM bound with the trivial bound for one Jacobi ratio")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--alpha", required=True)
    s.add_argument("--beta", required=True)
    s.add_argument("--b", required=True, help="scale in (0, 1), e.g. 1/6")
    return p


COMMANDS = {
    "delta2": cmd_delta2, "spectrum-k": cmd_spectrum_k, "verify-mono": cmd_verify_mono,
    "table-hatkappa": cmd_table_hatkappa, "spectrum-p": cmd_spectrum_p, "verify-twotwo": cmd_verify_twotwo,
    "spectrum-q": cmd_spectrum_q, "certify": cmd_certify, "check": cmd_check, "simulate": cmd_simulate,
    "bounds-jacobi": cmd_bounds_jacobi,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; 2 is reserved for inconclusive results here
        return FAIL if exc.code else OK
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return FAIL
        os.environ["KACGAP_THREADS"] = str(args.threads)
    try:
        if args.paper_fixtures:
            return cmd_stated(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL


if __name__ == "__main__":
    sys.exit(main())
