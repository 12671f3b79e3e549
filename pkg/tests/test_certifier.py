import copy
import json
from fractions import Fraction as F

import pytest

from kacgap.certifier import (
    FORMAT, GateError, canonical_json, certified_product, certify, certify_theorem1, certify_theorem2, dichotomy,
    mu22_product, recursion_step, replay_certificate, telescoping_identity_check, trial_upper_bound,
)
from kacgap.kernel import KernelMoments, half_power, moments, morgenstern, power_family, tabulated, uniform
from kacgap.pspec import mu22, p_top_spectrum


@pytest.fixture(scope="module")
def uniform_cert():
    return certify_theorem1(uniform(), 50)


@pytest.fixture(scope="module")
def halfpower_cert():
    return certify_theorem2(half_power(1), 12)


def test_recursion_step():
    assert recursion_step(F(2), F(11, 20), 3) == F(27, 20)
    assert recursion_step(F(1), F(1, 3), 4) == F(8, 9)
    assert recursion_step(1.0, 0.5, 3) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        recursion_step(1, 1, 5)


def test_trial_upper_bound():
    assert trial_upper_bound(3, moments(uniform())) == 1
    assert trial_upper_bound(5, KernelMoments(F(1, 2), F(1, 3))) == F(5, 8)


def test_dichotomy_forced_at_three_for_uniform():
    m = moments(uniform())
    d = dichotomy(3, mu22(3), p_top_spectrum(3, mu22(3)), m, F(2))
    assert d.forced and d.branch == "upper-bound-matches"
    assert d.recursion == F(27, 20) and d.upper == 1


def test_dichotomy_not_forced_for_strong_forward_peaking():
    k = power_family("9/10")
    m = moments(k)
    d = dichotomy(3, mu22(3), p_top_spectrum(3, mu22(3)), m, F(4, 11))
    assert not d.forced and d.branch == "recursion"


@pytest.mark.parametrize("N", range(3, 51))
def test_uniform_gap(uniform_cert, N):
    assert uniform_cert.delta(N) == F(2, 3) * F(N, N - 1)


def test_uniform_certificate_shape(uniform_cert):
    doc = uniform_cert.doc
    assert doc["format"] == FORMAT and doc["theorem"] == "T1" and uniform_cert.verdict == "certified"
    assert [r["N"] for r in doc["records"]] == list(range(3, 51))
    assert uniform_cert.delta(50) == F(100, 147)
    r4 = doc["records"][1]
    assert r4["eigenspace"] == [{"kind": "Sym11", "dimension": 3}]
    assert r4["mu_star"] == "1/3"
    assert doc["base"]["delta2"] == "2"


def test_morgenstern_gap():
    c = certify(morgenstern(), 50, theorem="1")
    for N in range(3, 51):
        assert c.delta(N) == F(8, 15) * F(N, N - 1)
    assert c.delta(50) == F(80, 147)


def test_gate_boundary_kernel():
    c = certify_theorem1(power_family("7/9"), 10)
    assert c.verdict == "certified"
    r3, r4 = c.doc["records"][:2]
    assert r3["exclusive"] is False
    assert r4["eigenspace"][0]["kind"] == "Sym11"


def test_theorem1_refuses_failing_gate():
    with pytest.raises(GateError, match="20/9"):
        certify_theorem1(power_family("9/10"), 10)
    with pytest.raises(GateError, match="B2 > B1"):
        certify_theorem1(half_power(0), 10)


def test_products():
    assert mu22_product() == F(558018643, 495720000)
    assert certified_product() == F(627961494323, 559469592000)
    assert certified_product() > F(10, 9)


@pytest.mark.parametrize("a", [0, F(1, 2), 1])
def test_halfpower_gap(a):
    k = half_power(a)
    c = certify_theorem2(k, 50)
    assert c.verdict == "certified"
    B1 = moments(k).B1
    for N in range(7, 51):
        assert c.delta(N) == (1 - B1) * F(N, N - 1)
    for N in range(3, 7):
        assert c.delta(N) is None
    assert c.doc["product"]["mu22_product"] == "558018643/495720000"
    r7 = c.doc["records"][4]
    assert r7["N"] == 7 and r7["branch"] == "upper-bound-matches"
    assert r7["delta_N"]["exact"] == str((1 - B1) * F(7, 6))
    kinds = {e["kind"] for e in c.doc["records"][5]["eigenspace"]}
    assert kinds == {"Antisym01", "Antisym10"}


def test_halfpower_lower_bounds(halfpower_cert):
    recs = halfpower_cert.doc["records"]
    lows = [r["delta_N"]["lower"] for r in recs[:4]]
    assert lows == ["9/20", "167/405", "60955/152064", "3133087/7920000"]
    assert [r["delta_N"]["upper"] for r in recs[:4]] == ["1/2", "4/9", "5/12", "2/5"]


def test_halfpower_seven_is_forced_directly(halfpower_cert):
    r7 = halfpower_cert.doc["records"][4]
    assert r7["recursion_bound"] == "4395730460261/11189391840000"
    assert r7["trial_upper"] == "7/18"
    assert F(r7["recursion_bound"]) >= F(r7["trial_upper"])


def test_theorem2_requirements():
    with pytest.raises(ValueError):
        certify_theorem2(half_power(1), 6)


def test_auto_selection():
    assert certify(uniform(), 5).doc["theorem"] == "T1"
    assert certify(half_power(1), 8).doc["theorem"] == "T2"
    c = certify(half_power(1), 5)
    assert c.verdict == "inconclusive" and c.doc["theorem"] == "none"


def test_tabulated_kernel_is_inconclusive():
    # density concentrated near |s| = 1 on both sides puts the largest eigenvalue at degree 2
    k = tabulated([-1, -0.9, 0.9, 1], [10, 0, 0, 10])
    c = certify(k, 10)
    assert c.verdict == "inconclusive" and c.doc["reason"]["record"] == "moments"
    with pytest.raises(GateError, match="witness"):
        certify_theorem2(k, 10)
    with pytest.raises(ValueError, match="floating-point"):
        certify_theorem1(k, 10)


def test_telescoping_identity():
    assert telescoping_identity_check(200)
    with pytest.raises(ValueError):
        telescoping_identity_check(3)


# -- serialization and replay ----------------------------------------------------------------

def test_canonical_json_is_deterministic(uniform_cert):
    again = certify_theorem1(uniform(), 50)
    assert again.to_json() == uniform_cert.to_json()
    parsed = json.loads(uniform_cert.to_json())
    assert canonical_json(parsed) == uniform_cert.to_json()


def test_rationals_are_strings(uniform_cert):
    def walk(x):
        if isinstance(x, float):
            raise AssertionError(f"float {x} in certificate")
        if isinstance(x, dict):
            for v in x.values():
                walk(v)
        if isinstance(x, list):
            for v in x:
                walk(v)
    walk(uniform_cert.doc)


@pytest.mark.parametrize("which", ["uniform", "morgenstern", "halfpower"])
def test_replay_accepts_genuine_certificates(which, uniform_cert, halfpower_cert):
    doc = {"uniform": uniform_cert.doc, "morgenstern": certify(morgenstern(), 20).doc,
           "halfpower": halfpower_cert.doc}[which]
    assert replay_certificate(json.loads(canonical_json(doc))).ok


def test_replay_rejects_edited_gap(uniform_cert):
    doc = copy.deepcopy(uniform_cert.doc)
    doc["records"][2]["delta_N"]["exact"] = "5/7"
    r = replay_certificate(doc)
    assert not r.ok and r.record == "N=5"


def test_replay_rejects_edited_mu_star(uniform_cert):
    doc = copy.deepcopy(uniform_cert.doc)
    doc["records"][5]["mu_star"] = "1/9"
    assert replay_certificate(doc).record == "N=8"


def test_replay_rejects_edited_moments(uniform_cert):
    doc = copy.deepcopy(uniform_cert.doc)
    doc["moments"]["B2"] = "1/2"
    assert not replay_certificate(doc).ok


def test_replay_rejects_edited_product(halfpower_cert):
    doc = copy.deepcopy(halfpower_cert.doc)
    doc["product"]["level_two_sup"]["6"]["mu"] = "1/5"
    r = replay_certificate(doc)
    assert not r.ok and r.record == "product"


def test_replay_rejects_edited_chain_bound(halfpower_cert):
    doc = copy.deepcopy(halfpower_cert.doc)
    doc["records"][1]["delta_N"]["lower"] = "1/2"
    r = replay_certificate(doc)
    assert not r.ok and r.record == "N=4"


def test_replay_rejects_unknown_format():
    assert not replay_certificate({"format": "other"}).ok
