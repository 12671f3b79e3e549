import math
import zlib
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from kacgap.kernel import (
    delta2, dirac, half_power, load_tabulated, moments, morgenstern, n2_eigenvalue, n2_eigenvalue_quadrature,
    parse_kernel, polya_envelope, positive_near_one, power_family, sample_cosines, sample_direction,
    sample_directions, tabulated, theorem1_gate, check_theorem1_condition, uniform,
)

CLOSED = [uniform(), morgenstern(), power_family("1/4"), power_family("7/9"), half_power(0),
          half_power("1/2"), half_power(1), half_power(3)]


def test_uniform_moments():
    m = moments(uniform())
    assert (m.B1, m.B2) == (0, Fraction(1, 3))


@pytest.mark.parametrize("a", [Fraction(1, 4), Fraction(1, 2), Fraction(7, 9), Fraction(9, 10)])
def test_power_moments(a):
    m = moments(power_family(a))
    assert 1 - m.B1 == 2 * (1 - a) / (2 - a)
    assert 1 - m.B2 == 4 * (1 - a) / ((2 - a) * (3 - a))


@pytest.mark.parametrize("a", [0, Fraction(1, 2), 1, 3])
def test_halfpower_first_moment(a):
    assert moments(half_power(a)).B1 == Fraction(a + 1, a + 2)


def test_moments_match_quadrature():
    from scipy.integrate import quad
    for k in (morgenstern(), half_power("1/2"), power_family("1/3")):
        m = moments(k)
        for j, B in ((1, m.B1), (2, m.B2)):
            # split at 0 and avoid the endpoint singularity by the alg weight where needed
            val = 0.5 * quad(lambda s: s**j * float(k.density(s)), -1, 1, points=[0], limit=400)[0]
            assert val == pytest.approx(float(B), abs=1e-6)


def test_eigenvalue_degree_zero_is_one():
    for k in CLOSED + [dirac()]:
        assert n2_eigenvalue(k, 0) == 1


def test_power_eigenvalue_is_rising_factorial_ratio():
    a = Fraction(1, 3)
    num = den = Fraction(1)
    for n in range(1, 12):
        num *= a + n - 1
        den *= 2 - a + n - 1
        assert n2_eigenvalue(power_family(a), n) == num / den


def test_halfpower_zero_first_eigenvalue():
    assert n2_eigenvalue(half_power(0), 1) == Fraction(1, 2)


@pytest.mark.parametrize("k", CLOSED, ids=lambda k: k.label)
def test_exact_eigenvalues_match_quadrature(k):
    for n in range(11):
        assert float(n2_eigenvalue(k, n)) == pytest.approx(n2_eigenvalue_quadrature(k, n), abs=1e-9)


def test_power_eigenvalues_decrease():
    for a in ("0", "1/8", "1/2", "7/9", "19/20"):
        lams = [n2_eigenvalue(power_family(a), n) for n in range(1, 32)]
        assert all(x >= y for x, y in zip(lams, lams[1:]))


@pytest.mark.parametrize("k", CLOSED, ids=lambda k: k.label)
def test_envelope_dominates(k):
    for n in range(1, 31):
        env = polya_envelope(k, n)
        if math.isfinite(env):
            assert abs(float(n2_eigenvalue(k, n))) <= env


def test_envelope_infinite_for_strong_singularity():
    assert math.isinf(polya_envelope(power_family("4/5"), 3))
    # the monotone ratio still pins the witness without the envelope
    assert delta2(power_family("4/5")).witness == 1


@pytest.mark.parametrize("a", [Fraction(0), Fraction(1, 2), Fraction(7, 9), Fraction(9, 10)])
def test_delta2_power_family(a):
    d = delta2(power_family(a))
    assert d.value == 4 * (1 - a) / (2 - a)
    assert d.witness == 1


def test_delta2_uniform():
    d = delta2(uniform())
    assert (d.value, d.witness) == (2, 1)


@pytest.mark.parametrize("a", [0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), 1])
def test_delta2_halfpower_witness_one(a):
    k = half_power(a)
    d = delta2(k)
    assert d.witness == 1
    assert d.value == 2 * (1 - moments(k).B1)
    lam1 = n2_eigenvalue(k, 1)
    assert all(n2_eigenvalue(k, j) < lam1 for j in (2, 3, 4))


def test_delta2_tabulated_picks_first_degree():
    k = tabulated([-1, 0, 1], [0, 1, 3])
    d = delta2(k)
    assert d.witness == 1
    assert d.value == pytest.approx(2 * (1 - moments(k).B1), abs=1e-12)
    assert d.cutoff >= 1 and len(d.eigenvalues) == d.cutoff


def test_delta2_flat_table_hits_cutoff_limit():
    # all lambda_n vanish, so no finite Polya cutoff separates them from the max
    with pytest.raises(RuntimeError):
        delta2(tabulated([-1, 0, 1], [1, 1, 1]), max_cutoff=40)


def test_gate_power_family():
    for a in ("0", "1/2", "7/9"):
        assert check_theorem1_condition(power_family(a))
    g = theorem1_gate(power_family("9/10"))
    assert not g.holds and g.moments_ordered and not g.gap_condition


def test_gate_boundary_is_seven_ninths():
    a = Fraction(7, 9)
    g = theorem1_gate(power_family(a))
    assert g.delta2 == g.required
    assert not check_theorem1_condition(power_family(Fraction(7, 9) + Fraction(1, 1000)))


@pytest.mark.parametrize("a", [0, Fraction(1, 2), 1, 5])
def test_gate_halfpower_fails_on_moment_order(a):
    g = theorem1_gate(half_power(a))
    assert not g.holds and not g.moments_ordered


# -- sampling --------------------------------------------------------------------------

def _mean_within(samples, target, sigmas=4):
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    return abs(samples.mean() - float(target)) <= sigmas * se


def test_uniform_directions_have_zero_mean_cosine():
    rng = np.random.default_rng(1)
    e = np.array([0.0, 0.6, 0.8])
    sig = sample_directions(uniform(), np.tile(e, (10**6, 1)), rng)
    assert np.allclose(np.linalg.norm(sig, axis=1), 1)
    assert _mean_within(sig @ e, 0)


@pytest.mark.parametrize("a", ["1/4", "1/2", "3/4"])
def test_power_direction_mean_is_first_moment(a):
    rng = np.random.default_rng(2)
    k = power_family(a)
    e = np.array([1.0, 0.0, 0.0])
    s = sample_directions(k, np.tile(e, (10**6, 1)), rng) @ e
    assert _mean_within(s, moments(k).B1)


def test_morgenstern_second_moment():
    rng = np.random.default_rng(3)
    s = sample_cosines(morgenstern(), rng, 10**6)
    assert 1 - moments(morgenstern()).B2 == Fraction(8, 15)
    assert _mean_within(s**2, Fraction(7, 15))


def test_single_direction_checks_unit_axis():
    rng = np.random.default_rng(0)
    v = sample_direction(uniform(), [0, 0, 1], rng)
    assert v.shape == (3,) and abs(np.linalg.norm(v) - 1) < 1e-12
    with pytest.raises(ValueError):
        sample_direction(uniform(), [0, 0, 2], rng)


def test_azimuth_is_uniform():
    rng = np.random.default_rng(4)
    e = np.array([0.0, 0.0, 1.0])
    sig = sample_directions(morgenstern(), np.tile(e, (200_000, 1)), rng)
    phi = np.arctan2(sig[:, 1], sig[:, 0])
    counts, _ = np.histogram(phi, bins=36, range=(-math.pi, math.pi))
    assert stats.chisquare(counts).pvalue > 1e-3


# closed-form CDFs of s under b(s)/2, written out by hand
CDFS = {
    "uniform": lambda s: (s + 1) / 2,
    "power:1/2": lambda s: 1 - ((1 - s) / 2) ** 0.5,
    "power:3/4": lambda s: 1 - ((1 - s) / 2) ** 0.25,
    "halfpower:0": lambda s: np.clip(s, 0, 1),
    "halfpower:2": lambda s: np.clip(s, 0, 1) ** 3,
}


@pytest.mark.parametrize("sel", list(CDFS))
def test_cosine_histogram_chi_squared(sel):
    k = parse_kernel(sel)
    rng = np.random.default_rng(zlib.crc32(sel.encode()))
    s = sample_cosines(k, rng, 10**6)
    lo = 0.0 if sel.startswith("half") else -1.0
    edges = np.linspace(lo, 1, 51)
    counts, _ = np.histogram(s, bins=edges)
    probs = np.diff(CDFS[sel](edges))
    assert stats.chisquare(counts, probs * len(s)).pvalue > 1e-3


def test_tabulated_rejection_sampling_chi_squared():
    k = tabulated([-1, 0, 1], [0, 1, 3])
    rng = np.random.default_rng(7)
    s = sample_cosines(k, rng, 10**6)
    edges = np.linspace(-1, 1, 51)
    counts, _ = np.histogram(s, bins=edges)
    # density on [-1,0] is x+1, on [0,1] is 1+2x, total mass 1/2 + 2 = 5/2
    def cdf(x):
        x = np.asarray(x)
        left = np.where(x < 0, (x + 1) ** 2 / 2, 0.5)
        right = np.where(x > 0, x + x**2, 0.0)
        return (left + right) / 2.5
    assert stats.chisquare(counts, np.diff(cdf(edges)) * len(s)).pvalue > 1e-3


# -- tabulated kernels and parsing ----------------------------------------------------

def test_tabulated_is_renormalized():
    k = tabulated([-1, 1], [3, 3])
    assert k.normalization == pytest.approx(3)
    m = moments(k)
    assert m.B1 == pytest.approx(0, abs=1e-14)
    assert m.B2 == pytest.approx(1 / 3)


def test_tabulated_matches_uniform_spectrum():
    k = tabulated(np.linspace(-1, 1, 9), np.ones(9))
    for n in range(1, 8):
        assert n2_eigenvalue(k, n) == pytest.approx(0, abs=1e-12)


def test_tabulated_linear_density_spectrum():
    k = tabulated([-1, 1], [0, 2])  # b(s) = 1 + s
    assert n2_eigenvalue(k, 1) == pytest.approx(1 / 3)
    assert n2_eigenvalue(k, 1) == pytest.approx(n2_eigenvalue_quadrature(k, 1), abs=1e-10)
    assert n2_eigenvalue(k, 3) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("xs,bs", [([0.5, 0.2], [1, 1]), ([-2, 1], [1, 1]), ([-1, 1], [1, -1]),
                                   ([-1, 1], [0, 0]), ([0.0], [1.0])])
def test_tabulated_validation(xs, bs):
    with pytest.raises(ValueError):
        tabulated(xs, bs)


def test_positive_near_one_flag():
    assert positive_near_one(tabulated([-1, 1], [1, 1]))
    assert not positive_near_one(tabulated([-1, 0.5], [1, 1]))
    assert not positive_near_one(tabulated([-1, 1], [1, 0]))
    assert positive_near_one(uniform())


def test_load_tabulated_csv(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("x,b\n# comment\n-1,1\n0,1\n1,1\n")
    k = load_tabulated(p)
    assert k.label == f"file:{p}"
    assert moments(k).B2 == pytest.approx(1 / 3)
    assert parse_kernel(f"file:{p}").xs == k.xs


def test_load_tabulated_rejects_empty(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("x,b\n")
    with pytest.raises(ValueError):
        load_tabulated(p)


def test_parse_kernel_selectors():
    assert parse_kernel("uniform") == uniform()
    assert parse_kernel("power:0") == uniform()
    assert parse_kernel("Morgenstern").label == "morgenstern"
    assert parse_kernel("power:7/9").alpha == Fraction(7, 9)
    assert parse_kernel("halfpower:1/2").label == "halfpower:1/2"
    assert moments(parse_kernel("dirac")) == moments(dirac())


@pytest.mark.parametrize("sel", ["", "bogus", "power", "power:1", "halfpower:-1", "uniform:3"])
def test_parse_kernel_errors(sel):
    with pytest.raises(ValueError):
        parse_kernel(sel)


def test_dirac_kernel():
    k = dirac()
    assert delta2(k).value == 0
    assert np.all(sample_cosines(k, np.random.default_rng(0), 5) == 1)
    with pytest.raises(ValueError):
        k.density(0.5)
