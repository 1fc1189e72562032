import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from swfopt import swf
from swfopt.swf import Family, SwfSpec

TOL = 1e-12


def close(a, b, tol=TOL):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


vectors = st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=1, max_size=20)
positive_vectors = st.lists(st.floats(0.01, 100.0), min_size=1, max_size=20)


# --- worked examples ---------------------------------------------------------

@pytest.mark.parametrize("spec,u,expected", [
    ("utilitarian", (0, 0, 0), 0.0),
    ("utilitarian", (1, 2, 3), 6.0),
    ("utilitarian", (0.75, 0.5, 0.25, 0), 1.5),
    ("relative-range", (1, 1, 1), 0.0),
    ("relative-range", (1, 3), -1.0),
    ("relative-range", (2, 2, 8), -1.5),
    ("relative-mean-deviation", (1, 1), 0.0),
    ("relative-mean-deviation", (0, 2), -2.0),
    ("relative-mean-deviation", (1, 2, 3), -1.0),
    ("coefficient-of-variation", (5, 5, 5), 0.0),
    ("coefficient-of-variation", (0, 2), -1.0),
    ("coefficient-of-variation", (1, 3), -0.5),
    ("gini", (3, 3, 3, 3), 1.0),
    ("gini", (0, 1), 0.5),
    ("gini", (1, 2, 3), 1 - 8 / 36),
    ("hoover", (1, 1, 1), 0.0),
    ("hoover", (0, 2), -0.5),
    ("mcloone", (1, 1, 1), 1.0),
    ("mcloone", (1, 2, 3), 0.75),
    ("mcloone", (1, 1, 100), 1.0),
    ("maximin", (0, 5), 0.0),
    ("maximin", (3, 3, 3), 3.0),
    ("maximin", (0.25, 0.75, 0.5), 0.25),
    ("alpha:alpha=0", (1, 2), 3.0),
    ("alpha:alpha=0.5", (4, 9), 10.0),
    ("alpha:alpha=2", (1, 2), -1.5),
    ("proportional", (1, 1, 1), 0.0),
    ("proportional", (math.e, math.e**2), 3.0),
    ("proportional", (0, 1), math.log(1e-6)),
    ("threshold:delta=0", (4, 1, 7), 12.0),
    ("threshold:delta=10", (1, 2), 12.0),
    ("threshold:delta=1", (3, 5, 9), 17.0),
])
def test_examples(spec, u, expected):
    assert swf.evaluate(spec, u) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_proportional_clamp_value():
    assert swf.proportional_fairness([0, 1]) == pytest.approx(-13.8155, abs=1e-4)


@pytest.mark.parametrize("u,u_max,expected", [
    ((0, 0), (3, 4), 0.0),
    ((1.5, 2), (3, 4), 3.5),
    ((1, 2), (3, 4), 0.0),
])
def test_kalai_smorodinsky_examples(u, u_max, expected):
    assert swf.kalai_smorodinsky(u, u_max) == pytest.approx(expected)


@pytest.mark.parametrize("a,b,expected", [
    ((1, 2), (2, 1), 0),
    ((1, 3), (2, 2), -1),
    ((2, 2, 9), (2, 3, 3), -1),
    ((2, 3, 3), (2, 2, 9), 1),
])
def test_leximax_examples(a, b, expected):
    assert swf.leximax_compare(a, b) == expected


# --- errors --------------------------------------------------------------

@pytest.mark.parametrize("fn", [swf.relative_range, swf.relative_mean_deviation,
                                swf.coefficient_of_variation, swf.gini, swf.hoover])
def test_zero_mean_rejected(fn):
    with pytest.raises(swf.ZeroMeanError):
        fn([0.0, 0.0])


def test_zero_median_rejected():
    with pytest.raises(swf.ZeroMedianError):
        swf.mcloone([0, 0, 5])


@pytest.mark.parametrize("alpha", [1.0, -0.5])
def test_invalid_alpha(alpha):
    with pytest.raises(swf.InvalidAlphaError):
        swf.alpha_fairness([1, 2], alpha)
    with pytest.raises(swf.InvalidAlphaError):
        SwfSpec(Family.ALPHA, alpha=alpha)


def test_leximax_not_scalar():
    with pytest.raises(swf.UnsupportedFamilyError):
        swf.evaluate("leximax", [1, 2])


def test_leximax_length_mismatch():
    with pytest.raises(swf.LengthMismatchError):
        swf.leximax_compare([1, 2], [1, 2, 3])


def test_ks_length_mismatch():
    with pytest.raises(swf.LengthMismatchError):
        swf.kalai_smorodinsky([1, 2], [1, 2, 3])


def test_bad_vectors():
    with pytest.raises(ValueError):
        swf.utilitarian([])
    with pytest.raises(ValueError):
        swf.utilitarian([1.0, math.nan])


# --- spec text form ---------------------------------------------------------

@pytest.mark.parametrize("text,canonical", [
    ("utilitarian", "utilitarian"),
    ("alpha:alpha=0.5", "alpha:alpha=0.5"),
    ("ALPHA: alpha = 2", "alpha:alpha=2"),
    ("alpha:alpha=1", "proportional"),
    ("pf", "proportional"),
    ("threshold:delta=2", "threshold:delta=2"),
    ("threshold", "threshold:delta=0"),
    ("proportional:eps=0.001", "proportional:eps=0.001"),
    ("ks", "kalai-smorodinsky"),
])
def test_spec_parse(text, canonical):
    spec = SwfSpec.parse(text)
    assert str(spec) == canonical
    assert SwfSpec.parse(str(spec)) == spec


@pytest.mark.parametrize("text", ["nope", "alpha", "maximin:alpha=2", "threshold:delta=-1",
                                  "gini:foo=1", "proportional:eps=0"])
def test_spec_parse_rejects(text):
    with pytest.raises(ValueError):
        SwfSpec.parse(text)


def test_parse_specs_list():
    specs = swf.parse_specs("utilitarian; alpha:alpha=0.5;maximin")
    assert [str(s) for s in specs] == ["utilitarian", "alpha:alpha=0.5", "maximin"]


# --- oracle agreement --------------------------------------------------------

ORACLE = {
    "utilitarian": oracles.utilitarian,
    "relative-range": oracles.relative_range,
    "relative-mean-deviation": oracles.relative_mean_deviation,
    "coefficient-of-variation": oracles.coefficient_of_variation,
    "gini": oracles.gini,
    "hoover": oracles.hoover,
    "mcloone": oracles.mcloone,
    "maximin": oracles.maximin,
    "alpha:alpha=0.5": lambda u: oracles.alpha_fairness(u, 0.5),
    "alpha:alpha=2": lambda u: oracles.alpha_fairness(u, 2.0),
    "proportional": oracles.proportional_fairness,
    "threshold:delta=1.5": lambda u: oracles.threshold(u, 1.5),
}


def random_vectors(count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, 21))
        u = rng.uniform(0.0, 10.0, n)
        u[rng.random(n) < 0.1] = 0.0
        out.append(u)
    return out


def oracle_mismatches(vectors):
    """Count (family, vector) pairs where the package and the oracle differ."""
    bad = []
    for u in vectors:
        lst = u.tolist()
        for text, ref in ORACLE.items():
            try:
                want = ref(lst)
            except ZeroDivisionError:
                with pytest.raises(swf.SWFError):
                    swf.evaluate(text, u)
                continue
            got = swf.evaluate(text, u)
            if not close(got, want):
                bad.append((text, lst, got, want))
        # Kalai-Smorodinsky: on-ray and off-ray points
        u_max = np.abs(u) + 1.0
        beta = float(np.random.default_rng(len(lst)).uniform(0, 1))
        on = (beta * u_max).tolist()
        for cand in (on, lst):
            got = swf.kalai_smorodinsky(cand, u_max)
            if not close(got, oracles.kalai_smorodinsky(cand, u_max.tolist())):
                bad.append(("kalai-smorodinsky", cand, got, None))
        # leximax against a shuffled copy and a perturbed copy
        other = np.random.default_rng(len(lst) + 1).permutation(u)
        other2 = other.copy()
        other2[0] += 0.5
        for v in (other, other2):
            if swf.leximax_compare(u, v) != oracles.leximax_compare(lst, v.tolist()):
                bad.append(("leximax", lst, v.tolist(), None))
    return bad


def test_oracle_agreement_fixed_seed():
    assert oracle_mismatches(random_vectors(200, seed=1)) == []


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_oracle_agreement_hypothesis(u):
    assume(sum(u) > 0)
    assert oracle_mismatches([np.array(u)]) == []


# --- properties -------------------------------------------------------------

SCALAR_SPECS = list(ORACLE)


@settings(max_examples=100, deadline=None)
@given(positive_vectors, st.randoms(use_true_random=False))
def test_permutation_invariance(u, rnd):
    v = list(u)
    rnd.shuffle(v)
    for text in SCALAR_SPECS:
        assert close(swf.evaluate(text, u), swf.evaluate(text, v), 1e-12)


@settings(max_examples=100, deadline=None)
@given(positive_vectors, st.floats(0.1, 50.0))
def test_scale_behaviour(u, c):
    cu = [c * x for x in u]
    for fam in swf.SCALE_INVARIANT:
        assert close(swf.evaluate(fam.value, cu), swf.evaluate(fam.value, u), 1e-9)
    assert close(swf.utilitarian(cu), c * swf.utilitarian(u), 1e-12)
    assert close(swf.maximin(cu), c * swf.maximin(u), 1e-12)


@settings(max_examples=200, deadline=None)
@given(positive_vectors)
def test_bounds(u):
    equal = max(u) == min(u)
    g = swf.gini(u)
    assert g <= 1.0 + 1e-15
    if equal:
        assert g == pytest.approx(1.0, abs=1e-15)
    assert 0.0 < swf.mcloone(u) <= 1.0 + 1e-15
    h = swf.hoover(u)
    assert h <= 0.0
    assert (h == 0.0) == equal or abs(h) < 1e-15


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_hoover_rmd_proportional(u):
    assume(sum(u) > 0)
    # equal up to the rounding of one division by 2n
    assert swf.hoover(u) * 2 * len(u) == pytest.approx(swf.relative_mean_deviation(u), rel=1e-15, abs=0)


def test_gini_strictly_below_one_when_unequal():
    assert swf.gini([1.0, 1.0, 1.0 + 1e-6]) < 1.0


def test_alpha_limit_is_maximin():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        a, b = rng.uniform(0.5, 2.0, (2, 5))
        if abs(a.min() - b.min()) < 0.05:
            continue
        by_alpha = swf.alpha_fairness(a, 50) > swf.alpha_fairness(b, 50)
        assert by_alpha == (a.min() > b.min())
        checked += 1


@settings(max_examples=100, deadline=None)
@given(st.lists(positive_vectors.filter(lambda v: len(v) == 4), min_size=1, max_size=10))
def test_threshold_zero_argmax_is_utilitarian(cands):
    by_t = max(range(len(cands)), key=lambda i: swf.threshold(cands[i], 0.0))
    by_u = max(range(len(cands)), key=lambda i: swf.utilitarian(cands[i]))
    assert swf.utilitarian(cands[by_t]) == swf.utilitarian(cands[by_u])


small = st.lists(st.integers(0, 3), min_size=3, max_size=3)


@settings(max_examples=300, deadline=None)
@given(small, small, small)
def test_leximax_total_preorder(a, b, c):
    assert swf.leximax_compare(a, a) == 0
    assert swf.leximax_compare(a, b) == -swf.leximax_compare(b, a)
    if swf.leximax_compare(a, b) == 0:
        assert sorted(a) == sorted(b)
    if swf.leximax_compare(a, b) >= 0 and swf.leximax_compare(b, c) >= 0:
        assert swf.leximax_compare(a, c) >= 0


@settings(max_examples=100, deadline=None)
@given(positive_vectors)
def test_rows_match_scalar(u):
    U = np.array([u, u[::-1]])
    for text in SCALAR_SPECS:
        spec = SwfSpec.parse(text)
        rows = swf.welfare_rows(spec, U)
        assert rows[0] == swf.evaluate(spec, u)
        assert close(rows[1], rows[0], 1e-12)
