import math

import pytest
from hypothesis import given, strategies as st

from collabpriv.core_model import RatingProfile
from collabpriv.trust import TrustScore, filter_by_trust, trust_score


def test_identical_coratings():
    a = RatingProfile("t", {1: 4, 2: 2, 3: 5})
    s = trust_score(a, RatingProfile("p", dict(a.ratings)))
    assert s.value == 1.0 and s.co_rated == 3


def test_uniform_differences_zero_trust():
    released = RatingProfile("t", {i: 5 if i < 5 else 1 for i in range(9)})
    # differences 5-r for i<5 give 4,3,2,1,0; 1-r for i>=5 give -1..-4
    part = RatingProfile("p", {0: 1, 1: 2, 2: 3, 3: 4, 4: 5, 5: 2, 6: 3, 7: 4, 8: 5})
    assert trust_score(released, part).value == pytest.approx(0.0, abs=1e-12)


def test_hand_example():
    released = RatingProfile("t", {1: 3, 2: 3, 3: 4, 4: 4})
    part = RatingProfile("p", {1: 3, 2: 3, 3: 3, 4: 3})
    assert trust_score(released, part).value == pytest.approx(1 - 1 / math.log2(9), abs=1e-12)
    assert trust_score(released, part).value == pytest.approx(0.6845, abs=1e-4)


def test_insufficient_overlap():
    s = trust_score(RatingProfile("t", {1: 3, 2: 4}), RatingProfile("p", {1: 3, 2: 4, 3: 1}))
    assert s.value == 0.0 and s.insufficient_overlap


ratings = st.dictionaries(st.integers(0, 15), st.integers(1, 5), min_size=3)


@given(ratings, ratings)
def test_symmetry_and_bounds(a, b):
    x, y = RatingProfile("a", a), RatingProfile("b", b)
    s1, s2 = trust_score(x, y), trust_score(y, x)
    assert 0.0 <= s1.value <= 1.0
    assert s1.value == pytest.approx(s2.value, abs=1e-12)


def test_filter_examples():
    profiles = [("A", "pa"), ("B", "pb")]
    scores = {"A": TrustScore(0.7, 5), "B": TrustScore(0.4, 5)}
    assert filter_by_trust(profiles, scores, 0.5) == [("A", "pa")]
    assert filter_by_trust(profiles, scores, 0.0) == profiles
    scores["A"] = TrustScore(1.0, 5)
    assert filter_by_trust(profiles, scores, 1.0) == [("A", "pa")]
    with pytest.raises(KeyError):
        filter_by_trust(profiles + [("C", "pc")], scores, 0.5)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.floats(0, 1), st.floats(0, 1))
def test_raising_tau_never_adds(values, t1, t2):
    lo, hi = sorted((t1, t2))
    profiles = [(str(i), i) for i in range(len(values))]
    scores = {str(i): TrustScore(v, 3) for i, v in enumerate(values)}
    assert set(filter_by_trust(profiles, scores, hi)) <= set(filter_by_trust(profiles, scores, lo))
