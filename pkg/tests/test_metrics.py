import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collabpriv.metrics import mae, privacy_vi, variation_of_information

import oracles

labels = st.lists(st.integers(0, 4), min_size=1, max_size=40)


def test_mae_examples():
    assert mae([1, 2, 3], [1, 2, 3]) == 0.0
    assert mae([3, 4], [3, 5]) == 0.5
    assert mae([1] * 7, [5] * 7) == 4.0


@pytest.mark.parametrize("p,t", [([], []), ([1, 2], [1])])
def test_mae_errors(p, t):
    with pytest.raises(ValueError):
        mae(p, t)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20), st.floats(-5, 5))
def test_mae_translation_invariant(values, c):
    t = [v * 0.5 for v in values]
    assert mae([v + c for v in values], [v + c for v in t]) == pytest.approx(mae(values, t), abs=1e-9)


def test_vi_examples():
    assert variation_of_information([0, 0, 1, 2], [5, 5, 7, 9]) == 0.0
    assert variation_of_information([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert variation_of_information([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(math.log(2), abs=1e-12)


def test_vi_length_mismatch():
    with pytest.raises(ValueError):
        variation_of_information([0, 1], [0])


@given(labels, st.data())
def test_vi_matches_contingency_oracle(a, data):
    b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
    assert variation_of_information(a, b) == pytest.approx(oracles.vi(a, b), abs=1e-12)


@settings(max_examples=200)
@given(st.integers(1, 30).flatmap(lambda n: st.tuples(*[st.lists(st.integers(0, 5), min_size=n, max_size=n)] * 3)))
def test_vi_metric_axioms(triple):
    a, b, c = triple
    ab, ba = variation_of_information(a, b), variation_of_information(b, a)
    assert ab >= 0 and ab == pytest.approx(ba, abs=1e-12)
    assert ab <= math.log(len(a)) + 1e-12
    assert variation_of_information(a, c) <= ab + variation_of_information(b, c) + 1e-12
    same = len(set(zip(a, b))) == len(set(a)) == len(set(b))
    assert (ab < 1e-12) == same


def test_privacy_vi_identity_and_rotation(rng):
    x = rng.random((80, 4))
    assert privacy_vi(x, x, 4, seed=0) == 0.0
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    assert privacy_vi(x, x @ q.T + 3.0, 4, seed=0) == pytest.approx(0.0, abs=1e-12)


def test_privacy_vi_random_baseline():
    vals = []
    for seed in range(5):
        r = np.random.default_rng(seed)
        vals.append(privacy_vi(r.random((200, 3)), r.random((200, 3)), 4, seed))
    assert min(vals) > 0
    assert np.mean(vals) >= 0.5


def test_privacy_vi_errors(rng):
    with pytest.raises(ValueError):
        privacy_vi(rng.random((5, 2)), rng.random((4, 2)), 2, 0)
    with pytest.raises(ValueError):
        privacy_vi(rng.random((5, 2)), rng.random((5, 2)), 1, 0)
