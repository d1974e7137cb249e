"""Acceptance gate.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.  The MovieLens sweeps run once per session on
the 200-user x 400-item desk subset with five seeds.

Trend criteria are read as "no significant violation": for every adjacent
pair of grid values, the number of seeds whose metric *increases* must not
reach one-sided binomial significance (p < 0.05).  With five seeds that means
"not all five seeds move the wrong way".
"""
import math
import time

import numpy as np
import pytest
from scipy.spatial.distance import pdist
from scipy.stats import binomtest

from collabpriv.core_model import ItemFeatureTable, RatingProfile, points_matrix, profile_points
from collabpriv.cta import ConcealmentParams, SessionKey, conceal_local
from collabpriv.hilbert import hilbert_decode, hilbert_encode
from collabpriv.metrics import variation_of_information
from collabpriv.pipeline import SweepGrid, sweep_cta, sweep_evs
from collabpriv.protocol_sim import leaked_payloads, random_config, run_session
from collabpriv.recommender import recommend
from collabpriv.trust import trust_score

import oracles
from test_recommender import group_from, random_table

GRID = SweepGrid()
ALPHA = 0.05


def significant_increase(before, after) -> tuple[bool, int, int]:
    ups = int(np.sum(after > before))
    downs = int(np.sum(after < before))
    if ups + downs == 0:
        return False, 0, 0
    p = binomtest(ups, ups + downs, 0.5, alternative="greater").pvalue
    return p < ALPHA, ups, ups + downs


def by_seed(rows, key, value):
    """``{grid value: array over seeds}`` in seed order."""
    out = {}
    for r in rows:
        out.setdefault(r[key], []).append(r[value])
    return {k: np.array(v) for k, v in out.items()}


@pytest.fixture(scope="session")
def cta_rows(movielens):
    return sweep_cta(movielens, GRID, with_privacy=True)


@pytest.fixture(scope="session")
def evs_rows(movielens):
    return sweep_evs(movielens, GRID, with_privacy=False)


@pytest.mark.criterion(1, "Hilbert bijection + adjacency, order<=4, m<=3")
def test_c1_hilbert(record_property):
    t0 = time.perf_counter()
    cells = 0
    for order in range(1, 5):
        for m in range(1, 4):
            n = 2 ** (order * m)
            path = [hilbert_decode(i, order, m) for i in range(n)]
            for i, cell in enumerate(path):
                assert hilbert_encode(cell, order) == i
            assert len(set(path)) == n
            for a, b in zip(path, path[1:]):
                assert sum(abs(x - y) for x, y in zip(a, b)) == 1
            cells += n
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{cells} cells, {elapsed:.2f}s")
    assert elapsed < 5


@pytest.mark.criterion(2, "CTA isometry at sigma0=0 on 1000 points")
def test_c2_isometry(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    table = ItemFeatureTable({i: rng.random(5) for i in range(1000)})
    prof = RatingProfile("u", {i: int(rng.integers(1, 6)) for i in range(1000)})
    x = points_matrix(profile_points(prof, table))
    c = conceal_local(prof, table, ConcealmentParams(40, 0.0), SessionKey.from_seed(1), seed=0)
    worst = 0.0
    for label in np.unique(c.labels):
        idx = np.flatnonzero(c.labels == label)
        if len(idx) > 1:
            d0, d1 = pdist(x[idx]), pdist(c.vectors[idx])
            worst = max(worst, float(np.max(np.abs(d1 - d0) / d0)))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max relative error {worst:.1e}, {elapsed:.2f}s")
    assert worst <= 1e-9
    assert elapsed < 5


@pytest.mark.criterion(3, "MAE non-increasing in d_dim; mae(500)-plain <= 0.10")
def test_c3_cta_accuracy_trend(cta_rows, record_property):
    mae = by_seed(cta_rows, "d_dim", "mae_concealed")
    plain = by_seed(cta_rows, "d_dim", "mae_plain")[GRID.d_dims[0]]
    dims = list(GRID.d_dims)
    bad = []
    for lo, hi in zip(dims, dims[1:]):
        sig, ups, n = significant_increase(mae[lo], mae[hi])
        if sig:
            bad.append(f"{lo}->{hi} {ups}/{n}")
    gap = mae[500] - plain
    means = " ".join(f"{d}:{mae[d].mean():.4f}" for d in dims)
    record_property("detail", f"plain {plain.mean():.4f}; {means}; max gap@500 {gap.max():.4f}")
    assert not bad, bad
    assert mae[dims[-1]].mean() <= mae[dims[0]].mean()
    assert np.all(gap <= 0.10)


@pytest.mark.criterion(4, "privacy VI non-increasing in d_dim")
def test_c4_cta_privacy_trend(cta_rows, record_property):
    vi = by_seed(cta_rows, "d_dim", "vi")
    dims = list(GRID.d_dims)
    bad = []
    for lo, hi in zip(dims, dims[1:]):
        sig, ups, n = significant_increase(vi[lo], vi[hi])
        if sig:
            bad.append(f"{lo}->{hi} {ups}/{n}")
    record_property("detail", " ".join(f"{d}:{vi[d].mean():.3f}" for d in dims))
    assert not bad, bad
    assert vi[dims[-1]].mean() <= vi[dims[0]].mean()


@pytest.mark.criterion(5, "EVS mae(order 9) <= mae(order 3) at every step, seed mean")
def test_c5_evs_order(evs_rows, record_property):
    mean = {}
    for r in evs_rows:
        mean.setdefault((r["order"], r["step"]), []).append(r["mae"])
    mean = {k: float(np.mean(v)) for k, v in mean.items()}
    diffs = {s: mean[(9, s)] - mean[(3, s)] for s in GRID.steps}
    record_property("detail", "mae9-mae3 " + " ".join(f"{s}:{d:+.4f}" for s, d in diffs.items()))
    wrong = [s for s, d in diffs.items() if d > 0]
    assert not wrong, f"order 9 worse than order 3 at steps {wrong}"


@pytest.mark.criterion(6, "EVS range preservation, all sweep cells")
def test_c6_range(evs_rows, record_property):
    ok = [r["range_ok"] for r in evs_rows]
    record_property("detail", f"{sum(ok)}/{len(ok)} cells")
    assert len(ok) == len(GRID.orders) * len(GRID.steps) * len(GRID.seeds)
    assert all(ok)


@pytest.mark.criterion(7, "recommender == brute force on 100 random groups")
def test_c7_oracle(record_property):
    rng = np.random.default_rng(77)
    for _ in range(100):
        table = random_table(rng, int(rng.integers(1, 9)), int(rng.integers(1, 11)), float(rng.uniform(0.3, 0.9)))
        K = int(rng.integers(1, 8))
        got = recommend(group_from(table), top_n=10, K=K)
        want = oracles.recommend(table, 10, K)
        assert got.items() == [i for i, _ in want]
        assert all(abs(a - b) <= 1e-12 for (_, a), (_, b) in zip(got.entries, want))
    record_property("detail", "100 instances")


@pytest.mark.criterion(8, "VI identities and metric axioms")
def test_c8_vi(record_property):
    assert variation_of_information([0, 1, 1, 2], [0, 1, 1, 2]) == 0.0
    assert abs(variation_of_information([0, 0, 1, 1], [0, 1, 0, 1]) - 2 * math.log(2)) <= 1e-12
    rng = np.random.default_rng(8)
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        a, b, c = (rng.integers(0, int(rng.integers(1, 6)), n) for _ in range(3))
        ab = variation_of_information(a, b)
        assert ab >= 0
        assert abs(ab - variation_of_information(b, a)) <= 1e-12
        assert variation_of_information(a, c) <= ab + variation_of_information(b, c) + 1e-12
        assert variation_of_information(a, a) == 0.0
    record_property("detail", "1000 triples")


@pytest.mark.criterion(9, "trust identities, hand example 0.6845")
def test_c9_trust(record_property):
    same = RatingProfile("t", {1: 3, 2: 5, 3: 1})
    assert trust_score(same, RatingProfile("p", dict(same.ratings))).value == 1.0
    released = RatingProfile("t", {i: 5 if i < 5 else 1 for i in range(9)})
    part = RatingProfile("p", {0: 1, 1: 2, 2: 3, 3: 4, 4: 5, 5: 2, 6: 3, 7: 4, 8: 5})
    assert abs(trust_score(released, part).value) <= 1e-12
    hand = trust_score(RatingProfile("t", {1: 3, 2: 3, 3: 4, 4: 4}), RatingProfile("p", {1: 3, 2: 3, 3: 3, 4: 3}))
    record_property("detail", f"hand example {hand.value:.6f}")
    assert abs(hand.value - 0.6845) <= 1e-4


@pytest.mark.criterion(10, "protocol determinism + leak guard, 100 configs")
def test_c10_protocol(record_property):
    t0 = time.perf_counter()
    completed = 0
    for seed in range(100):
        cfg = random_config(seed)
        first = run_session(cfg)
        assert run_session(random_config(seed)).hash == first.hash
        assert leaked_payloads(first, cfg.target) == []
        completed += not first.aborted
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{completed} completed, {100 - completed} aborted, {elapsed:.1f}s")
    assert elapsed < 30


@pytest.mark.criterion(11, "absolute MAE/VI values: recorded, not comparable")
def test_c11_absolute_values_recorded(cta_rows, record_property):
    """Only trend directions are comparable (criteria 3-6); absolute numbers depend on the subset.

    This test records the absolute numbers this artifact produces so later
    runs can be compared against them; it asserts only that they exist and
    lie in the ranges the metrics allow.
    """
    mae = np.array([r["mae_concealed"] for r in cta_rows])
    vi = np.array([r["vi"] for r in cta_rows])
    record_property("detail", f"mae {mae.min():.3f}..{mae.max():.3f}, vi {vi.min():.3f}..{vi.max():.3f}")
    assert np.all((mae >= 0) & (mae <= 4))
    assert np.all(vi >= 0)
