import dataclasses

import numpy as np
import pytest

from collabpriv.core_model import RatingProfile
from collabpriv.policy import parse_rules
from collabpriv.protocol_sim import (
    SessionTranscript,
    digest,
    elect_super_peer,
    form_groups,
    leaked_payloads,
    random_config,
    report_and_update,
    run_session,
)


def test_election_examples():
    assert elect_super_peer(["A", "B"], {"A": 0.9, "B": 0.5}) == "A"
    assert elect_super_peer(["B", "A"], {"A": 0.7, "B": 0.7}) == "A"
    with pytest.raises(ValueError):
        elect_super_peer([], {})
    with pytest.raises(KeyError):
        elect_super_peer(["C"], {"A": 1.0})


def test_election_stable():
    rep = {f"p{i}": r for i, r in enumerate(np.random.default_rng(0).random(8))}
    first = elect_super_peer(list(rep), rep)
    assert all(elect_super_peer(list(rep), rep) == first for _ in range(10))


def test_report_examples():
    assert report_and_update([("x", "s", 1.0)], {"s": 0.5}, 0.2)["s"] == pytest.approx(0.6)
    rep = {"s": 0.3, "t": 0.8}
    assert report_and_update([], rep) == rep
    with pytest.raises(ValueError):
        report_and_update([("x", "s", 1.5)], rep)


@pytest.mark.parametrize("score,target", [(1.0, 1.0), (0.0, 0.0)])
def test_reputation_converges_monotonically(score, target):
    rep, values = {"s": 0.5}, [0.5]
    for _ in range(60):
        rep = report_and_update([("a", "s", score), ("b", "s", score)], rep)
        values.append(rep["s"])
    diffs = np.diff(values)
    assert np.all(diffs >= 0) if score == 1.0 else np.all(diffs <= 0)
    assert values[-1] == pytest.approx(target, abs=1e-4)
    assert 0.0 <= min(values) and max(values) <= 1.0


def test_form_groups_covers_everyone():
    groups = form_groups([f"p{i}" for i in range(7)], 3, seed=1)
    assert sorted(sum(groups, [])) == [f"p{i}" for i in range(7)]
    assert all(len(g) >= 2 for g in groups)
    assert groups == form_groups([f"p{i}" for i in range(7)], 3, seed=1)


def test_digest_is_canonical():
    assert digest({"b": 1, "a": 2.0}) == digest({"a": 2.0, "b": 1})
    assert digest([1, 2]) != digest([2, 1])
    assert digest(np.arange(3.0)) == digest(np.arange(3.0))


@pytest.fixture(scope="module")
def session():
    cfg = random_config(3, n_peers=6)
    return cfg, run_session(cfg)


def test_same_seed_same_hash(session):
    cfg, tr = session
    assert run_session(random_config(3, n_peers=6)).hash == tr.hash
    assert run_session(dataclasses.replace(cfg, seed=cfg.seed + 1)).hash != tr.hash


def test_transcript_format(session, tmp_path):
    _, tr = session
    tr.write(tmp_path / "t.txt")
    lines = (tmp_path / "t.txt").read_text().splitlines()
    assert lines[0] == "step,group,sender,receiver,kind,digest"
    assert lines[-1] == f"hash={tr.hash}"
    assert all(len(l.split(",")) == 6 for l in lines[1:-1])


def test_steps_non_decreasing_per_group(session):
    _, tr = session
    for gid in tr.groups:
        steps = [e.step for e in tr.group_events(gid)]
        assert steps == sorted(steps) and steps[0] == 1 and steps[-1] == 7


def test_no_joiners_aborts():
    cfg = random_config(5, n_peers=4)
    for p in cfg.peers:
        p.joins = False
    tr = run_session(cfg)
    assert tr.aborted and tr.reason
    assert not tr.referrals
    assert tr.events[-1].kind == "aborted"


def test_full_trust_threshold_filters_everyone():
    """tau = 1 with nobody agreeing perfectly: empty referrals, step 7 still runs."""
    cfg = random_config(8, n_peers=3)
    target = cfg.peer(cfg.target)
    for p in cfg.peers:
        p.rules = []
        p.joins = True
        p.honest = True
        if p is not target:
            p.profile = RatingProfile(p.pseudonym, {i: (v % 5) + 1 for i, v in target.profile.ratings.items()})
    cfg = dataclasses.replace(cfg, tau=1.0, group_size=2, category=None, target_is_super_peer=False,
                              policy=dataclasses.replace(cfg.policy, purpose="recommendation"))
    tr = run_session(cfg)
    assert not tr.aborted
    assert all(len(r) == 0 for r in tr.referrals.values())
    for gid in tr.groups:
        kinds = [e.kind for e in tr.group_events(gid) if e.step == 7]
        assert "referrals-sealed" in kinds and "report" in kinds
        assert any(e.kind == "group-profile-empty" for e in tr.group_events(gid))


def test_block_rule_keeps_profile_out():
    cfg = random_config(2, n_peers=5)
    cfg = dataclasses.replace(cfg, policy=dataclasses.replace(cfg.policy, purpose="marketing"))
    blocked = cfg.peers[1].pseudonym
    cfg.peers[1].rules = parse_rules("IF purpose=marketing THEN block")
    cfg.peers[1].joins = True
    tr = run_session(cfg)
    assert not any(e.sender == blocked and e.kind in ("concealed-profile", "trust") for e in tr.events)
    assert any(e.sender == blocked and e.kind == "declined" for e in tr.events)


def test_target_as_super_peer():
    cfg = dataclasses.replace(random_config(4, n_peers=5), target_is_super_peer=True)
    tr = run_session(cfg)
    assert set(tr.super_peers.values()) == {cfg.target}


def test_leak_guard_catches_raw_ratings(session):
    cfg, tr = session
    assert leaked_payloads(tr, cfg.target) == []
    bad = SessionTranscript(list(tr.events))
    bad.emit(6, "g0", "x", "y", "oops", cfg.peers[1].profile)
    assert len(leaked_payloads(bad, cfg.target)) == 1


def test_invalid_configs():
    cfg = random_config(1, n_peers=3)
    for change in ({"group_size": 9}, {"group_size": 1}, {"tau": 1.5}, {"target": "nobody"}, {"alpha": 0.0}):
        with pytest.raises(ValueError):
            run_session(dataclasses.replace(cfg, **change))
