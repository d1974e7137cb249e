"""Deterministic simulation of one recommendation session.

Steps (tags 1-7 in the transcript):

1. the target broadcasts a request, its released preferences and the session key;
2. each peer-group elects the member with the highest reputation as super-peer;
3. super-peers announce their service policy;
4. participants check the policy against their rules, audit and rewrite the request;
5. participants compute trust towards the target and forward it;
6. participants conceal locally; super-peers filter by trust, aggregate and conceal globally;
7. the service recommends, referrals are sealed to the target and published,
   and members report on their super-peer.

The transcript only ever stores pseudonyms and payload digests.  Payload
objects are kept in memory (not serialized) so that :func:`leaked_payloads`
can check that no participant's raw ratings left the participant.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import struct
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ._util import child_rng
from .core_model import ItemFeatureTable, Rating, RatingProfile, item_sort_key
from .cta import ConcealmentParams, SessionKey, conceal_local
from .evs import HilbertParams, build_group_profile, conceal_global
from .policy import (
    AuditLog,
    AuditRecord,
    Block,
    PreferenceRule,
    Request,
    RewriteResult,
    ServicePolicy,
    check_policy,
    default_tags,
    rewrite_query,
)
from .recommender import ReferralList, recommend
from .trust import DEFAULT_MIN_OVERLAP, filter_by_trust, trust_score

SAC = "SAC"
SERVICE = "PRS"
BROADCAST = "*"
DEFAULT_ALPHA = 0.2
DEFAULT_REPUTATION = 0.5
LEVEL_NOISE = {"relaxed": 0.5, "standard": 1.0, "strict": 2.0}


class Role(str, Enum):
    PARTICIPANT = "participant"
    SUPER_PEER = "super_peer"
    TARGET_USER = "target_user"


@dataclass
class Peer:
    pseudonym: str
    profile: RatingProfile
    rules: list = field(default_factory=list)
    role: Role = Role.PARTICIPANT
    joins: bool = True
    honest: bool = True


class ReleasedPreferences(RatingProfile):
    """Ratings the target deliberately releases with its request."""


@dataclass
class SessionConfig:
    peers: list
    target: str
    features: ItemFeatureTable
    group_size: int = 3
    concealment: ConcealmentParams = field(default_factory=lambda: ConcealmentParams(d_dim=50, noise_sigma0=0.1))
    hilbert: HilbertParams = field(default_factory=HilbertParams)
    tau: float = 0.5
    K: int = 10
    top_n: int = 10
    seed: int = 0
    policy: ServicePolicy = field(default_factory=ServicePolicy)
    reputation: dict = field(default_factory=dict)
    category: str | None = None
    n_released: int = 20
    min_overlap: int = DEFAULT_MIN_OVERLAP
    alpha: float = DEFAULT_ALPHA
    target_is_super_peer: bool = False
    taxonomy: dict = field(default_factory=dict)
    now: dt.date = dt.date(2026, 1, 1)

    def validate(self) -> None:
        names = [p.pseudonym for p in self.peers]
        if len(set(names)) != len(names):
            raise ValueError("duplicate peer pseudonyms")
        if self.target not in names:
            raise ValueError(f"target {self.target!r} is not among the peers")
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.group_size > len(self.peers):
            raise ValueError(f"group_size {self.group_size} exceeds the peer count {len(self.peers)}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.K < 1 or self.top_n < 1:
            raise ValueError("K and top_n must be >= 1")

    def peer(self, pseudonym) -> Peer:
        return next(p for p in self.peers if p.pseudonym == pseudonym)


# ---- digests ---------------------------------------------------------------

def _canonical(obj, out: list) -> None:
    if obj is None:
        out.append(b"N")
    elif isinstance(obj, bool):
        out.append(b"T" if obj else b"F")
    elif isinstance(obj, (int, np.integer)):
        out.append(b"i" + str(int(obj)).encode())
    elif isinstance(obj, (float, np.floating)):
        out.append(b"f" + struct.pack(">d", float(obj)))
    elif isinstance(obj, str):
        out.append(b"s" + obj.encode() + b"\0")
    elif isinstance(obj, Enum):
        _canonical(obj.value, out)
    elif isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj, dtype=float) if obj.dtype.kind == "f" else np.ascontiguousarray(obj)
        out.append(b"a" + str(arr.dtype).encode() + str(arr.shape).encode() + arr.astype(arr.dtype.newbyteorder(">")).tobytes())
    elif isinstance(obj, dict):
        out.append(b"{")
        for k in sorted(obj, key=item_sort_key):
            _canonical(k, out)
            _canonical(obj[k], out)
        out.append(b"}")
    elif isinstance(obj, (set, frozenset)):
        out.append(b"<")
        for v in sorted(obj, key=item_sort_key):
            _canonical(v, out)
        out.append(b">")
    elif isinstance(obj, (list, tuple)):
        out.append(b"[")
        for v in obj:
            _canonical(v, out)
        out.append(b"]")
    elif is_dataclass(obj):
        out.append(b"D" + type(obj).__name__.encode())
        for f in fields(obj):
            _canonical(getattr(obj, f.name), out)
    elif isinstance(obj, SessionKey):
        out.append(b"K" + obj.seed.to_bytes(32, "big"))
    elif isinstance(obj, dt.date):
        out.append(b"d" + obj.isoformat().encode())
    else:
        raise TypeError(f"no canonical form for {type(obj).__name__}")


def digest(payload) -> str:
    parts: list = []
    _canonical(payload, parts)
    return hashlib.sha256(b"".join(parts)).hexdigest()[:16]


# ---- transcript ------------------------------------------------------------

@dataclass
class Event:
    step: int
    group: str
    sender: str
    receiver: str
    kind: str
    digest: str
    payload: object = field(default=None, repr=False, compare=False)

    def line(self) -> str:
        return f"{self.step},{self.group},{self.sender},{self.receiver},{self.kind},{self.digest}"


@dataclass
class SessionTranscript:
    events: list = field(default_factory=list)
    referrals: dict = field(default_factory=dict)
    reputation: dict = field(default_factory=dict)
    trust: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    super_peers: dict = field(default_factory=dict)
    status: str = "completed"
    reason: str = ""
    released: ReleasedPreferences | None = None

    @property
    def aborted(self) -> bool:
        return self.status == "aborted"

    def emit(self, step, group, sender, receiver, kind, payload=None) -> None:
        self.events.append(Event(step, str(group), str(sender), str(receiver), kind, digest(payload), payload))

    def lines(self) -> list[str]:
        return [e.line() for e in self.events]

    @property
    def hash(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode() + b"\n")
        return h.hexdigest()

    def dumps(self) -> str:
        return "".join(line + "\n" for line in ["step,group,sender,receiver,kind,digest", *self.lines()]) + f"hash={self.hash}\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    def group_events(self, group) -> list:
        return [e for e in self.events if e.group == str(group)]


# ---- SAC / reputation ------------------------------------------------------

def elect_super_peer(candidates, reputation: dict):
    """Highest reputation wins; ties go to the lexically smallest pseudonym."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates for super-peer election")
    missing = [c for c in candidates if c not in reputation]
    if missing:
        raise KeyError(f"no reputation for {missing}")
    return min(candidates, key=lambda c: (-reputation[c], str(c)))


def report_and_update(reports, reputation: dict, alpha: float = DEFAULT_ALPHA) -> dict:
    """Exponential smoothing of each subject's reputation towards its mean report score."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    by_subject: dict = {}
    for reporter, subject, score in reports:
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"report score {score} outside [0, 1]")
        by_subject.setdefault(subject, []).append(float(score))
    out = dict(reputation)
    for subject, scores in by_subject.items():
        old = out.get(subject, DEFAULT_REPUTATION)
        new = (1.0 - alpha) * old + alpha * (sum(scores) / len(scores))
        out[subject] = min(1.0, max(0.0, new))
    return out


# ---- leak guard ------------------------------------------------------------

def _walk(obj, seen=None):
    seen = seen if seen is not None else set()
    if id(obj) in seen:
        return
    seen.add(id(obj))
    yield obj
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _walk(k, seen)
            yield from _walk(v, seen)
    elif isinstance(obj, (list, tuple, set, frozenset)):
        for v in obj:
            yield from _walk(v, seen)
    elif is_dataclass(obj) and not isinstance(obj, type):
        for f in fields(obj):
            yield from _walk(getattr(obj, f.name), seen)


def leaked_payloads(transcript: SessionTranscript, target) -> list[Event]:
    """Events whose payload carries raw ratings other than the target's released ones."""
    bad = []
    for e in transcript.events:
        for node in _walk(e.payload):
            if isinstance(node, ReleasedPreferences) and node.owner == target:
                continue
            if isinstance(node, (RatingProfile, Rating, RewriteResult)):
                bad.append(e)
                break
    return bad


# ---- session ---------------------------------------------------------------

def _released_preferences(target: Peer, category, tags, n: int, seed: int) -> ReleasedPreferences:
    items = [i for i in target.profile.items() if category is None or category in tags.get(i, set())]
    if len(items) > n:
        rng = child_rng(seed, "released")
        idx = np.sort(rng.choice(len(items), size=n, replace=False))
        items = [items[i] for i in idx]
    return ReleasedPreferences(target.pseudonym, {i: target.profile.ratings[i] for i in items})


def form_groups(members: list, group_size: int, seed: int) -> list[list]:
    """Seeded shuffle into groups of ``group_size``; a lone leftover joins the last group."""
    order = list(members)
    perm = child_rng(seed, "groups").permutation(len(order))
    order = [order[i] for i in perm]
    groups = [order[i:i + group_size] for i in range(0, len(order), group_size)]
    if len(groups) > 1 and len(groups[-1]) == 1:
        groups[-2].extend(groups.pop())
    return groups


def run_session(config: SessionConfig, audit_log: AuditLog | None = None) -> SessionTranscript:
    config.validate()
    tr = SessionTranscript()
    reputation = dict(config.reputation)
    for p in config.peers:
        reputation.setdefault(p.pseudonym, DEFAULT_REPUTATION)
    audit_log = audit_log or AuditLog()
    tags = default_tags(config.features)
    key = SessionKey.from_seed(config.seed)
    target = config.peer(config.target)
    request = Request(config.target, config.category)

    # 1. broadcast, release, key distribution
    released = _released_preferences(target, config.category, tags, config.n_released, config.seed)
    tr.released = released
    joining = [p.pseudonym for p in config.peers if p.pseudonym != config.target and p.joins]
    tr.emit(1, BROADCAST, config.target, BROADCAST, "request", request)
    if not joining:
        tr.status, tr.reason = "aborted", "no participants joined"
        tr.emit(1, BROADCAST, config.target, BROADCAST, "aborted", tr.reason)
        tr.reputation = reputation
        return tr
    groups = form_groups(joining, config.group_size, config.seed)
    tr.groups = {f"g{n}": g for n, g in enumerate(groups)}
    for gid, members in tr.groups.items():
        for member in members:
            tr.emit(1, gid, config.target, member, "released-preferences", (released, key))

    # 2. election
    for gid, members in tr.groups.items():
        if config.target_is_super_peer:
            sp = config.target
            tr.emit(2, gid, SAC, config.target, "target-acts-as-super-peer", sp)
        else:
            for member in members:
                tr.emit(2, gid, member, SAC, "election-request", member)
            sp = elect_super_peer(members, reputation)
            for member in members:
                tr.emit(2, gid, SAC, member, "elected", sp)
        tr.super_peers[gid] = sp

    # 3. policy announcement
    for gid, members in tr.groups.items():
        sp = tr.super_peers[gid]
        tr.emit(3, gid, sp, config.target, "policy", config.policy)
        tr.emit(3, gid, sp, SERVICE, "policy", config.policy)
        for member in members:
            if member != sp:
                tr.emit(3, gid, sp, member, "policy", config.policy)

    # 4. preference check, audit, rewrite (local to each participant)
    rewrites: dict = {}
    for gid, members in tr.groups.items():
        for member in members:
            peer = config.peer(member)
            decision = check_policy(config.policy, peer.rules)
            if isinstance(decision, Block):
                tr.emit(4, gid, member, tr.super_peers[gid], "declined", "policy-blocked")
                continue
            rw = rewrite_query(request, peer.profile, config.features, peer.rules, config.taxonomy,
                               config.now, policy=config.policy, seed=config.seed, tags=tags)
            record = AuditRecord(config.target, frozenset(rw.released_items), config.now, config.policy)
            verdict = audit_log.audit(member, record, len(peer.profile))
            if not verdict.allowed:
                tr.emit(4, gid, member, tr.super_peers[gid], "declined", verdict.reason)
                continue
            if not rw.released_items:
                tr.emit(4, gid, member, tr.super_peers[gid], "declined", "nothing-to-release")
                continue
            rewrites[member] = (rw, decision)
            tr.emit(4, gid, member, member, "request-rewritten", (decision, len(rw.released_items)))

    # 5. trust towards the target, computed on the participant's own ratings
    for gid, members in tr.groups.items():
        sp = tr.super_peers[gid]
        for member in members:
            if member not in rewrites:
                continue
            score = trust_score(released, config.peer(member).profile, config.min_overlap)
            tr.trust[member] = score
            tr.emit(5, gid, member, sp, "trust", score)
            tr.emit(5, gid, member, SERVICE, "trust", score)

    # 6. local concealment, trust filter, aggregation, global concealment
    group_profiles: dict = {}
    for gid, members in tr.groups.items():
        sp = tr.super_peers[gid]
        received = []
        for member in members:
            if member not in rewrites:
                continue
            rw, decision = rewrites[member]
            params = ConcealmentParams(
                d_dim=config.concealment.d_dim,
                noise_sigma0=config.concealment.noise_sigma0 * LEVEL_NOISE[decision.level],
                k_clusters=config.concealment.k_clusters,
                n_reference=config.concealment.n_reference,
            )
            features = rw.extend_features(config.features) if rw.dummies else config.features
            concealed = conceal_local(rw.released_profile(member), features, params, key, config.seed)
            received.append((member, concealed))
            tr.emit(6, gid, member, sp, "concealed-profile", concealed)
        kept = filter_by_trust(received, {m: tr.trust[m] for m, _ in received}, config.tau)
        tr.emit(6, gid, sp, sp, "trust-filter", sorted(m for m, _ in kept))
        if kept:
            group = build_group_profile([c for _, c in kept], key, config.features.length + 1)
            concealed_group = conceal_global(group, config.hilbert, config.seed)
            concealed_group.trace = None
            group_profiles[gid] = concealed_group
            tr.emit(6, gid, sp, SERVICE, "group-profile", concealed_group)
        else:
            group_profiles[gid] = None
            tr.emit(6, gid, sp, SERVICE, "group-profile-empty", None)

    # 7. recommendation, sealed delivery, publication, reputation reports
    catalog = set(config.features)

    def wanted(item):
        return item in catalog and (config.category is None or config.category in tags.get(item, set()))

    reports = []
    for gid, members in tr.groups.items():
        sp = tr.super_peers[gid]
        group = group_profiles[gid]
        if group is None:
            referrals = ReferralList([], sealed_to=config.target)
        else:
            referrals = recommend(group, wanted, config.top_n, config.K, sealed_to=config.target)
        tr.referrals[gid] = referrals
        tr.emit(7, gid, SERVICE, sp, "referrals-sealed", referrals)
        delivered = config.peer(sp).honest
        if delivered:
            tr.emit(7, gid, sp, config.target, "referrals-sealed", referrals)
            for member in members:
                if member != sp:
                    tr.emit(7, gid, sp, member, "referrals-published", digest(referrals))
        else:
            tr.emit(7, gid, sp, config.target, "referrals-withheld", None)
        for member in members:
            if member == sp:
                continue
            score = 1.0 if delivered else 0.0
            reports.append((member, sp, score))
            tr.emit(7, gid, member, SAC, "report", (sp, score))
        if sp != config.target:
            reports.append((config.target, sp, 1.0 if delivered else 0.0))
            tr.emit(7, gid, config.target, SAC, "report", (sp, 1.0 if delivered else 0.0))
    tr.reputation = report_and_update(reports, reputation, config.alpha)
    return tr


# ---- synthetic configurations ----------------------------------------------

GENRES = ("Action", "Comedy", "Drama", "Horror", "Romance")


def synthetic_features(n_items: int, seed: int) -> ItemFeatureTable:
    rng = child_rng(seed, "features")
    table = ItemFeatureTable(names=list(GENRES))
    for item in range(1, n_items + 1):
        flags = (rng.random(len(GENRES)) < 0.35).astype(float)
        if not flags.any():
            flags[rng.integers(len(GENRES))] = 1.0
        table[item] = flags
    return table


def random_config(seed: int, n_peers: int | None = None, n_items: int = 40) -> SessionConfig:
    """A small random session: peers rate overlapping items, some decline or carry rules."""
    from .policy import parse_rules

    rng = child_rng(seed, "config")
    n_peers = n_peers or int(rng.integers(3, 10))
    features = synthetic_features(n_items, seed)
    taste = rng.integers(1, 6, size=n_items)
    peers = []
    rule_choices = [
        "",
        "IF purpose=marketing THEN block",
        "SUPPRESS item:1, item:2\nDUMMY on",
        "EXCLUDE \"Horror\"",
        "IF recipients=third_parties THEN conceal=strict",
        "GENERALIZE \"Drama\"->\"Fiction\"",
    ]
    for n in range(n_peers):
        k = int(rng.integers(8, n_items))
        items = np.sort(rng.choice(np.arange(1, n_items + 1), size=k, replace=False))
        noise = rng.integers(-1, 2, size=k)
        ratings = {int(i): int(np.clip(taste[i - 1] + e, 1, 5)) for i, e in zip(items, noise)}
        rules = parse_rules(rule_choices[int(rng.integers(len(rule_choices)))])
        peers.append(Peer(f"peer{n:02d}", RatingProfile(f"peer{n:02d}", ratings), rules,
                          joins=bool(rng.random() < 0.9), honest=bool(rng.random() < 0.9)))
    peers[0].role = Role.TARGET_USER
    policy = ServicePolicy(
        purpose=["recommendation", "marketing", "analytics"][int(rng.integers(3))],
        recipients=["super_peer_only", "service", "third_parties"][int(rng.integers(3))],
        retention_days=int(rng.integers(0, 400)),
    )
    return SessionConfig(
        peers=peers,
        target=peers[0].pseudonym,
        features=features,
        group_size=int(rng.integers(2, n_peers + 1)),
        concealment=ConcealmentParams(d_dim=int(rng.integers(6, 40)), noise_sigma0=float(rng.choice([0.0, 0.1, 0.5]))),
        hilbert=HilbertParams(order=int(rng.integers(2, 8)), step=int(rng.integers(1, 12))),
        tau=float(rng.choice([0.0, 0.3, 0.5, 1.0])),
        K=int(rng.integers(1, 8)),
        top_n=int(rng.integers(1, 10)),
        seed=int(rng.integers(2**32)),
        policy=policy,
        category=[None, "Comedy", "Drama"][int(rng.integers(3))],
        target_is_super_peer=bool(rng.random() < 0.2),
    )
