"""Service policies, user preference rules, query rewriting and request auditing.

Rules are read from a line format (one rule per line, ``#`` comments)::

    IF purpose=marketing THEN block
    IF recipients=third_parties THEN conceal=strict
    IF purpose=analytics AND retention>90 THEN block
    SUPPRESS item:123, item:456
    EXCLUDE "Horror"
    GENERALIZE "heavy metal"->"rock"
    GENERALIZE "Film-Noir"
    MAXAGE 365
    DUMMY on

A rule without ``IF`` applies to every policy.  Release/block rules decide
whether anything is released (first match wins); the other actions shape
what is released when their condition matches.
"""
from __future__ import annotations

import datetime as dt
import re
import shlex
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._util import child_rng
from .core_model import RATING_MAX, RATING_MIN, ItemFeatureTable, RatingProfile, item_sort_key


class PolicyError(ValueError):
    pass


class Purpose(str, Enum):
    RECOMMENDATION = "recommendation"
    MARKETING = "marketing"
    ANALYTICS = "analytics"


class Recipients(str, Enum):
    SUPER_PEER_ONLY = "super_peer_only"
    SERVICE = "service"
    THIRD_PARTIES = "third_parties"


# ordered from weakest to strongest concealment
CONCEALMENT_LEVELS = ("relaxed", "standard", "strict")
STRICTEST = CONCEALMENT_LEVELS[-1]


@dataclass(frozen=True)
class ServicePolicy:
    purpose: Purpose = Purpose.RECOMMENDATION
    recipients: Recipients = Recipients.SUPER_PEER_ONLY
    retention_days: int = 30

    def __post_init__(self):
        try:
            object.__setattr__(self, "purpose", Purpose(self.purpose))
            object.__setattr__(self, "recipients", Recipients(self.recipients))
        except ValueError as exc:
            raise PolicyError(str(exc)) from exc
        if self.retention_days < 0:
            raise PolicyError("retention must be >= 0 days")


# ---- actions ---------------------------------------------------------------

@dataclass(frozen=True)
class Release:
    level: str = STRICTEST

    def __post_init__(self):
        if self.level not in CONCEALMENT_LEVELS:
            raise PolicyError(f"unknown concealment level {self.level!r}")


@dataclass(frozen=True)
class Block:
    pass


@dataclass(frozen=True)
class SuppressItems:
    items: frozenset


@dataclass(frozen=True)
class ExcludeCategory:
    category: str


@dataclass(frozen=True)
class Generalize:
    # term -> parent; a parent of None means "look it up in the taxonomy"
    mapping: tuple


@dataclass(frozen=True)
class InsertDummy:
    enabled: bool = True


@dataclass(frozen=True)
class MaxAgeDays:
    days: int


DECISIONS = (Release, Block)


# ---- conditions ------------------------------------------------------------

_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}
_CLAUSE = re.compile(r"^\s*(\w+)\s*(<=|>=|!=|=|<|>)\s*([\w\-]+)\s*$")


@dataclass(frozen=True)
class Clause:
    field: str
    op: str
    value: object

    def matches(self, policy: ServicePolicy) -> bool:
        actual = {
            "purpose": policy.purpose,
            "recipients": policy.recipients,
            "retention": policy.retention_days,
        }[self.field]
        return _OPS[self.op](actual, self.value)


def make_clause(field_name: str, op: str, raw) -> Clause:
    if field_name == "purpose":
        enum = Purpose
    elif field_name == "recipients":
        enum = Recipients
    elif field_name == "retention":
        try:
            return Clause("retention", op, int(raw))
        except ValueError as exc:
            raise PolicyError(f"retention needs an integer, got {raw!r}") from exc
    else:
        raise PolicyError(f"unknown policy field {field_name!r}")
    if op not in ("=", "!="):
        raise PolicyError(f"{field_name} only supports = and !=")
    try:
        return Clause(field_name, op, enum(raw))
    except ValueError as exc:
        raise PolicyError(f"unknown {field_name} value {raw!r}") from exc


@dataclass(frozen=True)
class PreferenceRule:
    action: object
    condition: tuple = ()

    def __post_init__(self):
        if not isinstance(self.action, (Release, Block, SuppressItems, ExcludeCategory,
                                        Generalize, InsertDummy, MaxAgeDays)):
            raise PolicyError(f"unknown action {self.action!r}")
        for c in self.condition:
            if not isinstance(c, Clause):
                raise PolicyError(f"malformed condition {c!r}")

    def matches(self, policy: ServicePolicy | None) -> bool:
        if not self.condition:
            return True
        if policy is None:
            return False
        return all(c.matches(policy) for c in self.condition)


def check_policy(policy: ServicePolicy, rules) -> Release | Block:
    """First matching release/block rule decides; no match releases at the strictest level."""
    for rule in rules:
        if not isinstance(rule, PreferenceRule):
            raise PolicyError(f"malformed rule {rule!r}")
        if isinstance(rule.action, DECISIONS) and rule.matches(policy):
            return rule.action
    return Release(STRICTEST)


# ---- parsing ---------------------------------------------------------------

def _parse_item(token: str):
    token = token.strip()
    if token.startswith("item:"):
        token = token[5:]
    try:
        return int(token)
    except ValueError:
        return token


def _parse_action(text: str):
    text = text.strip()
    head, _, rest = text.partition(" ")
    head_l = head.lower()
    if head_l == "block" and not rest.strip():
        return Block()
    if head_l.startswith("conceal="):
        return Release(head.split("=", 1)[1].strip().lower())
    if head_l == "release":
        rest = rest.strip()
        if not rest:
            return Release(STRICTEST)
        if rest.lower().startswith("conceal="):
            return Release(rest.split("=", 1)[1].strip().lower())
        raise PolicyError(f"malformed release action {text!r}")
    if head_l == "suppress":
        items = [t for t in re.split(r"[,\s]+", rest.strip()) if t]
        if not items:
            raise PolicyError("SUPPRESS needs at least one item")
        return SuppressItems(frozenset(_parse_item(t) for t in items))
    if head_l == "exclude":
        parts = shlex.split(rest)
        if len(parts) != 1:
            raise PolicyError(f"EXCLUDE takes one category, got {rest!r}")
        cat = parts[0]
        return ExcludeCategory(cat[9:] if cat.startswith("category:") else cat)
    if head_l == "generalize":
        m = re.fullmatch(r'\s*"([^"]+)"\s*(?:->\s*"([^"]+)")?\s*', rest)
        if not m:
            raise PolicyError(f"malformed GENERALIZE {rest!r}")
        return Generalize(((m.group(1), m.group(2)),))
    if head_l == "maxage":
        try:
            days = int(rest.strip())
        except ValueError as exc:
            raise PolicyError(f"MAXAGE needs an integer, got {rest!r}") from exc
        if days < 0:
            raise PolicyError("MAXAGE must be >= 0")
        return MaxAgeDays(days)
    if head_l == "dummy":
        flag = rest.strip().lower()
        if flag not in ("on", "off"):
            raise PolicyError(f"DUMMY takes on/off, got {rest!r}")
        return InsertDummy(flag == "on")
    raise PolicyError(f"unknown action {text!r}")


def parse_rule(line: str) -> PreferenceRule:
    line = line.strip()
    m = re.fullmatch(r"IF\s+(.+?)\s+THEN\s+(.+)", line, flags=re.IGNORECASE)
    if not m:
        return PreferenceRule(_parse_action(line))
    clauses = []
    for part in re.split(r"\s+AND\s+", m.group(1), flags=re.IGNORECASE):
        cm = _CLAUSE.match(part)
        if not cm:
            raise PolicyError(f"malformed condition {part!r}")
        clauses.append(make_clause(cm.group(1).lower(), cm.group(2), cm.group(3)))
    return PreferenceRule(_parse_action(m.group(2)), tuple(clauses))


def parse_rules(text: str) -> list[PreferenceRule]:
    rules = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip() if not line.strip().startswith('"') else line.strip()
        if not line:
            continue
        try:
            rules.append(parse_rule(line))
        except PolicyError as exc:
            raise PolicyError(f"line {lineno}: {exc}") from None
    return rules


def load_rules(path) -> list[PreferenceRule]:
    return parse_rules(Path(path).read_text())


def parse_taxonomy(text: str) -> dict:
    tax = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise PolicyError(f"line {lineno}: expected 'child -> parent'")
        child, parent = (s.strip().strip('"') for s in line.split("->", 1))
        if not child or not parent:
            raise PolicyError(f"line {lineno}: empty taxonomy term")
        tax[child] = parent
    check_acyclic(tax)
    return tax


def load_taxonomy(path) -> dict:
    return parse_taxonomy(Path(path).read_text())


def check_acyclic(taxonomy: dict) -> None:
    for start in taxonomy:
        seen = {start}
        node = taxonomy[start]
        while node in taxonomy:
            if node in seen:
                raise PolicyError(f"cyclic taxonomy through {node!r}")
            seen.add(node)
            node = taxonomy[node]
        if node in seen:
            raise PolicyError(f"cyclic taxonomy through {node!r}")


# ---- rewriting -------------------------------------------------------------

@dataclass(frozen=True)
class Request:
    requester: object
    category: str | None = None


@dataclass
class RewriteResult:
    decision: Release | Block
    kept: dict = field(default_factory=dict)
    suppressed: set = field(default_factory=set)
    excluded: set = field(default_factory=set)
    expired: set = field(default_factory=set)
    dummies: dict = field(default_factory=dict)
    generalized: dict = field(default_factory=dict)
    tags: dict = field(default_factory=dict)

    @property
    def released_items(self) -> set:
        return set(self.kept) | set(self.dummies)

    def released_profile(self, owner) -> RatingProfile:
        ratings = dict(self.kept)
        ratings.update({d: r for d, (_, r) in self.dummies.items()})
        return RatingProfile(owner, ratings)

    def extend_features(self, features: ItemFeatureTable) -> ItemFeatureTable:
        """Copy of ``features`` with the dummy items' vectors added."""
        out = ItemFeatureTable(features, names=features.names)
        for d, (vec, _) in self.dummies.items():
            out[d] = vec
        return out


def default_tags(features: ItemFeatureTable) -> dict:
    """Item tags from named binary features (e.g. MovieLens genre flags)."""
    if not features.names:
        return {item: set() for item in features}
    names = list(features.names)
    return {item: {names[j] for j in np.flatnonzero(np.asarray(vec) >= 0.5)} for item, vec in features.items()}


def _generalize_term(term: str, mapping: dict, taxonomy: dict) -> str:
    if term not in mapping:
        return term
    parent = mapping[term]
    if parent is None:
        parent = taxonomy.get(term, term)
    return parent


def rewrite_query(request: Request, profile: RatingProfile, features: ItemFeatureTable, rules,
                  taxonomy: dict | None = None, now: dt.date | None = None, *,
                  policy: ServicePolicy | None = None, seed: int = 0, tags: dict | None = None,
                  rated_on: dict | None = None) -> RewriteResult:
    """Collect the preferences answering ``request`` under the user's rules.

    Steps, in order: decision, category match, MAXAGE expiry, EXCLUDE,
    SUPPRESS, GENERALIZE (tags), DUMMY.  ``rated_on`` maps items to the date
    they were rated; without it nothing expires.
    """
    taxonomy = dict(taxonomy or {})
    check_acyclic(taxonomy)
    tags = tags if tags is not None else default_tags(features)
    vocabulary = set(taxonomy) | set(taxonomy.values())
    for t in tags.values():
        vocabulary |= set(t)

    active = [r.action for r in rules if r.matches(policy)] if policy is not None else \
        [r.action for r in rules if not r.condition]
    for a in active:
        if isinstance(a, ExcludeCategory) and a.category not in vocabulary:
            raise PolicyError(f"unknown category {a.category!r}")
    if request.category is not None and request.category not in vocabulary:
        raise PolicyError(f"unknown category {request.category!r}")

    decision = check_policy(policy, rules) if policy is not None else Release(STRICTEST)
    if isinstance(decision, Block):
        return RewriteResult(decision)

    items = [i for i in profile.items()
             if request.category is None or request.category in tags.get(i, set())]

    expired = set()
    for a in active:
        if isinstance(a, MaxAgeDays) and rated_on is not None:
            today = now or dt.date.today()
            limit = today - dt.timedelta(days=a.days)
            expired |= {i for i in items if i in rated_on and rated_on[i] < limit}
    items = [i for i in items if i not in expired]

    excluded = set()
    for a in active:
        if isinstance(a, ExcludeCategory):
            excluded |= {i for i in items if a.category in tags.get(i, set())}
    items = [i for i in items if i not in excluded]

    suppressed = set()
    for a in active:
        if isinstance(a, SuppressItems):
            suppressed |= {i for i in items if i in a.items}
    items = [i for i in items if i not in suppressed]

    mapping = {}
    for a in active:
        if isinstance(a, Generalize):
            mapping.update(dict(a.mapping))
    generalized = {}
    out_tags = {}
    for i in items:
        new = set()
        for t in tags.get(i, set()):
            g = _generalize_term(t, mapping, taxonomy)
            if g != t:
                generalized[t] = g
            new.add(g)
        out_tags[i] = new

    dummies = {}
    dummy_on = False
    for a in active:
        if isinstance(a, InsertDummy):
            dummy_on = a.enabled
    if dummy_on and suppressed:
        rng = child_rng(seed, "dummy", profile.owner)
        for n, i in enumerate(sorted(suppressed, key=item_sort_key)):
            rating = int(rng.integers(RATING_MIN, RATING_MAX + 1))
            dummies[f"dummy:{profile.owner}:{n}"] = (np.array(features[i]), rating)

    kept = {i: profile.ratings[i] for i in items}
    return RewriteResult(decision, kept, suppressed, excluded, expired, dummies, generalized, out_tags)


# ---- auditing --------------------------------------------------------------

DEFAULT_WINDOW_DAYS = 30
DEFAULT_MAX_FRACTION = 0.5


@dataclass(frozen=True)
class AuditRecord:
    requester: object
    items: frozenset
    when: dt.date
    policy: ServicePolicy | None = None
    trust: float | None = None


@dataclass(frozen=True)
class AuditDecision:
    allowed: bool
    reason: str = ""

    def __bool__(self):
        return self.allowed


ALLOW = AuditDecision(True)


def audit_requests(history, new_request: AuditRecord, profile_size: int,
                   window_days: int = DEFAULT_WINDOW_DAYS,
                   max_fraction: float = DEFAULT_MAX_FRACTION) -> AuditDecision:
    """Deny a repeat request once one requester's cumulative disclosure passes ``max_fraction``.

    The first request a requester makes is always answered; the check only
    guards against piecing a profile together over several requests.
    """
    start = new_request.when - dt.timedelta(days=window_days)
    earlier = [h for h in history if h.requester == new_request.requester and start <= h.when <= new_request.when]
    if not earlier:
        return ALLOW
    union = set(new_request.items)
    for h in earlier:
        union |= set(h.items)
    if profile_size <= 0 or len(union) / profile_size > max_fraction:
        return AuditDecision(False, "cumulative disclosure")
    return ALLOW


class AuditLog:
    """Per-user request history; audits for one user are serialized by a lock."""

    def __init__(self, window_days: int = DEFAULT_WINDOW_DAYS, max_fraction: float = DEFAULT_MAX_FRACTION):
        self.window_days = window_days
        self.max_fraction = max_fraction
        self._history: dict = {}
        self._locks: dict = {}
        self._guard = threading.Lock()

    def _lock(self, user):
        with self._guard:
            return self._locks.setdefault(user, threading.Lock())

    def history(self, user) -> list:
        return list(self._history.get(user, []))

    def audit(self, user, record: AuditRecord, profile_size: int) -> AuditDecision:
        with self._lock(user):
            past = self._history.setdefault(user, [])
            decision = audit_requests(past, record, profile_size, self.window_days, self.max_fraction)
            if decision.allowed:
                past.append(record)
            return decision
