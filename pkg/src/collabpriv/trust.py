"""Consistency trust between a target user's released ratings and a participant.

Trust is one minus the normalized Shannon entropy of the histogram of rating
differences over co-rated items: perfectly consistent raters (every
difference equal) get 1, differences spread over all nine values get 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core_model import RATING_MAX, RATING_MIN

DEFAULT_MIN_OVERLAP = 3
DEFAULT_TAU = 0.5
N_DIFFERENCES = 2 * (RATING_MAX - RATING_MIN) + 1


@dataclass(frozen=True)
class TrustScore:
    value: float
    co_rated: int
    insufficient_overlap: bool = False

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"trust value {self.value} outside [0, 1]")
        if self.co_rated < 0:
            raise ValueError("co_rated must be non-negative")


def difference_entropy(differences) -> float:
    """Shannon entropy (nats) of the empirical distribution of ``differences``."""
    counts: dict = {}
    for d in differences:
        counts[d] = counts.get(d, 0) + 1
    n = sum(counts.values())
    return -math.fsum(c / n * math.log(c / n) for c in counts.values())


def trust_score(released, participant, min_overlap: int = DEFAULT_MIN_OVERLAP) -> TrustScore:
    common = set(released.ratings) & set(participant.ratings)
    if len(common) < max(min_overlap, 1):
        return TrustScore(0.0, len(common), insufficient_overlap=True)
    diffs = [released.ratings[i] - participant.ratings[i] for i in common]
    h = difference_entropy(diffs)
    value = 1.0 - h / math.log(N_DIFFERENCES)
    return TrustScore(min(1.0, max(0.0, value)), len(common))


def filter_by_trust(profiles, scores, tau: float = DEFAULT_TAU) -> list:
    """Keep ``(pseudonym, profile)`` pairs whose trust value is at least ``tau``."""
    kept = []
    for pseudonym, profile in profiles:
        if pseudonym not in scores:
            raise KeyError(f"missing trust score for {pseudonym!r}")
        if scores[pseudonym].value >= tau:
            kept.append((pseudonym, profile))
    return kept
