"""Item-based collaborative filtering over a (concealed) group profile.

The recommender only sees group points.  The rating it works with is read
from the last coordinate of each point, ``r = 1 + 4 c``.  Similarity is the
adjusted cosine between item columns; a prediction is the similarity-weighted
average of known ratings on the ``K`` most similar items.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import RATING_MAX, RATING_MIN, item_sort_key, unit_to_rating

DEFAULT_K = 10
MIN_CO_HOLDERS = 2
# similarities / predictions are ranked at this resolution so float noise
# cannot reorder mathematically tied values
RANK_DECIMALS = 12


def _rank(value: float) -> float:
    return round(value, RANK_DECIMALS)


def clamp_rating(value: float) -> float:
    return float(min(RATING_MAX, max(RATING_MIN, value)))


@dataclass
class ReferralList:
    entries: list = field(default_factory=list)
    sealed_to: object = None

    def __len__(self):
        return len(self.entries)

    def items(self) -> list:
        return [item for item, _ in self.entries]


class ItemKNN:
    """Fitted rating matrix + adjusted-cosine similarity table for one group profile."""

    def __init__(self, group, min_co_holders: int = MIN_CO_HOLDERS):
        self.min_co_holders = min_co_holders
        self.members = sorted(set(group.owners), key=item_sort_key)
        self.item_ids = sorted(set(group.items), key=item_sort_key)
        self._member_pos = {u: i for i, u in enumerate(self.members)}
        self._item_pos = {it: j for j, it in enumerate(self.item_ids)}

        n_u, n_i = len(self.members), len(self.item_ids)
        total = np.zeros((n_u, n_i))
        count = np.zeros((n_u, n_i))
        if len(group):
            rows = np.array([self._member_pos[o] for o in group.owners], dtype=int)
            cols = np.array([self._item_pos[i] for i in group.items], dtype=int)
            values = unit_to_rating(np.asarray(group.vectors, dtype=float)[:, -1])
            np.add.at(total, (rows, cols), values)
            np.add.at(count, (rows, cols), 1.0)
        self.mask = count > 0
        self.ratings = np.where(self.mask, total / np.maximum(count, 1.0), np.nan)
        held = self.mask.sum(1)
        self.member_means = np.where(held > 0, np.nansum(np.where(self.mask, self.ratings, 0.0), 1) / np.maximum(held, 1), np.nan)
        self.global_mean = float(self.ratings[self.mask].mean()) if self.mask.any() else float("nan")
        self.group_ratings = np.where(self.mask.any(0), np.nansum(np.where(self.mask, self.ratings, 0.0), 0) / np.maximum(self.mask.sum(0), 1), np.nan)
        self._sim = None

    @property
    def similarities(self) -> np.ndarray:
        """``(n_items, n_items)`` adjusted cosine; NaN where undefined."""
        if self._sim is None:
            m = self.mask.astype(float)
            c = np.where(self.mask, self.ratings - self.member_means[:, None], 0.0)
            c2 = c * c
            num = c.T @ c
            den_a = c2.T @ m
            den = np.sqrt(den_a * den_a.T)
            co = m.T @ m
            with np.errstate(invalid="ignore", divide="ignore"):
                sim = num / den
            sim[(co < self.min_co_holders) | (den == 0)] = np.nan
            np.clip(sim, -1.0, 1.0, out=sim)
            self._sim = sim
        return self._sim

    def has_item(self, item) -> bool:
        return item in self._item_pos

    def similarity(self, a, b) -> float | None:
        for it in (a, b):
            if it not in self._item_pos:
                raise KeyError(f"unknown item {it!r}")
        s = self.similarities[self._item_pos[a], self._item_pos[b]]
        return None if np.isnan(s) else float(s)

    def _source(self, member):
        if member is None:
            return self.group_ratings
        if member not in self._member_pos:
            return np.full(len(self.item_ids), np.nan)
        return self.ratings[self._member_pos[member]]

    def neighbours(self, target, k: int, member=None) -> list[tuple[object, float, float]]:
        """``(item, similarity, rating)`` of the k most similar rated items (positive similarity only)."""
        if target not in self._item_pos:
            return []
        t = self._item_pos[target]
        source = self._source(member)
        sims = self.similarities[t]
        ok = ~np.isnan(sims) & ~np.isnan(source) & (sims > 0)
        ok[t] = False
        cand = np.flatnonzero(ok)
        ranked = sorted(cand, key=lambda j: (-_rank(sims[j]), item_sort_key(self.item_ids[j])))[:k]
        return [(self.item_ids[j], float(sims[j]), float(source[j])) for j in ranked]

    def predict(self, target, k: int = DEFAULT_K, member=None) -> float:
        if k < 1:
            raise ValueError("K must be >= 1")
        if not self.mask.any():
            raise ValueError("empty group profile")
        nb = self.neighbours(target, k, member)
        if not nb:
            return clamp_rating(self.global_mean)
        num = math.fsum(s * r for _, s, r in nb)
        den = math.fsum(abs(s) for _, s, _ in nb)
        return clamp_rating(num / den)


def item_similarity(group, a, b) -> float | None:
    """Adjusted cosine of items ``a`` and ``b``; ``None`` when fewer than 2 members hold both."""
    return ItemKNN(group).similarity(a, b)


def predict_rating(group, target_item, K: int = DEFAULT_K, member=None) -> float:
    """Predicted rating of ``target_item`` for the group (or one ``member`` of it)."""
    if len(group) == 0:
        raise ValueError("empty group profile")
    return ItemKNN(group).predict(target_item, K, member)


def recommend(group, genre_filter=None, top_n: int = 10, K: int = DEFAULT_K, sealed_to=None,
              model: ItemKNN | None = None) -> ReferralList:
    """Top-``top_n`` referral list over items not already held by every member.

    ``genre_filter`` is a predicate on item ids (``None`` keeps everything).
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    if len(group) == 0:
        return ReferralList([], sealed_to)
    model = model or ItemKNN(group)
    held_by_all = model.mask.all(0)
    entries = []
    for j, item in enumerate(model.item_ids):
        if held_by_all[j] or (genre_filter is not None and not genre_filter(item)):
            continue
        entries.append((item, model.predict(item, K)))
    entries.sort(key=lambda e: (-_rank(e[1]), item_sort_key(e[0])))
    return ReferralList(entries[:top_n], sealed_to)
