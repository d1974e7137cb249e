"""Ratings, item feature tables, datasets and the point layout consumed by CTA.

A profile point for item ``i`` rated ``r`` is ``[features(i) ; (r - 1) / 4]``,
so every coordinate of every point lives in ``[0, 1]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping

import numpy as np

RATING_MIN = 1
RATING_MAX = 5

ItemId = Hashable
UserId = Hashable


class DataError(ValueError):
    """Raised for malformed or inconsistent rating/feature input."""


def item_sort_key(item):
    """Total order over mixed int/str ids: ints numerically first, then strings."""
    if isinstance(item, (int, np.integer)):
        return (0, int(item), "")
    return (1, 0, str(item))


def rating_to_unit(value: float) -> float:
    return (value - RATING_MIN) / (RATING_MAX - RATING_MIN)


def unit_to_rating(coord: float) -> float:
    return RATING_MIN + (RATING_MAX - RATING_MIN) * coord


def _check_rating(value) -> int:
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise DataError(f"rating must be an integer, got {value!r}")
    if not RATING_MIN <= value <= RATING_MAX:
        raise DataError(f"rating out of scale: {value}")
    return int(value)


@dataclass(frozen=True)
class Rating:
    user: UserId
    item: ItemId
    value: int

    def __post_init__(self):
        object.__setattr__(self, "value", _check_rating(self.value))


class ItemFeatureTable(dict):
    """``item -> feature vector`` with a common length and coordinates in [0, 1]."""

    def __init__(self, data: Mapping | Iterable = (), *, names: list[str] | None = None):
        super().__init__()
        self.names = list(names) if names is not None else None
        self._length = None
        items = data.items() if isinstance(data, Mapping) else data
        for item, vec in items:
            self[item] = vec

    def __setitem__(self, item, vec):
        arr = np.asarray(vec, dtype=float).reshape(-1)
        if arr.size < 1:
            raise DataError("feature vectors need at least one coordinate")
        if self._length is None:
            self._length = arr.size
        elif arr.size != self._length:
            raise DataError(f"feature vector for {item!r} has length {arr.size}, expected {self._length}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise DataError(f"feature vector for {item!r} must be finite and inside [0, 1]")
        arr.flags.writeable = False
        super().__setitem__(item, arr)

    @property
    def length(self) -> int:
        if self._length is None:
            raise DataError("empty feature table")
        return self._length


@dataclass
class RatingProfile:
    owner: UserId
    ratings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ratings = {item: _check_rating(v) for item, v in dict(self.ratings).items()}

    def __len__(self):
        return len(self.ratings)

    def items(self):
        return sorted(self.ratings, key=item_sort_key)


@dataclass(frozen=True)
class ProfilePoint:
    item: ItemId
    coords: np.ndarray


@dataclass
class Dataset:
    ratings: list
    features: ItemFeatureTable

    def __post_init__(self):
        seen = set()
        for r in self.ratings:
            if r.item not in self.features:
                raise DataError(f"rated item {r.item!r} absent from item features")
            key = (r.user, r.item)
            if key in seen:
                raise DataError(f"duplicate rating for user {r.user!r}, item {r.item!r}")
            seen.add(key)

    @property
    def m(self) -> int:
        return self.features.length + 1

    def __len__(self):
        return len(self.ratings)

    def users(self) -> list:
        return sorted({r.user for r in self.ratings}, key=item_sort_key)

    def items(self) -> list:
        return sorted({r.item for r in self.ratings}, key=item_sort_key)

    def profiles(self) -> dict:
        """Group ratings into one ``RatingProfile`` per user (users in sorted order)."""
        by_user: dict = {}
        for r in self.ratings:
            by_user.setdefault(r.user, {})[r.item] = r.value
        return {u: RatingProfile(u, by_user[u]) for u in sorted(by_user, key=item_sort_key)}

    def with_ratings(self, ratings) -> "Dataset":
        return Dataset(list(ratings), self.features)

    def subset(self, n_users: int, n_items: int) -> "Dataset":
        """Keep the ``n_items`` most-rated items, then the ``n_users`` most active users on them.

        Ties are broken by id so the subset is deterministic.
        """
        item_counts: dict = {}
        for r in self.ratings:
            item_counts[r.item] = item_counts.get(r.item, 0) + 1
        top_items = sorted(item_counts, key=lambda i: (-item_counts[i], item_sort_key(i)))[:n_items]
        keep_items = set(top_items)
        user_counts: dict = {}
        for r in self.ratings:
            if r.item in keep_items:
                user_counts[r.user] = user_counts.get(r.user, 0) + 1
        top_users = set(sorted(user_counts, key=lambda u: (-user_counts[u], item_sort_key(u)))[:n_users])
        kept = [r for r in self.ratings if r.item in keep_items and r.user in top_users]
        return Dataset(kept, self.features)


def _parse_id(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return token


def load_movielens(ratings_path, items_path) -> Dataset:
    """Load MovieLens 100K ``u.data`` / ``u.item``; genre flags become the item features."""
    ratings_path, items_path = Path(ratings_path), Path(items_path)
    for p in (ratings_path, items_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing file: {p}")

    features = ItemFeatureTable()
    with open(items_path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("|")
            if len(parts) < 6:
                raise DataError(f"{items_path}:{lineno}: malformed line (wrong field count)")
            # u.item: id|title|release|video release|url|19 genre flags
            flags = parts[5:]
            try:
                vec = [float(int(f)) for f in flags]
            except ValueError as exc:
                raise DataError(f"{items_path}:{lineno}: non-binary genre flag") from exc
            features[_parse_id(parts[0])] = vec

    ratings = []
    with open(ratings_path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"{ratings_path}:{lineno}: malformed line (wrong field count)")
            user, item, value = _parse_id(parts[0]), _parse_id(parts[1]), parts[2].strip()
            try:
                value = int(value)
            except ValueError as exc:
                raise DataError(f"{ratings_path}:{lineno}: non-integer rating {value!r}") from exc
            if not RATING_MIN <= value <= RATING_MAX:
                raise DataError(f"{ratings_path}:{lineno}: rating out of scale: {value}")
            if item not in features:
                raise DataError(f"{ratings_path}:{lineno}: rated item {item!r} absent from item file")
            ratings.append(Rating(user, item, value))
    if not ratings:
        raise DataError("no ratings")
    return Dataset(ratings, features)


def load_csv(ratings_path, features_path, normalize: bool = True) -> Dataset:
    """Generic loader: ``user,item,rating`` CSV plus ``item,f1,...,fk`` CSV (both with headers).

    Feature columns are min-max scaled to [0, 1] when ``normalize`` is set; a
    constant column maps to 0.
    """
    ratings_path, features_path = Path(ratings_path), Path(features_path)
    for p in (ratings_path, features_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing file: {p}")

    with open(features_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataError(f"{features_path}: expected header item,f1,...,fk")
        ids, rows = [], []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{features_path}:{lineno}: malformed line (wrong field count)")
            ids.append(_parse_id(row[0]))
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError as exc:
                raise DataError(f"{features_path}:{lineno}: non-numeric feature") from exc
    mat = np.asarray(rows, dtype=float).reshape(len(rows), len(header) - 1)
    if normalize and len(mat):
        lo, hi = mat.min(axis=0), mat.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        mat = (mat - lo) / span
    features = ItemFeatureTable(zip(ids, mat), names=header[1:])

    ratings = []
    with open(ratings_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["user", "item", "rating"]:
            raise DataError(f"{ratings_path}: expected header user,item,rating")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{ratings_path}:{lineno}: malformed line (wrong field count)")
            try:
                value = float(row[2])
            except ValueError as exc:
                raise DataError(f"{ratings_path}:{lineno}: non-numeric rating") from exc
            if not value.is_integer() or not RATING_MIN <= value <= RATING_MAX:
                raise DataError(f"{ratings_path}:{lineno}: rating out of scale: {row[2]}")
            item = _parse_id(row[1])
            if item not in features:
                raise DataError(f"{ratings_path}:{lineno}: rated item {item!r} absent from feature file")
            ratings.append(Rating(_parse_id(row[0]), item, int(value)))
    if not ratings:
        raise DataError("no ratings")
    return Dataset(ratings, features)


def split_holdout(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Global random holdout of ``round(test_fraction * n)`` ratings."""
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1], got {test_fraction}")
    n = len(dataset.ratings)
    n_test = int(round(test_fraction * n))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx = np.sort(perm[:n_test])
    mask = np.zeros(n, dtype=bool)
    mask[test_idx] = True
    train = [r for r, t in zip(dataset.ratings, mask) if not t]
    test = [r for r, t in zip(dataset.ratings, mask) if t]
    return dataset.with_ratings(train), dataset.with_ratings(test)


def profile_points(profile: RatingProfile, features: ItemFeatureTable) -> list[ProfilePoint]:
    points = []
    for item in profile.items():
        if item not in features:
            raise DataError(f"missing feature vector for rated item {item!r}")
        coords = np.append(features[item], rating_to_unit(profile.ratings[item]))
        points.append(ProfilePoint(item, coords))
    return points


def points_matrix(points: list[ProfilePoint]) -> np.ndarray:
    if not points:
        return np.empty((0, 0))
    return np.vstack([p.coords for p in points])


def rating_from_coord(coord: float) -> int:
    """Inverse of the rating rescale, rounded to the nearest scale value."""
    return int(min(RATING_MAX, max(RATING_MIN, math.floor(unit_to_rating(coord) + 0.5))))


def snap_unit_rating(coord):
    """Round rating coordinates in [0,1] to the nearest scale step (0, .25, ..., 1)."""
    steps = RATING_MAX - RATING_MIN
    return np.clip(np.floor(np.asarray(coord, dtype=float) * steps + 0.5), 0, steps) / steps
