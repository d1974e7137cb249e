"""End-to-end experiment pipelines: plaintext, CTA only, and CTA followed by EVS.

All users of the (sub)dataset form one peer-group sharing one session key.
Ratings are held out globally; a held-out rating ``(u, i, r)`` is predicted
for member ``u`` from the group profile the recommender receives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import clustering
from .core_model import Dataset, points_matrix, profile_points, split_holdout
from .cta import ConcealmentParams, SessionKey, conceal_local
from .evs import GroupProfile, HilbertParams, build_group_profile, conceal_global
from .metrics import mae, privacy_vi
from .recommender import DEFAULT_K, ItemKNN

DEFAULT_USERS = 200
DEFAULT_ITEMS = 400


@dataclass
class Split:
    train: Dataset
    test: Dataset


def plain_group(train: Dataset) -> GroupProfile:
    owners, items, rows = [], [], []
    for owner, prof in train.profiles().items():
        for p in profile_points(prof, train.features):
            owners.append(owner)
            items.append(p.item)
            rows.append(p.coords)
    return GroupProfile(owners, items, np.vstack(rows))


def evaluate_mae(group, test: Dataset, K: int = DEFAULT_K) -> float:
    model = ItemKNN(group)
    preds = [model.predict(r.item, K, member=r.user) for r in test.ratings]
    return mae(preds, [r.value for r in test.ratings])


def conceal_all(train: Dataset, params: ConcealmentParams, seed: int, key: SessionKey | None = None):
    key = key or SessionKey.from_seed(seed)
    concealed = [conceal_local(p, train.features, params, key, seed) for p in train.profiles().values()]
    return key, concealed


def _user_k(n: int) -> int:
    return max(2, clustering.auto_k(n))


def cta_privacy(train: Dataset, concealed, seed: int) -> float:
    """Mean over users of VI(clusters of raw points, clusters of CTA output)."""
    profiles = train.profiles()
    values = []
    for cp in concealed:
        raw = points_matrix(profile_points(profiles[cp.owner], train.features))
        if len(raw) < 2:
            continue
        values.append(privacy_vi(raw, cp.vectors, _user_k(len(raw)), seed))
    return float(np.mean(values)) if values else 0.0


def group_privacy(before: GroupProfile, after: GroupProfile, seed: int) -> float:
    """Mean over members of VI between clusterings of their points before/after EVS."""
    after_rows = {(str(o), str(i)): v for o, i, v in zip(after.owners, after.items, after.vectors)}
    after_vecs = np.vstack([after_rows[(str(o), str(i))] for o, i in zip(before.owners, before.items)])
    owners = np.array([str(o) for o in before.owners])
    values = []
    for o in np.unique(owners):
        sel = owners == o
        if sel.sum() < 2:
            continue
        values.append(privacy_vi(before.vectors[sel], after_vecs[sel], _user_k(int(sel.sum())), seed))
    return float(np.mean(values)) if values else 0.0


def cta_cell(split: Split, params: ConcealmentParams, seed: int, K: int = DEFAULT_K,
             with_privacy: bool = True) -> dict:
    key, concealed = conceal_all(split.train, params, seed)
    group = build_group_profile(concealed, key, split.train.m)
    row = {"mae_concealed": evaluate_mae(group, split.test, K)}
    if with_privacy:
        # measured where the recommender works: the key holder's m-dim readout
        row["vi"] = group_privacy(plain_group(split.train), group, seed)
    return row


def evs_cell(split: Split, params: ConcealmentParams, hparams: HilbertParams, seed: int,
             K: int = DEFAULT_K, with_privacy: bool = True, group: GroupProfile | None = None) -> dict:
    if group is None:
        key, concealed = conceal_all(split.train, params, seed)
        group = build_group_profile(concealed, key, split.train.m)
    out = conceal_global(group, hparams, seed)
    row = {"mae": evaluate_mae(out, split.test, K), "range_ok": out.trace.range_preserved()}
    if with_privacy:
        row["vi"] = group_privacy(group, out, seed)
    return row


@dataclass
class SweepGrid:
    d_dims: tuple = (100, 200, 300, 400, 500, 600)
    noise_sigma0: float = 0.5
    orders: tuple = (3, 6, 9)
    steps: tuple = (10, 20, 30, 40, 50, 60, 70, 80)
    seeds: tuple = (0, 1, 2, 3, 4)
    test_fraction: float = 0.2
    n_users: int = DEFAULT_USERS
    n_items: int = DEFAULT_ITEMS
    evs_d_dim: int = 500
    K: int = DEFAULT_K

    def __post_init__(self):
        for name in ("d_dims", "orders", "steps", "seeds"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must not be empty")
            if name != "seeds" and min(values) <= 0:
                raise ValueError(f"{name} must be positive")
            setattr(self, name, values)
        if self.noise_sigma0 < 0:
            raise ValueError("noise_sigma0 must be non-negative")


def desk_subset(dataset: Dataset, grid: SweepGrid) -> Dataset:
    return dataset.subset(grid.n_users, grid.n_items)


def sweep_cta(dataset: Dataset, grid: SweepGrid, with_privacy: bool = True, progress=None) -> list[dict]:
    """Rows ``d_dim, seed, mae_plain, mae_concealed, vi`` sorted by ``(d_dim, seed)``."""
    data = desk_subset(dataset, grid)
    rows = []
    for seed in grid.seeds:
        train, test = split_holdout(data, grid.test_fraction, seed)
        split = Split(train, test)
        plain = evaluate_mae(plain_group(train), test, grid.K)
        for d in grid.d_dims:
            cell = cta_cell(split, ConcealmentParams(d, grid.noise_sigma0), seed, grid.K, with_privacy)
            rows.append({"d_dim": d, "seed": seed, "mae_plain": plain, **cell})
            if progress:
                progress(rows[-1])
    rows.sort(key=lambda r: (r["d_dim"], grid.seeds.index(r["seed"])))
    return rows


def sweep_evs(dataset: Dataset, grid: SweepGrid, with_privacy: bool = True, progress=None) -> list[dict]:
    """Rows ``order, step, seed, mae, vi`` (+ ``range_ok``) sorted by ``(order, step, seed)``."""
    data = desk_subset(dataset, grid)
    rows = []
    for seed in grid.seeds:
        train, test = split_holdout(data, grid.test_fraction, seed)
        split = Split(train, test)
        key, concealed = conceal_all(train, ConcealmentParams(grid.evs_d_dim, grid.noise_sigma0), seed)
        group = build_group_profile(concealed, key, train.m)
        for order in grid.orders:
            for step in grid.steps:
                cell = evs_cell(split, None, HilbertParams(order, step), seed, grid.K, with_privacy, group=group)
                rows.append({"order": order, "step": step, "seed": seed, **cell})
                if progress:
                    progress(rows[-1])
    rows.sort(key=lambda r: (r["order"], r["step"], grid.seeds.index(r["seed"])))
    return rows
