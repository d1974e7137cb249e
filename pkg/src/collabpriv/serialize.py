"""CSV + JSON-sidecar formats for concealed profiles, group profiles,
referral lists and Hilbert self-test vectors.

Floats are written with 17 significant digits, which round-trips every
IEEE-754 double exactly.  The sidecar of ``x.csv`` is ``x.csv.meta.json``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import hilbert
from .cta import ConcealedProfile, ConcealmentParams
from .evs import ConcealedGroupProfile, HilbertParams
from .recommender import ReferralList


def _fmt(x: float) -> str:
    return "%.17g" % x


def _id(token: str):
    try:
        return int(token)
    except ValueError:
        return token


def _id_json(x):
    return x if isinstance(x, (int, str)) else str(x)


def sidecar(path) -> Path:
    return Path(str(path) + ".meta.json")


def _write_meta(path, meta: dict) -> None:
    sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _read_meta(path) -> dict:
    return json.loads(sidecar(path).read_text())


def write_concealed_profile(cp: ConcealedProfile, path) -> None:
    d = cp.params.d_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "cluster"] + [f"c{j}" for j in range(d)])
        for item, label, vec in zip(cp.items, cp.labels, cp.vectors):
            w.writerow([item, int(label)] + [_fmt(v) for v in vec])
    _write_meta(path, {
        "owner": _id_json(cp.owner),
        "d_dim": d,
        "noise_sigma0": cp.params.noise_sigma0,
        "k": cp.params.k_clusters,
        "n_reference": cp.params.n_reference,
    })


def read_concealed_profile(path) -> ConcealedProfile:
    meta = _read_meta(path)
    items, labels, rows = [], [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["item", "cluster"] or len(header) != meta["d_dim"] + 2:
            raise ValueError(f"{path}: unexpected header")
        for row in r:
            items.append(_id(row[0]))
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
    params = ConcealmentParams(meta["d_dim"], meta["noise_sigma0"], meta["k"], meta.get("n_reference"))
    vectors = np.asarray(rows, dtype=float).reshape(len(rows), meta["d_dim"])
    return ConcealedProfile(meta["owner"], items, np.asarray(labels, dtype=int), vectors, params)


def write_group_profile(group: ConcealedGroupProfile, path) -> None:
    m = group.vectors.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["member", "item"] + [f"c{j}" for j in range(m)])
        for owner, item, vec in zip(group.owners, group.items, group.vectors):
            w.writerow([owner, item] + [_fmt(v) for v in vec])
    params = group.params or HilbertParams()
    _write_meta(path, {"order": params.order, "step": params.step, "seed": group.seed, "m": m})


def read_group_profile(path) -> ConcealedGroupProfile:
    meta = _read_meta(path)
    owners, items, rows = [], [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["member", "item"]:
            raise ValueError(f"{path}: unexpected header")
        for row in r:
            owners.append(_id(row[0]))
            items.append(_id(row[1]))
            rows.append([float(v) for v in row[2:]])
    vectors = np.asarray(rows, dtype=float).reshape(len(rows), meta["m"])
    return ConcealedGroupProfile(owners, items, vectors, params=HilbertParams(meta["order"], meta["step"]),
                                 seed=meta["seed"])


def write_referrals(referrals: ReferralList, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "item", "prediction"])
        for rank, (item, pred) in enumerate(referrals.entries, 1):
            w.writerow([rank, item, _fmt(pred)])
    _write_meta(path, {"sealed_to": None if referrals.sealed_to is None else _id_json(referrals.sealed_to)})


def read_referrals(path) -> ReferralList:
    meta = _read_meta(path)
    entries = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        if next(r) != ["rank", "item", "prediction"]:
            raise ValueError(f"{path}: unexpected header")
        for row in r:
            entries.append((_id(row[1]), float(row[2])))
    return ReferralList(entries, meta.get("sealed_to"))


def write_hilbert_vectors(path, orders=(1, 2, 3), dims=(1, 2, 3)) -> int:
    """Exhaustive ``order,m,index,cell...`` rows for regression checks; returns the row count."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["order", "m", "index", "cell"])
        for order in orders:
            for m in dims:
                for index in range(1 << (m * order)):
                    w.writerow([order, m, index, *hilbert.hilbert_decode(index, order, m)])
                    n += 1
    return n


def check_hilbert_vectors(path) -> list:
    """Rows of a self-test file that disagree with the current encoder/decoder."""
    bad = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            order, m, index = int(row[0]), int(row[1]), int(row[2])
            cell = tuple(int(c) for c in row[3:3 + m])
            if hilbert.hilbert_decode(index, order, m) != cell or hilbert.hilbert_encode(cell, order) != index:
                bad.append(row)
    return bad
