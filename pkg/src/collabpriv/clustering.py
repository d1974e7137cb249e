"""Seeded k-means (k-means++ seeding, Lloyd iterations).

This is the default partitioner behind :func:`collabpriv.cta.cluster_points`;
any callable with the signature of :func:`kmeans` can be plugged in instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_ITER = 100
TOL = 1e-6


@dataclass
class Clustering:
    labels: np.ndarray
    centroids: np.ndarray

    @property
    def k(self) -> int:
        return len(self.centroids)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def auto_k(n: int) -> int:
    return max(1, math.ceil(math.sqrt(n)))


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    closest = ((x - x[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen centre
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        closest = np.minimum(closest, ((x - x[idx]) ** 2).sum(1))
    return x[chosen].copy()


def kmeans(x, k: int, seed: int, max_iter: int = MAX_ITER, tol: float = TOL) -> Clustering:
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("cannot cluster an empty point set")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus(x, k, rng)
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        # argmin returns the first minimum: ties go to the lowest label
        labels = np.argmin(_sq_dists(x, centroids), axis=1)
        new = centroids.copy()
        for j in range(k):
            sel = labels == j
            if sel.any():
                new[j] = x[sel].mean(0)
        shift = np.sqrt(((new - centroids) ** 2).sum(1)).max()
        centroids = new
        if shift <= tol:
            break
    labels = np.argmin(_sq_dists(x, centroids), axis=1)
    used = np.unique(labels)
    remap = np.full(k, -1)
    remap[used] = np.arange(len(used))
    return Clustering(remap[labels], centroids[used])
