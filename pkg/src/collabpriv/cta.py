"""Local concealment: cluster a profile, embed each cluster in a random
``d_dim``-space with isotropic noise, then rotate it randomly.

All participants of a session share a :class:`SessionKey`.  The embedding and
rotation matrices are functions of ``(key, cluster label)`` only, so points of
different users that land in the same (aligned) cluster stay comparable and a
key holder can read the m-dim coordinates back with :func:`readout`.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import clustering
from ._util import child_rng, stable_hash
from .core_model import (
    DataError,
    ItemFeatureTable,
    ProfilePoint,
    RatingProfile,
    points_matrix,
    profile_points,
)

_EMBED, _ROTATE, _REFERENCE = 1, 2, 3
DEFAULT_REFERENCES = 16


@dataclass(frozen=True)
class ConcealmentParams:
    d_dim: int = 500
    noise_sigma0: float = 0.0
    k_clusters: int | str = "auto"
    n_reference: int | None = None

    def __post_init__(self):
        if self.d_dim < 1:
            raise ValueError("d_dim must be positive")
        if self.noise_sigma0 < 0:
            raise ValueError("noise_sigma0 must be non-negative")
        if self.k_clusters != "auto" and (not isinstance(self.k_clusters, int) or self.k_clusters < 1):
            raise ValueError(f"k_clusters must be a positive integer or 'auto', got {self.k_clusters!r}")

    @property
    def references(self) -> int:
        if self.n_reference is not None:
            return self.n_reference
        return self.k_clusters if isinstance(self.k_clusters, int) else DEFAULT_REFERENCES


@dataclass(frozen=True)
class SessionKey:
    seed: int

    @classmethod
    def generate(cls) -> "SessionKey":
        return cls(secrets.randbits(256))

    @classmethod
    def from_seed(cls, seed: int) -> "SessionKey":
        """Derive a 256-bit key deterministically from a small seed (simulations, tests)."""
        return cls(stable_hash(("session-key", seed), bits=256))

    def __post_init__(self):
        if not 0 <= self.seed < 2**256:
            raise ValueError("session key must be a 256-bit non-negative integer")

    def __repr__(self):
        return f"SessionKey(<{self.seed.bit_length()} bits>)"


@dataclass
class ConcealedProfile:
    owner: object
    items: list
    labels: np.ndarray
    vectors: np.ndarray
    params: ConcealmentParams = field(default_factory=ConcealmentParams)

    def __len__(self):
        return len(self.items)

    @property
    def points(self):
        return list(zip(self.items, self.labels.tolist(), self.vectors))


def _haar(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def embedding_frame(key: SessionKey, label: int, d: int, m: int) -> np.ndarray:
    """Orthogonal ``d x d`` frame for ``(key, label)``; ``frame[:, :m]`` is the embedding E."""
    return _frame_cached(key.seed, int(label), d, m)


@lru_cache(maxsize=512)
def _frame_cached(key_seed: int, label: int, d: int, m: int) -> np.ndarray:
    f = _haar(child_rng(key_seed, _EMBED, label, d, m), d)
    f.flags.writeable = False
    return f


@lru_cache(maxsize=512)
def _rotation_cached(key_seed: int, label: int, d: int) -> np.ndarray:
    q = _haar(child_rng(key_seed, _ROTATE, label, d), d)
    q.flags.writeable = False
    return q


def embedding_matrix(key: SessionKey, label: int, d: int, m: int) -> np.ndarray:
    return embedding_frame(key, label, d, m)[:, :m]


def rotation_matrix(key: SessionKey, label: int, d: int) -> np.ndarray:
    return _rotation_cached(key.seed, int(label), d)


def reference_centroids(key: SessionKey, count: int, m: int) -> np.ndarray:
    """Session-wide anchor points in [0,1]^m used to align cluster labels across users."""
    return child_rng(key.seed, _REFERENCE, count, m).random((count, m))


def cluster_points(points, k="auto", seed: int = 0, algorithm=clustering.kmeans) -> clustering.Clustering:
    """Partition a profile's points; ``k='auto'`` means ``ceil(sqrt(n))``."""
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], ProfilePoint):
        x = points_matrix(points)
    else:
        x = np.asarray(points, dtype=float)
    n = len(x)
    if n == 0:
        raise DataError("cannot cluster an empty point list")
    k = clustering.auto_k(n) if k == "auto" else k
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    return algorithm(x, k, seed)


def embed_cluster(cluster_points, params: ConcealmentParams, key: SessionKey, label: int,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """``y = E x + eta`` with E from ``(key, label)`` and ``eta ~ N(0, (sigma0^2/d) I_d)``.

    The noise is drawn in E's own frame: the first ``m`` standard normals of a
    point land in span(E), the remaining ``d - m`` in its complement.  The
    distribution is the same isotropic Gaussian, but the in-span component no
    longer depends on ``d``, which keeps sweeps over ``d_dim`` comparable.
    """
    x = np.atleast_2d(np.asarray(cluster_points, dtype=float))
    n, m = x.shape
    d = params.d_dim
    if d < m:
        raise ValueError(f"d_dim={d} is smaller than the point dimension m={m}")
    frame = embedding_frame(key, label, d, m)
    y = x @ frame[:, :m].T
    if params.noise_sigma0 > 0:
        rng = rng if rng is not None else np.random.default_rng()
        z_in = rng.standard_normal((n, m))
        z_out = rng.standard_normal((n, d - m))
        y += (params.noise_sigma0 / np.sqrt(d)) * (z_in @ frame[:, :m].T + z_out @ frame[:, m:].T)
    return y


def rotate_cluster(points, key: SessionKey, label: int) -> np.ndarray:
    try:
        y = np.asarray(points, dtype=float)
    except ValueError as exc:
        raise ValueError("ragged point dimensions") from exc
    y = np.atleast_2d(y)
    if y.ndim != 2 or y.size == 0:
        raise ValueError("rotate_cluster needs a non-empty list of equal-length vectors")
    return y @ rotation_matrix(key, label, y.shape[1]).T


def align_labels(centroids: np.ndarray, key: SessionKey, count: int) -> np.ndarray:
    """Map local cluster centroids to the nearest session reference centroid."""
    refs = reference_centroids(key, count, centroids.shape[1])
    d2 = ((centroids[:, None, :] - refs[None, :, :]) ** 2).sum(-1)
    return np.argmin(d2, axis=1)


def conceal_local(profile: RatingProfile, features: ItemFeatureTable, params: ConcealmentParams,
                  key: SessionKey, seed: int = 0) -> ConcealedProfile:
    if len(profile) == 0:
        raise DataError("empty profile")
    pts = profile_points(profile, features)
    x = points_matrix(pts)
    k = params.k_clusters
    if k != "auto":
        k = min(k, len(pts))
    part = cluster_points(x, k, seed)
    aligned = align_labels(part.centroids, key, params.references)
    labels = aligned[part.labels]
    out = np.empty((len(pts), params.d_dim))
    owner_tag = stable_hash(profile.owner)
    for local in range(part.k):
        idx = part.members(local)
        label = int(aligned[local])
        rng = child_rng(seed, owner_tag, local)
        emb = embed_cluster(x[idx], params, key, label, rng)
        out[idx] = rotate_cluster(emb, key, label)
    return ConcealedProfile(profile.owner, [p.item for p in pts], labels, out, params)


def readout(concealed: ConcealedProfile, key: SessionKey, m: int) -> np.ndarray:
    """Key holder's least-squares inverse ``E^T Q^T y`` back to m-dim coordinates."""
    d = concealed.params.d_dim
    x = np.empty((len(concealed), m))
    for label in np.unique(concealed.labels):
        sel = concealed.labels == label
        e = embedding_matrix(key, int(label), d, m)
        q = rotation_matrix(key, int(label), d)
        x[sel] = concealed.vectors[sel] @ q @ e
    return x
