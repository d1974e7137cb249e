"""Global concealment run by the super-peer.

Group points are quantized on a ``2^order`` grid over [0,1]^m, mapped to
Hilbert indices and sorted.  The sorted sequence is cut into runs of ``step``
consecutive points; every index of a run is replaced by a uniform draw from
``[run min, run max]`` and decoded back to the centre of its grid cell.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from ._util import stable_hash
from .core_model import DataError, item_sort_key, snap_unit_rating


@dataclass(frozen=True)
class HilbertParams:
    order: int = 6
    step: int = 10

    def __post_init__(self):
        if not 1 <= self.order <= hilbert.MAX_ORDER:
            raise ValueError(f"order must lie in [1, {hilbert.MAX_ORDER}], got {self.order}")
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")


@dataclass
class GroupProfile:
    """Aggregated profile: one row of ``vectors`` per (member, item)."""

    owners: list
    items: list
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if not (len(self.owners) == len(self.items) == len(self.vectors)):
            raise ValueError("owners, items and vectors must have equal length")

    @property
    def members(self) -> list:
        return sorted(set(self.owners), key=item_sort_key)

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.items)

    @property
    def points(self):
        return list(zip(self.owners, self.items, self.vectors))

    @classmethod
    def from_points(cls, points) -> "GroupProfile":
        points = list(points)
        if not points:
            return cls([], [], np.empty((0, 0)))
        owners, items, vecs = zip(*points)
        return cls(list(owners), list(items), np.vstack(vecs))


@dataclass
class EVSTrace:
    """Audit record of one ``conceal_global`` call (positions refer to the input order)."""

    order: np.ndarray
    run_of: np.ndarray
    original: list
    substituted: list
    run_bounds: list = field(default_factory=list)

    def range_preserved(self) -> bool:
        return all(lo <= self.substituted[i] <= hi
                   for i, (lo, hi) in ((i, self.run_bounds[self.run_of[i]]) for i in range(len(self.original))))


@dataclass
class ConcealedGroupProfile(GroupProfile):
    params: HilbertParams | None = None
    seed: int | None = None
    trace: EVSTrace | None = field(default=None, repr=False)


def _check_unit(x: np.ndarray) -> None:
    if x.size and (not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0):
        raise ValueError("coordinates must lie in [0, 1]")


def quantize(point, order: int) -> tuple[int, ...]:
    x = np.asarray(point, dtype=float).reshape(-1)
    _check_unit(x)
    side = 1 << order
    return tuple(int(c) for c in np.minimum(np.floor(x * side), side - 1))


def dequantize(cell, order: int) -> np.ndarray:
    return (np.asarray(cell, dtype=float) + 0.5) / (1 << order)


def quantize_many(x: np.ndarray, order: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_unit(x)
    side = 1 << order
    return np.minimum(np.floor(x * side), side - 1).astype(np.int64)


UNIFORM_BITS = 512


def run_rng(seed: int, run: int) -> random.Random:
    # independent stream per run: runs may be processed in any order
    return random.Random(stable_hash(("evs-run", seed, run)))


def uniform_index(rng: random.Random, lo: int, hi: int) -> int:
    """Uniform integer in ``[lo, hi]`` by inverse CDF from a fixed-precision uniform.

    The same uniform maps to nested positions for nested curve orders (the
    order-o index is a prefix of the order-(o+1) index), so sweeps over the
    order share their randomness.  Bias is below ``2^-128``.
    """
    width = hi - lo + 1
    bits = max(UNIFORM_BITS, width.bit_length() + 128)
    return lo + ((width * rng.getrandbits(bits)) >> bits)


def conceal_global(group: GroupProfile, params: HilbertParams, seed: int) -> ConcealedGroupProfile:
    n = len(group)
    if n == 0:
        raise DataError("empty group profile")
    order_bits = params.order
    cells = quantize_many(group.vectors, order_bits)
    original = hilbert.encode_many(cells, order_bits)

    tags = [(item_sort_key(o), item_sort_key(i)) for o, i in zip(group.owners, group.items)]
    sorted_pos = np.array(sorted(range(n), key=lambda j: (original[j], tags[j])), dtype=int)

    substituted = [0] * n
    run_of = np.empty(n, dtype=int)
    bounds = []
    for run, start in enumerate(range(0, n, params.step)):
        members = sorted_pos[start:start + params.step]
        lo = original[members[0]]
        hi = original[members[-1]]
        bounds.append((lo, hi))
        rng = run_rng(seed, run)
        for j in members:
            substituted[j] = uniform_index(rng, lo, hi)
            run_of[j] = run

    new_cells = hilbert.decode_many(substituted, order_bits, group.m)
    vectors = dequantize(new_cells, order_bits)
    trace = EVSTrace(sorted_pos, run_of, original, substituted, bounds)
    return ConcealedGroupProfile(list(group.owners), list(group.items), vectors,
                                 params=params, seed=seed, trace=trace)


def build_group_profile(concealed_profiles, key, m: int, snap_ratings: bool = True) -> GroupProfile:
    """Super-peer aggregation of members' CTA output into an m-dim group profile.

    Each concealed point is read back with the session key and clipped to
    [0,1].  With ``snap_ratings`` the rating coordinate is rounded to the
    nearest value of the 1-5 scale; feature coordinates keep their noise.
    """
    from .cta import readout

    owners, items, blocks = [], [], []
    for cp in concealed_profiles:
        if len(cp) == 0:
            continue
        owners.extend([cp.owner] * len(cp))
        items.extend(cp.items)
        x = np.clip(readout(cp, key, m), 0.0, 1.0)
        if snap_ratings:
            x[:, -1] = snap_unit_rating(x[:, -1])
        blocks.append(x)
    vectors = np.vstack(blocks) if blocks else np.empty((0, m))
    return GroupProfile(owners, items, vectors)
