"""Hilbert curve index <-> grid cell, any dimension (Skilling's transpose algorithm).

Indices are Python ints, so ``m * order`` is not limited to 64 bits.  The
scalar functions are the reference; ``encode_many``/``decode_many`` are the
numpy batch versions used on whole group profiles.
"""
from __future__ import annotations

import numpy as np

MAX_ORDER = 20


def _check_order(order: int) -> None:
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must lie in [1, {MAX_ORDER}], got {order}")


def hilbert_encode(cell, order: int) -> int:
    _check_order(order)
    x = [int(c) for c in cell]
    n = len(x)
    if n < 1:
        raise ValueError("cell needs at least one coordinate")
    side = 1 << order
    if any(c < 0 or c >= side for c in x):
        raise ValueError(f"cell {tuple(cell)} outside the 2^{order} grid")

    q = 1 << (order - 1)
    while q > 1:
        p = q - 1
        for i in range(n):
            if x[i] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[i]) & p
                x[0] ^= t
                x[i] ^= t
        q >>= 1
    for i in range(1, n):
        x[i] ^= x[i - 1]
    t = 0
    q = 1 << (order - 1)
    while q > 1:
        if x[n - 1] & q:
            t ^= q - 1
        q >>= 1
    for i in range(n):
        x[i] ^= t

    index = 0
    for bit in range(order - 1, -1, -1):
        for i in range(n):
            index = (index << 1) | ((x[i] >> bit) & 1)
    return index


def hilbert_decode(index: int, order: int, m: int) -> tuple[int, ...]:
    _check_order(order)
    if m < 1:
        raise ValueError("m must be positive")
    index = int(index)
    if not 0 <= index < (1 << (m * order)):
        raise ValueError(f"index {index} outside [0, 2^{m * order})")

    x = [0] * m
    pos = m * order - 1
    for bit in range(order - 1, -1, -1):
        for i in range(m):
            x[i] |= ((index >> pos) & 1) << bit
            pos -= 1

    t = x[m - 1] >> 1
    for i in range(m - 1, 0, -1):
        x[i] ^= x[i - 1]
    x[0] ^= t
    q = 2
    while q != (1 << order):
        p = q - 1
        for i in range(m - 1, -1, -1):
            if x[i] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[i]) & p
                x[0] ^= t
                x[i] ^= t
        q <<= 1
    return tuple(x)


def _axes_to_transpose(x: np.ndarray, order: int) -> np.ndarray:
    x = x.copy()
    n = x.shape[1]
    q = 1 << (order - 1)
    while q > 1:
        p = np.uint64(q - 1)
        qq = np.uint64(q)
        for i in range(n):
            hit = (x[:, i] & qq) != 0
            t = (x[:, 0] ^ x[:, i]) & p
            x[:, 0] = np.where(hit, x[:, 0] ^ p, x[:, 0] ^ t)
            if i:
                x[:, i] = np.where(hit, x[:, i], x[:, i] ^ t)
        q >>= 1
    for i in range(1, n):
        x[:, i] ^= x[:, i - 1]
    t = np.zeros(len(x), dtype=np.uint64)
    q = 1 << (order - 1)
    while q > 1:
        t = np.where((x[:, n - 1] & np.uint64(q)) != 0, t ^ np.uint64(q - 1), t)
        q >>= 1
    x ^= t[:, None]
    return x


def _transpose_to_axes(x: np.ndarray, order: int) -> np.ndarray:
    x = x.copy()
    n = x.shape[1]
    t = x[:, n - 1] >> np.uint64(1)
    for i in range(n - 1, 0, -1):
        x[:, i] ^= x[:, i - 1]
    x[:, 0] ^= t
    q = 2
    while q != (1 << order):
        p = np.uint64(q - 1)
        qq = np.uint64(q)
        for i in range(n - 1, -1, -1):
            hit = (x[:, i] & qq) != 0
            t = (x[:, 0] ^ x[:, i]) & p
            x[:, 0] = np.where(hit, x[:, 0] ^ p, x[:, 0] ^ t)
            if i:
                x[:, i] = np.where(hit, x[:, i], x[:, i] ^ t)
        q <<= 1
    return x


def encode_many(cells, order: int) -> list[int]:
    """Batch :func:`hilbert_encode` over the rows of an ``(n, m)`` integer array."""
    _check_order(order)
    cells = np.asarray(cells)
    if cells.ndim != 2:
        raise ValueError("cells must be a 2-d array")
    if cells.size and (cells.min() < 0 or cells.max() >= (1 << order)):
        raise ValueError(f"cell coordinates outside the 2^{order} grid")
    n_pts, m = cells.shape
    if n_pts == 0:
        return []
    tx = _axes_to_transpose(cells.astype(np.uint64), order)
    shifts = np.arange(order - 1, -1, -1, dtype=np.uint64)
    bits = ((tx[:, None, :] >> shifts[None, :, None]) & np.uint64(1)).astype(np.uint8)
    bits = bits.reshape(n_pts, order * m)
    pad = (-bits.shape[1]) % 8
    if pad:
        bits = np.concatenate([np.zeros((n_pts, pad), np.uint8), bits], axis=1)
    packed = np.packbits(bits, axis=1)
    return [int.from_bytes(row.tobytes(), "big") for row in packed]


def decode_many(indices, order: int, m: int) -> np.ndarray:
    """Batch :func:`hilbert_decode`; returns an ``(n, m)`` int64 array."""
    _check_order(order)
    total = m * order
    nbytes = (total + 7) // 8
    indices = [int(i) for i in indices]
    if not indices:
        return np.empty((0, m), dtype=np.int64)
    limit = 1 << total
    if any(i < 0 or i >= limit for i in indices):
        raise ValueError(f"index outside [0, 2^{total})")
    raw = np.frombuffer(b"".join(i.to_bytes(nbytes, "big") for i in indices), dtype=np.uint8)
    bits = np.unpackbits(raw.reshape(len(indices), nbytes), axis=1)[:, nbytes * 8 - total:]
    bits = bits.reshape(len(indices), order, m).astype(np.uint64)
    shifts = np.arange(order - 1, -1, -1, dtype=np.uint64)
    tx = (bits << shifts[None, :, None]).sum(axis=1, dtype=np.uint64)
    return _transpose_to_axes(tx, order).astype(np.int64)
