"""Accuracy (MAE) and privacy (variation of information) measures."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import clustering


@dataclass
class EvaluationReport:
    mae: float
    vi: float
    n_predictions: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mae < 0 or self.vi < 0:
            raise ValueError("mae and vi are non-negative")


def mae(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truths, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mae of empty lists")
    return float(np.abs(p - t).mean())


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def variation_of_information(labels_a, labels_b) -> float:
    """``H(A) + H(B) - 2 I(A;B)`` in nats, from the joint contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("labelings must be non-empty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    h_a = _entropy(joint.sum(1))
    h_b = _entropy(joint.sum(0))
    h_ab = _entropy(joint.ravel())
    # VI = 2 H(A,B) - H(A) - H(B); clamp rounding noise at the zero end
    return max(0.0, 2.0 * h_ab - h_a - h_b)


def privacy_vi(original_points, concealed_points, k: int, seed: int,
               algorithm=clustering.kmeans) -> float:
    """VI between clusterings (same algorithm, k, seed) of original and concealed points."""
    x = np.asarray(original_points, dtype=float)
    y = np.asarray(concealed_points, dtype=float)
    if len(x) != len(y):
        raise ValueError(f"count mismatch: {len(x)} vs {len(y)}")
    if k < 2:
        raise ValueError("k must be >= 2")
    k = min(k, len(x))
    la = algorithm(x, k, seed).labels
    lb = algorithm(y, k, seed).labels
    return variation_of_information(la, lb)
