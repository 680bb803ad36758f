"""Scalar distance and activity functions shared by training, labeling, and prediction.

All functions accumulate in float64 regardless of input dtype. Vectors whose
norm falls below ``ZERO_NORM_THRESHOLD`` are treated as directionless under
the cosine metric and get distance 1.0 (neither near nor far); feature
ingestion rejects such vectors, so this path only triggers for degenerate
prototype weights.
"""

from __future__ import annotations

import math
from enum import IntEnum

import numpy as np

ZERO_NORM_THRESHOLD = 1e-12


class Metric(IntEnum):
    """Prototype-matching distance, serialized as a stable one-byte tag."""

    EUCLIDEAN = 0
    COSINE = 1

    @classmethod
    def from_name(cls, name: str) -> "Metric":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown metric {name!r} (expected euclidean or cosine)") from None


def _checked_pair(v, w) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(v, dtype=np.float64)
    b = np.asarray(w, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("expected 1-D vectors")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise ValueError("vectors must have at least one component")
    return a, b


def euclidean_distance(v, w) -> float:
    """L2 norm of (v - w)."""
    a, b = _checked_pair(v, w)
    d = a - b
    return math.sqrt(float(np.einsum("i,i->", d, d)))


def cosine_distance(v, w) -> float:
    """1 - cos(v, w), clamped to [0, 2] against floating-point drift."""
    a, b = _checked_pair(v, w)
    na = math.sqrt(float(np.einsum("i,i->", a, a)))
    nb = math.sqrt(float(np.einsum("i,i->", b, b)))
    if na < ZERO_NORM_THRESHOLD or nb < ZERO_NORM_THRESHOLD:
        return 1.0
    c = float(np.einsum("i,i->", a, b)) / (na * nb)
    return min(max(1.0 - c, 0.0), 2.0)


def distance(v, w, metric: Metric) -> float:
    if metric == Metric.EUCLIDEAN:
        return euclidean_distance(v, w)
    return cosine_distance(v, w)


def gaussian_activity(d: float, alpha: float) -> float:
    """exp(-d / alpha); strictly decreasing in d, equal to 1 iff d == 0."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not (d >= 0 and math.isfinite(d)):
        raise ValueError(f"distance must be finite and nonnegative, got {d}")
    return math.exp(-d / alpha)
