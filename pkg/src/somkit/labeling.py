"""Post-labeling: turn an anonymous trained map into a classifier from few labels.

For every labeled sample, each neuron adds its BMU-normalized Gaussian
activity to the accumulator column of the sample's class; columns are then
normalized by per-class sample counts, and each neuron takes the class of its
largest accumulator entry. Prediction returns the label of the nearest
labeled prototype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import InvalidStateError
from .som import SomMap

UNLABELED = -1


@dataclass
class ClassAccumulators:
    """Per-neuron, per-class accumulated normalized activity plus class counts."""

    table: np.ndarray  # (k, num_classes) float64, entries >= 0
    counts: np.ndarray  # (num_classes,) int64


@dataclass
class LabeledSom:
    som: SomMap
    labels: np.ndarray  # (k,) int32, UNLABELED where no class won
    accumulators: ClassAccumulators
    alpha: float

    @property
    def num_classes(self) -> int:
        return self.accumulators.table.shape[1]


def _as_labeled_arrays(vectors, classes, dim: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(vectors, dtype=np.float32)
    y = np.asarray(classes)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("expected a nonempty matrix of row vectors")
    if x.shape[1] != dim:
        raise ValueError(f"vector dimension {x.shape[1]} does not match map dimension {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("labeled vectors must be finite")
    if y.shape != (x.shape[0],):
        raise ValueError("need exactly one class id per vector")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError("class ids must be integers")
    if np.any(y < 0):
        raise ValueError(f"unknown class id {int(y.min())}")
    return x, y.astype(np.int64)


def label_som(som: SomMap, vectors, classes, alpha: float = 1.0, num_classes: int | None = None) -> LabeledSom:
    """Assign a class to each neuron from labeled samples.

    Per sample: activities a_n = exp(-d_n / alpha) with the map's metric; the
    BMU is the most active neuron (lowest index on ties); every neuron
    accumulates a_n / a_s into the sample's class column. Afterwards each
    class column is divided by its sample count and each neuron takes the
    argmax class (lowest id on ties); a neuron whose row stayed all zero is
    left unlabeled.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    x, y = _as_labeled_arrays(vectors, classes, som.dim)
    if num_classes is None:
        num_classes = int(y.max()) + 1
    elif int(y.max()) >= num_classes:
        raise ValueError(f"unknown class id {int(y.max())} (expected ids below {num_classes})")
    kern = backend.active()
    table = np.zeros((som.k, int(num_classes)), dtype=np.float64)
    counts = np.zeros(int(num_classes), dtype=np.int64)
    for v, c in zip(x, y):
        d = kern.distances(som.weights, v, int(som.metric))
        s = int(np.argmin(d))
        # a_n / a_s in ratio form: no underflow, and the BMU adds exactly 1.
        table[:, c] += np.exp((d[s] - d) / alpha)
        counts[c] += 1
    seen = counts > 0
    table[:, seen] /= counts[seen]
    labels = np.where(table.max(axis=1) > 0.0, table.argmax(axis=1), UNLABELED).astype(np.int32)
    return LabeledSom(som=som, labels=labels, accumulators=ClassAccumulators(table, counts), alpha=alpha)


def predict(lsom: LabeledSom, v) -> int:
    """Class of the nearest labeled prototype (unlabeled neurons are skipped)."""
    labeled = lsom.labels != UNLABELED
    if not labeled.any():
        raise InvalidStateError("all neurons are unlabeled")
    d = backend.active().distances(lsom.som.weights, v, int(lsom.som.metric))
    d[~labeled] = np.inf
    return int(lsom.labels[int(np.argmin(d))])


def evaluate(lsom: LabeledSom, vectors, classes) -> float:
    """Fraction of query vectors whose prediction matches the true class."""
    x, y = _as_labeled_arrays(vectors, classes, lsom.som.dim)
    hits = sum(predict(lsom, v) == c for v, c in zip(x, y))
    return hits / x.shape[0]
