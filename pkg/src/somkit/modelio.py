"""Model persistence. Binary format "SOM1", little-endian:

    magic    4 bytes  b"SOM1"
    rows     u32
    cols     u32
    dim      u32
    metric   u8       0 = euclidean, 1 = cosine
    labeled  u8       0 = plain map, 1 = labeled classifier
    weights  rows*cols x dim x f32, row-major

A labeled model appends, after the weights:

    labels        rows*cols x i32   (-1 = unlabeled neuron)
    num_classes   u32
    accumulators  rows*cols x num_classes x f32, row-major

The labeling kernel width and per-class sample counts are not persisted
(prediction needs neither); loading restores alpha = 1.0 and zero counts.
No padding, no trailing bytes; the reader validates every field and raises
FormatError otherwise.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .data import _Reader, atomic_write_bytes
from .errors import FormatError
from .labeling import UNLABELED, ClassAccumulators, LabeledSom
from .metrics import Metric
from .som import GridShape, SomMap

MAGIC_MODEL = b"SOM1"


def encode_model(model: SomMap | LabeledSom) -> bytes:
    labeled = isinstance(model, LabeledSom)
    som = model.som if labeled else model
    out = io.BytesIO()
    out.write(MAGIC_MODEL)
    out.write(struct.pack("<IIIBB", som.shape.rows, som.shape.cols, som.dim, int(som.metric), int(labeled)))
    out.write(np.ascontiguousarray(som.weights, dtype="<f4").tobytes())
    if labeled:
        out.write(np.ascontiguousarray(model.labels, dtype="<i4").tobytes())
        out.write(struct.pack("<I", model.num_classes))
        out.write(np.ascontiguousarray(model.accumulators.table, dtype="<f4").tobytes())
    return out.getvalue()


def decode_model(buf: bytes) -> SomMap | LabeledSom:
    r = _Reader(buf, "model stream")
    if r.take(4) != MAGIC_MODEL:
        raise FormatError("model stream: bad magic (expected SOM1)")
    rows = r.u32("rows")
    cols = r.u32("cols")
    dim = r.u32("dim")
    metric_tag, labeled_flag = struct.unpack("<BB", r.take(2))
    if rows < 1 or cols < 1 or dim < 1:
        raise FormatError(f"model stream: header counts must be positive (rows={rows}, cols={cols}, dim={dim})")
    if metric_tag not in (0, 1):
        raise FormatError(f"model stream: unknown metric tag {metric_tag}")
    if labeled_flag not in (0, 1):
        raise FormatError(f"model stream: unknown labeled flag {labeled_flag}")
    k = rows * cols
    if len(buf) - r.pos < 4 * k * dim:
        raise FormatError(f"model stream: truncated weights (need {4 * k * dim} bytes)")
    weights = np.frombuffer(r.take(4 * k * dim), dtype="<f4").reshape(k, dim).astype(np.float32)
    if not np.all(np.isfinite(weights)):
        raise FormatError("model stream: non-finite weight")
    som = SomMap(shape=GridShape(rows, cols), dim=dim, weights=weights, metric=Metric(metric_tag))
    if not labeled_flag:
        r.done()
        return som
    if len(buf) - r.pos < 4 * k + 4:
        raise FormatError("model stream: truncated label block")
    labels = np.frombuffer(r.take(4 * k), dtype="<i4").astype(np.int32)
    num_classes = r.u32("num_classes")
    if num_classes < 1:
        raise FormatError("model stream: num_classes must be positive")
    bad = (labels != UNLABELED) & ((labels < 0) | (labels >= num_classes))
    if np.any(bad):
        n = int(np.flatnonzero(bad)[0])
        raise FormatError(f"model stream: neuron {n}: label {int(labels[n])} outside -1 or [0, {num_classes})")
    if len(buf) - r.pos < 4 * k * num_classes:
        raise FormatError(f"model stream: truncated accumulators (need {4 * k * num_classes} bytes)")
    table = np.frombuffer(r.take(4 * k * num_classes), dtype="<f4").reshape(k, num_classes).astype(np.float64)
    if not np.all(np.isfinite(table)) or np.any(table < 0):
        raise FormatError("model stream: accumulators must be finite and nonnegative")
    r.done()
    acc = ClassAccumulators(table=table, counts=np.zeros(num_classes, dtype=np.int64))
    return LabeledSom(som=som, labels=labels, accumulators=acc, alpha=1.0)


def save_model(model: SomMap | LabeledSom, path) -> None:
    try:
        atomic_write_bytes(path, encode_model(model))
    except OSError as exc:
        raise OSError(f"cannot write model to {path}: {exc}") from exc


def load_model(path) -> SomMap | LabeledSom:
    with open(path, "rb") as fh:
        return decode_model(fh.read())
