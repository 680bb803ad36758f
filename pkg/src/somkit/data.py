"""Feature dataset ingestion, validation, persistence, and synthetic blobs.

Binary format "SFV1", little-endian:

    magic  4 bytes  b"SFV1"
    N      u32      record count (>= 1)
    m      u32      vector dimension (>= 1)
    C      u32      class count (>= 1)
    then N records of (u32 class id, m x f32 components)

No padding, no trailing bytes. Every class in [0, C) must be referenced,
components must be finite, and every vector norm must be at least 1e-12
(zero vectors are rejected at ingestion so the cosine metric never sees
them). The CSV form has header ``label,f0,...,f{m-1}`` and one record per
row, written with 9 significant digits so float32 values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .metrics import ZERO_NORM_THRESHOLD

MAGIC_FEATURES = b"SFV1"
FORMATS = ("binary", "csv")


@dataclass
class FeatureDataset:
    """Class-indexed collection of fixed-dimension float32 feature vectors."""

    vectors: np.ndarray  # (n, dim) float32
    labels: np.ndarray  # (n,) int32, values in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0 or self.vectors.shape[1] == 0:
            raise ValueError("vectors must be a nonempty matrix with at least one column")
        if self.labels.shape != (self.vectors.shape[0],):
            raise ValueError("need exactly one label per vector")
        if self.num_classes < 1:
            raise ValueError("num_classes must be at least 1")
        if not np.all(np.isfinite(self.vectors)):
            bad = int(np.flatnonzero(~np.isfinite(self.vectors).all(axis=1))[0])
            raise ValueError(f"record {bad}: non-finite component")
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        if np.any(norms < ZERO_NORM_THRESHOLD):
            bad = int(np.flatnonzero(norms < ZERO_NORM_THRESHOLD)[0])
            raise ValueError(f"record {bad}: zero vector")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            bad = int(np.flatnonzero((self.labels < 0) | (self.labels >= self.num_classes))[0])
            raise ValueError(f"record {bad}: class id {int(self.labels[bad])} outside [0, {self.num_classes})")
        present = np.zeros(self.num_classes, dtype=bool)
        present[self.labels] = True
        if not present.all():
            missing = int(np.flatnonzero(~present)[0])
            raise ValueError(f"class {missing} has no records")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def class_indices(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)


class _Reader:
    """Cursor over a byte buffer that raises FormatError on truncation."""

    def __init__(self, buf: bytes, what: str):
        self.buf = buf
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.what}: truncated (needed {n} bytes at offset {self.pos})")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, name: str) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def done(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{self.what}: {len(self.buf) - self.pos} trailing bytes after payload")


def encode_features(ds: FeatureDataset) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC_FEATURES)
    out.write(struct.pack("<III", ds.n, ds.dim, ds.num_classes))
    payload = np.empty((ds.n, ds.dim + 1), dtype=np.uint32)
    payload[:, 0] = ds.labels.astype(np.uint32)
    payload[:, 1:] = ds.vectors.view(np.uint32)
    out.write(payload.astype("<u4").tobytes())
    return out.getvalue()


def decode_features(buf: bytes) -> FeatureDataset:
    r = _Reader(buf, "feature stream")
    if r.take(4) != MAGIC_FEATURES:
        raise FormatError("feature stream: bad magic (expected SFV1)")
    n = r.u32("record count")
    m = r.u32("dimension")
    c = r.u32("class count")
    if n < 1 or m < 1 or c < 1:
        raise FormatError(f"feature stream: header counts must be positive (N={n}, m={m}, C={c})")
    expected = n * (4 + 4 * m)
    if len(buf) - r.pos != expected:
        raise FormatError(
            f"feature stream: payload is {len(buf) - r.pos} bytes, header declares {expected}"
        )
    raw = np.frombuffer(r.take(expected), dtype="<u4").reshape(n, m + 1)
    labels = raw[:, 0].astype(np.int64)
    vectors = raw[:, 1:].copy().view("<f4").astype(np.float32)
    bad = np.flatnonzero(labels >= c)
    if bad.size:
        raise FormatError(f"feature stream: record {int(bad[0])}: class id {int(labels[bad[0]])} out of range")
    finite = np.isfinite(vectors).all(axis=1)
    if not finite.all():
        raise FormatError(f"feature stream: record {int(np.flatnonzero(~finite)[0])}: non-finite component")
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    if np.any(norms < ZERO_NORM_THRESHOLD):
        raise FormatError(f"feature stream: record {int(np.flatnonzero(norms < ZERO_NORM_THRESHOLD)[0])}: zero vector")
    present = np.zeros(c, dtype=bool)
    present[labels] = True
    if not present.all():
        raise FormatError(f"feature stream: class {int(np.flatnonzero(~present)[0])} has no records")
    r.done()
    return FeatureDataset(vectors=vectors, labels=labels.astype(np.int32), num_classes=c)


def _write_csv(ds: FeatureDataset, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["label"] + [f"f{i}" for i in range(ds.dim)])
    for c, vec in zip(ds.labels, ds.vectors):
        w.writerow([int(c)] + [f"{x:.9g}" for x in vec])


def _parse_csv(fh, what: str) -> FeatureDataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{what}: empty file") from None
    m = len(header) - 1
    if m < 1 or header[0] != "label" or header[1:] != [f"f{i}" for i in range(m)]:
        raise FormatError(f"{what}: bad header (expected label,f0,...)")
    labels: list[int] = []
    rows: list[list[float]] = []
    for i, row in enumerate(reader):
        if len(row) != m + 1:
            raise FormatError(f"{what}: record {i}: {len(row) - 1} features, header declares {m}")
        try:
            labels.append(int(row[0]))
            rows.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise FormatError(f"{what}: record {i}: {exc}") from None
    if not rows:
        raise FormatError(f"{what}: no records")
    vectors = np.asarray(rows, dtype=np.float32)
    labels_arr = np.asarray(labels, dtype=np.int64)
    if np.any(labels_arr < 0):
        raise FormatError(f"{what}: record {int(np.flatnonzero(labels_arr < 0)[0])}: negative class id")
    finite = np.isfinite(vectors).all(axis=1)
    if not finite.all():
        raise FormatError(f"{what}: record {int(np.flatnonzero(~finite)[0])}: non-finite component")
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    if np.any(norms < ZERO_NORM_THRESHOLD):
        raise FormatError(f"{what}: record {int(np.flatnonzero(norms < ZERO_NORM_THRESHOLD)[0])}: zero vector")
    c = int(labels_arr.max()) + 1
    present = np.zeros(c, dtype=bool)
    present[labels_arr] = True
    if not present.all():
        raise FormatError(f"{what}: class {int(np.flatnonzero(~present)[0])} has no records")
    return FeatureDataset(vectors=vectors, labels=labels_arr.astype(np.int32), num_classes=c)


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write to a sibling temp file and rename, so failures leave no partial file."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", prefix=os.path.basename(path) + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_features(ds: FeatureDataset, path, format: str = "binary") -> None:
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    if format == "binary":
        payload = encode_features(ds)
    else:
        sink = io.StringIO()
        _write_csv(ds, sink)
        payload = sink.getvalue().encode()
    try:
        atomic_write_bytes(path, payload)
    except OSError as exc:
        raise OSError(f"cannot write features to {path}: {exc}") from exc


def load_features(path, format: str = "binary") -> FeatureDataset:
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    with open(path, "rb") as fh:
        buf = fh.read()
    if format == "binary":
        return decode_features(buf)
    return _parse_csv(io.StringIO(buf.decode("utf-8", errors="strict")), os.fspath(path))


def make_blobs(
    ways: int,
    per_class: int,
    dim: int,
    spread: float,
    separation: float,
    seed: int,
) -> FeatureDataset:
    """Gaussian class blobs with centers on a sphere of radius `separation`.

    Samples are drawn with standard deviation `spread` around their class
    center; spread=0 collapses every sample onto its center. Deterministic
    given the seed.
    """
    if ways < 2:
        raise ValueError("ways must be at least 2")
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if spread < 0:
        raise ValueError("spread must be nonnegative")
    if not separation > 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(ways, dim))
    norms = np.linalg.norm(centers, axis=1)
    while np.any(norms < 1e-9):  # essentially unreachable; keeps the division safe
        redo = norms < 1e-9
        centers[redo] = rng.normal(size=(int(redo.sum()), dim))
        norms = np.linalg.norm(centers, axis=1)
    centers *= separation / norms[:, None]
    samples = np.repeat(centers, per_class, axis=0)
    samples += rng.normal(size=samples.shape) * spread
    labels = np.repeat(np.arange(ways, dtype=np.int32), per_class)
    return FeatureDataset(vectors=samples.astype(np.float32), labels=labels, num_classes=ways)
