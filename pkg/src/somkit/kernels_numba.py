"""Numba-compiled hot kernels: distance scans and neighborhood-weighted updates.

The serial and parallel entry points are compiled from the same loop body, and
every per-neuron computation is self-contained (fixed-order f64 accumulator
lanes, one scratch row per thread), so training results are bitwise-identical
for any worker count. Winner selection is a sequential lowest-index scan over
the filled distance buffer, independent of how the fill was partitioned.

Weights are stored and updated in float32; distance reductions run in float64.
"""

from __future__ import annotations

import os

# Must be set before numba reads its config. Keep at least four pool threads
# so the worker-count contract can be exercised on small machines, and pin
# the always-available threading layer (the TBB probe is noisy and
# version-picky). Callers may override both via the environment.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(4, os.cpu_count() or 1)))
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numba
import numpy as np
from numba import get_thread_id, njit, prange

NAME = "numba"

EUCLIDEAN = 0
COSINE = 1

ZERO_NORM = 1e-12


def max_workers() -> int:
    """Size of the compiled-kernel thread pool (upper bound for workers)."""
    return int(numba.config.NUMBA_NUM_THREADS)


@njit(cache=True)
def _sqnorm(x):
    # 8 independent accumulator lanes, combined in a fixed order.
    m = x.shape[0]
    a0 = 0.0; a1 = 0.0; a2 = 0.0; a3 = 0.0
    a4 = 0.0; a5 = 0.0; a6 = 0.0; a7 = 0.0
    j = 0
    while j + 8 <= m:
        a0 += x[j] * x[j]
        a1 += x[j + 1] * x[j + 1]
        a2 += x[j + 2] * x[j + 2]
        a3 += x[j + 3] * x[j + 3]
        a4 += x[j + 4] * x[j + 4]
        a5 += x[j + 5] * x[j + 5]
        a6 += x[j + 6] * x[j + 6]
        a7 += x[j + 7] * x[j + 7]
        j += 8
    while j < m:
        a0 += x[j] * x[j]
        j += 1
    return ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))


@njit(cache=True)
def _row_euclidean(w, v64, buf):
    m = w.shape[0]
    for j in range(m):
        buf[j] = v64[j] - np.float64(w[j])
    return np.sqrt(_sqnorm(buf))


@njit(cache=True)
def _row_cosine(w, v64, vnorm, buf):
    m = w.shape[0]
    for j in range(m):
        buf[j] = np.float64(w[j])
    # interleaved 4-lane dot and squared-norm reductions
    d0 = 0.0; d1 = 0.0; d2 = 0.0; d3 = 0.0
    s0 = 0.0; s1 = 0.0; s2 = 0.0; s3 = 0.0
    j = 0
    while j + 4 <= m:
        d0 += v64[j] * buf[j]
        d1 += v64[j + 1] * buf[j + 1]
        d2 += v64[j + 2] * buf[j + 2]
        d3 += v64[j + 3] * buf[j + 3]
        s0 += buf[j] * buf[j]
        s1 += buf[j + 1] * buf[j + 1]
        s2 += buf[j + 2] * buf[j + 2]
        s3 += buf[j + 3] * buf[j + 3]
        j += 4
    while j < m:
        d0 += v64[j] * buf[j]
        s0 += buf[j] * buf[j]
        j += 1
    dot = (d0 + d1) + (d2 + d3)
    wnorm = np.sqrt((s0 + s1) + (s2 + s3))
    if wnorm < ZERO_NORM or vnorm < ZERO_NORM:
        return 1.0
    d = 1.0 - dot / (wnorm * vnorm)
    if d < 0.0:
        return 0.0
    if d > 2.0:
        return 2.0
    return d


@njit(cache=True)
def _update_coef(rows, cols, n, sr, sc, eps_t, inv2s2):
    dr = rows[n] - sr
    dc = cols[n] - sc
    return np.float32(eps_t * np.exp(-(dr * dr + dc * dc) * inv2s2))


@njit(cache=True)
def _row_update(w, v, coef):
    for j in range(w.shape[0]):
        w[j] = w[j] + coef * (v[j] - w[j])


def _epoch_body(weights, data, order, rows, cols, eps_t, sigma_t, metric, dist, scratch, v64):
    k, m = weights.shape
    inv2s2 = 1.0 / (2.0 * sigma_t * sigma_t)
    for idx in range(order.shape[0]):
        v = data[order[idx]]
        for j in range(m):
            v64[j] = np.float64(v[j])
        if metric == EUCLIDEAN:
            for n in prange(k):
                dist[n] = _row_euclidean(weights[n], v64, scratch[get_thread_id()])
        else:
            vnorm = np.sqrt(_sqnorm(v64))
            for n in prange(k):
                dist[n] = _row_cosine(weights[n], v64, vnorm, scratch[get_thread_id()])
        s = 0
        best = dist[0]
        for n in range(1, k):
            if dist[n] < best:
                best = dist[n]
                s = n
        sr = rows[s]
        sc = cols[s]
        for n in prange(k):
            _row_update(weights[n], v, _update_coef(rows, cols, n, sr, sc, eps_t, inv2s2))


_epoch_serial = njit(cache=True, nogil=True)(_epoch_body)
_epoch_parallel = njit(cache=True, parallel=True)(_epoch_body)


@njit(cache=True, nogil=True)
def _distances_serial(weights, v, metric, dist, buf, v64):
    k, m = weights.shape
    for j in range(m):
        v64[j] = np.float64(v[j])
    if metric == EUCLIDEAN:
        for n in range(k):
            dist[n] = _row_euclidean(weights[n], v64, buf)
    else:
        vnorm = np.sqrt(_sqnorm(v64))
        for n in range(k):
            dist[n] = _row_cosine(weights[n], v64, vnorm, buf)


@njit(cache=True, nogil=True)
def _update_serial(weights, v, s, rows, cols, eps_t, sigma_t):
    k = weights.shape[0]
    inv2s2 = 1.0 / (2.0 * sigma_t * sigma_t)
    sr = rows[s]
    sc = cols[s]
    for n in range(k):
        _row_update(weights[n], v, _update_coef(rows, cols, n, sr, sc, eps_t, inv2s2))


def _as_f32_vector(v, m: int) -> np.ndarray:
    out = np.ascontiguousarray(v, dtype=np.float32)
    if out.ndim != 1 or out.shape[0] != m:
        raise ValueError(f"expected a vector of dimension {m}")
    return out


def distances(weights: np.ndarray, v, metric: int) -> np.ndarray:
    """Distance from v to every prototype row, as float64."""
    k, m = weights.shape
    v32 = _as_f32_vector(v, m)
    dist = np.empty(k, dtype=np.float64)
    _distances_serial(
        weights, v32, np.int64(metric), dist,
        np.empty(m, dtype=np.float64), np.empty(m, dtype=np.float64),
    )
    return dist


def update(weights: np.ndarray, v, winner: int, rows, cols, eps_t: float, sigma_t: float) -> None:
    """Move every row toward v, weighted by the winner-centered neighborhood."""
    v32 = _as_f32_vector(v, weights.shape[1])
    _update_serial(weights, v32, np.int64(winner), rows, cols, np.float64(eps_t), np.float64(sigma_t))


def train_epoch(weights, data, order, rows, cols, eps_t, sigma_t, metric, workers: int = 1) -> None:
    """One full pass over data[order], updating weights in place."""
    k, m = weights.shape
    dist = np.empty(k, dtype=np.float64)
    v64 = np.empty(m, dtype=np.float64)
    args = (weights, data, order, rows, cols, np.float64(eps_t), np.float64(sigma_t), np.int64(metric), dist)
    if workers <= 1:
        _epoch_serial(*args, np.empty((1, m), dtype=np.float64), v64)
    else:
        numba.set_num_threads(min(int(workers), max_workers()))
        _epoch_parallel(*args, np.empty((max_workers(), m), dtype=np.float64), v64)
