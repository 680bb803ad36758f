"""Pure-numpy fallback kernels with the same call surface as kernels_numba.

Used when SOM_BACKEND=numpy or when numba is unavailable. Results agree with
the compiled path to floating-point tolerance (not bitwise: summation order
and the exp implementation differ); each backend is individually
deterministic. The worker argument is accepted and ignored.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

EUCLIDEAN = 0
COSINE = 1

ZERO_NORM = 1e-12


def max_workers() -> int:
    return 1


def _as_f32_vector(v, m: int) -> np.ndarray:
    out = np.ascontiguousarray(v, dtype=np.float32)
    if out.ndim != 1 or out.shape[0] != m:
        raise ValueError(f"expected a vector of dimension {m}")
    return out


def _distances_into(weights, v64, metric, diff64, w64):
    if metric == EUCLIDEAN:
        np.subtract(weights, v64[None, :], out=diff64)
        return np.sqrt(np.einsum("ij,ij->i", diff64, diff64))
    np.copyto(w64, weights)
    dot = np.einsum("ij,j->i", w64, v64)
    wnorm = np.sqrt(np.einsum("ij,ij->i", w64, w64))
    vnorm = np.sqrt(v64 @ v64)
    d = np.empty(weights.shape[0], dtype=np.float64)
    if vnorm < ZERO_NORM:
        d.fill(1.0)
        return d
    ok = wnorm >= ZERO_NORM
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(dot, wnorm * vnorm, out=d)
    np.clip(1.0 - d, 0.0, 2.0, out=d)
    d[~ok] = 1.0
    return d


def distances(weights: np.ndarray, v, metric: int) -> np.ndarray:
    """Distance from v to every prototype row, as float64."""
    k, m = weights.shape
    v64 = _as_f32_vector(v, m).astype(np.float64)
    return _distances_into(weights, v64, metric, np.empty((k, m), dtype=np.float64), np.empty((k, m), dtype=np.float64))


def _coefs(rows, cols, winner, eps_t, inv2s2):
    dr = rows - rows[winner]
    dc = cols - cols[winner]
    return (eps_t * np.exp(-(dr * dr + dc * dc) * inv2s2)).astype(np.float32)


def update(weights: np.ndarray, v, winner: int, rows, cols, eps_t: float, sigma_t: float) -> None:
    """Move every row toward v, weighted by the winner-centered neighborhood."""
    v32 = _as_f32_vector(v, weights.shape[1])
    inv2s2 = 1.0 / (2.0 * sigma_t * sigma_t)
    step = np.subtract(v32[None, :], weights)
    step *= _coefs(rows, cols, winner, eps_t, inv2s2)[:, None]
    weights += step


def train_epoch(weights, data, order, rows, cols, eps_t, sigma_t, metric, workers: int = 1) -> None:
    """One full pass over data[order], updating weights in place."""
    k, m = weights.shape
    inv2s2 = 1.0 / (2.0 * sigma_t * sigma_t)
    diff64 = np.empty((k, m), dtype=np.float64)
    w64 = np.empty((k, m), dtype=np.float64) if metric == COSINE else diff64
    step32 = np.empty((k, m), dtype=np.float32)
    for idx in order:
        v = data[idx]
        d = _distances_into(weights, v.astype(np.float64), metric, diff64, w64)
        winner = int(np.argmin(d))
        np.subtract(v[None, :], weights, out=step32)
        step32 *= _coefs(rows, cols, winner, eps_t, inv2s2)[:, None]
        weights += step32
