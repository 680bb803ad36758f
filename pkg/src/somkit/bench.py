"""Throughput study: sequential baseline vs. multi-worker training across map sizes.

Each (neuron count, worker count) cell trains a fresh map on the same seeded
synthetic data with the same presentation order; one untimed warm-up epoch
absorbs JIT compilation and cache effects. Before any speedup is reported,
final weight matrices are checked bitwise-equal across worker counts. Use
``backend="numpy"`` vs ``backend="numba"`` to compare the fallback and the
compiled kernels on identical work.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .data import atomic_write_bytes
from .metrics import Metric
from .som import DecaySchedule, GridShape


@dataclass
class BenchConfig:
    neuron_counts: tuple[int, ...] = (100, 400, 1600, 2500)
    dim: int = 784
    samples_per_epoch: int = 10_000
    epochs: int = 10
    worker_counts: tuple[int, ...] = (1,)
    seed: int = 42
    repeats: int = 3
    backend: str | None = None

    def __post_init__(self):
        if not self.neuron_counts or any(k < 1 for k in self.neuron_counts):
            raise ValueError("neuron_counts must be positive")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.samples_per_epoch < 1:
            raise ValueError("samples_per_epoch must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if 1 not in self.worker_counts:
            raise ValueError("worker_counts must include 1 (the sequential baseline)")
        if any(w < 1 for w in self.worker_counts):
            raise ValueError("worker counts must be positive")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")


@dataclass
class BenchCell:
    k: int
    workers: int
    run: int
    seconds: float
    samples_per_sec: float
    speedup: float = float("nan")


@dataclass
class BenchFit:
    workers: int
    slope: float
    intercept: float
    r_squared: float


@dataclass
class BenchReport:
    cells: list[BenchCell]
    fits: list[BenchFit]
    notes: list[str] = field(default_factory=list)

    def median_seconds(self, k: int, workers: int) -> float:
        return statistics.median(c.seconds for c in self.cells if c.k == k and c.workers == workers)

    def speedup(self, k: int, workers: int) -> float:
        return self.median_seconds(k, 1) / self.median_seconds(k, workers)


def grid_for(k: int) -> GridShape:
    """Most-square rows x cols factorization of k."""
    for r in range(int(np.sqrt(k)), 0, -1):
        if k % r == 0:
            return GridShape(r, k // r)
    return GridShape(1, k)


def fit_linear(points) -> tuple[float, float, float]:
    """Ordinary least squares over (k, seconds): slope, intercept, R^2.

    A zero-variance response fits its own mean perfectly; R^2 is 1 there by
    convention.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.all(xs == xs[0]):
        raise ValueError("all k values are equal; nothing to fit")
    xm, ym = xs.mean(), ys.mean()
    sxx = float(((xs - xm) ** 2).sum())
    sxy = float(((xs - xm) * (ys - ym)).sum())
    slope = sxy / sxx
    intercept = ym - slope * xm
    ss_res = float(((ys - (intercept + slope * xs)) ** 2).sum())
    ss_tot = float(((ys - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, min(max(r2, 0.0), 1.0)


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Time the training loop for every (k, workers) cell; data generation and
    I/O are excluded from all measurements."""
    kern = backend.resolve(cfg.backend)
    rng = np.random.default_rng(cfg.seed)
    data = rng.random((cfg.samples_per_epoch, cfg.dim), dtype=np.float32)
    orders = [rng.permutation(cfg.samples_per_epoch) for _ in range(cfg.epochs)]
    eps = DecaySchedule(1.0, 0.01, cfg.epochs)
    sigma = DecaySchedule(10.0, 0.1, cfg.epochs)
    eps_vals = [eps.value(t) for t in range(cfg.epochs)]
    sigma_vals = [sigma.value(t) for t in range(cfg.epochs)]
    metric = int(Metric.EUCLIDEAN)

    report = BenchReport(cells=[], fits=[])
    cap = kern.max_workers()
    for k in cfg.neuron_counts:
        shape = grid_for(k)
        rows, cols = shape.positions()
        w0 = np.random.default_rng(np.random.SeedSequence((cfg.seed, k))).random((k, cfg.dim), dtype=np.float32)
        finals: dict[int, np.ndarray] = {}
        for workers in cfg.worker_counts:
            eff = min(workers, cap)
            if eff != workers:
                note = f"workers={workers} exceeds backend capability {cap}; clamped to {eff}"
                warnings.warn(note)
                if note not in report.notes:
                    report.notes.append(note)
            warm = w0.copy()
            kern.train_epoch(warm, data, orders[0], rows, cols, eps_vals[0], sigma_vals[0], metric, eff)
            for rep in range(cfg.repeats):
                weights = w0.copy()
                t0 = time.perf_counter()
                for t in range(cfg.epochs):
                    kern.train_epoch(weights, data, orders[t], rows, cols, eps_vals[t], sigma_vals[t], metric, eff)
                seconds = time.perf_counter() - t0
                report.cells.append(BenchCell(
                    k=k, workers=workers, run=rep, seconds=seconds,
                    samples_per_sec=cfg.samples_per_epoch * cfg.epochs / seconds,
                ))
            finals[workers] = weights
        base = finals[1]
        for workers, w_final in finals.items():
            if not np.array_equal(base, w_final):
                raise RuntimeError(
                    f"parallel correctness gate failed: k={k} workers={workers} "
                    "weights differ from the sequential baseline"
                )
    for cell in report.cells:
        cell.speedup = report.speedup(cell.k, cell.workers)
    for workers in cfg.worker_counts:
        pts = [(k, report.median_seconds(k, workers)) for k in cfg.neuron_counts]
        if len(set(k for k, _ in pts)) >= 3:
            slope, intercept, r2 = fit_linear(pts)
            report.fits.append(BenchFit(workers=workers, slope=slope, intercept=intercept, r_squared=r2))
    return report


def write_bench_csv(path, report: BenchReport) -> None:
    """Data rows plus '#'-prefixed summary lines (fits and any notes)."""
    sink = io.StringIO()
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["k", "workers", "run", "seconds", "samples_per_sec", "speedup"])
    for c in report.cells:
        w.writerow([c.k, c.workers, c.run, f"{c.seconds:.6f}", f"{c.samples_per_sec:.1f}", f"{c.speedup:.4f}"])
    for f in report.fits:
        sink.write(f"# fit workers={f.workers} slope={f.slope:.8g} intercept={f.intercept:.8g} r2={f.r_squared:.6f}\n")
    for note in report.notes:
        sink.write(f"# note {note}\n")
    atomic_write_bytes(path, sink.getvalue().encode())
