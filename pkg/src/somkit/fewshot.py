"""Few-shot episode protocol: sample, train, label, evaluate, aggregate.

Every episode draws `ways` distinct classes, then s support and q query
samples per class without replacement (support and query are disjoint). A
fresh map is trained on the union of support and query vectors with no
labels, labeled from the support set only, and scored on the queries.

Each episode's generator is derived from (seed, run_index) alone, so results
are reproducible episode-by-episode and independent of execution order or
the number of harness workers.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .data import FeatureDataset, atomic_write_bytes
from .labeling import evaluate, label_som
from .metrics import Metric
from .som import GridShape, SomMap, TrainConfig, init_som, train


def default_grid(shots: int) -> GridShape:
    """Grid presets by label budget: 5x5 for one shot, 10x10 for more."""
    return GridShape(5, 5) if shots <= 1 else GridShape(10, 10)


@dataclass(frozen=True)
class EpisodeSpec:
    """One protocol configuration; Q = queries * ways vectors get classified per episode."""

    shots: int
    queries: int
    runs: int
    seed: int
    grid: GridShape
    ways: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    metric: Metric = Metric.EUCLIDEAN
    label_alpha: float = 1.0
    init: str = "uniform"

    def __post_init__(self):
        if self.ways < 2:
            raise ValueError("ways must be at least 2")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if self.queries < 1:
            raise ValueError("queries must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.label_alpha > 0:
            raise ValueError("label_alpha must be positive")


class Episode(NamedTuple):
    support_x: np.ndarray
    support_y: np.ndarray
    query_x: np.ndarray
    query_y: np.ndarray


@dataclass
class EpisodeResult:
    run_index: int
    accuracy: float
    train_s: float
    label_s: float
    eval_s: float


@dataclass
class AggregateResult:
    results: list[EpisodeResult]
    accuracies: np.ndarray
    mean_accuracy: float
    ci95: float
    mean_train_s: float
    mean_label_s: float
    mean_eval_s: float


def episode_rng(seed: int, run_index: int) -> np.random.Generator:
    """Independent stream for one episode, a pure function of (seed, run_index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(run_index,)))


def ci95_halfwidth(values) -> float:
    """1.96 * sample standard deviation / sqrt(n); zero for a single value."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    return 1.96 * float(np.std(v, ddof=1)) / math.sqrt(v.size)


def _draw_episode(ds: FeatureDataset, spec: EpisodeSpec, rng: np.random.Generator) -> Episode:
    if spec.ways > ds.num_classes:
        raise ValueError(f"ways={spec.ways} exceeds the {ds.num_classes} classes available")
    chosen = rng.choice(ds.num_classes, size=spec.ways, replace=False)
    need = spec.shots + spec.queries
    sup_x, sup_y, qry_x, qry_y = [], [], [], []
    for new_id, c in enumerate(chosen):
        idx = ds.class_indices(int(c))
        if idx.size < need:
            raise ValueError(f"class {int(c)} has {idx.size} samples, episode needs {need}")
        pick = rng.choice(idx, size=need, replace=False)
        sup_x.append(ds.vectors[pick[: spec.shots]])
        qry_x.append(ds.vectors[pick[spec.shots :]])
        sup_y.append(np.full(spec.shots, new_id, dtype=np.int32))
        qry_y.append(np.full(spec.queries, new_id, dtype=np.int32))
    return Episode(
        support_x=np.concatenate(sup_x),
        support_y=np.concatenate(sup_y),
        query_x=np.concatenate(qry_x),
        query_y=np.concatenate(qry_y),
    )


def sample_episode(ds: FeatureDataset, spec: EpisodeSpec, run_index: int) -> Episode:
    """The episode draw for run_index, deterministic from (spec.seed, run_index)."""
    return _draw_episode(ds, spec, episode_rng(spec.seed, run_index))


def run_episode(ds: FeatureDataset, spec: EpisodeSpec, run_index: int) -> EpisodeResult:
    """Train a fresh map on the episode's unlabeled union, label, and score."""
    rng = episode_rng(spec.seed, run_index)
    ep = _draw_episode(ds, spec, rng)
    som_seed = int(rng.integers(0, 2**63))
    pool = np.concatenate([ep.support_x, ep.query_x])

    t0 = time.perf_counter()
    som = init_som(spec.grid, ds.dim, som_seed, init=spec.init, data=pool, metric=spec.metric)
    cfg = replace(spec.train, seed=som_seed)
    train(som, pool, cfg)
    t1 = time.perf_counter()
    lsom = label_som(som, ep.support_x, ep.support_y, alpha=spec.label_alpha, num_classes=spec.ways)
    t2 = time.perf_counter()
    accuracy = evaluate(lsom, ep.query_x, ep.query_y)
    t3 = time.perf_counter()
    return EpisodeResult(
        run_index=run_index,
        accuracy=accuracy,
        train_s=t1 - t0,
        label_s=t2 - t1,
        eval_s=t3 - t2,
    )


def run_protocol(ds: FeatureDataset, spec: EpisodeSpec, workers: int = 1) -> AggregateResult:
    """Run every episode and aggregate; episodes are independent, so the
    worker count changes only the wall clock, never the numbers."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_episode(ds, spec, i), range(spec.runs)))
    else:
        results = [run_episode(ds, spec, i) for i in range(spec.runs)]
    results.sort(key=lambda r: r.run_index)
    acc = np.array([r.accuracy for r in results], dtype=np.float64)
    return AggregateResult(
        results=results,
        accuracies=acc,
        mean_accuracy=float(acc.mean()),
        ci95=ci95_halfwidth(acc),
        mean_train_s=float(np.mean([r.train_s for r in results])),
        mean_label_s=float(np.mean([r.label_s for r in results])),
        mean_eval_s=float(np.mean([r.eval_s for r in results])),
    )


def format_summary(agg: AggregateResult) -> str:
    return (
        f"mean accuracy over {len(agg.results)} runs: "
        f"{100 * agg.mean_accuracy:.2f}% ± {100 * agg.ci95:.2f}"
    )


def write_protocol_csv(path, agg: AggregateResult) -> None:
    """Per-episode rows plus two summary rows (mean, ci95)."""
    sink = io.StringIO()
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["run_index", "accuracy", "train_ms", "label_ms", "eval_ms"])
    for r in agg.results:
        w.writerow([r.run_index, f"{r.accuracy:.6f}", f"{1e3 * r.train_s:.3f}",
                    f"{1e3 * r.label_s:.3f}", f"{1e3 * r.eval_s:.3f}"])
    w.writerow(["mean", f"{agg.mean_accuracy:.6f}", f"{1e3 * agg.mean_train_s:.3f}",
                f"{1e3 * agg.mean_label_s:.3f}", f"{1e3 * agg.mean_eval_s:.3f}"])
    w.writerow(["ci95", f"{agg.ci95:.6f}", "", "", ""])
    atomic_write_bytes(path, sink.getvalue().encode())
