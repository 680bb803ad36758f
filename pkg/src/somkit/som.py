"""The 2-D self-organizing map: grid, decay schedules, winner search, training.

Training is the classic online rule: per sample, find the prototype with the
smallest metric distance (highest Gaussian activity, equivalently), then move
every prototype toward the sample, weighted by a Gaussian neighborhood
centered on the winner's lattice position. Learning rate and neighborhood
width follow exponential interpolation schedules indexed by epoch.

Weights are float32; distance reductions accumulate in float64. Two runs with
the same config and seed produce bitwise-identical weights regardless of the
worker count (see kernels_numba for why).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .metrics import Metric

INIT_MODES = ("uniform", "sample")


@dataclass(frozen=True)
class GridShape:
    """Rectangular neuron lattice; index n sits at (n // cols, n % cols)."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def k(self) -> int:
        return self.rows * self.cols

    def positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-neuron lattice coordinates as float64 (row array, col array)."""
        r, c = np.divmod(np.arange(self.k), self.cols)
        return r.astype(np.float64), c.astype(np.float64)


@dataclass(frozen=True)
class DecaySchedule:
    """Exponential interpolation from `initial` at epoch 0 to `final` at epoch total_epochs."""

    initial: float
    final: float
    total_epochs: int

    def __post_init__(self):
        if not (self.initial > 0 and self.final > 0):
            raise ValueError("schedule endpoints must be positive")
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be at least 1")

    def value(self, t: int) -> float:
        if not 0 <= t <= self.total_epochs:
            raise ValueError(f"epoch {t} outside [0, {self.total_epochs}]")
        # Endpoints returned exactly; the power form only interpolates between.
        if t == 0:
            return self.initial
        if t == self.total_epochs:
            return self.final
        return self.initial * (self.final / self.initial) ** (t / self.total_epochs)


def _default_eps() -> DecaySchedule:
    return DecaySchedule(1.0, 0.01, 10)


def _default_sigma() -> DecaySchedule:
    return DecaySchedule(10.0, 0.1, 10)


@dataclass
class TrainConfig:
    """Training hyper-parameters. Defaults: eps 1 -> 0.01, sigma 10 -> 0.1, 10 epochs, alpha 1."""

    eps: DecaySchedule = field(default_factory=_default_eps)
    sigma: DecaySchedule = field(default_factory=_default_sigma)
    epochs: int = 10
    alpha: float = 1.0
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.epochs >= 1 and (self.eps.total_epochs != self.epochs or self.sigma.total_epochs != self.epochs):
            raise ValueError("schedule total_epochs must equal the configured epochs")


@dataclass
class SomMap:
    """Neuron grid with per-neuron float32 weight rows and a metric choice."""

    shape: GridShape
    dim: int
    weights: np.ndarray
    metric: Metric

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float32)
        if self.weights.shape != (self.shape.k, self.dim):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match grid {self.shape.k} x dim {self.dim}"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        self.metric = Metric(self.metric)

    @property
    def k(self) -> int:
        return self.shape.k


@dataclass
class TrainReport:
    epochs: int
    steps: int
    epoch_seconds: list[float]
    final_eps: float
    final_sigma: float


def init_som(
    shape: GridShape,
    dim: int,
    seed: int,
    init: str = "uniform",
    data=None,
    metric: Metric = Metric.EUCLIDEAN,
) -> SomMap:
    """Create a map with seeded random weights.

    "uniform" draws each component i.i.d. from U[0,1); "sample" copies k
    training vectors chosen uniformly at random (distinct while the dataset
    has enough rows). Deterministic given (shape, dim, seed, init).
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if init not in INIT_MODES:
        raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
    rng = np.random.default_rng(seed)
    if init == "uniform":
        weights = rng.random((shape.k, dim), dtype=np.float32)
    else:
        x = as_sample_matrix(data, dim) if data is not None else None
        if x is None or len(x) == 0:
            raise ValueError("sample init requires a nonempty dataset")
        picks = rng.choice(len(x), size=shape.k, replace=len(x) < shape.k)
        weights = x[picks].copy()
    return SomMap(shape=shape, dim=dim, weights=weights, metric=metric)


def as_sample_matrix(data, dim: int) -> np.ndarray:
    """Coerce a FeatureDataset, 2-D array, or sequence of vectors to float32 rows."""
    vectors = getattr(data, "vectors", data)
    x = np.ascontiguousarray(vectors, dtype=np.float32)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ValueError("training data must be a matrix of row vectors")
    if x.shape[0] == 0:
        raise ValueError("training data is empty")
    if x.shape[1] != dim:
        raise ValueError(f"data dimension {x.shape[1]} does not match map dimension {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("training data must be finite")
    return x


def find_winner(som: SomMap, v) -> tuple[int, float]:
    """Index and distance of the prototype nearest to v (lowest index on ties)."""
    d = backend.active().distances(som.weights, v, int(som.metric))
    s = int(np.argmin(d))
    return s, float(d[s])


def neighborhood(p_n, p_s, sigma_t: float) -> float:
    """Gaussian lattice falloff exp(-|p_n - p_s|^2 / (2 sigma_t^2))."""
    if not sigma_t > 0:
        raise ValueError("sigma_t must be positive")
    dr = float(p_n[0]) - float(p_s[0])
    dc = float(p_n[1]) - float(p_s[1])
    return math.exp(-(dr * dr + dc * dc) / (2.0 * sigma_t * sigma_t))


def train_step(som: SomMap, v, eps_t: float, sigma_t: float) -> int:
    """One online update: find the winner for v, pull all prototypes toward v.

    Every neuron moves (no cutoff radius). Returns the winner index.
    """
    if not 0.0 <= eps_t <= 1.0:
        raise ValueError("eps_t must lie in [0, 1]")
    if not sigma_t > 0:
        raise ValueError("sigma_t must be positive")
    v32 = np.ascontiguousarray(v, dtype=np.float32)
    if not np.all(np.isfinite(v32)):
        raise ValueError("input vector must be finite")
    kern = backend.active()
    d = kern.distances(som.weights, v32, int(som.metric))
    s = int(np.argmin(d))
    rows, cols = som.shape.positions()
    kern.update(som.weights, v32, s, rows, cols, eps_t, sigma_t)
    return s


def train(som: SomMap, data, cfg: TrainConfig, workers: int = 1) -> TrainReport:
    """Run the full epoch loop in place and return timing/schedule info.

    Each epoch presents every sample once (order reshuffled by the seeded
    generator when cfg.shuffle_each_epoch); the learning rate and
    neighborhood width are re-evaluated once per epoch. workers > 1 engages
    the parallel kernels; results do not depend on the worker count. Parallel
    training mutates a process-global thread setting, so concurrent train
    calls should all use workers=1.
    """
    x = as_sample_matrix(data, som.dim)
    n = x.shape[0]
    rng = np.random.default_rng(cfg.seed)
    rows, cols = som.shape.positions()
    kern = backend.active()
    epoch_seconds: list[float] = []
    for t in range(cfg.epochs):
        eps_t = cfg.eps.value(t)
        sigma_t = cfg.sigma.value(t)
        order = rng.permutation(n) if cfg.shuffle_each_epoch else np.arange(n)
        t0 = time.perf_counter()
        kern.train_epoch(som.weights, x, order, rows, cols, eps_t, sigma_t, int(som.metric), workers)
        epoch_seconds.append(time.perf_counter() - t0)
    if not np.all(np.isfinite(som.weights)):
        raise RuntimeError("training produced non-finite weights")
    ran = cfg.epochs >= 1
    return TrainReport(
        epochs=cfg.epochs,
        steps=cfg.epochs * n,
        epoch_seconds=epoch_seconds,
        final_eps=cfg.eps.value(cfg.eps.total_epochs) if ran else cfg.eps.value(0),
        final_sigma=cfg.sigma.value(cfg.sigma.total_epochs) if ran else cfg.sigma.value(0),
    )
