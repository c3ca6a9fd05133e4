"""CEM worker updates, the decentralized ensemble, and the guided ensemble loop.

All runs are driven by an integer seed. Worker ``i`` draws from
``derive_rng(seed, i)`` and initial means come from a separate stream, so two
optimizers run with the same seed start from the same ensemble and see the same
sampling noise until their trajectories diverge.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .centroid import (
    Centroid,
    WorkerState,
    argmin_lowest_id,
    _centroid,
    performance_weights,
    weighted_centroid,
)
from .expfam import VARIANCE_FLOOR, DiagGaussian, FixedVarianceGaussian, FloatArray
from .rng import INIT_STREAM, RngStream, derive_rng
from .trust_region import TrustRegion, sample_trust_region

log = logging.getLogger(__name__)


class CemError(RuntimeError):
    pass


@dataclass
class CemConfig:
    """CEM and ensemble hyper-parameters.

    Defaults follow the usual PETS-style planner settings: population 100,
    10% elites, initial variance 0.1, 5 iterations.
    """

    population_size: int = 100
    elite_fraction: float = 0.1
    smoothing_alpha: float = 0.1
    init_variance: float = 0.1
    max_iterations: int = 5
    variance_floor: float = 1e-6
    trust_radius: float = 0.5
    replace_per_iteration: int = 1
    temperature: float | str = "adaptive"
    fixed_variance: bool = False
    init_low: float = -1.0
    init_high: float = 1.0
    sampler: str = "auto"
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        errors = []
        if self.population_size < 1:
            errors.append("population_size must be >= 1")
        if not 0 < self.elite_fraction <= 1:
            errors.append("elite_fraction must be in (0, 1]")
        elif int(self.population_size * self.elite_fraction) < 1:
            errors.append("population_size * elite_fraction must give at least one elite")
        if not 0 <= self.smoothing_alpha < 1:
            errors.append("smoothing_alpha must be in [0, 1)")
        if not self.init_variance > 0:
            errors.append("init_variance must be positive")
        if self.max_iterations < 1:
            errors.append("max_iterations must be >= 1")
        if not self.variance_floor > 0:
            errors.append("variance_floor must be positive")
        if not self.trust_radius > 0:
            errors.append("trust_radius must be positive")
        if self.replace_per_iteration < 1:
            errors.append("replace_per_iteration must be >= 1")
        if self.temperature != "adaptive" and not (isinstance(self.temperature, (int, float)) and self.temperature > 0):
            errors.append("temperature must be positive or 'adaptive'")
        if not self.init_low < self.init_high:
            errors.append("init_low must be below init_high")
        if errors:
            raise ValueError("invalid CemConfig: " + "; ".join(errors))

    @property
    def n_elite(self) -> int:
        return max(1, int(self.population_size * self.elite_fraction))


class Objective:
    """Cost wrapper that counts evaluations and the time spent in them.

    ``fn`` maps one vector to a float, or a ``(N, d)`` batch to ``(N,)`` when
    ``vectorized`` is true.
    """

    def __init__(self, fn: Callable, vectorized: bool = False):
        self.fn = fn
        self.vectorized = vectorized
        self.evaluations = 0
        self.seconds = 0.0

    def __call__(self, xs: FloatArray) -> FloatArray:
        t0 = time.perf_counter()
        if self.vectorized:
            out = np.asarray(self.fn(xs), dtype=np.float64).reshape(len(xs))
        else:
            out = np.array([self.fn(x) for x in xs], dtype=np.float64)
        self.seconds += time.perf_counter() - t0
        self.evaluations += len(xs)
        return out


def as_objective(cost: Callable | Objective) -> Objective:
    return cost if isinstance(cost, Objective) else Objective(cost)


def select_elites(costs: ArrayLike, n_elite: int) -> FloatArray:
    """Indices of the ``n_elite`` lowest costs; equal costs keep sample order."""
    return np.argsort(np.asarray(costs), kind="stable")[:n_elite]


@dataclass
class StepResult:
    worker: WorkerState
    best_x: FloatArray
    best_cost: float


def cem_iterate(worker: WorkerState, cost: Callable | Objective, cfg: CemConfig, rng: RngStream) -> StepResult:
    """One sample / rank / refit round for a single worker.

    Candidates with non-finite cost are dropped; more than half non-finite is an
    error. The refit is the elite sample mean and (biased) variance, blended as
    ``alpha * old + (1 - alpha) * fit``, variance floored at
    ``cfg.variance_floor``. A frozen-variance worker only moves its mean.
    """
    obj = as_objective(cost)
    dist = worker.dist
    xs = dist.sample(cfg.population_size, rng)
    if cfg.bounds is not None:
        np.clip(xs, cfg.bounds[0], cfg.bounds[1], out=xs)
    costs = obj(xs)
    finite = np.isfinite(costs)
    n_bad = int((~finite).sum())
    if n_bad * 2 > len(costs):
        raise CemError(f"worker {worker.id}: {n_bad}/{len(costs)} candidates returned non-finite cost")
    if n_bad:
        log.debug("worker %d: discarding %d non-finite candidates", worker.id, n_bad)
        xs, costs = xs[finite], costs[finite]
    elite = xs[select_elites(costs, min(cfg.n_elite, len(costs)))]

    a = cfg.smoothing_alpha
    mean = a * dist.mean + (1 - a) * elite.mean(axis=0)
    if dist.variance_frozen:
        var = dist.variance
    else:
        var = np.maximum(a * dist.variance + (1 - a) * elite.var(axis=0), cfg.variance_floor)
    new = WorkerState(DiagGaussian(mean, var, dist.variance_frozen), costs, worker.weight, worker.id,
                      float(costs.mean()))
    i = int(np.argmin(costs))
    return StepResult(new, xs[i].copy(), float(costs[i]))


@dataclass
class IterationRecord:
    iteration: int
    best_cost: float
    mean_cost: float
    information_radius: float
    evaluations: int
    wall_s: float
    eval_s: float
    overhead_s: float


@dataclass
class EnsembleState:
    workers: list[WorkerState]
    centroid: Centroid | None = None
    iteration: int = 0
    history: list[IterationRecord] = field(default_factory=list)
    best_x: FloatArray | None = None
    best_cost: float = float("inf")
    evaluations: int = 0

    def best_worker(self) -> WorkerState:
        """Worker with the lowest population mean cost; ties go to the lowest id."""
        return min(self.workers, key=lambda w: (w.mean_cost, w.id))

    @property
    def solution(self) -> FloatArray:
        return self.best_worker().dist.mean


def geometry(dim: int, cfg: CemConfig) -> FixedVarianceGaussian:
    return FixedVarianceGaussian.isotropic(dim, cfg.init_variance)


def init_workers(
    n_workers: int, dim: int, cfg: CemConfig, seed: int, init_means: ArrayLike | None = None
) -> list[WorkerState]:
    if n_workers < 1:
        raise ValueError("need at least one worker")
    if init_means is None:
        means = derive_rng(seed, INIT_STREAM).uniform(cfg.init_low, cfg.init_high, (n_workers, dim))
    else:
        means = np.atleast_2d(np.asarray(init_means, dtype=np.float64))
        if means.shape != (n_workers, dim):
            raise ValueError(f"init_means must have shape {(n_workers, dim)}")
    return [
        WorkerState(DiagGaussian(m, cfg.init_variance, cfg.fixed_variance), weight=1.0 / n_workers, id=i)
        for i, m in enumerate(means)
    ]


_NO_COSTS = np.empty(0)


def _weigh(workers: Sequence[WorkerState], cfg: CemConfig) -> FloatArray:
    w = performance_weights([wk.mean_cost for wk in workers], cfg.temperature)
    for wk, wi in zip(workers, w.tolist()):
        wk.weight = wi
    return w


def _guided_step(
    workers: list[WorkerState],
    pot: FixedVarianceGaussian,
    cfg: CemConfig,
    rngs: Sequence[RngStream],
    guided: bool,
    on_replace: Callable[[int, FloatArray], None] | None,
    reset_variance: bool = True,
) -> Centroid:
    """Weights, centroid and (if ``guided``) score-and-replace, in place on ``workers``.

    The returned centroid's information radius is measured after replacement,
    with the weights of the current iteration. Inputs come from the ensemble
    itself, so the unchecked centroid and distribution constructors are used.
    With ``reset_variance=False`` a replaced worker keeps its variance vector
    and only its mean is resampled.
    """
    w = _weigh(workers, cfg)
    etas = np.array([wk.dist.mean for wk in workers])
    c = _centroid(etas, w, pot)
    if not guided:
        return c
    gamma = c.scores.copy()
    method = "box" if cfg.sampler == "auto" else cfg.sampler
    if method == "box":
        half = math.sqrt(2.0 * cfg.trust_radius) * pot._std
    else:
        tr = TrustRegion(c.eta_c, cfg.trust_radius, pot)
    for k in argmin_lowest_id(gamma.tolist(), [wk.id for wk in workers], cfg.replace_per_iteration):
        old = workers[k]
        try:
            if method == "box":
                eta = c.eta_c + rngs[k].uniform(-1.0, 1.0, c.eta_c.size) * half
            else:
                eta = sample_trust_region(tr, rngs[k], method)
        except Exception as exc:
            raise CemError(f"trust-region sampling failed for worker {old.id}: {exc}") from exc
        if on_replace is not None:
            on_replace(old.id, eta)
        if reset_variance:
            var = np.full(eta.size, max(cfg.init_variance, VARIANCE_FLOOR))
        else:
            var = old.dist.variance
        dist = DiagGaussian._trusted(eta, var, old.dist.variance_frozen)
        # no population yet: weight and mean cost are recomputed after its next update
        workers[k] = WorkerState(dist, _NO_COSTS, 0.0, old.id)
        diff = eta - c.eta_c
        gamma[k] = w[k] * float((diff * diff) @ pot._half_inv)
    c.scores = gamma
    c.information_radius = float(gamma.sum())
    return c


def _run(
    n_workers: int,
    cost: Callable | Objective,
    dim: int,
    cfg: CemConfig,
    seed: int,
    guided: bool,
    init_means: ArrayLike | None = None,
    on_replace: Callable[[int, FloatArray], None] | None = None,
) -> EnsembleState:
    obj = as_objective(cost)
    workers = init_workers(n_workers, dim, cfg, seed, init_means)
    rngs = [derive_rng(seed, w.id) for w in workers]
    pot = geometry(dim, cfg)
    state = EnsembleState(workers)

    for it in range(1, cfg.max_iterations + 1):
        t0 = time.perf_counter()
        e0 = obj.seconds
        for k, w in enumerate(state.workers):
            step = cem_iterate(w, obj, cfg, rngs[k])
            state.workers[k] = step.worker
            if step.best_cost < state.best_cost:
                state.best_cost, state.best_x = step.best_cost, step.best_x
        mean_cost = sum(w.mean_cost for w in state.workers) / len(state.workers)
        t1 = time.perf_counter()
        state.centroid = _guided_step(state.workers, pot, cfg, rngs, guided, on_replace)
        ir = state.centroid.information_radius
        t2 = time.perf_counter()

        state.iteration = it
        state.history.append(
            IterationRecord(
                iteration=it,
                best_cost=state.best_cost,
                mean_cost=mean_cost,
                information_radius=ir,
                evaluations=obj.evaluations,
                wall_s=t2 - t0,
                eval_s=obj.seconds - e0,
                overhead_s=t2 - t1,
            )
        )
    state.evaluations = obj.evaluations
    return state


def decentralized_run(
    n_workers: int,
    cost: Callable | Objective,
    dim: int,
    cfg: CemConfig,
    seed: int,
    init_means: ArrayLike | None = None,
) -> EnsembleState:
    """Independent CEM workers; the history tracks the best sample seen by any of them."""
    return _run(n_workers, cost, dim, cfg, seed, guided=False, init_means=init_means)


def bc_evocem_run(
    n_workers: int,
    cost: Callable | Objective,
    dim: int,
    cfg: CemConfig,
    seed: int,
    init_means: ArrayLike | None = None,
    on_replace: Callable[[int, FloatArray], None] | None = None,
) -> EnsembleState:
    """Guided ensemble: CEM step, performance weights, centroid, score, replace.

    After every round of worker updates the ``replace_per_iteration`` workers
    with the smallest relevance score are respawned at a trust-region draw
    around the centroid (mean block only, variance reset to
    ``cfg.init_variance``). The recorded information radius is measured after
    replacement, with the current iteration's weights.
    """
    if n_workers < 2:
        raise ValueError("the guided ensemble needs at least two workers")
    if cfg.replace_per_iteration >= n_workers:
        raise ValueError("replace_per_iteration must leave at least one survivor")
    return _run(n_workers, cost, dim, cfg, seed, guided=True, init_means=init_means, on_replace=on_replace)


def vanilla_run(
    cost: Callable | Objective,
    dim: int,
    cfg: CemConfig,
    seed: int,
    init_mean: ArrayLike | None = None,
) -> EnsembleState:
    """Single CEM distribution, written as a plain loop."""
    obj = as_objective(cost)
    [worker] = init_workers(1, dim, cfg, seed, None if init_mean is None else [init_mean])
    worker.weight = 1.0
    rng = derive_rng(seed, worker.id)
    state = EnsembleState([worker])
    for it in range(1, cfg.max_iterations + 1):
        t0 = time.perf_counter()
        e0 = obj.seconds
        step = cem_iterate(state.workers[0], obj, cfg, rng)
        state.workers[0] = step.worker
        if step.best_cost < state.best_cost:
            state.best_cost, state.best_x = step.best_cost, step.best_x
        state.centroid = weighted_centroid(state.workers, geometry(dim, cfg))
        t1 = time.perf_counter()
        state.iteration = it
        state.history.append(
            IterationRecord(it, state.best_cost, step.worker.mean_cost, state.centroid.information_radius,
                            obj.evaluations, t1 - t0, obj.seconds - e0, 0.0)
        )
    state.evaluations = obj.evaluations
    return state
