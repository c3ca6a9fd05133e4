"""Receding-horizon control with a guided CEM ensemble on a known simulator.

Each control step warm-starts the workers, runs a few CEM rounds on the
rollout cost from the current state, computes the weighted centroid of the
plans and (in guided mode) replaces the least relevant workers by trust-region
draws around it. The first action of the lowest-cost worker is executed.

Two modes are provided:

* ``"bc"`` -- workers restart from the time-shifted centroid plus Gaussian
  noise; replaced workers restart from their (shifted) trust-region draw.
* ``"decent"`` -- every worker restarts from its own shifted plan and no
  information is shared between workers.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .cem import CemConfig, Objective, _guided_step, cem_iterate, init_workers
from .centroid import Centroid, WorkerState
from .expfam import DiagGaussian, FixedVarianceGaussian, FloatArray
from .rng import derive_rng

MODES = ("bc", "decent")
PERTURB_STREAM = 0x5EED


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")


@dataclass
class RolloutEnv:
    """A deterministic simulator with additive costs.

    ``dynamics(states, actions)``, ``step_cost(states, actions)`` and
    ``terminal_cost(states)`` act on a leading batch axis: states are
    ``(B, state_dim)``, actions ``(B, action_dim)``, costs ``(B,)``.
    ``batch_states`` may supply a faster closed-form rollout returning all
    ``(B, H + 1, state_dim)`` states; it must agree with iterating ``dynamics``.
    """

    state_dim: int
    action_dim: int
    dt: float
    dynamics: Callable[[FloatArray, FloatArray], FloatArray]
    step_cost: Callable[[FloatArray, FloatArray], FloatArray]
    terminal_cost: Callable[[FloatArray], FloatArray]
    obstacles: list[Circle]
    goal: FloatArray
    start: FloatArray
    action_bounds: FloatArray
    batch_states: Callable[[FloatArray, FloatArray], FloatArray] | None = None

    def __post_init__(self):
        self.goal = np.asarray(self.goal, dtype=np.float64)
        self.start = np.asarray(self.start, dtype=np.float64)
        self.action_bounds = np.asarray(self.action_bounds, dtype=np.float64).reshape(self.action_dim, 2)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.start.shape != (self.state_dim,) or self.goal.shape != (self.state_dim,):
            raise ValueError("start and goal must have shape (state_dim,)")
        if np.any(self.action_bounds[:, 0] > self.action_bounds[:, 1]):
            raise ValueError("action bounds must satisfy lo <= hi")

    def clip(self, actions: ArrayLike) -> FloatArray:
        """Clamp actions of shape ``(..., action_dim)`` to the bounds."""
        return np.clip(actions, self.action_bounds[:, 0], self.action_bounds[:, 1])

    def step(self, state: ArrayLike, action: ArrayLike) -> FloatArray:
        return self.dynamics(np.asarray(state, dtype=np.float64)[None], np.asarray(action, dtype=np.float64)[None])[0]


# -- point-mass navigation -----------------------------------------------------

DEFAULT_OBSTACLES = (
    Circle((2.5, 2.5), 1.0),
    Circle((5.0, 5.0), 1.2),
    Circle((7.5, 7.5), 1.0),
    Circle((3.0, 6.5), 0.9),
    Circle((6.5, 3.0), 0.9),
    Circle((1.0, 4.5), 0.7),
    Circle((4.5, 1.0), 0.7),
    Circle((8.5, 5.0), 0.8),
)


def point_mass_env(
    obstacles: Sequence[Circle] = DEFAULT_OBSTACLES,
    start: ArrayLike = (0.0, 0.0),
    goal: ArrayLike = (10.0, 10.0),
    dt: float = 0.2,
    action_bound: float = 1.0,
    w_goal: float = 1.0,
    w_obs: float = 100.0,
    margin: float = 0.05,
    w_terminal: float = 10.0,
) -> RolloutEnv:
    """First-order 2-D point mass ``x' = x + u dt`` among circular obstacles.

    Step cost ``w_goal |x - goal| + w_obs sum_k max(0, r_k + margin - |x - c_k|)^2``,
    terminal cost ``w_terminal |x_H - goal|``.
    """
    obstacles = list(obstacles)
    goal = np.asarray(goal, dtype=np.float64)
    centers = np.array([o.center for o in obstacles], dtype=np.float64).reshape(-1, 2)
    reach = np.array([o.radius + margin for o in obstacles], dtype=np.float64)

    def dynamics(x, u):
        return x + u * dt

    def batch_states(x0, actions):
        # closed form of the recursion; actions (B, H, 2)
        padded = np.zeros((actions.shape[0], actions.shape[1] + 1, 2))
        padded[:, 1:] = actions
        out = np.cumsum(padded, axis=1)
        out *= dt
        out += x0
        return out

    def clearance_penalty(x):
        flat = x.reshape(-1, 2)
        px, py = flat[:, 0], flat[:, 1]
        out = np.zeros(len(flat))
        for (cx, cy), r in zip(centers, reach):
            # cheap strip test first, exact distance only for the candidates
            idx = np.flatnonzero(np.abs(px - cx) < r)
            if len(idx):
                dx = px[idx] - cx
                dy = py[idx] - cy
                d2 = dx * dx + dy * dy
                inside = d2 < r * r
                if inside.any():
                    gap = r - np.sqrt(d2[inside])
                    out[idx[inside]] += gap * gap
        return out.reshape(x.shape[:-1])

    def step_cost(x, u):
        return w_goal * np.hypot(x[..., 0] - goal[0], x[..., 1] - goal[1]) + w_obs * clearance_penalty(x)

    def terminal_cost(x):
        return w_terminal * np.hypot(x[..., 0] - goal[0], x[..., 1] - goal[1])

    return RolloutEnv(
        state_dim=2,
        action_dim=2,
        dt=dt,
        dynamics=dynamics,
        step_cost=step_cost,
        terminal_cost=terminal_cost,
        obstacles=obstacles,
        goal=goal,
        start=np.asarray(start, dtype=np.float64),
        action_bounds=[[-action_bound, action_bound]] * 2,
        batch_states=batch_states,
    )


# -- rollouts ------------------------------------------------------------------


def rollout_states(env: RolloutEnv, x0: ArrayLike, actions: FloatArray) -> FloatArray:
    """States ``(B, H + 1, state_dim)`` for an action batch ``(B, H, action_dim)``."""
    x0 = np.asarray(x0, dtype=np.float64)
    if env.batch_states is not None:
        return env.batch_states(x0, actions)
    b, h, _ = actions.shape
    out = np.empty((b, h + 1, env.state_dim))
    out[:, 0] = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(h):
            out[:, t + 1] = env.dynamics(out[:, t], actions[:, t])
    return out


def rollout_costs(env: RolloutEnv, x0: ArrayLike, plans: ArrayLike) -> tuple[FloatArray, FloatArray]:
    """Total cost of each flattened plan, plus a blow-up flag per plan.

    Plans with a non-finite state or cost get cost ``inf`` and flag ``True``.
    """
    plans = np.atleast_2d(np.asarray(plans, dtype=np.float64))
    if plans.shape[1] % env.action_dim:
        raise ValueError(f"plan length {plans.shape[1]} is not a multiple of action_dim={env.action_dim}")
    actions = plans.reshape(plans.shape[0], -1, env.action_dim)
    h = actions.shape[1]
    with np.errstate(over="ignore", invalid="ignore"):
        xs = rollout_states(env, x0, actions)
        flat_x = xs[:, :h].reshape(-1, env.state_dim)
        running = env.step_cost(flat_x, actions.reshape(-1, env.action_dim)).reshape(-1, h).sum(1)
        total = running + env.terminal_cost(xs[:, h])
    blown = ~np.isfinite(total)
    total[blown] = np.inf
    return total, blown


def rollout_cost(env: RolloutEnv, x0: ArrayLike, actions: ArrayLike) -> float:
    """Cost of one flattened action sequence (``inf`` on numerical blow-up)."""
    return float(rollout_costs(env, x0, np.asarray(actions, dtype=np.float64)[None])[0][0])


# -- warm starts -----------------------------------------------------------------


def shift_plan(plan: ArrayLike, action_dim: int, steps: int = 1) -> FloatArray:
    """Drop the first ``steps`` action blocks and repeat the last block."""
    p = np.asarray(plan, dtype=np.float64).reshape(-1, action_dim)
    if steps <= 0:
        return p.ravel().copy()
    steps = min(steps, len(p))
    return np.concatenate([p[steps:], np.repeat(p[-1:], steps, axis=0)]).ravel()


def warm_start(
    workers: Sequence[WorkerState],
    prev_centroid: Centroid,
    cfg: CemConfig,
    action_dim: int,
    perturb_factor: float,
    rngs: Sequence[np.random.Generator],
    executed_steps: int = 1,
    keep_ids: frozenset[int] = frozenset(),
) -> list[WorkerState]:
    """Restart every worker at the shifted centroid plus i.i.d. noise.

    The noise has standard deviation ``cfg.init_variance * perturb_factor``
    and variances are reset to ``cfg.init_variance``. Workers listed in
    ``keep_ids`` (the ones just respawned by score-and-replace) keep their own
    shifted mean instead.
    """
    base = shift_plan(prev_centroid.eta_c, action_dim, executed_steps)
    scale = cfg.init_variance * perturb_factor
    out = []
    for w, rng in zip(workers, rngs):
        if w.id in keep_ids:
            mean = shift_plan(w.dist.mean, action_dim, executed_steps)
        else:
            mean = base + scale * rng.standard_normal(base.size) if scale > 0 else base.copy()
        out.append(WorkerState(DiagGaussian(mean, cfg.init_variance, w.dist.variance_frozen), weight=w.weight, id=w.id))
    return out


def shift_workers(workers: Sequence[WorkerState], cfg: CemConfig, action_dim: int, executed_steps: int = 1) -> list[WorkerState]:
    """Independent warm start: each worker shifts its own plan, variance reset."""
    return [
        WorkerState(
            DiagGaussian(shift_plan(w.dist.mean, action_dim, executed_steps), cfg.init_variance, w.dist.variance_frozen),
            weight=w.weight,
            id=w.id,
        )
        for w in workers
    ]


# -- episodes --------------------------------------------------------------------


@dataclass
class EpisodeRecord:
    mode: str
    states: FloatArray
    actions: FloatArray
    step_costs: FloatArray
    information_radius: FloatArray
    avg_plan_cost: FloatArray
    best_plan_cost: FloatArray
    worker_paths: list[FloatArray] = field(default_factory=list)
    centroid_paths: list[FloatArray] = field(default_factory=list)
    replace_calls: int = 0
    failed: bool = False
    message: str = ""
    wall_s: float = 0.0
    eval_s: float = 0.0
    overhead_s: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def executed_cost(self) -> float:
        return float(np.sum(self.step_costs))

    @property
    def average_cost(self) -> float:
        """Mean over control steps of the workers' average population cost."""
        return float(np.mean(self.avg_plan_cost)) if len(self.avg_plan_cost) else float("nan")

    @property
    def best_cost(self) -> float:
        return float(np.mean(self.best_plan_cost)) if len(self.best_plan_cost) else float("nan")


def mpc_config(**overrides) -> CemConfig:
    """CEM settings for planning: population 100, 10% elites, variance 0.1, trust radius 0.5.

    Initial plans are drawn uniformly inside the unit action box.
    """
    base = dict(
        population_size=100,
        elite_fraction=0.1,
        init_variance=0.1,
        max_iterations=5,
        trust_radius=0.5,
        sampler="proxy",
        init_low=-1.0,
        init_high=1.0,
    )
    base.update(overrides)
    return CemConfig(**base)


def mpc_episode(
    env: RolloutEnv,
    n_workers: int = 5,
    cfg: CemConfig | None = None,
    inner_iters: int = 5,
    replace_period: float = 1,
    seed: int = 0,
    mode: str = "bc",
    horizon: int = 200,
    task_horizon: int = 80,
    perturb_factor: float = 1.0,
    goal_tolerance: float = 0.0,
    record_plans: bool = True,
    on_replace: Callable[[int, FloatArray], None] | None = None,
) -> EpisodeRecord:
    """Run one receding-horizon episode from ``env.start``.

    ``replace_period`` is the number of control steps between score-and-replace
    rounds (``math.inf`` disables replacement; ignored in ``"decent"`` mode).
    The episode stops after ``task_horizon`` steps, when the state is within
    ``goal_tolerance`` of the goal, or when the simulator blows up (then
    ``failed`` is set and the partial record is returned).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if inner_iters < 1:
        raise ValueError("inner_iters must be >= 1")
    if n_workers < 1 or (mode == "bc" and n_workers < 2 and math.isfinite(replace_period)):
        raise ValueError("guided MPC with replacement needs at least two workers")
    if not replace_period >= 1:
        raise ValueError("replace_period must be >= 1 (or inf)")
    cfg = cfg or mpc_config()
    dim = horizon * env.action_dim
    lo = np.tile(env.action_bounds[:, 0], horizon)
    hi = np.tile(env.action_bounds[:, 1], horizon)
    cfg = dataclasses.replace(cfg, bounds=(lo, hi), max_iterations=inner_iters)
    pot = FixedVarianceGaussian.isotropic(dim, cfg.init_variance)
    rngs = [derive_rng(seed, k) for k in range(n_workers)]
    noise_rngs = [derive_rng(seed, PERTURB_STREAM, k) for k in range(n_workers)]

    x = env.start.copy()
    states, actions, step_costs = [x.copy()], [], []
    irs, avg_costs, best_costs = [], [], []
    worker_paths, centroid_paths = [], []
    workers = init_workers(n_workers, dim, cfg, seed)
    centroid: Centroid | None = None
    respawned: frozenset[int] = frozenset()
    replace_calls = 0
    failed, message = False, ""
    wall = eval_s = overhead = 0.0

    for t in range(task_horizon):
        t0 = time.perf_counter()
        if t > 0:
            if mode == "bc":
                workers = warm_start(workers, centroid, cfg, env.action_dim, perturb_factor, noise_rngs, keep_ids=respawned)
            else:
                workers = shift_workers(workers, cfg, env.action_dim)
        t1 = time.perf_counter()
        obj = Objective(lambda plans, x=x: rollout_costs(env, x, plans)[0], vectorized=True)
        try:
            for _ in range(inner_iters):
                workers = [cem_iterate(w, obj, cfg, rngs[k]).worker for k, w in enumerate(workers)]
        except Exception as exc:  # every rollout blew up, or the cost raised
            failed, message = True, f"step {t}: {exc}"
            break
        t2 = time.perf_counter()
        mean_costs = [w.mean_cost for w in workers]
        best = min(workers, key=lambda w: (w.mean_cost, w.id))
        do_replace = mode == "bc" and math.isfinite(replace_period) and t % int(replace_period) == 0
        replaced: list[int] = []

        def note(wid, eta):
            replaced.append(wid)
            if on_replace is not None:
                on_replace(wid, eta)

        centroid = _guided_step(workers, pot, cfg, rngs, do_replace, note, reset_variance=False)
        respawned = frozenset(replaced)
        replace_calls += bool(do_replace)
        t3 = time.perf_counter()

        a = env.clip(best.dist.mean[: env.action_dim])
        x_next = env.step(x, a)
        if not np.all(np.isfinite(x_next)):
            failed, message = True, f"step {t}: state blew up"
            break
        if record_plans:
            plans = np.stack([w.dist.mean for w in workers] + [centroid.eta_c])
            paths = rollout_states(env, x, env.clip(plans.reshape(len(plans), horizon, env.action_dim)))
            worker_paths.append(paths[:-1])
            centroid_paths.append(paths[-1])
        actions.append(a)
        step_costs.append(float(env.step_cost(x[None], a[None])[0]))
        irs.append(centroid.information_radius)
        avg_costs.append(float(np.mean(mean_costs)))
        best_costs.append(float(best.mean_cost))
        wall += time.perf_counter() - t0
        eval_s += obj.seconds
        overhead += (t1 - t0) + (t3 - t2)
        x = x_next
        states.append(x.copy())
        if goal_tolerance > 0 and np.linalg.norm(x - env.goal) <= goal_tolerance:
            break

    return EpisodeRecord(
        mode=mode,
        states=np.array(states),
        actions=np.array(actions).reshape(-1, env.action_dim),
        step_costs=np.array(step_costs),
        information_radius=np.array(irs),
        avg_plan_cost=np.array(avg_costs),
        best_plan_cost=np.array(best_costs),
        worker_paths=worker_paths,
        centroid_paths=centroid_paths,
        replace_calls=replace_calls,
        failed=failed,
        message=message,
        wall_s=wall,
        eval_s=eval_s,
        overhead_s=overhead,
    )


def normalized_costs(guided: EpisodeRecord, baseline: EpisodeRecord) -> tuple[float, float]:
    """``(average, best)`` cost of ``guided`` divided by the paired baseline's."""
    return guided.average_cost / baseline.average_cost, guided.best_cost / baseline.best_cost
