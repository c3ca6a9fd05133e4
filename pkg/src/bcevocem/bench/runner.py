"""Run a benchmark spec over its seeds and write the metrics CSV and summary JSON."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..cem import EnsembleState, Objective, bc_evocem_run, decentralized_run, vanilla_run
from ..mpc import EpisodeRecord, mpc_episode, point_mass_env
from .config import BenchmarkSpec
from .objectives import OBJECTIVES

log = logging.getLogger(__name__)

CSV_HEADER = ("seed", "iteration", "best_cost", "mean_cost", "ir", "wall_ms")


@dataclass
class MetricsRow:
    seed: int
    iteration: int
    best_cost: float
    mean_cost: float
    ir: float
    wall_ms: float | None = None

    def cells(self) -> list[str]:
        wall = "" if self.wall_ms is None else f"{self.wall_ms:.3f}"
        return [str(self.seed), str(self.iteration), repr(self.best_cost), repr(self.mean_cost), repr(self.ir), wall]


@dataclass
class BenchmarkResult:
    spec: BenchmarkSpec
    rows: list[MetricsRow]
    summary: dict
    runs: dict[int, EnsembleState | EpisodeRecord] = field(default_factory=dict)


def expected_evaluations(spec: BenchmarkSpec) -> int:
    """``n * N * T``; vanilla CEM gets a single population of size ``n * N``."""
    return spec.n_workers * spec.cfg.population_size * spec.cfg.max_iterations


def _run_cem(spec: BenchmarkSpec, seed: int) -> tuple[EnsembleState, int]:
    obj = Objective(OBJECTIVES[spec.objective])
    if spec.optimizer == "vanilla":
        cfg = dataclasses.replace(spec.cfg, population_size=spec.n_workers * spec.cfg.population_size)
        state = vanilla_run(obj, spec.dimension, cfg, seed)
    elif spec.optimizer == "decent":
        state = decentralized_run(spec.n_workers, obj, spec.dimension, spec.cfg, seed)
    else:
        state = bc_evocem_run(spec.n_workers, obj, spec.dimension, spec.cfg, seed)
    return state, obj.evaluations


def run_navigation(spec: BenchmarkSpec, seed: int, record_plans: bool = False) -> EpisodeRecord:
    nav = spec.navigation
    env = point_mass_env(obstacles=nav.obstacles)
    mode = "bc" if spec.optimizer == "bc-evocem" else "decent"
    n = 1 if spec.optimizer == "vanilla" else spec.n_workers
    cfg = spec.cfg
    if spec.optimizer == "vanilla":
        cfg = dataclasses.replace(cfg, population_size=spec.n_workers * cfg.population_size)
    return mpc_episode(
        env,
        n_workers=n,
        cfg=cfg,
        inner_iters=cfg.max_iterations,
        replace_period=nav.replace_period,
        seed=seed,
        mode=mode,
        horizon=nav.horizon,
        task_horizon=nav.task_horizon,
        perturb_factor=nav.perturb_factor,
        record_plans=record_plans,
    )


def _cem_rows(seed: int, state: EnsembleState, timing: bool) -> list[MetricsRow]:
    return [
        MetricsRow(seed, h.iteration, h.best_cost, h.mean_cost, h.information_radius, h.wall_s * 1e3 if timing else None)
        for h in state.history
    ]


def _episode_rows(seed: int, rec: EpisodeRecord) -> list[MetricsRow]:
    # best_cost is the best plan cost seen so far in the episode
    best = np.minimum.accumulate(rec.best_plan_cost) if len(rec.best_plan_cost) else []
    return [
        MetricsRow(seed, t + 1, float(best[t]), float(rec.avg_plan_cost[t]), float(rec.information_radius[t]))
        for t in range(len(rec.best_plan_cost))
    ]


def format_csv(rows: Iterable[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(r.cells())
    return buf.getvalue()


def read_csv(path: str | Path) -> list[MetricsRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [
            MetricsRow(int(s), int(i), float(b), float(m), float(ir), float(w) if w else None)
            for s, i, b, m, ir, w in reader
        ]


def _mean_std(values) -> dict:
    a = np.asarray(values, dtype=np.float64)
    return {"mean": float(a.mean()), "std": float(a.std())}


def summarize(rows: list[MetricsRow], probe_iteration: int) -> dict:
    """Per-iteration mean and (population) std across seeds, plus the probe-iteration IR.

    A pure fold over the rows, so it can be recomputed from the CSV alone.
    """
    by_iter: dict[int, list[MetricsRow]] = {}
    for r in rows:
        by_iter.setdefault(r.iteration, []).append(r)
    per_iter = []
    for it in sorted(by_iter):
        group = by_iter[it]
        per_iter.append({
            "iteration": it,
            "seeds": len(group),
            "best_cost": _mean_std([r.best_cost for r in group]),
            "mean_cost": _mean_std([r.mean_cost for r in group]),
            "ir": _mean_std([r.ir for r in group]),
        })
    last = {}
    for r in rows:
        if r.seed not in last or r.iteration > last[r.seed].iteration:
            last[r.seed] = r
    probe = [r.ir for r in rows if r.iteration == probe_iteration]
    return {
        "per_iteration": per_iter,
        "final_best_cost": _mean_std([r.best_cost for r in last.values()]) if last else None,
        "final_mean_cost": _mean_std([r.mean_cost for r in last.values()]) if last else None,
        "probe_iteration": probe_iteration,
        "ir_at_probe": _mean_std(probe) if probe else None,
    }


def run_benchmark(spec: BenchmarkSpec, write: bool = True, keep_runs: bool = False) -> BenchmarkResult:
    """Run every seed, then write ``spec.csv_path`` and ``spec.summary_path``."""
    rows: list[MetricsRow] = []
    runs: dict = {}
    audit = {}
    episodes = {}
    for seed in spec.seeds:
        if spec.objective == "navigation":
            rec = run_navigation(spec, seed)
            rows += _episode_rows(seed, rec)
            episodes[str(seed)] = {
                "average_cost": rec.average_cost,
                "best_cost": rec.best_cost,
                "executed_cost": rec.executed_cost,
                "steps": rec.steps,
                "failed": rec.failed,
                "final_distance": float(np.linalg.norm(rec.states[-1] - point_mass_env().goal)),
            }
            result = rec
        else:
            state, evals = _run_cem(spec, seed)
            rows += _cem_rows(seed, state, spec.timing)
            audit[str(seed)] = evals
            result = state
        if keep_runs:
            runs[seed] = result
        log.info("%s/%s seed %d done", spec.name, spec.optimizer, seed)

    summary = summarize(rows, spec.probe_iteration)
    summary.update({"name": spec.name, "objective": spec.objective, "optimizer": spec.optimizer,
                    "workers": spec.n_workers, "seeds": list(spec.seeds)})
    if spec.objective == "navigation":
        summary["episodes"] = episodes
        summary["average_cost"] = _mean_std([e["average_cost"] for e in episodes.values()])
    else:
        expected = expected_evaluations(spec)
        summary["budget"] = {
            "expected_per_seed": expected,
            "evaluations": audit,
            "parity": all(v == expected for v in audit.values()),
        }
    if write:
        spec.out_dir.mkdir(parents=True, exist_ok=True)
        with open(spec.csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(rows))
        with open(spec.summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return BenchmarkResult(spec, rows, summary, runs)


def compare(spec: BenchmarkSpec, a: str, b: str, write: bool = True) -> dict:
    """Paired-seed A/B of two optimizer ids on the same spec.

    For CEM objectives the per-seed statistic is the final best cost; for
    navigation it is the episode's average plan cost, reported normalised by
    ``b``.
    """
    ra = run_benchmark(spec.with_optimizer(a), write=write)
    rb = run_benchmark(spec.with_optimizer(b), write=write)
    if spec.objective == "navigation":
        ea, eb = ra.summary["episodes"], rb.summary["episodes"]
        norm = {s: ea[s]["average_cost"] / eb[s]["average_cost"] for s in ea}
        vals = np.array(list(norm.values()))
        return {
            "a": a, "b": b, "statistic": "normalized average cost (a / b)",
            "per_seed": norm, "a_better_fraction": float(np.mean(vals < 1.0)), "mean": float(vals.mean()),
        }
    fa = {r.seed: r.best_cost for r in ra.rows if r.iteration == spec.cfg.max_iterations}
    fb = {r.seed: r.best_cost for r in rb.rows if r.iteration == spec.cfg.max_iterations}
    wins = [fa[s] <= fb[s] for s in fa]
    return {
        "a": a, "b": b, "statistic": "final best cost",
        "a_mean": float(np.mean(list(fa.values()))), "b_mean": float(np.mean(list(fb.values()))),
        "a_not_worse_fraction": float(np.mean(wins)),
        "a_ir_at_probe": ra.summary["ir_at_probe"], "b_ir_at_probe": rb.summary["ir_at_probe"],
    }
