"""Benchmark objectives, configuration, metrics pipeline, SVG output and CLI."""

from __future__ import annotations

from .config import (
    OBJECTIVE_IDS,
    OPTIMIZER_IDS,
    BenchmarkSpec,
    NavigationSettings,
    SpecError,
    load_config,
    navigation_preset,
    synthetic_preset,
)
from .objectives import OBJECTIVES, quadratic_cost, synthetic_cost
from .runner import CSV_HEADER, MetricsRow, compare, read_csv, run_benchmark, summarize
from .svg import UnsupportedEnvError, emit_trajectory_svg

__all__ = [
    "CSV_HEADER",
    "OBJECTIVES",
    "OBJECTIVE_IDS",
    "OPTIMIZER_IDS",
    "BenchmarkSpec",
    "MetricsRow",
    "NavigationSettings",
    "SpecError",
    "UnsupportedEnvError",
    "compare",
    "emit_trajectory_svg",
    "load_config",
    "navigation_preset",
    "quadratic_cost",
    "read_csv",
    "run_benchmark",
    "summarize",
    "synthetic_cost",
    "synthetic_preset",
]
