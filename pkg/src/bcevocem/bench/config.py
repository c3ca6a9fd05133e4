"""Benchmark specifications and their INI-style config files.

A config file has up to three sections. Every key is optional; missing keys
keep the preset for the chosen objective::

    [benchmark]
    name = synthetic
    objective = synthetic-multimodal   ; or quadratic, navigation
    optimizer = bc-evocem              ; or decent, vanilla
    dimension = 2
    seeds = 0-49                       ; ranges and comma lists
    workers = 5
    probe_iteration = 25
    out = results

    [cem]
    population_size = 100
    elite_fraction = 0.1
    init_variance = 0.1
    max_iterations = 5
    trust_radius = 0.5
    ...

    [navigation]
    horizon = 200
    task_horizon = 80
    replace_period = 1                 ; "inf" disables replacement
    perturb_factor = 1.0
    obstacles = 2.5 2.5 1.0; 5 5 1.2   ; x y radius per circle
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..cem import CemConfig
from ..mpc import DEFAULT_OBSTACLES, Circle, mpc_config

OBJECTIVE_IDS = ("synthetic-multimodal", "quadratic", "navigation")
OPTIMIZER_IDS = ("vanilla", "decent", "bc-evocem")


class SpecError(ValueError):
    pass


@dataclass
class NavigationSettings:
    horizon: int = 200
    task_horizon: int = 80
    replace_period: float = 1
    perturb_factor: float = 1.0
    obstacles: tuple[Circle, ...] = DEFAULT_OBSTACLES


@dataclass
class BenchmarkSpec:
    name: str
    objective: str
    optimizer: str
    dimension: int
    seeds: list[int]
    cfg: CemConfig
    n_workers: int = 5
    probe_iteration: int = 25
    out_dir: Path = Path("results")
    timing: bool = False
    navigation: NavigationSettings = field(default_factory=NavigationSettings)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        errors = []
        if self.objective not in OBJECTIVE_IDS:
            errors.append(f"objective must be one of {OBJECTIVE_IDS}, got {self.objective!r}")
        if self.optimizer not in OPTIMIZER_IDS:
            errors.append(f"optimizer must be one of {OPTIMIZER_IDS}, got {self.optimizer!r}")
        if not self.seeds:
            errors.append("seeds must be non-empty")
        if self.n_workers < 1:
            errors.append("workers must be >= 1")
        if self.optimizer == "bc-evocem" and self.n_workers < 2:
            errors.append("bc-evocem needs at least two workers")
        if self.dimension < 1:
            errors.append("dimension must be >= 1")
        if self.objective == "synthetic-multimodal" and self.dimension != 2:
            errors.append("synthetic-multimodal is two-dimensional")
        if errors:
            raise SpecError("invalid benchmark spec: " + "; ".join(errors))

    @property
    def csv_path(self) -> Path:
        return self.out_dir / f"{self.name}_{self.optimizer}.csv"

    @property
    def summary_path(self) -> Path:
        return self.out_dir / f"{self.name}_{self.optimizer}_summary.json"

    def with_optimizer(self, optimizer: str) -> BenchmarkSpec:
        return dataclasses.replace(self, optimizer=optimizer)


def synthetic_preset(**overrides) -> BenchmarkSpec:
    """The multimodal 2-D task: ``N(theta, 0.5^2 I)`` workers, n=5, N=100, T=25, 50 seeds."""
    cfg = CemConfig(
        population_size=100,
        elite_fraction=0.1,
        init_variance=0.25,
        fixed_variance=True,
        max_iterations=25,
        trust_radius=0.5,
        init_low=-3.0,
        init_high=3.0,
    )
    base = dict(name="synthetic", objective="synthetic-multimodal", optimizer="bc-evocem", dimension=2,
                seeds=list(range(50)), cfg=cfg)
    base.update(overrides)
    return BenchmarkSpec(**base)


def navigation_preset(**overrides) -> BenchmarkSpec:
    """Point-mass navigation: 5 workers, H=200, dt=0.2, 20 seeds."""
    base = dict(name="navigation", objective="navigation", optimizer="bc-evocem", dimension=2,
                seeds=list(range(20)), cfg=mpc_config())
    base.update(overrides)
    return BenchmarkSpec(**base)


def parse_seeds(text: str) -> list[int]:
    """``"0-4,7,9-10"`` -> ``[0, 1, 2, 3, 4, 7, 9, 10]``."""
    seeds: list[int] = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                a, b = int(lo), int(hi)
                if b < a:
                    raise SpecError(f"empty seed range {part!r}")
                seeds.extend(range(a, b + 1))
            else:
                seeds.append(int(part))
        except ValueError as exc:
            raise SpecError(f"bad seed list {text!r}") from exc
    if not seeds:
        raise SpecError("seed list is empty")
    return seeds


def parse_obstacles(text: str) -> tuple[Circle, ...]:
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = chunk.split()
        if len(vals) != 3:
            raise SpecError(f"obstacle needs 'x y radius', got {chunk.strip()!r}")
        x, y, r = map(float, vals)
        out.append(Circle((x, y), r))
    return tuple(out)


def _coerce(raw: str, like):
    if isinstance(like, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise SpecError(f"expected a boolean, got {raw!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if raw.lower() == "adaptive":
        return raw.lower()
    try:
        return float(raw)
    except ValueError:
        return raw


def load_config(path: str | Path, base: BenchmarkSpec | None = None) -> BenchmarkSpec:
    """Read an INI file on top of ``base`` (or the preset its objective selects)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path, encoding="utf-8"):
        raise SpecError(f"cannot read config file {path}")
    known = {"benchmark", "cem", "navigation"}
    extra = set(parser.sections()) - known
    if extra:
        raise SpecError(f"unknown config sections: {sorted(extra)}")

    bench = dict(parser["benchmark"]) if parser.has_section("benchmark") else {}
    if base is None:
        objective = bench.get("objective", "synthetic-multimodal")
        base = navigation_preset() if objective == "navigation" else synthetic_preset(objective=objective)

    cfg_kw = {}
    if parser.has_section("cem"):
        defaults = dataclasses.asdict(base.cfg)
        for key, raw in parser["cem"].items():
            if key not in defaults:
                raise SpecError(f"unknown [cem] key {key!r}")
            if key == "bounds":
                lo, hi = map(float, raw.split())
                cfg_kw[key] = (lo, hi)
            else:
                cfg_kw[key] = _coerce(raw, defaults[key] if defaults[key] is not None else "")
    try:
        cfg = dataclasses.replace(base.cfg, **cfg_kw)
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from exc

    nav = base.navigation
    if parser.has_section("navigation"):
        nav_kw = {}
        for key, raw in parser["navigation"].items():
            if key == "obstacles":
                nav_kw[key] = parse_obstacles(raw)
            elif key == "replace_period":
                nav_kw[key] = math.inf if raw.strip().lower() in ("inf", "never") else int(raw)
            elif key in ("horizon", "task_horizon"):
                nav_kw[key] = int(raw)
            elif key == "perturb_factor":
                nav_kw[key] = float(raw)
            else:
                raise SpecError(f"unknown [navigation] key {key!r}")
        nav = dataclasses.replace(nav, **nav_kw)

    spec_kw = {"cfg": cfg, "navigation": nav}
    mapping = {"name": str, "objective": str, "optimizer": str, "dimension": int, "workers": int,
               "probe_iteration": int, "out": Path, "seeds": parse_seeds, "timing": lambda v: _coerce(v, True)}
    for key, raw in bench.items():
        if key not in mapping:
            raise SpecError(f"unknown [benchmark] key {key!r}")
        field_name = {"workers": "n_workers", "out": "out_dir"}.get(key, key)
        try:
            spec_kw[field_name] = mapping[key](raw)
        except ValueError as exc:
            raise SpecError(f"bad value for {key}: {raw!r}") from exc
    return dataclasses.replace(base, **spec_kw)
