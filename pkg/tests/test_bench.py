import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize

from bcevocem.bench import (
    CSV_HEADER,
    SpecError,
    UnsupportedEnvError,
    emit_trajectory_svg,
    load_config,
    read_csv,
    run_benchmark,
    summarize,
    synthetic_cost,
    synthetic_preset,
)
from bcevocem.bench.cli import main
from bcevocem.bench.config import BenchmarkSpec, navigation_preset, parse_obstacles, parse_seeds
from bcevocem.bench.runner import compare, expected_evaluations, format_csv
from bcevocem.cem import CemConfig
from bcevocem.mpc import Circle, EpisodeRecord, RolloutEnv, mpc_config, mpc_episode, point_mass_env

from oracles import grid_minima

DATA = Path(__file__).parent / "data"
SVG = "{http://www.w3.org/2000/svg}"


def tiny_spec(tmp_path, **kw):
    cfg = CemConfig(population_size=30, init_variance=0.25, fixed_variance=True, max_iterations=6,
                    init_low=-3, init_high=3)
    base = dict(seeds=[0, 1, 2], cfg=cfg, out_dir=tmp_path, probe_iteration=6)
    base.update(kw)
    return synthetic_preset(**base)


# -- objectives -----------------------------------------------------------------


def test_synthetic_cost_hand_values():
    assert synthetic_cost([0.0, 0.0]) == 1.0
    assert synthetic_cost([math.pi / 2, 0.0]) == pytest.approx(0.5 * (math.pi / 2) ** 2, abs=1e-12)
    assert synthetic_cost([math.pi / 2, 0.0]) == pytest.approx(1.2337, abs=1e-4)


def test_synthetic_cost_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        synthetic_cost([0.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def grid_minimum():
    return json.loads((DATA / "synthetic_grid_minimum.json").read_text())


def test_grid_fixture_matches_fresh_grid_search(grid_minimum):
    gx, gy, vals = grid_minima(lambda x, y: np.sin(3 * x) + np.cos(3 * y) + 0.5 * (x * x + y * y))
    assert vals.min() == pytest.approx(grid_minimum["value"], abs=1e-12)
    assert synthetic_cost(grid_minimum["x"]) == pytest.approx(grid_minimum["value"], abs=1e-12)


def test_global_minimum_refines_grid_value(grid_minimum):
    res = minimize(synthetic_cost, grid_minimum["x"], method="BFGS", options={"gtol": 1e-10})
    # grid spacing 3e-3 bounds the refinement
    assert res.fun <= grid_minimum["value"]
    assert res.fun == pytest.approx(grid_minimum["value"], abs=1e-4)
    np.testing.assert_allclose(res.x, grid_minimum["x"], atol=3e-3)


# -- config ----------------------------------------------------------------------


def test_parse_seeds_ranges_and_lists():
    assert parse_seeds("0-3,7, 9-10") == [0, 1, 2, 3, 7, 9, 10]
    for bad in ("", "a", "5-2"):
        with pytest.raises(SpecError):
            parse_seeds(bad)


def test_parse_obstacles():
    assert parse_obstacles("1 2 0.5; 3 4 1") == (Circle((1.0, 2.0), 0.5), Circle((3.0, 4.0), 1.0))
    with pytest.raises(SpecError):
        parse_obstacles("1 2")


def test_spec_lists_every_invalid_field():
    with pytest.raises(SpecError) as err:
        BenchmarkSpec("x", "rosenbrock", "cma", 2, [], CemConfig())
    msg = str(err.value)
    assert "objective" in msg and "optimizer" in msg and "seeds" in msg


def test_load_config_overrides_preset(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[benchmark]\nname = trial\nseeds = 0-2\nworkers = 4\noptimizer = decent\n"
        "[cem]\ntrust_radius = 0.25\nmax_iterations = 7\nfixed_variance = no\n"
    )
    spec = load_config(path)
    assert (spec.name, spec.seeds, spec.n_workers, spec.optimizer) == ("trial", [0, 1, 2], 4, "decent")
    assert spec.cfg.trust_radius == 0.25 and spec.cfg.max_iterations == 7 and spec.cfg.fixed_variance is False
    assert spec.cfg.population_size == 100


def test_load_config_navigation_section(tmp_path):
    path = tmp_path / "nav.ini"
    path.write_text("[benchmark]\nobjective = navigation\n[navigation]\nreplace_period = inf\nobstacles = 5 5 1\n")
    spec = load_config(path)
    assert spec.navigation.replace_period == math.inf
    assert spec.navigation.obstacles == (Circle((5.0, 5.0), 1.0),)
    assert spec.cfg.init_variance == 0.1 and spec.cfg.max_iterations == 5


@pytest.mark.parametrize("text", ["[cem]\nbogus = 1\n", "[extra]\na = 1\n", "[benchmark]\nworkers = many\n",
                                  "[cem]\nelite_fraction = 2\n"])
def test_load_config_rejects_bad_files(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(SpecError):
        load_config(path)


def test_presets_match_documented_defaults():
    s = synthetic_preset()
    assert (s.n_workers, s.cfg.population_size, s.cfg.max_iterations, len(s.seeds)) == (5, 100, 25, 50)
    n = navigation_preset()
    assert (n.n_workers, n.navigation.horizon, n.cfg.elite_fraction, n.cfg.init_variance) == (5, 200, 0.1, 0.1)


# -- metrics pipeline -------------------------------------------------------------


def test_csv_header_matches_golden_file(tmp_path):
    spec = tiny_spec(tmp_path)
    run_benchmark(spec)
    first = spec.csv_path.read_bytes().split(b"\n", 1)[0] + b"\n"
    assert first == (DATA / "metrics_header.csv").read_bytes()
    assert ",".join(CSV_HEADER) + "\n" == first.decode()


def test_csv_rows_and_line_endings(tmp_path):
    spec = tiny_spec(tmp_path)
    run_benchmark(spec)
    raw = spec.csv_path.read_bytes()
    assert b"\r" not in raw
    rows = read_csv(spec.csv_path)
    assert len(rows) == len(spec.seeds) * spec.cfg.max_iterations
    assert all(r.wall_ms is None for r in rows)


def test_same_spec_gives_byte_identical_csv(tmp_path):
    a = tiny_spec(tmp_path / "a")
    b = tiny_spec(tmp_path / "b")
    run_benchmark(a)
    run_benchmark(b)
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()


def test_best_cost_is_monotone_per_seed(tmp_path):
    for opt in ("vanilla", "decent", "bc-evocem"):
        res = run_benchmark(tiny_spec(tmp_path, optimizer=opt), write=False)
        for seed in res.spec.seeds:
            best = [r.best_cost for r in res.rows if r.seed == seed]
            assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))


@pytest.mark.parametrize("optimizer", ["vanilla", "decent", "bc-evocem"])
def test_budget_parity(tmp_path, optimizer):
    spec = tiny_spec(tmp_path, optimizer=optimizer)
    res = run_benchmark(spec, write=False)
    budget = res.summary["budget"]
    assert budget["parity"] and budget["expected_per_seed"] == 5 * 30 * 6 == expected_evaluations(spec)
    assert set(budget["evaluations"].values()) == {900}


def test_summary_recomputes_from_csv(tmp_path):
    spec = tiny_spec(tmp_path)
    res = run_benchmark(spec)
    stored = json.loads(spec.summary_path.read_text())
    again = summarize(read_csv(spec.csv_path), spec.probe_iteration)
    for key in ("per_iteration", "final_best_cost", "final_mean_cost", "ir_at_probe"):
        assert again[key] == stored[key] == res.summary[key]
    # independent fold for one iteration
    it3 = [r for r in read_csv(spec.csv_path) if r.iteration == 3]
    row = next(p for p in stored["per_iteration"] if p["iteration"] == 3)
    assert row["best_cost"]["mean"] == pytest.approx(sum(r.best_cost for r in it3) / len(it3), rel=1e-15)
    assert row["ir"]["std"] == pytest.approx(np.std([r.ir for r in it3]), rel=1e-12)


def test_timing_fills_wall_ms(tmp_path):
    res = run_benchmark(tiny_spec(tmp_path, timing=True), write=False)
    assert all(r.wall_ms is not None and r.wall_ms >= 0 for r in res.rows)
    assert "wall_ms" in format_csv(res.rows).splitlines()[0]


def test_compare_reports_paired_statistics(tmp_path):
    out = compare(tiny_spec(tmp_path), "bc-evocem", "vanilla", write=False)
    assert out["a"] == "bc-evocem" and 0.0 <= out["a_not_worse_fraction"] <= 1.0
    assert out["b_ir_at_probe"]["mean"] == 0.0


def test_write_failure_surfaces_as_os_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        run_benchmark(tiny_spec(blocker / "sub"))


# -- SVG -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def short_episode():
    env = point_mass_env()
    rec = mpc_episode(env, n_workers=3, cfg=mpc_config(population_size=30), inner_iters=2, horizon=15,
                      task_horizon=4, seed=0)
    return env, rec


def _parse(path):
    return ET.parse(path).getroot()


def test_svg_of_empty_episode_has_layout_only(tmp_path):
    env = point_mass_env()
    empty = EpisodeRecord("bc", np.empty((0, 2)), np.empty((0, 2)), *(np.empty(0),) * 4)
    for rec in (None, empty):
        root = _parse(emit_trajectory_svg(rec, env, tmp_path / "empty.svg"))
        assert len(root.find(f"{SVG}g[@id='obstacles']")) == len(env.obstacles)
        assert root.find(f".//{SVG}circle[@id='start']") is not None
        assert root.find(f".//{SVG}circle[@id='goal']") is not None
        assert root.findall(f".//{SVG}polyline") == []


def test_svg_round_trips_and_counts_vertices(tmp_path, short_episode):
    env, rec = short_episode
    path = emit_trajectory_svg(rec, env, tmp_path / "ep.svg")
    root = _parse(path)
    assert root.tag == f"{SVG}svg" and root.get("version") == "1.1"
    executed = root.find(f"{SVG}polyline[@id='executed-path']")
    assert len(executed.get("points").split()) == len(rec.states)
    centroid = root.find(f"{SVG}polyline[@id='centroid-path']")
    assert centroid.get("stroke-dasharray")
    assert len(root.find(f"{SVG}g[@id='worker-plans']")) == 3


def test_svg_rejects_non_planar_env(tmp_path):
    env3 = RolloutEnv(3, 3, 0.1, lambda x, u: x + u, lambda x, u: 0.0, lambda x: 0.0, [],
                      np.zeros(3), np.zeros(3), [[-1, 1]] * 3)
    with pytest.raises(UnsupportedEnvError):
        emit_trajectory_svg(None, env3, tmp_path / "x.svg")


# -- CLI -------------------------------------------------------------------------


def test_cli_synthetic_writes_outputs(tmp_path, capsys):
    code = main(["synthetic", "--seeds", "0-1", "--iters", "3", "--workers", "3", "--delta", "0.3",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "synthetic_bc-evocem.csv")
    assert {r.seed for r in rows} == {0, 1} and max(r.iteration for r in rows) == 3
    assert (tmp_path / "synthetic_bc-evocem_summary.json").exists()


def test_cli_config_file(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[benchmark]\nname = cfgrun\nseeds = 4\n[cem]\nmax_iterations = 2\npopulation_size = 20\n")
    assert main(["synthetic", "--config", str(ini), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "cfgrun_bc-evocem.csv")
    assert [r.seed for r in rows] == [4, 4]


def test_cli_navigate_with_svg(tmp_path):
    ini = tmp_path / "n.ini"
    ini.write_text("[navigation]\nhorizon = 10\ntask_horizon = 3\n[cem]\npopulation_size = 20\n")
    svg = tmp_path / "traj.svg"
    code = main(["navigate", "--config", str(ini), "--seed", "1", "--iters", "1", "--out", str(tmp_path),
                 "--svg", str(svg)])
    assert code == 0 and svg.exists()
    assert len(read_csv(tmp_path / "navigation_bc-evocem.csv")) == 3


@pytest.mark.parametrize("argv", [[], ["fly"], ["synthetic", "--bogus"], ["synthetic", "--workers", "x"],
                                  ["synthetic", "--workers", "1"], ["synthetic", "--seeds", "9-1"],
                                  ["synthetic", "--delta", "-1"]])
def test_cli_usage_errors_exit_1(argv, tmp_path, capsys):
    assert main(argv + (["--out", str(tmp_path)] if argv and argv[0] == "synthetic" else [])) == 1


def test_cli_runtime_failure_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["synthetic", "--seed", "0", "--iters", "1", "--out", str(blocker / "x")]) == 2


def test_cli_sampler_check_exit_codes(monkeypatch, capsys):
    from bcevocem import checks

    assert main(["sampler-check", "--draws", "2000"]) == 0
    assert "PASS" in capsys.readouterr().out
    monkeypatch.setattr(checks, "run_all", lambda n: [checks.CheckResult("forced", False, "x")])
    assert main(["sampler-check"]) == 3
