"""Command-line entry point: ``bcevocem {synthetic,navigate,compare,sampler-check}``.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 failed sampler check.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .. import checks
from ..mpc import point_mass_env
from .config import OPTIMIZER_IDS, BenchmarkSpec, SpecError, load_config, navigation_preset, parse_seeds, synthetic_preset
from .runner import compare, run_benchmark, run_navigation
from .svg import emit_trajectory_svg

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; 2 is reserved for runtime failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI file overriding the preset")
    p.add_argument("--seed", type=int, help="run a single seed")
    p.add_argument("--seeds", help="seed list such as 0-49 or 0,3,7")
    p.add_argument("--workers", type=int, help="number of CEM workers n")
    p.add_argument("--iters", type=int, help="CEM iterations T (inner iterations for navigation)")
    p.add_argument("--delta", type=float, help="trust-region radius")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bcevocem", description="Bregman-centroid guided CEM benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthetic", help="multimodal 2-D benchmark")
    _common(p)
    p.add_argument("--optimizer", choices=OPTIMIZER_IDS, default="bc-evocem")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")

    p = sub.add_parser("navigate", help="point-mass navigation with MPC")
    _common(p)
    p.add_argument("--optimizer", choices=OPTIMIZER_IDS, default="bc-evocem")
    p.add_argument("--svg", type=Path, help="write the first seed's trajectory plot here")

    p = sub.add_parser("compare", help="paired-seed A/B of two optimizers")
    _common(p)
    p.add_argument("--objective", choices=("synthetic", "navigation"), default="synthetic")
    p.add_argument("--a", choices=OPTIMIZER_IDS, default="bc-evocem")
    p.add_argument("--b", choices=OPTIMIZER_IDS, default="decent")

    p = sub.add_parser("sampler-check", help="statistical checks of the trust-region samplers")
    p.add_argument("--draws", type=int, default=10_000)
    return parser


def _spec(args, preset) -> BenchmarkSpec:
    spec = load_config(args.config, base=preset) if args.config else preset
    kw: dict = {}
    if args.seeds is not None:
        kw["seeds"] = parse_seeds(args.seeds)
    if args.seed is not None:
        kw["seeds"] = [args.seed]
    if args.workers is not None:
        kw["n_workers"] = args.workers
    if args.out is not None:
        kw["out_dir"] = args.out
    cfg_kw = {}
    if args.iters is not None:
        cfg_kw["max_iterations"] = args.iters
    if args.delta is not None:
        cfg_kw["trust_radius"] = args.delta
    if cfg_kw:
        try:
            kw["cfg"] = dataclasses.replace(spec.cfg, **cfg_kw)
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
    if getattr(args, "optimizer", None):
        kw["optimizer"] = args.optimizer
    if getattr(args, "timing", False):
        kw["timing"] = True
    return dataclasses.replace(spec, **kw) if kw else spec


def _report(summary: dict) -> None:
    out = {k: summary[k] for k in ("name", "optimizer", "final_best_cost", "final_mean_cost", "ir_at_probe",
                                   "budget", "average_cost") if k in summary}
    print(json.dumps(out, indent=2, sort_keys=True))


def _cmd_synthetic(args) -> int:
    res = run_benchmark(_spec(args, synthetic_preset()))
    _report(res.summary)
    print(f"wrote {res.spec.csv_path}")
    return EXIT_OK


def _cmd_navigate(args) -> int:
    spec = _spec(args, navigation_preset())
    res = run_benchmark(spec)
    _report(res.summary)
    print(f"wrote {spec.csv_path}")
    if args.svg:
        seed = spec.seeds[0]
        rec = run_navigation(spec, seed, record_plans=True)
        emit_trajectory_svg(rec, point_mass_env(obstacles=spec.navigation.obstacles), args.svg)
        print(f"wrote {args.svg}")
    failed = [s for s, e in res.summary["episodes"].items() if e["failed"]]
    if failed:
        print(f"episodes failed for seeds {failed}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_compare(args) -> int:
    preset = navigation_preset() if args.objective == "navigation" else synthetic_preset()
    spec = _spec(args, preset)
    print(json.dumps(compare(spec, args.a, args.b), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_sampler_check(args) -> int:
    results = checks.run_all(args.draws)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


COMMANDS = {"synthetic": _cmd_synthetic, "navigate": _cmd_navigate, "compare": _cmd_compare,
            "sampler-check": _cmd_sampler_check}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except SpecError as exc:
        print(f"bcevocem: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bcevocem: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failure
        logging.getLogger(__name__).debug("runtime failure", exc_info=True)
        print(f"bcevocem: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
