"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 degenerate
population halt.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import apply_overrides, default_config_dict, load_config
from .errors import ConfigError, DegeneratePopulationError, EvoSynthError

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_DEGENERATE = 0, 1, 2, 3


def _add_common(p):
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--mode", choices=("asexual", "sexual"))
    p.add_argument("--generations", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evosynth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("train-ancestor", help="train generation-1 ancestor genome(s)"))
    p = sub.add_parser("evolve", help="run or resume an evolution experiment")
    _add_common(p)
    p.add_argument("--seeds", help="comma-separated master seeds; each runs into <out>/seed-<s>")
    p = sub.add_parser("report", help="summarize run directories")
    p.add_argument("run_dir")
    p.add_argument("--thresholds", default="0.03,0.10", help="accuracy drops to flag (absolute fractions)")
    p.add_argument("--no-figures", action="store_true")
    sub.add_parser("default-config", help="print the default config as JSON")
    return parser


def _config(args):
    cfg = load_config(args.config)
    return apply_overrides(cfg, out=args.out, seed=args.seed, mode=args.mode, generations=args.generations)


def _cmd_train_ancestor(args) -> int:
    from .experiment import run_train_ancestor

    manifest = run_train_ancestor(_config(args))
    for a in manifest["ancestors"]:
        print(f"{a['genome']}: accuracy {a['accuracy']:.4f}, {a['synapse_count']} synapses, "
              f"{a['kernel_count']} kernels")
    return EXIT_OK


def _cmd_evolve(args) -> int:
    from pathlib import Path

    from .experiment import evolve

    cfg = _config(args)
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise ConfigError("--seeds", "expected comma-separated integers") from None
        configs = [cfg.replace(seed=s, output_dir=str(Path(cfg.output_dir) / f"seed-{s}")) for s in seeds]
    else:
        configs = [cfg]
    status = EXIT_OK
    for c in configs:
        try:
            manifest = evolve(c)
        except KeyboardInterrupt:
            print(f"interrupted; completed generations are saved in {c.output_dir}", file=sys.stderr)
            return EXIT_RUNTIME
        except DegeneratePopulationError as exc:
            print(f"{c.output_dir}: halted: {exc}", file=sys.stderr)
            status = EXIT_DEGENERATE
            continue
        print(f"{c.output_dir}: {manifest['completed_generations']} generations ({c.mode})")
    return status


def _cmd_report(args) -> int:
    from .report import report

    try:
        thresholds = tuple(float(t) for t in args.thresholds.split(",") if t.strip())
    except ValueError:
        raise ConfigError("--thresholds", "expected comma-separated numbers") from None
    for s in report(args.run_dir, thresholds, figures=not args.no_figures):
        print(s.table())
        print()
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    handlers = {"train-ancestor": _cmd_train_ancestor, "evolve": _cmd_evolve, "report": _cmd_report}
    try:
        if args.command == "default-config":
            print(json.dumps(default_config_dict(), indent=2))
            return EXIT_OK
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DegeneratePopulationError as exc:
        print(f"halted: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (EvoSynthError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
