"""Command line: ``ehcell run|sweep|replay|selftest``.

Exit status: 0 success, 1 configuration or usage error, 2 runtime error,
3 selftest failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..engine import run
from ..errors import ConfigError, EhcellError
from ..scenario import builtin_path, format_trace, load_scenario, replay_scenario
from .config import load_config, resolved, sweep_spec, world_config
from .output import emit_csv, emit_plot, format_csv
from .sweep import run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ehcell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="simulate one configuration, print its counters")
    p_run.add_argument("--config", type=Path)
    p_run.add_argument("--seed", type=_u64)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep, write CSV and/or SVG")
    p_sweep.add_argument("--config", type=Path, required=True)
    p_sweep.add_argument("--seed", type=_u64, help="seed of replication 0")
    p_sweep.add_argument("--reps", type=_positive)
    p_sweep.add_argument("--out", type=Path, help="output directory (CSV goes to stdout if omitted)")
    p_sweep.add_argument("--format", choices=("csv", "plot", "both"), default="csv")
    p_sweep.add_argument("--workers", type=_positive, default=1)

    p_replay = sub.add_parser("replay", help="replay a scenario script, print the trace")
    p_replay.add_argument("script", help="script path, or the name of a built-in script (fig2)")
    p_replay.add_argument("--policy", help="let this policy decide instead of the script")
    p_replay.add_argument("--cache-mode", choices=("full", "fetch"))

    sub.add_parser("selftest", help="check the engine against the exact oracle")
    return parser


def _cmd_run(args) -> int:
    mapping = load_config(args.config) if args.config else {}
    overrides = {} if args.seed is None else {"seed": args.seed}
    config = world_config(mapping, **overrides)
    metrics = run(config)
    out = {"config": resolved(config), "metrics": metrics.as_dict(), "eta": metrics.eta}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = sweep_spec(load_config(args.config), replications=args.reps, seed_base=args.seed)
    result = run_sweep(spec, workers=args.workers)
    if args.out is None and args.format == "csv":
        sys.stdout.write(format_csv(result))
        return EXIT_OK
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    stem = spec.name or args.config.stem
    if args.format in ("csv", "both"):
        print(emit_csv(result, out / f"{stem}.csv"))
    if args.format in ("plot", "both"):
        print(emit_plot(result, out / f"{stem}.svg"))
    return EXIT_OK


def _cmd_replay(args) -> int:
    path = Path(args.script)
    if not path.exists():
        path = builtin_path(args.script)
    script = load_scenario(path)
    reports = replay_scenario(script, policy=args.policy, cache_mode=args.cache_mode)
    sys.stdout.write(format_trace(reports, script.catalog))
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import selftest

    checks = selftest()
    for check in checks:
        print(check.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SELFTEST


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "replay": _cmd_replay,
            "selftest": _cmd_selftest}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EhcellError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
