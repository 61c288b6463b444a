"""Command line entry point.

    stepstone run --config FILE [--seed S] [--replicates R] [--out DIR] [--workers W]
    stepstone formulas --preset paper-example [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 failure while running.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import PRESETS, ConfigError, formulas_report, load_config, parse_config, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stepstone", description="Stepping stone model experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p_run.add_argument("--replicates", type=int, help="replicate count (overrides the config)")
    p_run.add_argument("--out", help="output directory (overrides the config)")
    p_run.add_argument("--workers", type=int, help="worker processes (overrides the config)")

    p_form = sub.add_parser("formulas", help="print closed-form numbers for a preset")
    p_form.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p_form.add_argument("--out", help="also write formulas.json and a manifest here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config, seed=args.seed, replicates=args.replicates,
                              output=args.out, workers=args.workers)
            if cfg.output is None:
                raise ConfigError("output", "required (set it in the config or pass --out)")
        else:
            cfg = parse_config(PRESETS[args.preset], output=args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "formulas":
            print(json.dumps(formulas_report(cfg), indent=2, sort_keys=True))
            if cfg.output is None:
                return EXIT_OK
        manifest = run(cfg)
    except Exception as e:  # noqa: BLE001 - any failure past validation is a runtime failure
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.command == "run":
        print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
