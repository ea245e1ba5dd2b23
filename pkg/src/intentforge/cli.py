"""Command surface: ``forge <stage> --config <file>`` with a few override
flags. Exit codes: 0 success or up-to-date skip, 2 missing input, 3
configuration/validation failure."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .pipeline import EXIT_VALIDATION, STAGES, StageRunner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description="Intention-KG pipeline stages")
    parser.add_argument("stage", choices=STAGES, help="pipeline stage to run")
    parser.add_argument("--config", required=True, help="INI configuration file")
    parser.add_argument("--seed", type=int, help="override every stage seed")
    parser.add_argument("--threshold", type=float, help="override the plausibility threshold")
    parser.add_argument("--min-support", type=int, dest="min_support", help="override the mining support")
    parser.add_argument("--force", action="store_true", help="re-run even when inputs are unchanged")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.ingest_seed = args.seed
            cfg.population_seed = args.seed
            cfg.embed_seed = args.seed
            cfg.receval_seed = args.seed
        if args.threshold is not None:
            if not 0 <= args.threshold <= 1:
                raise ConfigError("--threshold must lie in [0, 1]")
            cfg.plau_threshold = args.threshold
        if args.min_support is not None:
            cfg.min_support = args.min_support
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    runner = StageRunner(cfg, force=args.force)
    return runner.run(args.stage)


if __name__ == "__main__":
    sys.exit(main())
