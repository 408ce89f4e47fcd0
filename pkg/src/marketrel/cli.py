"""Command line entry point: ``marketrel <verb> --config run.toml ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .market_data import DataError


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--month", action="append", metavar="YYYY-MM", help="cohort (repeatable)")
    common.add_argument("--trials", type=int, help="number of trials per cohort")
    common.add_argument("--seed", type=int, help="base seed; trial t uses seed + t")
    common.add_argument("--mock-gateway", metavar="PATH", help="scripted mock gateway file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    trial_arg = argparse.ArgumentParser(add_help=False)
    trial_arg.add_argument("--trial", type=int, action="append", help="trial index (default: all)")

    parser = argparse.ArgumentParser(prog="marketrel", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("ingest", parents=[common], help="filter and slice markets into cohorts")
    for verb, text in (
        ("cluster", "embed and cluster each cohort"),
        ("discover", "label clusters and discover relations"),
        ("evaluate", "score relations and build graphs"),
        ("backtest", "run the leader-follower backtest"),
    ):
        sub.add_parser(verb, parents=[common, trial_arg], help=text)
    sub.add_parser("run-all", parents=[common], help="run every stage and write the report")
    sub.add_parser("report", parents=[common], help="re-render report.md from artifacts")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        config = pipeline.RunConfig.from_toml(args.config).with_overrides(
            args.month, args.trials, args.seed, args.mock_gateway, args.out
        )
        config.validate()
        if args.verb == "run-all":
            manifest = pipeline.run(config)
            print(f"wrote {len(manifest.artifacts)} artifacts under {config.output_dir}")
            return 0
        if args.verb == "report":
            root = Path(config.output_dir)
            manifest = pipeline.RunManifest.load(root / "run_manifest.json")
            text = pipeline.report_tables(manifest)
            (root / "report.md").write_text(text, encoding="utf-8")
            print(text, end="")
            return 0
        trials = args.trial if getattr(args, "trial", None) else range(config.trials)
        for cohort in config.cohorts:
            if args.verb == "ingest":
                pipeline.stage_ingest(config, cohort)
                continue
            for t in trials:
                if args.verb == "cluster":
                    pipeline.stage_cluster(config, cohort, t)
                elif args.verb == "discover":
                    pipeline.stage_discover(config, cohort, t)
                elif args.verb == "evaluate":
                    pipeline.stage_evaluate(config, cohort, t)
                elif args.verb == "backtest":
                    pipeline.stage_backtest(config, cohort, t)
        return 0
    except (pipeline.ConfigError, DataError, FileNotFoundError) as exc:
        print(f"marketrel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
