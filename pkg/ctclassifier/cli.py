"""
Command-line interface.

Exit codes: 0 success, 2 usage/config/input errors, 3 numerical failure during training.
"""

import argparse
import logging
import sys
from typing import List, Optional

from ctclassifier import __version__
from ctclassifier.config import RunConfig, load_run_config, parse_ratios
from ctclassifier.errors import CTClassifierError, NumericalError
from ctclassifier.pipeline import ClassificationPipeline, split_table
from ctclassifier.train.metrics import METRIC_KEYS
from ctclassifier.train.trainer import EpochLog
from ctclassifier.utils.logger import get_logger, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _pipeline(args, **overrides) -> ClassificationPipeline:
    config: RunConfig = load_run_config(getattr(args, "config", None), overrides)
    if args.log_dir is None and config.log_dir:
        setup_logging(config.log_dir, getattr(logging, args.log_level), stream=sys.stderr)
    return ClassificationPipeline(config)


def _print_progress(entry: EpochLog):
    print(
        f"epoch {entry.epoch} train_loss {entry.train_loss:.6f} train_accuracy {entry.train_accuracy:.6f} "
        f"val_loss {entry.val_loss:.6f} val_accuracy {entry.val_accuracy:.6f}",
        flush=True,
    )


def cmd_split(args) -> int:
    ratios = parse_ratios(args.ratios) if args.ratios else None
    pipeline = _pipeline(args, data=args.data)
    splits = pipeline.split(args.data, ratios, args.seed, args.out)
    for line in split_table(splits):
        print(line)
    return EXIT_OK


def cmd_train(args) -> int:
    pipeline = _pipeline(args)
    summary = pipeline.train(resume=args.resume, on_epoch=_print_progress)
    print(f"checkpoint {summary['checkpoint']}")
    metrics = summary["metrics"]["val"]
    for key in METRIC_KEYS:
        if metrics.get(key) is not None:
            print(f"val_{key} {metrics[key]:.6f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pipeline = _pipeline(args)
    report = pipeline.evaluate(args.ckpt, args.data, args.out)
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_predict(args) -> int:
    pipeline = _pipeline(args)
    print(pipeline.predict(args.ckpt, args.image).to_line())
    return EXIT_OK


def cmd_augment_preview(args) -> int:
    pipeline = _pipeline(args)
    for path in pipeline.augment_preview(args.image, args.n, args.out):
        print(path)
    return EXIT_OK


def cmd_repeat(args) -> int:
    pipeline = _pipeline(args)
    report = pipeline.repeat(args.runs, on_epoch=_print_progress)
    for key, stats in report["aggregate"].items():
        print(f"{key} mean {stats['mean']:.6f} std {stats['std']:.6f} runs {stats['runs']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctclassifier", description="COVID-19 chest CT classification")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-dir", default=None, help="Directory for the rotating log file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="Stratified train/val/test split of a dataset root")
    p.add_argument("--data", required=True, help="Dataset root holding covid/ and normal/")
    p.add_argument("--ratios", default=None, help="train,val,test ratios (default 0.6,0.2,0.2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="Manifest path")
    p.add_argument("--config", default=None)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("train", help="Train a model from a run configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None, help="Checkpoint to continue from")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", help="Metrics of a checkpoint on a dataset or manifest split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="Dataset root, or <manifest>:<train|val|test>")
    p.add_argument("--out", default=None, help="Metrics file to write")
    p.add_argument("--config", default=None)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("predict", help="Classify one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("augment-preview", help="Write augmented variants of one image")
    p.add_argument("--config", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_augment_preview)

    p = sub.add_parser("repeat", help="Repeat split/train/evaluate over consecutive seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--runs", type=int, default=4)
    p.set_defaults(handler=cmd_repeat)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_dir, getattr(logging, args.log_level), stream=sys.stderr)

    try:
        return args.handler(args)
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CTClassifierError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
