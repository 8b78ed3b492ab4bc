"""
Storage utilities for writing and reading run artifacts.

Run directory layout:
- `best.ckpt` (written by models/checkpoint.py)
- `epochs.csv` epoch log
- `metrics_val.txt`, `metrics_test.txt` metric reports
- `summary.json` run summary
"""

import csv
import json
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

from ctclassifier.train.metrics import MetricsReport, load_metrics_report
from ctclassifier.train.trainer import EpochLog
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

CHECKPOINT_NAME = "best.ckpt"
EPOCH_LOG_NAME = "epochs.csv"
SUMMARY_NAME = "summary.json"


def metrics_name(split: str) -> str:
    return f"metrics_{split}.txt"


def ensure_directories(*directories: PathLike):
    """Create output directories (and parents) if missing."""
    for directory in directories:
        Path(directory).mkdir(parents=True, exist_ok=True)


def _ensure_parent(path: Path):
    if path.parent:
        path.parent.mkdir(parents=True, exist_ok=True)


def save_results(results: Union[Dict[str, Any], List[Any]], output_path: PathLike):
    """Save a run summary to a JSON file."""
    output_path = Path(output_path)
    _ensure_parent(output_path)
    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(results, f, indent=2, ensure_ascii=False)
        f.write("\n")

    logger.info(f"Saved results to: {output_path}")


def load_json(filepath: PathLike) -> Any:
    with open(filepath, 'r', encoding='utf-8') as f:
        return json.load(f)


def save_metrics(report: MetricsReport, output_path: PathLike):
    """Write a metrics report as `key value` lines."""
    output_path = Path(output_path)
    _ensure_parent(output_path)
    output_path.write_text(report.to_text(), encoding='utf-8')
    logger.info(f"Saved metrics: {output_path}")


def load_metrics(filepath: PathLike) -> MetricsReport:
    return load_metrics_report(filepath)


def save_epoch_log(logs: Iterable[EpochLog], output_path: PathLike, append: bool = False):
    """
    Write epoch logs as CSV with a header row.

    With `append`, rows are added to an existing file (its header is kept).
    """
    output_path = Path(output_path)
    _ensure_parent(output_path)
    header = [f.name for f in fields(EpochLog)]
    write_header = not (append and output_path.exists() and output_path.stat().st_size > 0)
    with open(output_path, 'a' if append else 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=header, lineterminator="\n")
        if write_header:
            writer.writeheader()
        for entry in logs:
            row = asdict(entry)
            writer.writerow({k: (v if k == "epoch" else f"{v:.6f}") for k, v in row.items()})

    logger.debug(f"Saved epoch log: {output_path}")


def load_epoch_log(filepath: PathLike) -> List[EpochLog]:
    with open(filepath, 'r', encoding='utf-8', newline='') as f:
        return [
            EpochLog(
                epoch=int(row["epoch"]),
                train_loss=float(row["train_loss"]),
                train_accuracy=float(row["train_accuracy"]),
                val_loss=float(row["val_loss"]),
                val_accuracy=float(row["val_accuracy"]),
                wall_time_s=float(row["wall_time_s"]),
            )
            for row in csv.DictReader(f)
        ]
