"""
CT classification pipeline: split, train, evaluate, predict, augmentation preview
and repeated runs, driven by a RunConfig.
"""

from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from ctclassifier.augment.transforms import augment
from ctclassifier.config import RunConfig, run_config_to_flat
from ctclassifier.data.dataset import CLASS_NAMES, LabeledDataset, scan_dataset
from ctclassifier.data.images import decode_and_resize, encode_image
from ctclassifier.data.split import SPLIT_NAMES, SplitDataset, read_manifest, stratified_split, write_manifest
from ctclassifier.errors import ConfigError, SpecMismatchError
from ctclassifier.io.storage import (
    CHECKPOINT_NAME,
    EPOCH_LOG_NAME,
    SUMMARY_NAME,
    ensure_directories,
    metrics_name,
    save_epoch_log,
    save_metrics,
    save_results,
)
from ctclassifier.models.checkpoint import Checkpoint, describe_checkpoint, load_checkpoint, save_checkpoint
from ctclassifier.models.network import Network
from ctclassifier.models.pretrained import import_pretrained_conv_weights
from ctclassifier.models.zoo import ModelSpec, build_model
from ctclassifier.train.config import TrainConfig
from ctclassifier.train.evaluation import Prediction, evaluate, predict
from ctclassifier.train.metrics import METRIC_KEYS, MetricsReport
from ctclassifier.train.trainer import EpochLog, train
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
REPEAT_SUMMARY_NAME = "repeat_summary.json"


def split_table(split: SplitDataset) -> List[str]:
    """Class x split count table with totals, one line per row."""
    counts = split.table()
    header = f"{'class':<8}" + "".join(f"{name:>8}" for name in SPLIT_NAMES) + f"{'total':>8}"
    lines = [header]
    for class_name in CLASS_NAMES:
        row = [counts[name][class_name] for name in SPLIT_NAMES]
        lines.append(f"{class_name:<8}" + "".join(f"{n:>8}" for n in row) + f"{sum(row):>8}")
    totals = [len(split.part(name)) for name in SPLIT_NAMES]
    lines.append(f"{'total':<8}" + "".join(f"{n:>8}" for n in totals) + f"{sum(totals):>8}")
    return lines


def preview_name(image_path: PathLike, index: int, seed: int) -> str:
    return f"{Path(image_path).stem}_aug{index:02d}_seed{seed}.png"


class ClassificationPipeline:
    def __init__(self, config: RunConfig):
        self.config = config

    @property
    def train_config(self) -> TrainConfig:
        return self.config.train

    def build_spec(self, train_cfg: Optional[TrainConfig] = None) -> ModelSpec:
        train_cfg = train_cfg or self.train_config
        return build_model(train_cfg.model, train_cfg.input_size, train_cfg.dtype)

    def split(self, data: Optional[PathLike] = None, ratios: Optional[Tuple[float, ...]] = None,
              seed: Optional[int] = None, out: Optional[PathLike] = None) -> SplitDataset:
        """Scan a dataset root, split it per class and optionally write the manifest."""
        data = data or self.config.data
        if not data:
            raise ConfigError("no dataset root given (set 'data' or pass --data)")
        seed = self.train_config.seed if seed is None else seed
        dataset = scan_dataset(data)
        splits = stratified_split(dataset, ratios or self.config.ratios, seed)
        if out is not None:
            write_manifest(splits, out, data)
        return splits

    def load_splits(self, train_cfg: Optional[TrainConfig] = None) -> SplitDataset:
        """Splits from the configured manifest, else a fresh split of the dataset root."""
        if self.config.manifest:
            splits = read_manifest(self.config.manifest, self.config.data)
            logger.info(f"Loaded manifest {self.config.manifest}: "
                        + ", ".join(f"{n}={len(p)}" for n, p in splits.parts()))
            return splits
        seed = (train_cfg or self.train_config).seed
        return self.split(seed=seed, out=Path(self.config.output_dir) / "manifest.tsv")

    def build_network(self, train_cfg: Optional[TrainConfig] = None,
                      resume: Optional[PathLike] = None) -> Tuple[Network, int]:
        """
        Network to train and the number of epochs it has already seen.

        Raises:
            SpecMismatchError: the resume checkpoint does not match the configured model
            ConfigError: transfer mode without a weight file
        """
        train_cfg = train_cfg or self.train_config
        spec = self.build_spec(train_cfg)

        if resume is not None:
            ckpt = load_checkpoint(resume)
            if ckpt.model_spec != spec:
                raise SpecMismatchError(
                    f"cannot resume from {resume}: checkpoint holds {ckpt.model_spec.name} "
                    f"{ckpt.model_spec.input_shape} ({ckpt.model_spec.dtype}, {ckpt.model_spec.param_count()} "
                    f"parameters), config builds {spec.name} {spec.input_shape} "
                    f"({spec.dtype}, {spec.param_count()} parameters)"
                )
            logger.info(f"Resuming {spec.name} from {resume} after {ckpt.meta.epochs_trained} epochs")
            return ckpt.network(), ckpt.meta.epochs_trained

        if train_cfg.transfer and not train_cfg.pretrained_weights:
            raise ConfigError("transfer mode needs 'pretrained_weights' (a checkpoint holding the conv stack)")
        if train_cfg.pretrained_weights:
            params = import_pretrained_conv_weights(
                train_cfg.pretrained_weights, spec, transfer=train_cfg.transfer,
                rng=np.random.default_rng(train_cfg.seed),
            )
            return Network(spec, params), 0
        return Network.initialise(spec, train_cfg.seed), 0

    def train(self, resume: Optional[PathLike] = None, train_cfg: Optional[TrainConfig] = None,
              output_dir: Optional[PathLike] = None, splits: Optional[SplitDataset] = None,
              on_epoch: Optional[Callable[[EpochLog], None]] = None) -> Dict[str, Any]:
        """
        Train, keep the best-validation checkpoint, and write the run artifacts.

        Returns:
            Run summary (also written as summary.json)
        """
        train_cfg = train_cfg or self.train_config
        if output_dir is None:
            output_dir = Path(self.config.output_dir)
            checkpoint_path = Path(self.config.checkpoint or output_dir / CHECKPOINT_NAME)
        else:
            output_dir = Path(output_dir)
            checkpoint_path = output_dir / CHECKPOINT_NAME
        ensure_directories(output_dir)
        epoch_log_path = output_dir / EPOCH_LOG_NAME

        if splits is None:
            splits = self.load_splits(train_cfg)
        network, start_epoch = self.build_network(train_cfg, resume)
        if start_epoch == 0 or not epoch_log_path.exists():
            save_epoch_log([], epoch_log_path)

        def record(entry: EpochLog):
            save_epoch_log([entry], epoch_log_path, append=True)
            if on_epoch is not None:
                on_epoch(entry)

        best, logs = train(network, splits, train_cfg, start_epoch=start_epoch, on_epoch=record)
        save_checkpoint(best, checkpoint_path)

        reports = {"val": evaluate(best, splits.val, train_cfg.threshold)}
        if len(splits.test) > 0:
            reports["test"] = evaluate(best, splits.test, train_cfg.threshold)
        for name, report in reports.items():
            save_metrics(report, output_dir / metrics_name(name))

        summary = {
            "checkpoint": str(checkpoint_path),
            "epoch_log": str(epoch_log_path),
            "best": describe_checkpoint(best),
            "config": run_config_to_flat(self.config.model_copy(update={"train": train_cfg})),
            "splits": {name: len(part) for name, part in splits.parts()},
            "epochs": [asdict(entry) for entry in logs],
            "metrics": {name: report.to_dict() for name, report in reports.items()},
        }
        save_results(summary, output_dir / SUMMARY_NAME)
        logger.info(f"Training complete: best epoch {best.meta.epochs_trained}, "
                    f"val accuracy {reports['val'].accuracy:.4f}")
        return summary

    def dataset_for(self, data_ref: str) -> LabeledDataset:
        """`<dir>` scans a dataset root; `<manifest>:<split>` selects one split of a manifest."""
        path, sep, split_name = data_ref.rpartition(":")
        if sep and split_name in SPLIT_NAMES:
            return read_manifest(path, self.config.data).part(split_name)
        return scan_dataset(data_ref)

    def evaluate(self, checkpoint_path: PathLike, data_ref: str,
                 out: Optional[PathLike] = None) -> MetricsReport:
        ckpt = load_checkpoint(checkpoint_path)
        report = evaluate(ckpt, self.dataset_for(data_ref), self.train_config.threshold)
        if out is not None:
            save_metrics(report, out)
        return report

    def predict(self, checkpoint_path: PathLike, image_path: PathLike) -> Prediction:
        ckpt: Checkpoint = load_checkpoint(checkpoint_path)
        return predict(ckpt, image_path, self.train_config.threshold)

    def augment_preview(self, image_path: PathLike, n: int, out_dir: PathLike) -> List[Path]:
        """
        Write `n` augmented variants of one image; file names carry the augmentation seed.

        With `augment_enabled: false` the variants are the decoded image unchanged, as training would see it.
        """
        if n < 1:
            raise ConfigError(f"--n must be at least 1, got {n}")
        cfg = self.config.augment
        img = decode_and_resize(image_path)
        out_dir = Path(out_dir)
        ensure_directories(out_dir)
        written = []
        if not cfg.enabled:
            logger.warning("Augmentation is disabled; previews are copies of the decoded image")
        for k in range(n):
            path = out_dir / preview_name(image_path, k, cfg.seed)
            variant = augment(img, cfg, np.random.default_rng([cfg.seed, k])) if cfg.enabled else img
            encode_image(variant, path)
            written.append(path)
        logger.info(f"Wrote {n} augmented previews of {image_path} to {out_dir}")
        return written

    def repeat(self, runs: int, on_epoch: Optional[Callable[[EpochLog], None]] = None) -> Dict[str, Any]:
        """
        Re-split with seeds seed, seed+1, ... and train/evaluate once per split.

        Returns:
            Per-run test metrics with the mean and sample standard deviation of each metric
        """
        if runs < 1:
            raise ConfigError(f"--runs must be at least 1, got {runs}")
        if not self.config.data:
            raise ConfigError("repeated runs re-split the dataset and need 'data'")
        base = self.train_config
        output_dir = Path(self.config.output_dir)
        results = []
        for r in range(runs):
            seed = base.seed + r
            run_cfg = base.model_copy(update={
                "seed": seed,
                "augment": base.augment.model_copy(update={"seed": base.augment.seed + r}),
            })
            run_dir = output_dir / f"run_{r}"
            logger.info(f"Run {r + 1}/{runs} (seed {seed})")
            splits = self.split(seed=seed, out=run_dir / "manifest.tsv")
            summary = self.train(train_cfg=run_cfg, output_dir=run_dir, splits=splits, on_epoch=on_epoch)
            metrics = summary["metrics"].get("test", summary["metrics"]["val"])
            results.append({"run": r, "seed": seed, "metrics": metrics})

        aggregate = {}
        for key in METRIC_KEYS:
            values = [res["metrics"][key] for res in results if res["metrics"].get(key) is not None]
            if values:
                aggregate[key] = {
                    "mean": float(np.mean(values)),
                    "std": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                    "runs": len(values),
                }
        report = {"runs": results, "aggregate": aggregate}
        save_results(report, output_dir / REPEAT_SUMMARY_NAME)
        return report
