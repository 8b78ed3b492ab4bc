"""
Stratified train/val/test splitting and the split manifest file.

Manifest format (UTF-8, tab separated, one record per line):

    # root=<dataset root>
    # seed=<seed>
    covid/a.png<TAB>covid<TAB>train
    ...

Records are grouped by split (train, val, test) and sorted by path inside each.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ctclassifier.data.dataset import CLASS_NAMES, LABELS, ImageSample, LabeledDataset
from ctclassifier.errors import ConfigError, DatasetError, ManifestError
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_RATIOS = (0.6, 0.2, 0.2)
MIN_CLASS_SIZE = 3

PathLike = Union[str, Path]


@dataclass(frozen=True)
class SplitDataset:
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset
    seed: int = 0

    def part(self, name: str) -> LabeledDataset:
        if name not in SPLIT_NAMES:
            raise ValueError(f"split must be one of {SPLIT_NAMES}, got '{name}'")
        return getattr(self, name)

    def parts(self) -> List[Tuple[str, LabeledDataset]]:
        return [(name, self.part(name)) for name in SPLIT_NAMES]

    def table(self) -> Dict[str, Dict[str, int]]:
        """Per-split class counts."""
        return {name: part.class_counts for name, part in self.parts()}


def validate_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ConfigError(f"expected three ratios (train, val, test), got {len(ratios)}")
    if any(not math.isfinite(r) or r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {ratios} (sum {sum(ratios):.6f})")
    return ratios


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def class_cut_sizes(n: int, ratios: Sequence[float]) -> Tuple[int, int, int]:
    """
    Part sizes for one class: cut at rounded cumulative ratio boundaries.

    Every part receives at least one sample; the shortfall is taken from the
    largest part.
    """
    r_train, r_val, _ = ratios
    train_end = _round_half_up(n * r_train)
    val_end = _round_half_up(n * (r_train + r_val))
    sizes = [train_end, val_end - train_end, n - val_end]
    for i in range(3):
        if sizes[i] == 0:
            donor = int(np.argmax(sizes))
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes[0], sizes[1], sizes[2]


def stratified_split(ds: LabeledDataset, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0) -> SplitDataset:
    """
    Split each class independently: shuffle with `seed`, then cut.

    Raises:
        ConfigError: ratios not positive or not summing to 1
        DatasetError: a class has fewer than 3 samples
    """
    ratios = validate_ratios(ratios)
    rng = np.random.default_rng(seed)
    parts: Dict[str, List[ImageSample]] = {name: [] for name in SPLIT_NAMES}

    for name in CLASS_NAMES:
        members = [s for s in ds.sorted().samples if s.label == LABELS[name]]
        if len(members) < MIN_CLASS_SIZE:
            raise DatasetError(f"class '{name}' has {len(members)} samples, need at least {MIN_CLASS_SIZE}")
        order = rng.permutation(len(members))
        n_train, n_val, _ = class_cut_sizes(len(members), ratios)
        shuffled = [members[i] for i in order]
        parts["train"] += shuffled[:n_train]
        parts["val"] += shuffled[n_train:n_train + n_val]
        parts["test"] += shuffled[n_train + n_val:]

    result = SplitDataset(
        *(LabeledDataset(tuple(parts[name]), ds.root).sorted() for name in SPLIT_NAMES),
        seed=seed,
    )
    logger.info(
        f"Split {len(ds)} samples (seed {seed}): "
        + ", ".join(f"{name}={len(part)}" for name, part in result.parts())
    )
    return result


def write_manifest(split: SplitDataset, path: PathLike, root: Optional[PathLike] = None):
    """Persist a split as a tab-separated manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = root if root is not None else split.train.root
    lines = []
    if root is not None:
        lines.append(f"# root={root}")
    lines.append(f"# seed={split.seed}")
    for name, part in split.parts():
        for sample in part.samples:
            if not sample.relpath:
                raise DatasetError(f"sample {sample.path} has no path relative to the dataset root")
            lines.append(f"{sample.relpath}\t{sample.label_name}\t{name}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Wrote split manifest {path}")


def read_manifest(path: PathLike, root: Optional[PathLike] = None) -> SplitDataset:
    """
    Load a manifest written by write_manifest.

    Relative paths resolve against `root`, else the root recorded in the header,
    else the manifest's own directory.

    Raises:
        ManifestError: malformed lines, or a file listed twice (splits must be disjoint)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from None

    header: Dict[str, str] = {}
    records: List[Tuple[int, str, str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ManifestError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        relpath, label, split_name = fields
        if label not in LABELS:
            raise ManifestError(f"{path}:{lineno}: unknown label '{label}'")
        if split_name not in SPLIT_NAMES:
            raise ManifestError(f"{path}:{lineno}: unknown split '{split_name}'")
        records.append((lineno, relpath, label, split_name))

    base = Path(root) if root is not None else Path(header.get("root") or path.parent)
    first_seen: Dict[str, Tuple[int, str]] = {}
    for lineno, relpath, _, split_name in records:
        if relpath in first_seen:
            prev_line, prev_split = first_seen[relpath]
            raise ManifestError(
                f"{path}:{lineno}: {relpath} is listed in {split_name} and already in {prev_split} (line {prev_line})"
            )
        first_seen[relpath] = (lineno, split_name)

    parts: Dict[str, List[ImageSample]] = {name: [] for name in SPLIT_NAMES}
    for _, relpath, label, split_name in records:
        parts[split_name].append(ImageSample(str(base / relpath), LABELS[label], relpath))

    try:
        seed = int(header.get("seed", 0))
    except ValueError:
        raise ManifestError(f"{path}: malformed seed header '{header.get('seed')}'") from None
    return SplitDataset(
        *(LabeledDataset(tuple(parts[name]), str(base)).sorted() for name in SPLIT_NAMES),
        seed=seed,
    )
