"""
Dataset manifests built from class directories.

Expected layout:
    <root>/covid/*.{png,jpg,jpeg}
    <root>/normal/*.{png,jpg,jpeg}
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ctclassifier.data.images import decode_and_resize, decode_image
from ctclassifier.errors import DatasetError, DecodeError
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

# COVID is the positive class
CLASS_NAMES = ("normal", "covid")
LABELS = {name: index for index, name in enumerate(CLASS_NAMES)}
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


def label_name(label: int) -> str:
    return CLASS_NAMES[label]


@dataclass(frozen=True)
class ImageSample:
    path: str
    label: int
    relpath: str = ""

    @property
    def label_name(self) -> str:
        return label_name(self.label)

    def pixels(self, target=None, channels: Optional[int] = None):
        """Decode lazily (see data.images.decode_and_resize)."""
        return decode_and_resize(self, target, channels)


@dataclass(frozen=True)
class SkippedFile:
    path: str
    reason: str


@dataclass(frozen=True)
class LabeledDataset:
    samples: Tuple[ImageSample, ...]
    root: Optional[str] = None
    skipped: Tuple[SkippedFile, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        seen = set()
        for sample in self.samples:
            if sample.path in seen:
                raise DatasetError(f"duplicate sample path {sample.path}")
            seen.add(sample.path)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def labels(self) -> List[int]:
        return [s.label for s in self.samples]

    @property
    def class_counts(self) -> Dict[str, int]:
        counts = {name: 0 for name in CLASS_NAMES}
        for sample in self.samples:
            counts[sample.label_name] += 1
        return counts

    def sorted(self) -> "LabeledDataset":
        """Same samples in lexicographic (relative) path order."""
        return LabeledDataset(tuple(sorted(self.samples, key=_sort_key)), self.root, self.skipped)


def _sort_key(sample: ImageSample) -> str:
    return sample.relpath or sample.path


def _check_decodable(path: Path) -> Optional[str]:
    # full decode: unsupported modes and truncated pixel data only fail on load
    try:
        decode_image(path)
    except DecodeError as e:
        return e.reason
    return None


def scan_dataset(root: Union[str, Path], extensions: Sequence[str] = IMAGE_EXTENSIONS) -> LabeledDataset:
    """
    Build a dataset from `covid/` and `normal/` subdirectories.

    Undecodable files are logged and recorded in `skipped`; they are not fatal.

    Raises:
        DatasetError: a class directory is missing or no image could be read
    """
    root = Path(root)
    missing = [name for name in CLASS_NAMES if not (root / name).is_dir()]
    if missing:
        raise DatasetError(f"dataset root {root} is missing class directories: {', '.join(missing)}")

    samples: List[ImageSample] = []
    skipped: List[SkippedFile] = []
    for name in CLASS_NAMES:
        for path in sorted((root / name).iterdir()):
            if not path.is_file() or path.suffix.lower() not in extensions:
                continue
            relpath = path.relative_to(root).as_posix()
            reason = _check_decodable(path)
            if reason is not None:
                logger.warning(f"Skipping undecodable image {path}: {reason}")
                skipped.append(SkippedFile(relpath, reason))
                continue
            samples.append(ImageSample(str(path), LABELS[name], relpath))

    if not samples:
        raise DatasetError(f"no decodable images found under {root}")

    dataset = LabeledDataset(tuple(samples), str(root), tuple(skipped)).sorted()
    counts = dataset.class_counts
    logger.info(
        f"Scanned {root}: {len(dataset)} images "
        f"(covid={counts['covid']}, normal={counts['normal']}, skipped={len(skipped)})"
    )
    return dataset
