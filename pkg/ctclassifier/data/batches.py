"""
Mini-batch iteration over a LabeledDataset.
"""

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from threading import Lock
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from ctclassifier.data.dataset import ImageSample, LabeledDataset
from ctclassifier.data.images import decode_and_resize
from ctclassifier.nn.losses import one_hot
from ctclassifier.tensor.core import Tensor

# (pixels, dataset index) -> pixels
SampleTransform = Callable[[Tensor, int], Tensor]


class ImageCache:
    """Bounded LRU cache of decoded, resized images (never holds transformed pixels)."""

    def __init__(self, max_items: int = 2048):
        self.max_items = max_items
        self._items: "OrderedDict[Tuple[str, Tuple[int, int], int], Tensor]" = OrderedDict()
        self._lock = Lock()

    def get(self, sample: ImageSample, target: Tuple[int, int], channels: int) -> Tensor:
        key = (sample.path, tuple(target), channels)
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                return self._items[key]
        pixels = decode_and_resize(sample, target, channels)
        if self.max_items > 0:
            pixels.setflags(write=False)
            with self._lock:
                self._items[key] = pixels
                if len(self._items) > self.max_items:
                    self._items.popitem(last=False)
        return pixels


def epoch_order(n: int, shuffle: bool, seed: int, epoch_index: int) -> np.ndarray:
    """Sample order for one epoch: a pure function of (seed, epoch_index)."""
    if not shuffle:
        return np.arange(n)
    return np.random.default_rng([seed, epoch_index]).permutation(n)


def batches(ds: LabeledDataset, batch_size: int, shuffle: bool = False, seed: int = 0, epoch_index: int = 0,
            target: Tuple[int, int] = (256, 256), channels: int = 1, dtype=np.float32,
            transform: Optional[SampleTransform] = None, cache: Optional[ImageCache] = None,
            workers: int = 0) -> Iterator[Tuple[Tensor, Tensor]]:
    """
    Yield (images N x H x W x C, one-hot labels N x 2) batches covering every sample once.

    Args:
        ds: Dataset to iterate
        batch_size: Samples per batch (the last batch may be short)
        shuffle: Permute with a generator seeded by (seed, epoch_index); otherwise dataset order
        target: Image (H, W) after resizing
        channels: 1 or 3
        transform: Per-sample augmentation, called with the sample's dataset index
        cache: Decoded-image cache shared across epochs
        workers: Decode threads (0 = decode inline); emission order is unaffected
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = epoch_order(len(ds), shuffle, seed, epoch_index)

    def load(index: int) -> Tensor:
        sample = ds.samples[index]
        if cache is not None:
            pixels = cache.get(sample, target, channels)
        else:
            pixels = decode_and_resize(sample, target, channels)
        if transform is not None:
            pixels = transform(pixels, int(index))
        return pixels

    executor = ThreadPoolExecutor(max_workers=workers) if workers > 0 else None
    try:
        for start in range(0, len(order), batch_size):
            indices = order[start:start + batch_size]
            images = list(executor.map(load, indices)) if executor else [load(i) for i in indices]
            x = np.stack(images).astype(dtype, copy=False)
            y = one_hot([ds.samples[i].label for i in indices], 2, dtype)
            yield x, y
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
