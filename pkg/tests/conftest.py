"""
Shared fixtures: seeded generators and toy CT-style datasets written with Pillow.
"""

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from ctclassifier.models.zoo import build_small_cnn


def write_image(path: Path, pixels: np.ndarray):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels.astype(np.uint8)).save(path)


def make_dataset(root: Path, n_covid: int = 10, n_normal: int = 10, size: int = 16, seed: int = 0,
                 rgb: bool = False) -> Path:
    """
    Write a separable two-class image set: covid images are bright, normal images dark.
    """
    rng = np.random.default_rng(seed)
    shape = (size, size, 3) if rgb else (size, size)
    for name, count, level in (("covid", n_covid, 190), ("normal", n_normal, 60)):
        (root / name).mkdir(parents=True, exist_ok=True)
        for i in range(count):
            pixels = np.clip(level + rng.integers(-25, 26, size=shape), 0, 255)
            write_image(root / name / f"{name}_{i:03d}.png", pixels)
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_dataset(tmp_path) -> Path:
    """10 covid + 10 normal 16x16 grayscale PNGs."""
    return make_dataset(tmp_path / "data")


@pytest.fixture
def tiny_spec():
    """small-cnn at 8x8 input, float64 for gradient checks."""
    return build_small_cnn(input_size=8, blocks=1, filters=2, dense_units=4, dtype="float64")


@pytest.fixture
def dataset_factory(tmp_path):
    """Write a toy dataset under tmp_path/<name> with make_dataset's options."""
    def factory(name: str = "data", **kwargs) -> Path:
        return make_dataset(tmp_path / name, **kwargs)
    return factory
