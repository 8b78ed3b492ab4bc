"""
Image decoding, channel handling and resizing.
"""

from pathlib import Path
from typing import Optional, Tuple, Union

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError

from ctclassifier.errors import DecodeError
from ctclassifier.tensor.core import Tensor
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# 8-bit modes and the mode they are read as
SUPPORTED_MODES = {
    "L": "L",
    "LA": "L",
    "RGB": "RGB",
    "RGBA": "RGB",
    "P": "RGB",
}

PathLike = Union[str, Path]


def decode_image(path: PathLike) -> np.ndarray:
    """
    Read an 8-bit grayscale or RGB image.

    Returns:
        uint8 array of shape H x W x 1 or H x W x 3
    """
    try:
        with Image.open(path) as img:
            mode = img.mode
            if mode not in SUPPORTED_MODES:
                raise DecodeError(str(path), f"unsupported pixel mode '{mode}' (need 8-bit grayscale or RGB)")
            img.load()
            converted = img.convert(SUPPORTED_MODES[mode]) if mode != SUPPORTED_MODES[mode] else img
            pixels = np.asarray(converted, dtype=np.uint8)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
        raise DecodeError(str(path), str(e)) from None

    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    return pixels


def to_channels(pixels: np.ndarray, channels: int) -> np.ndarray:
    """Convert H x W x C pixels to the requested channel count (1 or 3) as float64."""
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    pixels = pixels.astype(np.float64)
    have = pixels.shape[2]
    if have == channels:
        return pixels
    if channels == 1:
        return (pixels @ LUMA_WEIGHTS)[:, :, None]
    return np.repeat(pixels, 3, axis=2)


def resize_bilinear(img: Tensor, size: Tuple[int, int]) -> Tensor:
    """Bilinear resize of an H x W x C float image to size = (height, width)."""
    height, width = size
    if img.shape[:2] == (height, width):
        return img
    resized = cv2.resize(np.ascontiguousarray(img), (width, height), interpolation=cv2.INTER_LINEAR)
    if resized.ndim == 2:
        resized = resized[:, :, None]
    return resized


def decode_and_resize(sample, target: Optional[Tuple[int, ...]] = None, channels: Optional[int] = None) -> Tensor:
    """
    Decode an image into a float tensor in [0, 1].

    Args:
        sample: ImageSample or file path
        target: (H, W) or (H, W, C) output size; None keeps the native size
        channels: 1 (luminance 0.299R + 0.587G + 0.114B) or 3 (gray replicated); None keeps native

    Returns:
        H x W x C float64 tensor
    """
    path = getattr(sample, "path", sample)
    pixels = decode_image(path)
    if channels is None:
        channels = pixels.shape[2]
    img = to_channels(pixels, channels) / 255.0
    if target is not None:
        img = resize_bilinear(img, (int(target[0]), int(target[1])))
    return np.clip(img, 0.0, 1.0)


def encode_image(img: Tensor, path: PathLike):
    """Write a [0, 1] H x W x C tensor as an 8-bit PNG/JPEG (format from the suffix)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if pixels.shape[2] == 1:
        Image.fromarray(pixels[:, :, 0]).save(path)
    else:
        Image.fromarray(pixels).save(path)
    logger.debug(f"Wrote image {path}")
