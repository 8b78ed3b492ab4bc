"""
Training-time augmentation: geometric (zoom, shear, shift, horizontal flip)
and photometric (brightness, contrast, saturation) operators.
"""

import math
from dataclasses import dataclass

import cv2
import numpy as np

from ctclassifier.augment.config import AugmentConfig
from ctclassifier.errors import ConfigError, ShapeError
from ctclassifier.tensor.core import Tensor

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class GeometricParams:
    zoom: float = 1.0
    hflip: bool = False
    shear: float = 0.0
    shift_x: float = 0.0
    shift_y: float = 0.0

    @property
    def is_identity_warp(self) -> bool:
        return self.zoom == 1.0 and self.shear == 0.0 and self.shift_x == 0.0 and self.shift_y == 0.0


@dataclass(frozen=True)
class PhotometricParams:
    brightness_delta: float = 0.0
    contrast_factor: float = 1.0
    saturation_factor: float = 1.0


@dataclass(frozen=True)
class AugmentParams:
    geometric: GeometricParams
    photometric: PhotometricParams


def _check_image(img: Tensor):
    if img.ndim != 3:
        raise ShapeError(f"augmentation expects an H x W x C image, got {img.shape}")


def affine_matrix(params: GeometricParams, height: int, width: int) -> np.ndarray:
    """Forward 2 x 3 map: zoom and shear about the image centre, then shift (fractions of extent)."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    a = params.zoom * np.array([[1.0, math.tan(params.shear)], [0.0, 1.0]])
    centre = np.array([cx, cy])
    offset = centre - a @ centre + np.array([params.shift_x * width, params.shift_y * height])
    return np.hstack([a, offset[:, None]])


def apply_geometric(img: Tensor, params: GeometricParams) -> Tensor:
    """
    One fused affine warp (bilinear, edge-replicated borders) followed by an
    optional horizontal mirror. Output shape equals input shape.
    """
    if not params.zoom > 0:
        raise ConfigError(f"zoom must be positive, got {params.zoom}")
    _check_image(img)
    height, width, channels = img.shape
    out = np.asarray(img, dtype=np.float64)
    if not params.is_identity_warp:
        warped = cv2.warpAffine(
            np.ascontiguousarray(out),
            affine_matrix(params, height, width),
            (width, height),
            flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_REPLICATE,
        )
        out = warped.reshape(height, width, channels)
    if params.hflip:
        out = out[:, ::-1, :]
    return np.clip(out, 0.0, 1.0)


def apply_photometric(img: Tensor, params: PhotometricParams) -> Tensor:
    """
    Brightness shift, contrast about the global mean, then saturation against
    per-pixel luminance (3-channel images only). Output clamped to [0, 1].
    """
    _check_image(img)
    out = np.asarray(img, dtype=np.float64)
    if params.brightness_delta != 0.0:
        out = np.clip(out + params.brightness_delta, 0.0, 1.0)
    if params.contrast_factor != 1.0:
        mean = out.mean()
        out = np.clip(mean + params.contrast_factor * (out - mean), 0.0, 1.0)
    if params.saturation_factor != 1.0 and out.shape[2] == 3:
        luma = (out @ LUMA_WEIGHTS)[:, :, None]
        out = np.clip(luma + params.saturation_factor * (out - luma), 0.0, 1.0)
    return out.copy() if out is img else out


def sample_params(cfg: AugmentConfig, rng: np.random.Generator) -> AugmentParams:
    """Draw every parameter uniformly from its configured range (flip is Bernoulli)."""
    zoom = float(rng.uniform(*cfg.zoom_range))
    hflip = bool(rng.random() < cfg.hflip_prob)
    shear = float(rng.uniform(-cfg.shear_range, cfg.shear_range))
    shift_x = float(rng.uniform(-cfg.shift_range, cfg.shift_range))
    shift_y = float(rng.uniform(-cfg.shift_range, cfg.shift_range))
    brightness = float(rng.uniform(-cfg.brightness_delta, cfg.brightness_delta))
    contrast = float(rng.uniform(*cfg.contrast_range))
    saturation = float(rng.uniform(*cfg.saturation_range))
    return AugmentParams(
        GeometricParams(zoom, hflip, shear, shift_x + 0.0, shift_y + 0.0),
        PhotometricParams(brightness + 0.0, contrast, saturation),
    )


def augment(img: Tensor, cfg: AugmentConfig, rng: np.random.Generator) -> Tensor:
    """Sample parameters and apply the geometric then photometric operators."""
    params = sample_params(cfg, rng)
    return apply_photometric(apply_geometric(img, params.geometric), params.photometric)


def sample_rng(cfg: AugmentConfig, epoch_index: int, sample_index: int) -> np.random.Generator:
    """Per-sample generator substream derived from (seed, sample index, epoch)."""
    return np.random.default_rng([cfg.seed, sample_index, epoch_index])
