"""
Augmentation configuration.
"""

import math
from typing import Any, Dict, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from ctclassifier.errors import ConfigError


def parse_range(value: Any) -> Any:
    """Accept "lo,hi" strings as well as two-element sequences."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.strip("[]() ").split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'lo,hi', got {value!r}")
        return tuple(float(p) for p in parts)
    return value


class AugmentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    enabled: bool = True
    zoom_range: Tuple[float, float] = (0.9, 1.1)
    hflip_prob: float = 0.5
    shear_range: float = 0.1
    shift_range: float = 0.1
    brightness_delta: float = 0.1
    contrast_range: Tuple[float, float] = (0.9, 1.1)
    saturation_range: Tuple[float, float] = (0.9, 1.1)
    seed: int = 0

    @field_validator("zoom_range", "contrast_range", "saturation_range", mode="before")
    @classmethod
    def _parse_range(cls, value):
        return parse_range(value)

    @model_validator(mode="after")
    def _check_ranges(self):
        for name in ("zoom_range", "contrast_range", "saturation_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"{name} must be finite, got {(lo, hi)}")
            if lo > hi:
                raise ValueError(f"{name} must be ordered lo <= hi, got {(lo, hi)}")
            if lo < 0:
                raise ValueError(f"{name} must be non-negative, got {(lo, hi)}")
        if self.zoom_range[0] <= 0:
            raise ValueError(f"zoom_range must be positive, got {self.zoom_range}")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError(f"hflip_prob must lie in [0, 1], got {self.hflip_prob}")
        for name in ("shear_range", "shift_range", "brightness_delta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite non-negative bound, got {value}")
        return self

    @classmethod
    def neutral(cls, seed: int = 0) -> "AugmentConfig":
        """Configuration whose every draw is the identity transform."""
        return cls(
            zoom_range=(1.0, 1.0), hflip_prob=0.0, shear_range=0.0, shift_range=0.0,
            brightness_delta=0.0, contrast_range=(1.0, 1.0), saturation_range=(1.0, 1.0), seed=seed,
        )

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "AugmentConfig":
        """Validate a plain mapping, raising ConfigError with pydantic's messages."""
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"invalid augmentation config: {e}") from None
