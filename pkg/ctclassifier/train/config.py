"""
Training configuration.
"""

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ctclassifier.augment.config import AugmentConfig
from ctclassifier.nn.optimizers import OptimizerConfig

DEFAULT_EPOCHS = {
    "small-cnn": 25,
    "vgg16": 50,
}


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    model: Literal["small-cnn", "vgg16"] = "small-cnn"
    epochs: int = Field(default=DEFAULT_EPOCHS["small-cnn"], ge=1)
    batch_size: int = Field(default=32, ge=1)
    optimizer: Literal["sgd", "adam"] = "adam"
    lr: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-7, gt=0)
    seed: int = Field(default=0, ge=0)
    augment: AugmentConfig = AugmentConfig()
    transfer: bool = False
    pretrained_weights: Optional[str] = None
    input_size: Optional[int] = Field(default=None, ge=1)
    dtype: Literal["float32", "float64"] = "float32"
    threshold: float = Field(default=0.5, ge=0, le=1)
    cache_images: int = Field(default=2048, ge=0)
    workers: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _epochs_per_model(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("epochs") is None:
            data = {**data, "epochs": DEFAULT_EPOCHS.get(data.get("model", "small-cnn"), 1)}
        return data

    @model_validator(mode="after")
    def _check_transfer(self):
        if self.transfer and self.model != "vgg16":
            raise ValueError("transfer mode is only available for vgg16")
        return self

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(self.optimizer, self.lr, self.beta1, self.beta2, self.eps)
