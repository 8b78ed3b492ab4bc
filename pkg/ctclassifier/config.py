"""
Run configuration: a flat YAML (or `key = value`) file validated with pydantic.

Keys are the TrainConfig fields, the AugmentConfig fields prefixed with
`augment_`, and the path keys of RunConfig. Unknown keys are rejected.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from ctclassifier.augment.config import AugmentConfig
from ctclassifier.data.split import DEFAULT_RATIOS, validate_ratios
from ctclassifier.errors import ConfigError
from ctclassifier.train.config import TrainConfig
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

AUGMENT_PREFIX = "augment_"

PathLike = Union[str, Path]


def parse_ratios(value: Any) -> Tuple[float, float, float]:
    """Parse "0.6,0.2,0.2" or a sequence and check the ratios sum to 1."""
    if isinstance(value, str):
        try:
            value = [float(part) for part in value.strip("[]() ").split(",")]
        except ValueError:
            raise ConfigError(f"ratios must be comma-separated numbers, got '{value}'") from None
    return validate_ratios(value)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    data: Optional[str] = None
    manifest: Optional[str] = None
    output_dir: str = "runs/latest"
    checkpoint: Optional[str] = None
    ratios: Tuple[float, float, float] = DEFAULT_RATIOS
    log_dir: Optional[str] = None
    train: TrainConfig = TrainConfig()

    @field_validator("ratios", mode="before")
    @classmethod
    def _parse_ratios(cls, value):
        try:
            return parse_ratios(value)
        except ConfigError as e:
            raise ValueError(str(e)) from None

    @property
    def augment(self) -> AugmentConfig:
        return self.train.augment


PATH_KEYS = frozenset(RunConfig.model_fields) - {"train"}
TRAIN_KEYS = frozenset(TrainConfig.model_fields) - {"augment"}
AUGMENT_KEYS = frozenset(AugmentConfig.model_fields)


def _replace_env(obj):
    """Replace whole-string ${ENV_VAR} placeholders from the environment."""
    if isinstance(obj, dict):
        return {k: _replace_env(v) for k, v in obj.items()}
    elif isinstance(obj, list):
        return [_replace_env(i) for i in obj]
    elif isinstance(obj, str) and obj.startswith("${") and obj.endswith("}"):
        return os.getenv(obj[2:-1], "")
    return obj


def parse_key_value(text: str, source: str = "<config>") -> Dict[str, str]:
    """Read flat `key = value` lines; `#` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        values[key.strip()] = value.strip().strip("'\"")
    return values


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Flat mapping from YAML text, falling back to the `key = value` form."""
    try:
        parsed = yaml.safe_load(text)
    except yaml.YAMLError:
        parsed = None
    if parsed is None and text.strip():
        parsed = parse_key_value(text, source)
    if parsed is None:
        return {}
    if not isinstance(parsed, dict):
        parsed = parse_key_value(text, source)
    for key, value in parsed.items():
        if isinstance(value, dict):
            raise ConfigError(f"{source}: key '{key}' must be a scalar or list, the config is flat")
    return {str(k): v for k, v in parsed.items()}


def build_run_config(values: Dict[str, Any], source: str = "<config>") -> RunConfig:
    """Route flat keys to RunConfig, TrainConfig and AugmentConfig and validate them."""
    paths: Dict[str, Any] = {}
    train: Dict[str, Any] = {}
    augment: Dict[str, Any] = {}
    for key, value in values.items():
        if key in PATH_KEYS:
            paths[key] = value
        elif key in TRAIN_KEYS:
            train[key] = value
        elif key.startswith(AUGMENT_PREFIX) and key[len(AUGMENT_PREFIX):] in AUGMENT_KEYS:
            augment[key[len(AUGMENT_PREFIX):]] = value
        else:
            raise ConfigError(f"{source}: unknown config key '{key}'")

    # optional keys left empty (e.g. an unset ${ENV_VAR}) fall back to their defaults
    paths = {k: v for k, v in paths.items() if v not in ("", None)}
    train = {k: v for k, v in train.items() if v not in ("", None)}
    try:
        return RunConfig(**paths, train=TrainConfig(**train, augment=AugmentConfig(**augment)))
    except ValidationError as e:
        raise ConfigError(f"{source}: invalid configuration: {e}") from None


def load_run_config(config_path: Optional[PathLike], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load and validate a run configuration.

    `.env` is loaded first so ${ENV_VAR} placeholders can refer to it.
    `overrides` (e.g. from command-line flags) replace file values.

    Raises:
        ConfigError: unreadable file, unknown key or invalid value
    """
    load_dotenv()
    values: Dict[str, Any] = {}
    source = "<defaults>"
    if config_path is not None:
        source = str(config_path)
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {config_path}: {e}") from None
        values = _replace_env(parse_config_text(text, source))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = build_run_config(values, source)
    logger.debug(f"Loaded run config from {source}: {cfg.model_dump()}")
    return cfg


def run_config_to_flat(cfg: RunConfig) -> Dict[str, Any]:
    """Inverse of build_run_config, used for run summaries."""
    flat: Dict[str, Any] = cfg.model_dump(exclude={"train"})
    train = cfg.train.model_dump(exclude={"augment"})
    flat.update(train)
    flat.update({f"{AUGMENT_PREFIX}{k}": v for k, v in cfg.augment.model_dump().items()})
    return flat
