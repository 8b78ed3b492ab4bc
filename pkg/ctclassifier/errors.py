"""
Exception hierarchy shared by every module.
"""

from typing import Optional


class CTClassifierError(Exception):
    pass


class ShapeError(CTClassifierError, ValueError):
    pass


class NumericalError(CTClassifierError, ArithmeticError):
    pass


class ConfigError(CTClassifierError, ValueError):
    pass


class DatasetError(CTClassifierError):
    pass


class ManifestError(DatasetError):
    pass


class DecodeError(CTClassifierError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"cannot decode image {path}: {reason}")
        self.path = path
        self.reason = reason


class LabelError(CTClassifierError, ValueError):
    pass


class UndefinedMetricError(CTClassifierError, ValueError):
    pass


class CheckpointError(CTClassifierError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ChecksumMismatchError(CheckpointError):
    pass


class SpecMismatchError(CheckpointError, ShapeError):
    pass


class PretrainedImportError(CheckpointError):
    def __init__(self, message: str, layer: Optional[int] = None):
        super().__init__(message)
        self.layer = layer
