"""
Import of pretrained convolution weights for transfer learning.

A weight file is any checkpoint in the format of models/checkpoint.py; its
conv2d parameters are taken in layer order. Where those weights came from is
up to the caller.
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np

from ctclassifier.errors import PretrainedImportError
from ctclassifier.models.checkpoint import load_checkpoint
from ctclassifier.models.zoo import ModelSpec
from ctclassifier.nn.params import ParamSet, init_params
from ctclassifier.tensor.core import resolve_dtype
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)


def import_pretrained_conv_weights(path: Union[str, Path], spec: ModelSpec, transfer: bool = True,
                                   rng: Optional[np.random.Generator] = None) -> ParamSet:
    """
    Load conv-stack parameters into a freshly initialised ParamSet.

    Args:
        path: Weight file containing the conv layers
        spec: Target architecture
        transfer: Freeze the imported conv layers (only the head trains)
        rng: Generator for the head initialisation

    Returns:
        ParamSet with imported conv tensors and a freeze mask over conv layers when transfer is on
    """
    source = load_checkpoint(path, validate=False)
    source_convs = [
        layer for layer in source.params.layers
        if "weights" in layer and layer["weights"].ndim == 4
    ]
    target_convs = spec.conv_layer_indices()
    expected_shapes = spec.param_shapes()

    if len(source_convs) != len(target_convs):
        first_missing = min(len(source_convs), len(target_convs))
        offending = target_convs[first_missing] if first_missing < len(target_convs) else None
        raise PretrainedImportError(
            f"weight file has {len(source_convs)} conv layers, {spec.name} needs {len(target_convs)}"
            + (f"; first unmatched is layer {offending}" if offending is not None else ""),
            layer=offending,
        )

    for position, (layer_index, blobs) in enumerate(zip(target_convs, source_convs)):
        for name, shape in expected_shapes[layer_index].items():
            got = tuple(blobs[name].shape) if name in blobs else None
            if got != tuple(shape):
                raise PretrainedImportError(
                    f"conv layer {position} (model layer {layer_index}) {name}: "
                    f"weight file shape {got} != expected {tuple(shape)}",
                    layer=layer_index,
                )

    rng = rng or np.random.default_rng(0)
    params = init_params(spec.layers, spec.input_shape, rng, spec.dtype)
    dtype = resolve_dtype(spec.dtype)
    for layer_index, blobs in zip(target_convs, source_convs):
        params.layers[layer_index] = {name: np.array(blobs[name], dtype=dtype) for name in ("weights", "bias")}

    frozen = target_convs if transfer else ()
    logger.info(
        f"Imported {len(target_convs)} conv layers from {path} "
        f"({'frozen, head-only training' if transfer else 'fine-tuning all layers'})"
    )
    return params.with_frozen(frozen)
