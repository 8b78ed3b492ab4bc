"""
Executable network: a ModelSpec bound to its ParamSet.
"""

from typing import List, Optional, Tuple

import numpy as np

from ctclassifier.errors import ShapeError, SpecMismatchError
from ctclassifier.models.zoo import ModelSpec
from ctclassifier.nn import layers as L
from ctclassifier.nn.params import GradientSet, ParamSet, init_params
from ctclassifier.tensor.core import Tensor, resolve_dtype

Caches = List[dict]


def check_params_match(spec: ModelSpec, params: ParamSet):
    """Raise SpecMismatchError unless parameter shapes follow the model spec's shape inference."""
    expected = spec.param_shapes()
    if len(params) != len(expected):
        raise SpecMismatchError(f"{spec.name}: parameters cover {len(params)} layers, spec has {len(expected)}")
    for index, (shapes, layer) in enumerate(zip(expected, params.layers)):
        if set(shapes) != set(layer):
            raise SpecMismatchError(
                f"{spec.name} layer {index} ({spec.layers[index].kind}): "
                f"parameters {sorted(layer)} != expected {sorted(shapes)}"
            )
        for name, shape in shapes.items():
            if tuple(layer[name].shape) != tuple(shape):
                raise SpecMismatchError(
                    f"{spec.name} layer {index} ({spec.layers[index].kind}) {name}: "
                    f"shape {tuple(layer[name].shape)} != expected {tuple(shape)}"
                )


class Network:
    def __init__(self, spec: ModelSpec, params: ParamSet):
        check_params_match(spec, params)
        self.spec = spec
        self.params = params

    @classmethod
    def initialise(cls, spec: ModelSpec, seed: int = 0) -> "Network":
        rng = np.random.default_rng(seed)
        return cls(spec, init_params(spec.layers, spec.input_shape, rng, spec.dtype))

    @property
    def dtype(self) -> np.dtype:
        return resolve_dtype(self.spec.dtype)

    def _check_batch(self, x: Tensor):
        if x.ndim != len(self.spec.input_shape) + 1 or tuple(x.shape[1:]) != self.spec.input_shape:
            raise ShapeError(
                f"{self.spec.name} expects batches of {self.spec.input_shape}, got {tuple(x.shape)}"
            )

    def forward(self, x: Tensor, mode: str = "eval",
                rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Caches]:
        """Run every layer; returns the softmax probabilities and per-layer caches."""
        x = np.asarray(x, dtype=self.dtype)
        self._check_batch(x)
        caches = []
        for index, spec in enumerate(self.spec.layers):
            x, cache = L.forward(spec, self.params[index], x, mode, rng, index)
            caches.append(cache)
        return x, caches

    def predict_proba(self, x: Tensor) -> Tensor:
        return self.forward(x, "eval")[0]

    def backward(self, grad_logits: Tensor, caches: Caches) -> GradientSet:
        """
        Back-propagate the gradient w.r.t. the softmax logits.

        The final softmax layer is skipped (its gradient is fused into the loss),
        and propagation stops below the lowest trainable layer; gradients of
        frozen layers stay exactly zero.
        """
        grads = self.params.zeros_like()
        trainable = [i for i in range(len(self.params)) if self.params.is_trainable(i)]
        if not trainable:
            return grads
        lowest = trainable[0]
        upstream = np.asarray(grad_logits, dtype=self.dtype)
        for index in range(len(self.spec.layers) - 2, lowest - 1, -1):
            upstream, layer_grads = L.backward(self.spec.layers[index], caches[index], upstream, index)
            if self.params.is_trainable(index):
                grads.layers[index] = {k: v.astype(self.dtype, copy=False) for k, v in layer_grads.items()}
        return grads
