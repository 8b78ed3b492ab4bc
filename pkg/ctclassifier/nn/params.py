"""
Parameter containers and seeded initialisation.
"""

from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ctclassifier.errors import ShapeError
from ctclassifier.nn.layers import LayerSpec, infer_output_shape, param_shapes
from ctclassifier.tensor.core import Shape, Tensor, resolve_dtype
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)


class ParamSet:
    """
    Per-layer named tensors in layer order.

    The same container doubles as a GradientSet (one gradient per parameter).
    `frozen` holds the indices of layers excluded from optimisation.
    """

    def __init__(self, layers: Sequence[Dict[str, Tensor]], frozen: Iterable[int] = ()):
        self.layers: List[Dict[str, Tensor]] = [dict(p) for p in layers]
        self.frozen: FrozenSet[int] = frozenset(frozen)

    def __len__(self) -> int:
        return len(self.layers)

    def __getitem__(self, index: int) -> Dict[str, Tensor]:
        return self.layers[index]

    def items(self) -> Iterator[Tuple[int, str, Tensor]]:
        """Deterministic (layer index, name, tensor) iteration."""
        for index, layer in enumerate(self.layers):
            for name in sorted(layer, key=_param_order):
                yield index, name, layer[name]

    def count(self) -> int:
        return sum(int(t.size) for _, _, t in self.items())

    def is_trainable(self, index: int) -> bool:
        return bool(self.layers[index]) and index not in self.frozen

    def copy(self) -> "ParamSet":
        return ParamSet([{k: v.copy() for k, v in layer.items()} for layer in self.layers], self.frozen)

    def zeros_like(self) -> "ParamSet":
        return ParamSet([{k: np.zeros_like(v) for k, v in layer.items()} for layer in self.layers], self.frozen)

    def with_frozen(self, frozen: Iterable[int]) -> "ParamSet":
        return ParamSet(self.layers, frozen)

    def check_congruent(self, other: "ParamSet", what: str = "gradients"):
        """Raise ShapeError unless `other` has exactly the same tensors and shapes."""
        if len(other) != len(self):
            raise ShapeError(f"{what} cover {len(other)} layers, parameters cover {len(self)}")
        for index, (mine, theirs) in enumerate(zip(self.layers, other.layers)):
            if set(mine) != set(theirs):
                raise ShapeError(f"layer {index}: {what} names {sorted(theirs)} differ from {sorted(mine)}")
            for name, tensor in mine.items():
                if theirs[name].shape != tensor.shape:
                    raise ShapeError(
                        f"layer {index} {name}: {what} shape {theirs[name].shape} != {tensor.shape}"
                    )


GradientSet = ParamSet


def _param_order(name: str) -> Tuple[int, str]:
    return (0 if name == "weights" else 1, name)


def layer_param_shapes(layers: Sequence[LayerSpec], input_shape: Shape) -> List[Dict[str, Tuple[int, ...]]]:
    """Parameter shapes of every layer, following shape inference through the chain."""
    shapes = []
    shape = tuple(input_shape)
    for index, spec in enumerate(layers):
        shapes.append(param_shapes(spec, shape))
        shape = infer_output_shape(spec, shape, index)
    return shapes


def _uniform(rng: np.random.Generator, limit: float, shape: Tuple[int, ...], dtype) -> Tensor:
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def init_params(layers: Sequence[LayerSpec], input_shape: Shape, rng: np.random.Generator,
                dtype: str = "float32", frozen: Optional[Iterable[int]] = None) -> ParamSet:
    """
    Initialise every trainable layer from one seeded generator.

    He-uniform for conv/dense layers, Glorot-uniform for a dense layer feeding
    softmax, zero biases.
    """
    np_dtype = resolve_dtype(dtype)
    all_shapes = layer_param_shapes(layers, input_shape)
    params = []
    for index, (spec, shapes) in enumerate(zip(layers, all_shapes)):
        if not shapes:
            params.append({})
            continue
        w_shape = shapes["weights"]
        if spec.kind == "conv2d":
            k, _, cin, cout = w_shape
            fan_in, fan_out = k * k * cin, k * k * cout
        else:
            fan_in, fan_out = w_shape
        feeds_softmax = index + 1 < len(layers) and layers[index + 1].kind == "softmax"
        if feeds_softmax:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        else:
            limit = np.sqrt(6.0 / fan_in)
        params.append({
            "weights": _uniform(rng, limit, w_shape, np_dtype),
            "bias": np.zeros(shapes["bias"], dtype=np_dtype),
        })
    result = ParamSet(params, frozen or ())
    logger.debug(f"Initialised {result.count()} parameters over {len(layers)} layers")
    return result
