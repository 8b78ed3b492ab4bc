"""
Layer specifications with shape inference and forward/backward passes.

A layer is described declaratively by a LayerSpec; its trainable tensors live
in a separate parameter dict ("weights", "bias"). forward() returns the output
together with an opaque cache which backward() consumes.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ctclassifier.errors import ShapeError
from ctclassifier.tensor.core import Shape, Tensor
from ctclassifier.tensor.kernels import (
    PADDINGS,
    conv2d_backward,
    conv2d_with_cols,
    conv_geometry,
    pool2d,
    pool2d_backward,
    pool_output_extent,
    softmax,
    softmax_backward,
)

LAYER_KINDS = (
    "conv2d", "maxpool", "avgpool", "globalavgpool", "relu",
    "flatten", "dense", "dropout", "softmax",
)
MODES = ("train", "eval")

Params = Dict[str, Tensor]
Cache = Dict[str, Any]


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: Optional[int] = None
    kernel: Optional[int] = None
    stride: Optional[int] = None
    padding: Optional[str] = None
    units: Optional[int] = None
    window: Optional[int] = None
    rate: Optional[float] = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind '{self.kind}', expected one of {LAYER_KINDS}")
        if self.kind == "conv2d":
            _require_positive(self, "filters", "kernel", "stride")
            if self.padding not in PADDINGS:
                raise ValueError(f"conv2d padding must be one of {PADDINGS}, got {self.padding!r}")
        elif self.kind in ("maxpool", "avgpool"):
            _require_positive(self, "window", "stride")
        elif self.kind == "dense":
            _require_positive(self, "units")
        elif self.kind == "dropout":
            if self.rate is None or not 0.0 <= self.rate < 1.0:
                raise ValueError(f"dropout rate must lie in [0, 1), got {self.rate!r}")

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv2d", "dense")

    def to_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayerSpec":
        return cls(**data)


def _require_positive(spec: LayerSpec, *names: str):
    for name in names:
        value = getattr(spec, name)
        if not isinstance(value, int) or value < 1:
            raise ValueError(f"{spec.kind} needs a positive integer '{name}', got {value!r}")


def conv2d(filters: int, kernel: int = 3, stride: int = 1, padding: str = "same") -> LayerSpec:
    return LayerSpec("conv2d", filters=filters, kernel=kernel, stride=stride, padding=padding)


def maxpool(window: int = 2, stride: Optional[int] = None) -> LayerSpec:
    return LayerSpec("maxpool", window=window, stride=stride or window)


def avgpool(window: int = 2, stride: Optional[int] = None) -> LayerSpec:
    return LayerSpec("avgpool", window=window, stride=stride or window)


def globalavgpool() -> LayerSpec:
    return LayerSpec("globalavgpool")


def relu() -> LayerSpec:
    return LayerSpec("relu")


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units=units)


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("dropout", rate=rate)


def softmax_layer() -> LayerSpec:
    return LayerSpec("softmax")


def _where(index: Optional[int]) -> str:
    return f"layer {index}" if index is not None else "layer"


def infer_output_shape(spec: LayerSpec, input_shape: Shape, index: Optional[int] = None) -> Shape:
    """Per-sample output shape (batch axis excluded) for a valid input shape."""
    shape = tuple(input_shape)
    where = f"{_where(index)} ({spec.kind})"

    if spec.kind in ("conv2d", "maxpool", "avgpool", "globalavgpool"):
        if len(shape) != 3:
            raise ShapeError(f"{where} expects an H x W x C input, got {shape}")
        h, w, c = shape
        if spec.kind == "conv2d":
            try:
                geom = conv_geometry(h, w, spec.kernel, spec.kernel, spec.padding, spec.stride)
            except ShapeError as e:
                raise ShapeError(f"{where}: {e}") from None
            return (geom.out_h, geom.out_w, spec.filters)
        if spec.kind == "globalavgpool":
            return (c,)
        try:
            return (pool_output_extent(h, spec.window, spec.stride),
                    pool_output_extent(w, spec.window, spec.stride), c)
        except ShapeError as e:
            raise ShapeError(f"{where}: {e}") from None

    if spec.kind == "flatten":
        return (int(np.prod(shape)),)

    if spec.kind in ("dense", "softmax"):
        if len(shape) != 1:
            raise ShapeError(f"{where} expects a flat input, got {shape}")
        return (spec.units,) if spec.kind == "dense" else shape

    # relu, dropout
    return shape


def param_shapes(spec: LayerSpec, input_shape: Shape) -> Dict[str, Tuple[int, ...]]:
    """Shapes of the trainable tensors a layer owns (empty for parameter-free layers)."""
    if spec.kind == "conv2d":
        cin = input_shape[-1]
        return {
            "weights": (spec.kernel, spec.kernel, cin, spec.filters),
            "bias": (spec.filters,),
        }
    if spec.kind == "dense":
        return {
            "weights": (input_shape[0], spec.units),
            "bias": (spec.units,),
        }
    return {}


def _check_input(spec: LayerSpec, params: Params, x: Tensor, index: Optional[int]):
    where = f"{_where(index)} ({spec.kind})"
    if spec.kind == "conv2d":
        w = params["weights"]
        if x.ndim != 4 or x.shape[3] != w.shape[2]:
            raise ShapeError(f"{where}: input {x.shape} incompatible with kernels {w.shape}")
    elif spec.kind in ("maxpool", "avgpool", "globalavgpool"):
        if x.ndim != 4:
            raise ShapeError(f"{where}: expected N x H x W x C input, got {x.shape}")
    elif spec.kind == "dense":
        w = params["weights"]
        if x.ndim != 2 or x.shape[1] != w.shape[0]:
            raise ShapeError(f"{where}: input {x.shape} incompatible with weights {w.shape}")
    elif spec.kind == "softmax":
        if x.ndim != 2:
            raise ShapeError(f"{where}: expected N x K logits, got {x.shape}")
    elif spec.kind == "flatten":
        if x.ndim < 2:
            raise ShapeError(f"{where}: expected a batched input, got {x.shape}")


def forward(spec: LayerSpec, params: Params, x: Tensor, mode: str = "eval",
            rng: Optional[np.random.Generator] = None, index: Optional[int] = None) -> Tuple[Tensor, Cache]:
    """
    Run one layer forward.

    Args:
        spec: Layer description
        params: The layer's parameter dict (empty for parameter-free layers)
        x: Batched input tensor
        mode: 'train' or 'eval'; only dropout behaves differently
        rng: Generator used for dropout masks in train mode
        index: Layer position, used in error messages

    Returns:
        Tuple of (output, cache for backward)
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got '{mode}'")
    x = np.asarray(x)
    _check_input(spec, params, x, index)
    cache: Cache = {"input_shape": x.shape}

    if spec.kind == "conv2d":
        out, cols = conv2d_with_cols(x, params["weights"], params["bias"], spec.padding, spec.stride)
        cache.update(cols=cols, weights=params["weights"])
    elif spec.kind in ("maxpool", "avgpool"):
        kind = "max" if spec.kind == "maxpool" else "average"
        out, argmax = pool2d(x, kind, spec.window, spec.stride)
        cache["argmax"] = argmax
    elif spec.kind == "globalavgpool":
        out = x.mean(axis=(1, 2))
    elif spec.kind == "relu":
        out = np.maximum(x, 0)
        cache["mask"] = x > 0
    elif spec.kind == "flatten":
        out = x.reshape(x.shape[0], -1)
    elif spec.kind == "dense":
        out = x @ params["weights"] + params["bias"]
        cache.update(input=x, weights=params["weights"])
    elif spec.kind == "dropout":
        if mode == "eval":
            out = x
            cache["mask"] = None
        else:
            if rng is None:
                raise ValueError(f"{_where(index)} (dropout) needs an rng in train mode")
            keep = rng.random(x.shape) >= spec.rate
            mask = keep.astype(x.dtype) / (1.0 - spec.rate)
            out = x * mask
            cache["mask"] = mask
    else:
        out = softmax(x)
        cache["probs"] = out

    cache["output_shape"] = out.shape
    return out, cache


def backward(spec: LayerSpec, cache: Cache, upstream: Tensor,
             index: Optional[int] = None) -> Tuple[Tensor, Params]:
    """
    Propagate a gradient through one layer.

    Returns:
        Tuple of (gradient w.r.t. the layer input, gradients of the layer parameters)
    """
    upstream = np.asarray(upstream)
    if upstream.shape != cache["output_shape"]:
        raise ShapeError(
            f"{_where(index)} ({spec.kind}): upstream gradient {upstream.shape} "
            f"does not match output {cache['output_shape']}"
        )
    input_shape = cache["input_shape"]

    if spec.kind == "conv2d":
        dx, dw, db = conv2d_backward(upstream, cache["cols"], cache["weights"], input_shape,
                                     spec.padding, spec.stride)
        return dx, {"weights": dw, "bias": db}
    if spec.kind in ("maxpool", "avgpool"):
        kind = "max" if spec.kind == "maxpool" else "average"
        return pool2d_backward(upstream, input_shape, kind, spec.window, spec.stride, cache["argmax"]), {}
    if spec.kind == "globalavgpool":
        _, h, w, _ = input_shape
        dx = np.broadcast_to(upstream[:, None, None, :] / (h * w), input_shape).copy()
        return dx, {}
    if spec.kind == "relu":
        return upstream * cache["mask"], {}
    if spec.kind == "flatten":
        return upstream.reshape(input_shape), {}
    if spec.kind == "dense":
        x, w = cache["input"], cache["weights"]
        return upstream @ w.T, {"weights": x.T @ upstream, "bias": upstream.sum(axis=0)}
    if spec.kind == "dropout":
        mask = cache["mask"]
        return (upstream if mask is None else upstream * mask), {}
    return softmax_backward(cache["probs"], upstream), {}
