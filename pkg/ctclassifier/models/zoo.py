"""
Declarative architectures: the small CNN and the modified VGG16.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ctclassifier.errors import ShapeError
from ctclassifier.nn import layers as L
from ctclassifier.nn.layers import LayerSpec, infer_output_shape
from ctclassifier.nn.params import layer_param_shapes
from ctclassifier.tensor.core import DTYPES, Shape, as_shape

MODEL_NAMES = ("small-cnn", "vgg16")

VGG16_BLOCKS: Tuple[Tuple[int, ...], ...] = (
    (64, 64),
    (128, 128),
    (256, 256, 256),
    (512, 512, 512),
    (512, 512, 512),
)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    input_shape: Shape
    layers: Tuple[LayerSpec, ...]
    num_classes: int = 2
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "input_shape", as_shape(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.name not in MODEL_NAMES:
            raise ValueError(f"unknown model '{self.name}', expected one of {MODEL_NAMES}")
        if self.dtype not in DTYPES:
            raise ValueError(f"unsupported dtype '{self.dtype}'")
        if not self.layers or self.layers[-1].kind != "softmax":
            raise ShapeError(f"{self.name}: final layer must be softmax")
        output = self.output_shape()
        if output != (self.num_classes,):
            raise ShapeError(f"{self.name}: softmax width {output} != ({self.num_classes},)")

    def layer_shapes(self) -> List[Shape]:
        """Per-sample output shape after every layer."""
        shapes = []
        shape = self.input_shape
        for index, spec in enumerate(self.layers):
            shape = infer_output_shape(spec, shape, index)
            shapes.append(shape)
        return shapes

    def output_shape(self) -> Shape:
        return self.layer_shapes()[-1]

    def param_shapes(self) -> List[Dict[str, Tuple[int, ...]]]:
        return layer_param_shapes(self.layers, self.input_shape)

    def param_count(self) -> int:
        total = 0
        for shapes in self.param_shapes():
            for shape in shapes.values():
                count = 1
                for extent in shape:
                    count *= extent
                total += count
        return total

    def conv_layer_indices(self) -> List[int]:
        return [i for i, spec in enumerate(self.layers) if spec.kind == "conv2d"]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [spec.to_dict() for spec in self.layers],
            "num_classes": self.num_classes,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelSpec":
        return cls(
            name=data["name"],
            input_shape=tuple(data["input_shape"]),
            layers=tuple(LayerSpec.from_dict(d) for d in data["layers"]),
            num_classes=data.get("num_classes", 2),
            dtype=data.get("dtype", "float32"),
        )


def build_small_cnn(input_size: int = 256, channels: int = 1, blocks: int = 3, filters: int = 32,
                    dense_units: int = 64, dtype: str = "float32") -> ModelSpec:
    """
    Small CNN: [conv(32, 3x3, same) -> relu -> maxpool(2)] x 3, flatten,
    dense(64) -> relu, dense(2) -> softmax, on a 256 x 256 x 1 input.
    """
    layers: List[LayerSpec] = []
    for _ in range(blocks):
        layers += [L.conv2d(filters, kernel=3, stride=1, padding="same"), L.relu(), L.maxpool(2)]
    layers += [
        L.flatten(),
        L.dense(dense_units), L.relu(),
        L.dense(2), L.softmax_layer(),
    ]
    return ModelSpec("small-cnn", (input_size, input_size, channels), tuple(layers), 2, dtype)


def build_vgg16(input_size: int = 224, dropout_rate: float = 0.5, dtype: str = "float32") -> ModelSpec:
    """
    VGG16 conv stack (13 conv layers, 5 max pools) on a 224 x 224 x 3 input,
    with a global-average-pool -> dropout -> dense(2) -> softmax head.
    """
    layers: List[LayerSpec] = []
    for block in VGG16_BLOCKS:
        for filters in block:
            layers += [L.conv2d(filters, kernel=3, stride=1, padding="same"), L.relu()]
        layers.append(L.maxpool(2))
    layers += [
        L.globalavgpool(),
        L.dropout(dropout_rate),
        L.dense(2), L.softmax_layer(),
    ]
    return ModelSpec("vgg16", (input_size, input_size, 3), tuple(layers), 2, dtype)


def build_model(name: str, input_size: Optional[int] = None, dtype: str = "float32") -> ModelSpec:
    """Build a spec by name, optionally at a reduced square input size."""
    if name == "small-cnn":
        return build_small_cnn(input_size or 256, dtype=dtype)
    if name == "vgg16":
        return build_vgg16(input_size or 224, dtype=dtype)
    raise ValueError(f"unknown model '{name}', expected one of {MODEL_NAMES}")


def model_channels(spec: ModelSpec) -> int:
    return spec.input_shape[-1]


def model_image_size(spec: ModelSpec) -> Tuple[int, int]:
    return spec.input_shape[0], spec.input_shape[1]


def describe(spec: ModelSpec) -> Sequence[str]:
    """One line per layer: index, kind and output shape (used in logs)."""
    return [
        f"{i:2d} {layer.kind:<14} {'x'.join(str(d) for d in shape)}"
        for i, (layer, shape) in enumerate(zip(spec.layers, spec.layer_shapes()))
    ]
