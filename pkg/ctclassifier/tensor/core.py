"""
Dense tensor helpers: shapes, dtype policy, elementwise ops and matmul.

Tensors are plain numpy arrays in N x H x W x C row-major layout. Every
function here returns a new array and never writes into its inputs.
"""

from typing import Iterable, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from ctclassifier.errors import ShapeError

Tensor = NDArray[np.floating]
Shape = Tuple[int, ...]
Scalar = Union[int, float]

DTYPES = {
    "float32": np.float32,
    "float64": np.float64,
}

ELEMENTWISE_OPS = ("add", "sub", "mul", "max")


def as_shape(dims: Iterable[int]) -> Shape:
    """Validate extents and return them as a shape tuple."""
    shape = tuple(int(d) for d in dims)
    if not 1 <= len(shape) <= 4:
        raise ShapeError(f"shape must have 1 to 4 extents, got {shape}")
    if any(d < 1 for d in shape):
        raise ShapeError(f"every extent must be >= 1, got {shape}")
    return shape


def element_count(shape: Iterable[int]) -> int:
    return int(np.prod(tuple(shape), dtype=np.int64))


def resolve_dtype(name: str) -> np.dtype:
    """Map a configured precision name to a numpy dtype."""
    try:
        return np.dtype(DTYPES[name])
    except KeyError:
        raise ValueError(f"unsupported dtype '{name}', expected one of {sorted(DTYPES)}") from None


def tensor(data, dtype: str = "float64") -> Tensor:
    """Build a tensor from nested sequences (or an array) with the given precision."""
    arr = np.array(data, dtype=resolve_dtype(dtype))
    as_shape(arr.shape)
    return arr


def elementwise(op: str, a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """
    Apply a pointwise operation.

    Args:
        op: One of add, sub, mul, max (max against a scalar is the ReLU building block)
        a: Left operand
        b: Tensor of identical shape, or a scalar

    Returns:
        New tensor with a's shape
    """
    if op not in ELEMENTWISE_OPS:
        raise ValueError(f"unknown elementwise op '{op}', expected one of {ELEMENTWISE_OPS}")
    a = np.asarray(a)
    if not np.isscalar(b):
        b = np.asarray(b)
        if b.shape != a.shape:
            raise ShapeError(f"elementwise {op}: shape mismatch {a.shape} vs {b.shape}")

    if op == "add":
        return np.add(a, b)
    if op == "sub":
        return np.subtract(a, b)
    if op == "mul":
        return np.multiply(a, b)
    return np.maximum(a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard matrix product of an M x K and a K x N tensor."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    return np.matmul(a, b)
