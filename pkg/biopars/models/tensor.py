"""
Dense tensor substrate

Tensors are float64 numpy arrays of rank <= 3. Every reduction here runs in a
fixed left-to-right order over the reduced (last) axis, so the value computed
for one row never depends on how many other rows are in the array. Chunked and
sharded execution rely on that to be bit-identical with one-shot execution.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from biopars.errors import DimensionError, ParameterError

Tensor = npt.NDArray[np.float64]

MAX_RANK = 3


def as_tensor(values, name: str = "tensor") -> Tensor:
    """
    Convert values to a float64 array and check the substrate invariants.

    Args:
        values: Anything numpy can turn into a numeric array
        name: Used in error messages

    Returns:
        A C-contiguous float64 array
    """
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim > MAX_RANK:
        raise DimensionError(f"{name} has rank {arr.ndim}, at most {MAX_RANK} is supported")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class ComplexTensor:
    """Complex values stored as a pair of real tensors of identical shape."""

    re: Tensor
    im: Tensor

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise DimensionError(f"real part {self.re.shape} and imaginary part {self.im.shape} differ in shape")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "ComplexTensor":
        return cls(np.zeros(tuple(shape)), np.zeros(tuple(shape)))

    @classmethod
    def real(cls, values) -> "ComplexTensor":
        re = as_tensor(values)
        return cls(re, np.zeros_like(re))

    @classmethod
    def from_numpy(cls, values: np.ndarray) -> "ComplexTensor":
        return cls(np.ascontiguousarray(values.real, dtype=np.float64), np.ascontiguousarray(values.imag, dtype=np.float64))

    def to_numpy(self) -> np.ndarray:
        return self.re + 1j * self.im

    def is_real(self) -> bool:
        return not np.any(self.im)


class Rng:
    """
    Seeded random source.

    Wraps numpy's Generator over the PCG64 bit generator: one 64-bit seed gives
    the same value stream on every platform for a given numpy release.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, shape: Sequence[int] | int, scale: float = 1.0) -> Tensor:
        return self._gen.normal(0.0, scale, size=shape)

    def uniform(self, shape: Sequence[int] | int, low: float = 0.0, high: float = 1.0) -> Tensor:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, high: int, size: int | None = None):
        return self._gen.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def child(self, index: int) -> "Rng":
        """Independent stream for a named sub-purpose."""
        return Rng((self.seed * 0x9E3779B97F4A7C15 + index + 1) & 0xFFFFFFFFFFFFFFFF)


def sum_last(a: Tensor) -> Tensor:
    """Sum over the last axis, strictly left to right."""
    out = a[..., 0].copy()
    for j in range(1, a.shape[-1]):
        out += a[..., j]
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of an (m, k) and a (k, p) tensor.

    Accumulates over k in increasing order, so every output row depends only on
    the matching input row.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply tensors of shape {a.shape} and {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis with per-row max subtraction."""
    shifted = a - np.max(a, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / sum_last(e)[..., None]


def l2_normalize_rows(a: Tensor, eps: float = 1e-8) -> Tensor:
    """Divide each row by max(its l2 norm, eps)."""
    norms = np.sqrt(sum_last(a * a))
    return a / np.maximum(norms, eps)[..., None]


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def swish(x: Tensor) -> Tensor:
    return x * sigmoid(x)
