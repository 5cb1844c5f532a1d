"""Dense float32 tensors and the deterministic numerical kernels.

All kernels are pure functions over immutable tensors. The reference paths
fix their accumulation order (input channel ascending, then kernel row, then
kernel column; dense sums ascending in the input index) and do all arithmetic
in float32, so repeated runs are bitwise-identical and zeroed summands drop
out exactly. Vectorization only ever spans output elements, never the
reduction axis, which keeps the per-element operation sequence identical to
a naive loop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidShapeError, RangeError, UnsupportedConfigurationError

__all__ = [
    "Tensor",
    "Padding",
    "ConvParams",
    "conv2d",
    "maxpool2d",
    "dense",
    "relu",
    "softmax",
    "elementwise_sub_abs",
    "l2_norm",
    "cosine",
    "max_abs",
]


class Padding(enum.Enum):
    VALID = "valid"
    SAME = "same"


@dataclass(frozen=True)
class ConvParams:
    """Convolution geometry. ``same`` padding is only defined for stride 1."""

    stride: int = 1
    padding: Padding = Padding.VALID

    def __post_init__(self):
        if self.stride < 1:
            raise UnsupportedConfigurationError(f"stride must be >= 1, got {self.stride}")
        if self.padding is Padding.SAME and self.stride != 1:
            raise UnsupportedConfigurationError(
                f"padding 'same' requires stride 1, got stride {self.stride}"
            )


class Tensor:
    """Immutable dense float32 array with explicit shape.

    Stored C-contiguous (row-major); for rank-3 activations the layout is
    [channel, row, column]. Values are checked finite on construction unless
    the producing kernel is documented unchecked.
    """

    __slots__ = ("_array",)

    def __init__(self, array: np.ndarray, *, _unchecked: bool = False):
        arr = np.asarray(array, dtype=np.float32)
        if arr.ndim < 1:
            raise InvalidShapeError("tensor rank must be >= 1, got rank 0")
        arr = np.ascontiguousarray(arr)
        if any(d < 1 for d in arr.shape):
            raise InvalidShapeError(f"every dimension must be >= 1, got shape {list(arr.shape)}")
        if not _unchecked and not np.all(np.isfinite(arr)):
            raise InvalidShapeError("tensor contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "_array", arr)

    @classmethod
    def from_flat(cls, shape: Sequence[int], values: Iterable[float]) -> "Tensor":
        shape = tuple(int(d) for d in shape)
        data = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float32)
        expected = int(np.prod(shape)) if shape else 0
        if data.ndim != 1 or data.size != expected:
            raise InvalidShapeError(
                f"flat data length {data.size} does not match shape {list(shape)} (needs {expected})"
            )
        return cls(data.reshape(shape))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "Tensor":
        return cls(np.zeros(tuple(shape), dtype=np.float32))

    @classmethod
    def full(cls, shape: Sequence[int], value: float) -> "Tensor":
        return cls(np.full(tuple(shape), value, dtype=np.float32))

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def rank(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view of the stored values."""
        return self._array

    def flat(self) -> np.ndarray:
        return self._array.reshape(-1)

    def tolist(self) -> list[float]:
        return [float(v) for v in self._array.reshape(-1)]

    def tobytes(self) -> bytes:
        return self._array.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and self._array.tobytes() == other._array.tobytes()

    def __hash__(self):
        return hash((self.shape, self._array.tobytes()))

    def __repr__(self) -> str:
        return f"Tensor(shape={list(self.shape)})"


def _require_shape(t: Tensor, rank: int, what: str) -> None:
    if t.rank != rank:
        raise InvalidShapeError(f"{what} must have rank {rank}, got shape {list(t.shape)}")


def _same_pad(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    # Symmetric zero padding, extra row/column on bottom/right when odd.
    top = (kh - 1) // 2
    bottom = kh - 1 - top
    left = (kw - 1) // 2
    right = kw - 1 - left
    return np.pad(x, ((0, 0), (top, bottom), (left, right)))


def conv2d(input: Tensor, weights: Tensor, bias: Tensor, params: ConvParams) -> Tensor:
    """2-D cross-correlation over [Cin,H,W] with weights [Cout,Cin,Kh,Kw].

    Accumulation per output element runs input-channel ascending, then kernel
    row, then kernel column, in float32, with the bias added last. That order
    is part of the contract: downstream freeze-equivalence checks rely on it
    being bitwise-reproducible.
    """
    _require_shape(input, 3, "conv2d input")
    _require_shape(weights, 4, "conv2d weights")
    _require_shape(bias, 1, "conv2d bias")
    cin, h, w = input.shape
    cout, wcin, kh, kw = weights.shape
    if wcin != cin:
        raise InvalidShapeError(
            f"conv2d input channels {list(input.shape)} do not match weights {list(weights.shape)}"
        )
    if bias.shape != (cout,):
        raise InvalidShapeError(
            f"conv2d bias shape {list(bias.shape)} does not match weights {list(weights.shape)}"
        )

    x = input.array
    if params.padding is Padding.SAME:
        x = _same_pad(x, kh, kw)
        h_pad, w_pad = x.shape[1], x.shape[2]
    else:
        h_pad, w_pad = h, w
    if kh > h_pad or kw > w_pad:
        raise InvalidShapeError(
            f"conv2d kernel {list(weights.shape)} does not fit input {list(input.shape)}"
        )
    s = params.stride
    oh = (h_pad - kh) // s + 1
    ow = (w_pad - kw) // s + 1

    wt = weights.array
    out = np.zeros((cout, oh, ow), dtype=np.float32)
    for ci in range(cin):
        for dy in range(kh):
            for dx in range(kw):
                plane = x[ci, dy : dy + s * (oh - 1) + 1 : s, dx : dx + s * (ow - 1) + 1 : s]
                out += wt[:, ci, dy, dx][:, None, None] * plane[None, :, :]
    out += bias.array[:, None, None]
    return Tensor(out, _unchecked=True)


def maxpool2d(input: Tensor, pool_h: int, pool_w: int, stride: int) -> Tensor:
    """Valid max pooling: windows that would overrun the input are dropped."""
    _require_shape(input, 3, "maxpool2d input")
    if pool_h < 1 or pool_w < 1 or stride < 1:
        raise UnsupportedConfigurationError(
            f"pool window and stride must be >= 1, got {pool_h}x{pool_w} stride {stride}"
        )
    c, h, w = input.shape
    if pool_h > h or pool_w > w:
        raise InvalidShapeError(
            f"pool window {pool_h}x{pool_w} larger than input {list(input.shape)}"
        )
    oh = (h - pool_h) // stride + 1
    ow = (w - pool_w) // stride + 1
    x = input.array
    out = None
    for dy in range(pool_h):
        for dx in range(pool_w):
            plane = x[:, dy : dy + stride * (oh - 1) + 1 : stride, dx : dx + stride * (ow - 1) + 1 : stride]
            out = plane.copy() if out is None else np.maximum(out, plane)
    return Tensor(out, _unchecked=True)


def dense(input: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map out[m] = sum_n w[m,n]*x[n] + b[m], n ascending in float32."""
    _require_shape(input, 1, "dense input")
    _require_shape(weights, 2, "dense weights")
    _require_shape(bias, 1, "dense bias")
    m, n = weights.shape
    if input.shape != (n,):
        raise InvalidShapeError(
            f"dense input shape {list(input.shape)} does not match weights {list(weights.shape)}"
        )
    if bias.shape != (m,):
        raise InvalidShapeError(
            f"dense bias shape {list(bias.shape)} does not match weights {list(weights.shape)}"
        )
    x = input.array
    wt = weights.array
    out = np.zeros(m, dtype=np.float32)
    for j in range(n):
        out += wt[:, j] * x[j]
    out += bias.array
    return Tensor(out, _unchecked=True)


def relu(input: Tensor) -> Tensor:
    return Tensor(np.maximum(input.array, np.float32(0.0)), _unchecked=True)


def softmax(input: Tensor) -> Tensor:
    """Numerically stable softmax over a rank-1 tensor (max subtracted first)."""
    _require_shape(input, 1, "softmax input")
    x = input.array
    shifted = x - np.max(x)
    e = np.exp(shifted, dtype=np.float32)
    return Tensor(e / np.sum(e, dtype=np.float32), _unchecked=True)


def elementwise_sub_abs(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise InvalidShapeError(f"shape mismatch: {list(a.shape)} vs {list(b.shape)}")
    return Tensor(np.abs(a.array - b.array), _unchecked=True)


def l2_norm(t: Tensor) -> float:
    return float(math.sqrt(float(np.sum(np.square(t.flat(), dtype=np.float64)))))


def cosine(a: Tensor, b: Tensor) -> float:
    """Cosine similarity of the flattened tensors, clipped into [-1, 1].

    Convention for degenerate vectors: 1.0 when both are zero, 0.0 when
    exactly one is.
    """
    if a.shape != b.shape:
        raise InvalidShapeError(f"shape mismatch: {list(a.shape)} vs {list(b.shape)}")
    av = a.flat().astype(np.float64)
    bv = b.flat().astype(np.float64)
    na = math.sqrt(float(np.sum(av * av)))
    nb = math.sqrt(float(np.sum(bv * bv)))
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.sum(av * bv)) / (na * nb)
    return max(-1.0, min(1.0, value))


def max_abs(t: Tensor) -> float:
    return float(np.max(np.abs(t.array)))


def argmax_lowest(t: Tensor) -> int:
    """Index of the maximum of a rank-1 tensor; ties break to the lowest index."""
    _require_shape(t, 1, "argmax input")
    return int(np.argmax(t.array))


def check_index(value: int, count: int, what: str) -> None:
    if not 0 <= value < count:
        raise RangeError(f"{what} {value} out of range [0, {count})")
