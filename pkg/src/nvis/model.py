"""Layer specifications, the sequential model container, and validation.

A model is a linear chain of Conv2D / MaxPool2D / Flatten / Dense layers over
a [C,H,W] input. Input sizes are never stored; they are inferred front to
back, and validation re-derives every expected weight shape from that
inference so a mismatched tensor is always reported against its layer index.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .errors import ModelValidationError
from .tensor import Padding, Tensor

__all__ = [
    "Activation",
    "Padding",
    "Conv2DSpec",
    "MaxPool2DSpec",
    "FlattenSpec",
    "DenseSpec",
    "LayerSpec",
    "Model",
    "LayerInfo",
    "Violation",
    "validate",
    "infer_shapes",
    "extract_layers",
]


class Activation(enum.Enum):
    NONE = "none"
    RELU = "relu"
    SOFTMAX = "softmax"


@dataclass(frozen=True)
class Conv2DSpec:
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    padding: Padding = Padding.VALID
    activation: Activation = Activation.NONE

    kind = "conv2d"


@dataclass(frozen=True)
class MaxPool2DSpec:
    pool_h: int
    pool_w: int
    stride: int = 1

    kind = "maxpool2d"


@dataclass(frozen=True)
class FlattenSpec:
    kind = "flatten"


@dataclass(frozen=True)
class DenseSpec:
    out_features: int
    activation: Activation = Activation.NONE

    kind = "dense"


LayerSpec = Union[Conv2DSpec, MaxPool2DSpec, FlattenSpec, DenseSpec]

WEIGHTED_KINDS = ("conv2d", "dense")


@dataclass(frozen=True)
class Model:
    """A named sequential network: specs plus weight/bias tensors per weighted layer."""

    name: str
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    weights: Mapping[int, tuple[Tensor, Tensor]]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "weights", dict(self.weights))

    def layer_weights(self, index: int) -> tuple[Tensor, Tensor]:
        return self.weights[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Model):
            return NotImplemented
        return (
            self.name == other.name
            and self.input_shape == other.input_shape
            and self.layers == other.layers
            and self.weights == other.weights
        )


@dataclass(frozen=True)
class LayerInfo:
    """Static per-layer summary: what the UI layer stack and freeze checks need."""

    index: int
    kind: str
    output_shape: tuple[int, ...]
    filter_count: int


@dataclass(frozen=True)
class Violation:
    """One broken model invariant; ``layer`` is None for model-level problems."""

    layer: int | None
    message: str

    def __str__(self) -> str:
        prefix = f"layer {self.layer}: " if self.layer is not None else ""
        return prefix + self.message


def _expected_weight_shapes(spec: LayerSpec, input_shape: tuple[int, ...]):
    if isinstance(spec, Conv2DSpec):
        cin = input_shape[0]
        return (spec.out_channels, cin, spec.kernel_h, spec.kernel_w), (spec.out_channels,)
    if isinstance(spec, DenseSpec):
        return (spec.out_features, input_shape[0]), (spec.out_features,)
    return None


def _infer_one(spec: LayerSpec, input_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Output shape of one layer, or raises ValueError with the reason."""
    if isinstance(spec, Conv2DSpec):
        if len(input_shape) != 3:
            raise ValueError(f"conv2d needs a rank-3 input, got {list(input_shape)}")
        if spec.out_channels < 1 or spec.kernel_h < 1 or spec.kernel_w < 1 or spec.stride < 1:
            raise ValueError("conv2d sizes must be >= 1")
        if spec.padding is Padding.SAME:
            if spec.stride != 1:
                raise ValueError("padding 'same' requires stride 1")
            return (spec.out_channels, input_shape[1], input_shape[2])
        _, h, w = input_shape
        if spec.kernel_h > h or spec.kernel_w > w:
            raise ValueError(
                f"kernel {spec.kernel_h}x{spec.kernel_w} does not fit input {list(input_shape)}"
            )
        return (
            spec.out_channels,
            (h - spec.kernel_h) // spec.stride + 1,
            (w - spec.kernel_w) // spec.stride + 1,
        )
    if isinstance(spec, MaxPool2DSpec):
        if len(input_shape) != 3:
            raise ValueError(f"maxpool2d needs a rank-3 input, got {list(input_shape)}")
        if spec.pool_h < 1 or spec.pool_w < 1 or spec.stride < 1:
            raise ValueError("maxpool2d sizes must be >= 1")
        _, h, w = input_shape
        if spec.pool_h > h or spec.pool_w > w:
            raise ValueError(f"pool {spec.pool_h}x{spec.pool_w} larger than input {list(input_shape)}")
        return (
            input_shape[0],
            (h - spec.pool_h) // spec.stride + 1,
            (w - spec.pool_w) // spec.stride + 1,
        )
    if isinstance(spec, FlattenSpec):
        n = 1
        for d in input_shape:
            n *= d
        return (n,)
    if isinstance(spec, DenseSpec):
        if len(input_shape) != 1:
            raise ValueError(f"dense needs a rank-1 input (flatten first), got {list(input_shape)}")
        if spec.out_features < 1:
            raise ValueError("dense out_features must be >= 1")
        return (spec.out_features,)
    raise ValueError(f"unknown layer spec {spec!r}")


def infer_shapes(model: Model) -> list[tuple[int, ...]]:
    """Per-layer output shapes; raises ModelValidationError if inference breaks."""
    shapes: list[tuple[int, ...]] = []
    current = model.input_shape
    problems: list[Violation] = []
    if len(model.input_shape) != 3 or any(d < 1 for d in model.input_shape):
        raise ModelValidationError([Violation(None, f"input_shape must be [C,H,W] with positive dims, got {list(model.input_shape)}")])
    if not model.layers:
        raise ModelValidationError([Violation(None, "model has no layers")])
    for i, spec in enumerate(model.layers):
        try:
            current = _infer_one(spec, current)
        except ValueError as exc:
            problems.append(Violation(i, str(exc)))
            raise ModelValidationError(problems)
        shapes.append(current)
    return shapes


def validate(model: Model) -> list[Violation]:
    """Check every model invariant; returns all violations instead of raising."""
    violations: list[Violation] = []
    if len(model.input_shape) != 3 or any(d < 1 for d in model.input_shape):
        violations.append(
            Violation(None, f"input_shape must be [C,H,W] with positive dims, got {list(model.input_shape)}")
        )
        return violations
    if not model.layers:
        violations.append(Violation(None, "model has no layers"))
        return violations

    current = model.input_shape
    shapes: list[tuple[int, ...] | None] = []
    broken = False
    for i, spec in enumerate(model.layers):
        if broken:
            shapes.append(None)
            continue
        try:
            current = _infer_one(spec, current)
            shapes.append(current)
        except ValueError as exc:
            violations.append(Violation(i, str(exc)))
            shapes.append(None)
            broken = True

    # Activation placement: softmax only on the final layer, and only on dense.
    last = len(model.layers) - 1
    for i, spec in enumerate(model.layers):
        act = getattr(spec, "activation", None)
        if act is Activation.SOFTMAX:
            if i != last:
                violations.append(Violation(i, "softmax activation is only permitted on the final layer"))
            elif not isinstance(spec, DenseSpec):
                violations.append(Violation(i, "softmax activation is only permitted on a dense layer"))

    if not broken and shapes and shapes[-1] is not None and len(shapes[-1]) != 1:
        violations.append(
            Violation(last, f"final layer must yield rank-1 class scores, got {list(shapes[-1])}")
        )

    # Weight presence and shape per layer.
    input_shapes = [model.input_shape] + [s for s in shapes[:-1]]
    for i, spec in enumerate(model.layers):
        expected = None
        if input_shapes[i] is not None:
            expected = _expected_weight_shapes(spec, input_shapes[i])
        if spec.kind in WEIGHTED_KINDS:
            if i not in model.weights:
                violations.append(Violation(i, f"{spec.kind} layer is missing its weights"))
            elif expected is not None:
                wt, bias = model.weights[i]
                if wt.shape != expected[0]:
                    violations.append(
                        Violation(
                            i,
                            f"weight shape {list(wt.shape)} does not match expected {list(expected[0])}",
                        )
                    )
                if bias.shape != expected[1]:
                    violations.append(
                        Violation(
                            i,
                            f"bias shape {list(bias.shape)} does not match expected {list(expected[1])}",
                        )
                    )
        else:
            if i in model.weights:
                violations.append(Violation(i, f"{spec.kind} layer must not carry weights"))
    for i in model.weights:
        if not 0 <= i < len(model.layers):
            violations.append(Violation(None, f"weights reference nonexistent layer {i}"))

    return violations


def validate_or_raise(model: Model) -> None:
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)


def extract_layers(model: Model) -> list[LayerInfo]:
    """Static structural summary: index, kind, inferred output shape, filter count."""
    shapes = infer_shapes(model)
    infos = []
    for i, (spec, shape) in enumerate(zip(model.layers, shapes)):
        filters = spec.out_channels if isinstance(spec, Conv2DSpec) else 0
        infos.append(LayerInfo(index=i, kind=spec.kind, output_shape=shape, filter_count=filters))
    return infos
