"""Forward execution with per-layer tracing and filter-freezing mutation.

A frozen filter has its post-activation output channel replaced by zeros, so
it contributes nothing downstream: the next convolution's sum over input
channels degenerates to the exclusion sum over the surviving filters, exactly
(zero summands are exact in float32 under the fixed accumulation order).
The trace records post-freeze activations — what downstream layers actually
consumed and what the UI renders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, ParseError, RangeError
from .model import Conv2DSpec, DenseSpec, FlattenSpec, LayerInfo, MaxPool2DSpec, Model, extract_layers
from .model import Activation
from .tensor import ConvParams, Tensor, argmax_lowest, conv2d, dense, maxpool2d, relu, softmax

__all__ = [
    "FreezeConfig",
    "InferenceTrace",
    "forward",
    "mutate_output",
    "inner_output",
    "prepare_input",
    "predict",
]


@dataclass(frozen=True)
class FreezeConfig:
    """Which filters are zeroed, per convolution layer index.

    Filter lists are kept ascending and duplicate-free; the empty mapping is
    the canonical "no mutation".
    """

    entries: Mapping[int, tuple[int, ...]]

    def __post_init__(self):
        normalized = {}
        for layer, filters in self.entries.items():
            normalized[int(layer)] = tuple(sorted(set(int(f) for f in filters)))
        object.__setattr__(self, "entries", normalized)

    @classmethod
    def empty(cls) -> "FreezeConfig":
        return cls({})

    def is_empty(self) -> bool:
        return not self.entries

    def filters_for(self, layer_index: int) -> tuple[int, ...]:
        return self.entries.get(layer_index, ())

    def validate_against(self, model: Model) -> None:
        """Every entry must name a Conv2D layer and an existing filter index."""
        for layer, filters in self.entries.items():
            if not 0 <= layer < len(model.layers):
                raise InvalidConfigError(f"freeze references nonexistent layer {layer}")
            spec = model.layers[layer]
            if not isinstance(spec, Conv2DSpec):
                raise InvalidConfigError(
                    f"freeze references layer {layer} of kind {spec.kind}; only conv2d filters can be frozen"
                )
            for f in filters:
                if not 0 <= f < spec.out_channels:
                    raise InvalidConfigError(
                        f"freeze filter {f} out of range for layer {layer} with {spec.out_channels} filters"
                    )

    def to_doc(self) -> dict:
        return {
            "freezes": [
                {"layer": layer, "filters": list(filters)}
                for layer, filters in sorted(self.entries.items())
            ]
        }

    @classmethod
    def from_doc(cls, doc) -> "FreezeConfig":
        if not isinstance(doc, dict):
            raise ParseError(f"freeze config must be an object, got {doc!r}", "$")
        freezes = doc.get("freezes", [])
        if not isinstance(freezes, list):
            raise ParseError("'freezes' must be an array", "$.freezes")
        entries: dict[int, tuple[int, ...]] = {}
        for i, item in enumerate(freezes):
            where = f"$.freezes[{i}]"
            if not isinstance(item, dict) or "layer" not in item or "filters" not in item:
                raise ParseError("freeze entry needs 'layer' and 'filters'", where)
            layer = item["layer"]
            filters = item["filters"]
            if isinstance(layer, bool) or not isinstance(layer, int):
                raise ParseError(f"'layer' must be an integer, got {layer!r}", where)
            if not isinstance(filters, list) or any(
                isinstance(f, bool) or not isinstance(f, int) for f in filters
            ):
                raise ParseError(f"'filters' must be a list of integers, got {filters!r}", where)
            if layer in entries:
                raise ParseError(f"layer {layer} listed twice", where)
            if sorted(set(filters)) != filters:
                raise ParseError("'filters' must be ascending and duplicate-free", where)
            entries[layer] = tuple(filters)
        return cls(entries)


@dataclass(frozen=True)
class InferenceTrace:
    """One post-activation tensor per layer, plus the classification outcome."""

    per_layer: tuple[Tensor, ...]
    final_probs: Tensor
    predicted_class: int
    freeze: FreezeConfig


def _apply_activation(t: Tensor, kind: Activation) -> Tensor:
    if kind is Activation.RELU:
        return relu(t)
    if kind is Activation.SOFTMAX:
        return softmax(t)
    return t


def inner_output(model: Model, prev_activation: Tensor, layer_index: int) -> Tensor:
    """Apply exactly one layer (affine + activation, or pool/flatten)."""
    if not 0 <= layer_index < len(model.layers):
        raise RangeError(f"layer index {layer_index} out of range [0, {len(model.layers)})")
    spec = model.layers[layer_index]
    if isinstance(spec, Conv2DSpec):
        wt, bias = model.layer_weights(layer_index)
        try:
            out = conv2d(prev_activation, wt, bias, ConvParams(stride=spec.stride, padding=spec.padding))
        except Exception as exc:
            raise InvalidInputError(f"layer {layer_index}: {exc}") from exc
        return _apply_activation(out, spec.activation)
    if isinstance(spec, MaxPool2DSpec):
        try:
            return maxpool2d(prev_activation, spec.pool_h, spec.pool_w, spec.stride)
        except Exception as exc:
            raise InvalidInputError(f"layer {layer_index}: {exc}") from exc
    if isinstance(spec, FlattenSpec):
        return Tensor(prev_activation.flat().copy(), _unchecked=True)
    if isinstance(spec, DenseSpec):
        wt, bias = model.layer_weights(layer_index)
        try:
            out = dense(prev_activation, wt, bias)
        except Exception as exc:
            raise InvalidInputError(f"layer {layer_index}: {exc}") from exc
        return _apply_activation(out, spec.activation)
    raise InvalidInputError(f"unknown layer kind at index {layer_index}")


def prepare_input(
    output: Tensor, config: FreezeConfig, structure: Sequence[LayerInfo], layer_index: int
) -> Tensor:
    """Zero the frozen output channels of this layer; pass everything else through bitwise."""
    frozen = config.filters_for(layer_index)
    if not frozen:
        return output
    info = structure[layer_index]
    if info.kind != "conv2d":
        return output
    channels = output.shape[0]
    for f in frozen:
        if not 0 <= f < channels:
            raise InvalidConfigError(
                f"freeze filter {f} out of range for layer {layer_index} with {channels} filters"
            )
    arr = output.array.copy()
    for f in frozen:
        arr[f] = 0.0
    return Tensor(arr, _unchecked=True)


def _check_input(model: Model, input: Tensor) -> None:
    if input.shape != model.input_shape:
        raise InvalidInputError(
            f"input shape {list(input.shape)} does not match model input {list(model.input_shape)}"
        )
    arr = input.array
    if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
        raise InvalidInputError(
            f"input values must lie in [0, 1], got range [{float(arr.min())}, {float(arr.max())}]"
        )


def forward(model: Model, input: Tensor) -> InferenceTrace:
    """Plain traced forward pass (no mutation)."""
    _check_input(model, input)
    per_layer: list[Tensor] = []
    act = input
    for i in range(len(model.layers)):
        act = inner_output(model, act, i)
        per_layer.append(act)
    final = per_layer[-1]
    return InferenceTrace(
        per_layer=tuple(per_layer),
        final_probs=final,
        predicted_class=argmax_lowest(final),
        freeze=FreezeConfig.empty(),
    )


def mutate_output(model: Model, input: Tensor, config: FreezeConfig) -> InferenceTrace:
    """Traced forward pass with filter freezing applied after each layer.

    The running activation is rebound to the post-freeze output each step, so
    upstream freezes propagate; the trace stores those same post-freeze
    tensors.
    """
    _check_input(model, input)
    config.validate_against(model)
    structure = extract_layers(model)
    per_layer: list[Tensor] = []
    act = input
    for i in range(len(model.layers)):
        out = inner_output(model, act, i)
        out = prepare_input(out, config, structure, i)
        per_layer.append(out)
        act = out
    final = per_layer[-1]
    return InferenceTrace(
        per_layer=tuple(per_layer),
        final_probs=final,
        predicted_class=argmax_lowest(final),
        freeze=config,
    )


def predict(model: Model, input: Tensor) -> tuple[int, Tensor]:
    """Class of the final scores (lowest index wins ties) plus the scores."""
    trace = forward(model, input)
    return trace.predicted_class, trace.final_probs
