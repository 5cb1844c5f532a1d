"""The NVIS on-disk model format: readable manifest plus raw float32 blob.

``model.json`` declares structure and element offsets into ``weights.bin``
(little-endian IEEE-754 float32, offsets counted in elements, not bytes).
Parsing is strict: structural problems in the manifest raise ParseError with
a JSON-path location, blob/offset problems raise IntegrityError, and a model
that decodes but breaks an invariant raises ModelValidationError.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .errors import IntegrityError, ModelValidationError, ParseError
from .model import (
    Activation,
    Conv2DSpec,
    DenseSpec,
    FlattenSpec,
    MaxPool2DSpec,
    Model,
    Padding,
    infer_shapes,
    validate,
)
from .tensor import Tensor

FORMAT_VERSION = 1

MANIFEST_NAME = "model.json"
WEIGHTS_NAME = "weights.bin"


def _need(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise ParseError(f"missing key '{key}'", where)
    return obj[key]


def _int_field(obj: dict, key: str, where: str) -> int:
    value = _need(obj, key, where)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"'{key}' must be an integer, got {value!r}", where)
    return value


def _int_list(value: Any, length: int, where: str) -> list[int]:
    if not isinstance(value, list) or len(value) != length or any(
        isinstance(v, bool) or not isinstance(v, int) for v in value
    ):
        raise ParseError(f"expected a list of {length} integers, got {value!r}", where)
    return value


def _activation(value: Any, where: str) -> Activation:
    try:
        return Activation(value)
    except ValueError:
        raise ParseError(f"unknown activation {value!r}", where) from None


def _parse_layer(doc: Any, where: str):
    if not isinstance(doc, dict):
        raise ParseError(f"layer must be an object, got {doc!r}", where)
    kind = _need(doc, "kind", where)
    if kind == "conv2d":
        kernel = _int_list(_need(doc, "kernel", where), 2, where + ".kernel")
        padding = _need(doc, "padding", where)
        if padding not in ("valid", "same"):
            raise ParseError(f"padding must be 'valid' or 'same', got {padding!r}", where + ".padding")
        return Conv2DSpec(
            out_channels=_int_field(doc, "out_channels", where),
            kernel_h=kernel[0],
            kernel_w=kernel[1],
            stride=_int_field(doc, "stride", where),
            padding=Padding(padding),
            activation=_activation(_need(doc, "activation", where), where + ".activation"),
        )
    if kind == "maxpool2d":
        pool = _int_list(_need(doc, "pool", where), 2, where + ".pool")
        return MaxPool2DSpec(pool_h=pool[0], pool_w=pool[1], stride=_int_field(doc, "stride", where))
    if kind == "flatten":
        return FlattenSpec()
    if kind == "dense":
        return DenseSpec(
            out_features=_int_field(doc, "out_features", where),
            activation=_activation(_need(doc, "activation", where), where + ".activation"),
        )
    raise ParseError(f"unknown layer kind {kind!r}", where + ".kind")


def parse_manifest(manifest: bytes):
    """Decode and structurally check the manifest; returns (structure, weight table, total)."""
    try:
        doc = json.loads(manifest.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}", "$") from None
    if not isinstance(doc, dict):
        raise ParseError("manifest root must be an object", "$")
    version = _int_field(doc, "format_version", "$")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version}", "$.format_version")
    name = _need(doc, "name", "$")
    if not isinstance(name, str):
        raise ParseError(f"name must be a string, got {name!r}", "$.name")
    input_shape = _int_list(_need(doc, "input_shape", "$"), 3, "$.input_shape")
    layers_doc = _need(doc, "layers", "$")
    if not isinstance(layers_doc, list):
        raise ParseError("layers must be an array", "$.layers")
    layers = [_parse_layer(layer, f"$.layers[{i}]") for i, layer in enumerate(layers_doc)]
    weights_doc = _need(doc, "weights", "$")
    if not isinstance(weights_doc, list):
        raise ParseError("weights must be an array", "$.weights")
    table = []
    for i, entry in enumerate(weights_doc):
        where = f"$.weights[{i}]"
        if not isinstance(entry, dict):
            raise ParseError(f"weight entry must be an object, got {entry!r}", where)
        table.append(
            (
                _int_field(entry, "layer", where),
                _int_field(entry, "weight_offset", where),
                _int_field(entry, "bias_offset", where),
            )
        )
    total = _int_field(doc, "total_elements", "$")
    if total < 0:
        raise ParseError(f"total_elements must be >= 0, got {total}", "$.total_elements")
    return name, tuple(input_shape), layers, table, total


def parse_model(manifest: bytes, weights_blob: bytes) -> Model:
    """Decode manifest + blob into a validated Model with bitwise-exact weights."""
    name, input_shape, layers, table, total = parse_manifest(manifest)

    if len(weights_blob) != 4 * total:
        raise IntegrityError(
            f"weights blob is {len(weights_blob)} bytes but manifest declares "
            f"{total} elements ({4 * total} bytes)"
        )
    flat = np.frombuffer(weights_blob, dtype="<f4")

    # Expected tensor shapes come from shape inference over the declared layers.
    skeleton = Model(name=name, input_shape=input_shape, layers=tuple(layers), weights={})
    try:
        shapes = infer_shapes(skeleton)
    except ModelValidationError:
        # Defer to full validation below so all violations are reported together.
        shapes = None

    weights: dict[int, tuple[Tensor, Tensor]] = {}
    if shapes is not None:
        input_shapes = [input_shape] + shapes[:-1]
        segments: list[tuple[int, int]] = []
        seen_layers = set()
        for layer_index, weight_off, bias_off in table:
            if not 0 <= layer_index < len(layers):
                raise IntegrityError(f"weights table references nonexistent layer {layer_index}")
            if layer_index in seen_layers:
                raise IntegrityError(f"weights table lists layer {layer_index} twice")
            seen_layers.add(layer_index)
            spec = layers[layer_index]
            if isinstance(spec, Conv2DSpec):
                cin = input_shapes[layer_index][0]
                wshape = (spec.out_channels, cin, spec.kernel_h, spec.kernel_w)
                bshape = (spec.out_channels,)
            elif isinstance(spec, DenseSpec):
                wshape = (spec.out_features, input_shapes[layer_index][0])
                bshape = (spec.out_features,)
            else:
                raise IntegrityError(f"weights table entry for unweighted layer {layer_index}")
            wsize = int(np.prod(wshape))
            bsize = bshape[0]
            for off, size, label in ((weight_off, wsize, "weight"), (bias_off, bsize, "bias")):
                if off < 0 or off + size > total:
                    raise IntegrityError(
                        f"layer {layer_index} {label} segment [{off}, {off + size}) "
                        f"exceeds total_elements {total}"
                    )
                segments.append((off, off + size))
            wt = Tensor(flat[weight_off : weight_off + wsize].reshape(wshape))
            bias = Tensor(flat[bias_off : bias_off + bsize])
            weights[layer_index] = (wt, bias)
        segments.sort()
        for (s0, e0), (s1, e1) in zip(segments, segments[1:]):
            if s1 < e0:
                raise IntegrityError(
                    f"weights table segments overlap: [{s0}, {e0}) and [{s1}, {e1})"
                )

    model = Model(name=name, input_shape=input_shape, layers=tuple(layers), weights=weights)
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def _layer_doc(spec) -> dict:
    if isinstance(spec, Conv2DSpec):
        return {
            "kind": "conv2d",
            "out_channels": spec.out_channels,
            "kernel": [spec.kernel_h, spec.kernel_w],
            "stride": spec.stride,
            "padding": spec.padding.value,
            "activation": spec.activation.value,
        }
    if isinstance(spec, MaxPool2DSpec):
        return {"kind": "maxpool2d", "pool": [spec.pool_h, spec.pool_w], "stride": spec.stride}
    if isinstance(spec, FlattenSpec):
        return {"kind": "flatten"}
    if isinstance(spec, DenseSpec):
        return {"kind": "dense", "out_features": spec.out_features, "activation": spec.activation.value}
    raise ModelValidationError([f"unknown layer spec {spec!r}"])


def serialize_model(model: Model) -> tuple[bytes, bytes]:
    """Emit (manifest bytes, blob bytes); weights in layer order, weight before bias."""
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)

    chunks: list[np.ndarray] = []
    table = []
    offset = 0
    for i in range(len(model.layers)):
        if i not in model.weights:
            continue
        wt, bias = model.weights[i]
        table.append({"layer": i, "weight_offset": offset, "bias_offset": offset + wt.size})
        chunks.append(wt.flat())
        chunks.append(bias.flat())
        offset += wt.size + bias.size

    doc = {
        "format_version": FORMAT_VERSION,
        "name": model.name,
        "input_shape": list(model.input_shape),
        "layers": [_layer_doc(spec) for spec in model.layers],
        "weights": table,
        "total_elements": offset,
    }
    manifest = (json.dumps(doc, indent=2) + "\n").encode("utf-8")
    blob = b"".join(c.astype("<f4").tobytes() for c in chunks)
    return manifest, blob
