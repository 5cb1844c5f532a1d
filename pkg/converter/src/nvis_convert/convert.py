"""Keras checkpoint ingestion: translate a saved model into the NVIS format.

The NVIS engine is channel-major ([C,H,W], conv weights [Cout,Cin,Kh,Kw],
row-major flatten), while Keras is channels-last. Conversion therefore
transposes every kernel and, for the first Dense layer after a Flatten of a
convolutional feature map, permutes its input columns from Keras's
(H, W, C) flattening to channel-major order. Unsupported layer kinds raise
immediately, naming the layer; nothing is skipped silently.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["ConversionError", "convert_keras_model", "convert", "MANIFEST_NAME", "WEIGHTS_NAME"]

MANIFEST_NAME = "model.json"
WEIGHTS_NAME = "weights.bin"

_ACTIVATIONS = {"linear": "none", "relu": "relu", "softmax": "softmax"}


class ConversionError(Exception):
    """Checkpoint contains something the NVIS layer zoo cannot express."""


def _activation_name(layer) -> str:
    act = getattr(layer.activation, "__name__", str(layer.activation))
    if act not in _ACTIVATIONS:
        raise ConversionError(
            f"layer '{layer.name}': activation '{act}' is not supported (use linear/relu/softmax)"
        )
    return _ACTIVATIONS[act]


def _kernel_and_bias(layer, out_units: int):
    params = layer.get_weights()
    if len(params) == 2:
        kernel, bias = params
    elif len(params) == 1:
        kernel, bias = params[0], np.zeros(out_units, dtype=np.float32)
    else:
        raise ConversionError(f"layer '{layer.name}': unexpected parameter count {len(params)}")
    return np.asarray(kernel, dtype=np.float32), np.asarray(bias, dtype=np.float32)


def _flatten_permutation(h: int, w: int, c: int) -> np.ndarray:
    """perm[nvis_flat_index] = keras_flat_index for an HxWxC feature map."""
    perm = np.empty(h * w * c, dtype=np.int64)
    for ci in range(c):
        for hi in range(h):
            for wi in range(w):
                perm[ci * h * w + hi * w + wi] = hi * w * c + wi * c + ci
    return perm


def convert_keras_model(model) -> tuple[dict, bytes]:
    """Build (manifest document, weight blob) from a loaded Keras model."""
    import keras

    layers = list(model.layers)
    if not layers:
        raise ConversionError("model has no layers")

    input_shape = model.input_shape  # (None, H, W, C)
    if len(input_shape) != 4:
        raise ConversionError(f"expected an image input (batch, H, W, C), got {input_shape}")
    _, h, w, c = input_shape
    current = (int(h), int(w), int(c))  # Keras-side tracking, channels last

    manifest_layers = []
    weight_table = []
    chunks: list[np.ndarray] = []
    offset = 0
    pending_flatten_dims: tuple[int, int, int] | None = None
    flattened = False

    def push(index: int, kernel: np.ndarray, bias: np.ndarray):
        nonlocal offset
        weight_table.append(
            {"layer": index, "weight_offset": offset, "bias_offset": offset + kernel.size}
        )
        chunks.append(np.ascontiguousarray(kernel, dtype=np.float32).reshape(-1))
        chunks.append(np.ascontiguousarray(bias, dtype=np.float32).reshape(-1))
        offset += kernel.size + bias.size

    for layer in layers:
        if isinstance(layer, keras.layers.InputLayer):
            continue
        index = len(manifest_layers)

        if isinstance(layer, keras.layers.Conv2D) and type(layer) is keras.layers.Conv2D:
            if flattened:
                raise ConversionError(f"layer '{layer.name}': convolution after flatten is not supported")
            if getattr(layer, "data_format", "channels_last") != "channels_last":
                raise ConversionError(f"layer '{layer.name}': only channels_last data format is supported")
            if tuple(layer.dilation_rate) != (1, 1):
                raise ConversionError(f"layer '{layer.name}': dilation is not supported")
            if getattr(layer, "groups", 1) != 1:
                raise ConversionError(f"layer '{layer.name}': grouped convolution is not supported")
            kh, kw = layer.kernel_size
            if layer.strides[0] != layer.strides[1]:
                raise ConversionError(f"layer '{layer.name}': anisotropic strides are not supported")
            sh = layer.strides[0]
            padding = layer.padding
            if padding not in ("valid", "same"):
                raise ConversionError(f"layer '{layer.name}': padding '{padding}' is not supported")
            if padding == "same" and sh != 1:
                raise ConversionError(
                    f"layer '{layer.name}': 'same' padding requires stride 1 in the target engine"
                )
            kernel, bias = _kernel_and_bias(layer, layer.filters)
            # (kh, kw, cin, cout) -> (cout, cin, kh, kw)
            kernel = kernel.transpose(3, 2, 0, 1)
            manifest_layers.append(
                {
                    "kind": "conv2d",
                    "out_channels": int(layer.filters),
                    "kernel": [int(kh), int(kw)],
                    "stride": int(sh),
                    "padding": padding,
                    "activation": _activation_name(layer),
                }
            )
            push(index, kernel, bias)
            if padding == "same":
                current = (current[0], current[1], int(layer.filters))
            else:
                current = (
                    (current[0] - int(kh)) // int(sh) + 1,
                    (current[1] - int(kw)) // int(sh) + 1,
                    int(layer.filters),
                )
        elif isinstance(layer, keras.layers.MaxPooling2D):
            if flattened:
                raise ConversionError(f"layer '{layer.name}': pooling after flatten is not supported")
            if layer.padding != "valid":
                raise ConversionError(f"layer '{layer.name}': only valid pooling padding is supported")
            ph, pw = layer.pool_size
            strides = layer.strides or layer.pool_size
            if strides[0] != strides[1]:
                raise ConversionError(f"layer '{layer.name}': anisotropic pool strides are not supported")
            manifest_layers.append(
                {"kind": "maxpool2d", "pool": [int(ph), int(pw)], "stride": int(strides[0])}
            )
            current = (
                (current[0] - int(ph)) // int(strides[0]) + 1,
                (current[1] - int(pw)) // int(strides[0]) + 1,
                current[2],
            )
        elif isinstance(layer, keras.layers.Flatten):
            manifest_layers.append({"kind": "flatten"})
            pending_flatten_dims = current
            flattened = True
        elif isinstance(layer, keras.layers.Dense):
            if not flattened:
                raise ConversionError(
                    f"layer '{layer.name}': dense before flatten is not supported (flatten first)"
                )
            kernel, bias = _kernel_and_bias(layer, layer.units)
            weight = kernel.T  # (in, out) -> (out, in)
            if pending_flatten_dims is not None:
                fh, fw, fc = pending_flatten_dims
                weight = weight[:, _flatten_permutation(fh, fw, fc)]
                pending_flatten_dims = None
            manifest_layers.append(
                {
                    "kind": "dense",
                    "out_features": int(layer.units),
                    "activation": _activation_name(layer),
                }
            )
            push(index, weight, bias)
        else:
            raise ConversionError(
                f"layer '{layer.name}' of kind {type(layer).__name__} is not supported "
                "(supported: Conv2D, MaxPooling2D, Flatten, Dense)"
            )

    manifest = {
        "format_version": 1,
        "name": str(getattr(model, "name", "converted")),
        "input_shape": [int(c), int(h), int(w)],
        "layers": manifest_layers,
        "weights": weight_table,
        "total_elements": offset,
    }
    blob = b"".join(chunk.astype("<f4").tobytes() for chunk in chunks)
    return manifest, blob


def convert(checkpoint_path: str | Path, out_dir: str | Path) -> dict:
    """Load an HDF5 checkpoint, emit model.json + weights.bin, return the manifest."""
    import keras

    model = keras.models.load_model(checkpoint_path, compile=False)
    manifest, blob = convert_keras_model(model)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    (out / WEIGHTS_NAME).write_bytes(blob)
    return manifest
