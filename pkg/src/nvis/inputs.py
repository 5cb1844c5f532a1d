"""Decoding uploaded/sketched/file inputs into model-shaped tensors.

Images map to [0,1] by dividing by 255; grayscale becomes [1,H,W] and RGB
[3,H,W]. Dimensions must match the model's input shape exactly — silent
resampling would corrupt instance-based analysis, so a mismatch is an error.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InvalidInputError, ParseError
from .tensor import Tensor

__all__ = ["tensor_from_image_bytes", "tensor_from_doc", "tensor_from_pixels", "load_input_file"]


def _check_against(shape: tuple[int, ...], expected: tuple[int, ...] | None, what: str) -> None:
    if expected is not None and tuple(shape) != tuple(expected):
        raise InvalidInputError(
            f"{what} has shape {list(shape)} but the model expects {list(expected)} "
            "(inputs are never resampled)"
        )


def tensor_from_image_bytes(data: bytes, expected_shape: tuple[int, ...] | None = None) -> Tensor:
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ParseError(f"cannot decode image: {exc}") from None
    if image.mode not in ("L", "RGB"):
        image = image.convert("RGB" if "A" in image.mode or image.mode in ("P", "CMYK") else "L")
    arr = np.asarray(image, dtype=np.float32) / np.float32(255.0)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = arr.transpose(2, 0, 1)  # HWC -> CHW
    _check_against(arr.shape, expected_shape, "image")
    return Tensor(arr)


def tensor_from_doc(doc, expected_shape: tuple[int, ...] | None = None) -> Tensor:
    if not isinstance(doc, dict) or "shape" not in doc or "values" not in doc:
        raise ParseError("tensor document needs 'shape' and 'values'", "$")
    shape = doc["shape"]
    values = doc["values"]
    if not isinstance(shape, list) or any(isinstance(d, bool) or not isinstance(d, int) for d in shape):
        raise ParseError(f"'shape' must be a list of integers, got {shape!r}", "$.shape")
    if not isinstance(values, list):
        raise ParseError("'values' must be a flat list of numbers", "$.values")
    try:
        t = Tensor.from_flat(shape, values)
    except Exception as exc:
        raise InvalidInputError(str(exc)) from None
    _check_against(t.shape, expected_shape, "tensor")
    arr = t.array
    if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
        raise InvalidInputError("input values must lie in [0, 1]")
    return t


def tensor_from_pixels(pixels, input_shape: tuple[int, ...]) -> Tensor:
    if not isinstance(pixels, list):
        raise ParseError("'pixels' must be a flat list of numbers", "$.pixels")
    expected = 1
    for d in input_shape:
        expected *= d
    if len(pixels) != expected:
        raise InvalidInputError(
            f"sketch has {len(pixels)} pixels but the model expects {expected} "
            f"(shape {list(input_shape)})"
        )
    try:
        t = Tensor.from_flat(input_shape, pixels)
    except Exception as exc:
        raise InvalidInputError(str(exc)) from None
    arr = t.array
    if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
        raise InvalidInputError("sketch values must lie in [0, 1]")
    return t


def load_input_file(path: str | Path, expected_shape: tuple[int, ...] | None = None) -> Tensor:
    """CLI input loader: PNG/JPEG image or a JSON tensor document."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: not valid JSON: {exc}") from None
        return tensor_from_doc(doc, expected_shape)
    return tensor_from_image_bytes(data, expected_shape)
