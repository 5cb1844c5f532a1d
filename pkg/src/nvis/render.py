"""Grayscale image export of feature maps and diff heatmaps.

Channels are min-max normalized independently (so faint channels stay
visible), quantized to 0..255 with half-up rounding, and emitted as 8-bit
grayscale PNG without alpha. A constant channel maps to mid-gray 128 — which
is also how a frozen (all-zero) filter renders.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .diff import DiffReport
from .errors import InvalidShapeError, RangeError
from .tensor import Tensor

__all__ = ["render_feature_map", "render_heatmap", "to_png"]


def _channel_plane(t: Tensor, channel: int) -> np.ndarray:
    if t.rank == 3:
        if not 0 <= channel < t.shape[0]:
            raise RangeError(f"channel {channel} out of range [0, {t.shape[0]})")
        return t.array[channel]
    if t.rank == 1:
        if channel != 0:
            raise RangeError(f"rank-1 tensor has a single channel, got channel {channel}")
        return t.array.reshape(1, -1)
    raise InvalidShapeError(f"can only render rank-3 or rank-1 tensors, got shape {list(t.shape)}")


def render_feature_map(t: Tensor, channel: int) -> np.ndarray:
    """One channel as an HxW uint8 image; rank-1 tensors render as a 1xN strip."""
    plane = _channel_plane(t, channel).astype(np.float64)
    lo = float(plane.min())
    hi = float(plane.max())
    if hi == lo:
        return np.full(plane.shape, 128, dtype=np.uint8)
    scaled = (plane - lo) / (hi - lo) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)  # rounding half-up


def render_heatmap(report: DiffReport, channel: int) -> np.ndarray:
    return render_feature_map(report.heatmap, channel)


def to_png(pixels: np.ndarray) -> bytes:
    """Encode a uint8 grayscale array as PNG bytes (mode L, no alpha)."""
    image = Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L")
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()
