"""Layer-scoped comparison of two traces: per-channel metrics and ranking.

Rank-1 activations are treated as a single channel. Metrics are the minimal
basis for "how different are these": L2 distance, cosine similarity, and the
largest absolute elementwise gap, plus an |a-b| heatmap for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IncomparableTracesError, RangeError
from .engine import InferenceTrace
from .tensor import Tensor, elementwise_sub_abs

__all__ = ["ChannelDiff", "DiffReport", "compare_at_layer", "rank_channels"]


@dataclass(frozen=True)
class ChannelDiff:
    channel: int
    l2: float
    cosine: float
    max_abs: float


@dataclass(frozen=True)
class DiffReport:
    layer_index: int
    per_channel: tuple[ChannelDiff, ...]
    aggregate_l2: float
    aggregate_cosine: float
    heatmap: Tensor

    def to_doc(self) -> dict:
        return {
            "layer_index": self.layer_index,
            "per_channel": [
                {"channel": c.channel, "l2": c.l2, "cosine": c.cosine, "max_abs": c.max_abs}
                for c in self.per_channel
            ],
            "aggregate_l2": self.aggregate_l2,
            "aggregate_cosine": self.aggregate_cosine,
            "heatmap": {"shape": list(self.heatmap.shape), "values": self.heatmap.tolist()},
        }


def _channel_views(t: Tensor) -> list[np.ndarray]:
    if t.rank == 3:
        return [t.array[c] for c in range(t.shape[0])]
    return [t.array.reshape(-1)]


def _vector_metrics(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    av = a.reshape(-1).astype(np.float64)
    bv = b.reshape(-1).astype(np.float64)
    diff = av - bv
    l2 = math.sqrt(float(np.dot(diff, diff)))
    mabs = float(np.max(np.abs(diff))) if diff.size else 0.0
    na = math.sqrt(float(np.dot(av, av)))
    nb = math.sqrt(float(np.dot(bv, bv)))
    if mabs == 0.0:
        cos = 1.0  # identical vectors (including both-zero), exactly
    elif na == 0.0 or nb == 0.0:
        cos = 0.0
    else:
        cos = max(-1.0, min(1.0, float(np.dot(av, bv)) / (na * nb)))
    return l2, cos, mabs


def compare_at_layer(a: InferenceTrace, b: InferenceTrace, layer_index: int) -> DiffReport:
    """Per-channel and aggregate metrics for two traces at one layer."""
    if len(a.per_layer) != len(b.per_layer) or any(
        ta.shape != tb.shape for ta, tb in zip(a.per_layer, b.per_layer)
    ):
        raise IncomparableTracesError(
            "traces have different layer shapes; they do not come from the same model"
        )
    if not 0 <= layer_index < len(a.per_layer):
        raise RangeError(f"layer index {layer_index} out of range [0, {len(a.per_layer)})")

    ta = a.per_layer[layer_index]
    tb = b.per_layer[layer_index]
    per_channel = []
    for c, (ca, cb) in enumerate(zip(_channel_views(ta), _channel_views(tb))):
        l2, cos, mabs = _vector_metrics(ca, cb)
        per_channel.append(ChannelDiff(channel=c, l2=l2, cosine=cos, max_abs=mabs))
    agg_l2, agg_cos, _ = _vector_metrics(ta.array, tb.array)
    return DiffReport(
        layer_index=layer_index,
        per_channel=tuple(per_channel),
        aggregate_l2=agg_l2,
        aggregate_cosine=agg_cos,
        heatmap=elementwise_sub_abs(ta, tb),
    )


def rank_channels(report: DiffReport, k: int) -> list[int]:
    """Top-k channel indices by L2 distance, descending; ties break to the lower index."""
    count = len(report.per_channel)
    if not 1 <= k <= count:
        raise RangeError(f"k must be in [1, {count}], got {k}")
    order = sorted(report.per_channel, key=lambda c: (-c.l2, c.channel))
    return [c.channel for c in order[:k]]
