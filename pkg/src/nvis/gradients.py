"""Reverse-mode input gradients through the supported layer zoo, and saliency.

Only the gradient with respect to the *input* is computed (weights are
inspection targets here, never trained). Softmax and cross-entropy are fused
in the backward pass: the logit gradient is probs - onehot(label), which is
why models must end in a softmax-activated dense layer. Subgradient
conventions (relu gives 0 at exactly 0, pooling ties route to the lowest
window index) are fixed so finite-difference exclusions can be principled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, UnsupportedModelError, InvalidInputError
from .model import Activation, Conv2DSpec, DenseSpec, FlattenSpec, MaxPool2DSpec, Model
from .tensor import ConvParams, Tensor, conv2d, dense, maxpool2d

__all__ = ["cross_entropy", "input_gradient", "saliency", "SaliencyMap", "LOSS_FLOOR"]

LOSS_FLOOR = 1e-12


@dataclass(frozen=True)
class SaliencyMap:
    """Absolute input gradient, reduced over channels by max; same H,W as the input."""

    values: Tensor


def cross_entropy(probs: Tensor, label: int) -> float:
    """-ln(probs[label]), floored at 1e-12 so certainty never produces infinities."""
    if probs.rank != 1:
        raise InvalidInputError(f"cross_entropy expects rank-1 probabilities, got {list(probs.shape)}")
    if not 0 <= label < probs.shape[0]:
        raise RangeError(f"label {label} out of range [0, {probs.shape[0]})")
    return -math.log(max(float(probs.array[label]), LOSS_FLOOR))


def _forward_cached(model: Model, input: Tensor):
    """Forward pass keeping per-layer inputs and pre-activations for the backward sweep."""
    records = []
    act = input
    for i, spec in enumerate(model.layers):
        if isinstance(spec, Conv2DSpec):
            wt, bias = model.layer_weights(i)
            pre = conv2d(act, wt, bias, ConvParams(stride=spec.stride, padding=spec.padding))
            post = _activate(pre, spec.activation)
            records.append(("conv2d", spec, act, pre))
        elif isinstance(spec, MaxPool2DSpec):
            post = maxpool2d(act, spec.pool_h, spec.pool_w, spec.stride)
            records.append(("maxpool2d", spec, act, post))
        elif isinstance(spec, FlattenSpec):
            post = Tensor(act.flat().copy(), _unchecked=True)
            records.append(("flatten", spec, act, None))
        elif isinstance(spec, DenseSpec):
            wt, bias = model.layer_weights(i)
            pre = dense(act, wt, bias)
            post = _activate(pre, spec.activation)
            records.append(("dense", spec, act, pre))
        else:
            raise UnsupportedModelError(f"cannot differentiate through layer kind {spec!r}")
        act = post
    return records, act


def _activate(pre: Tensor, kind: Activation) -> Tensor:
    from .tensor import relu, softmax

    if kind is Activation.RELU:
        return relu(pre)
    if kind is Activation.SOFTMAX:
        return softmax(pre)
    return pre


def _check_softmax_head(model: Model) -> None:
    if not model.layers:
        raise UnsupportedModelError("model has no layers")
    last = model.layers[-1]
    if not (isinstance(last, DenseSpec) and last.activation is Activation.SOFTMAX):
        raise UnsupportedModelError(
            "input gradients need a softmax-activated dense head (softmax and "
            "cross-entropy are fused in the backward pass)"
        )


def _pool_windows(x: np.ndarray, ph: int, pw: int, stride: int):
    c, h, w = x.shape
    oh = (h - ph) // stride + 1
    ow = (w - pw) // stride + 1
    planes = []
    for dy in range(ph):
        for dx in range(pw):
            planes.append(x[:, dy : dy + stride * (oh - 1) + 1 : stride, dx : dx + stride * (ow - 1) + 1 : stride])
    return np.stack(planes, axis=-1), oh, ow


def input_gradient(model: Model, input: Tensor, label: int) -> Tensor:
    """d cross_entropy(forward(model, input), label) / d input."""
    _check_softmax_head(model)
    if input.shape != model.input_shape:
        raise InvalidInputError(
            f"input shape {list(input.shape)} does not match model input {list(model.input_shape)}"
        )
    records, final = _forward_cached(model, input)
    probs = final.array
    n_classes = probs.shape[0]
    if not 0 <= label < n_classes:
        raise RangeError(f"label {label} out of range [0, {n_classes})")

    # Fused softmax + cross-entropy: gradient at the logits.
    grad = probs.astype(np.float32).copy()
    grad[label] -= np.float32(1.0)

    for i in range(len(records) - 1, -1, -1):
        kind, spec, x, pre = records[i]
        if kind == "dense":
            if spec.activation is Activation.RELU:
                grad = grad * (pre.array > 0)
            elif spec.activation is Activation.SOFTMAX and i != len(records) - 1:
                raise UnsupportedModelError("softmax below the head is not differentiable here")
            wt, _ = model.layer_weights(i)
            grad = (wt.array.T @ grad).astype(np.float32)
        elif kind == "conv2d":
            if spec.activation is Activation.RELU:
                grad = grad * (pre.array > 0)
            elif spec.activation is Activation.SOFTMAX:
                raise UnsupportedModelError("softmax on a convolution layer is not differentiable here")
            wt, _ = model.layer_weights(i)
            warr = wt.array
            cin, h, w = x.shape
            kh, kw = spec.kernel_h, spec.kernel_w
            s = spec.stride
            if spec.padding.value == "same":
                top = (kh - 1) // 2
                left = (kw - 1) // 2
                ph, pw = h + kh - 1, w + kw - 1
            else:
                top = left = 0
                ph, pw = h, w
            oh, ow = grad.shape[1], grad.shape[2]
            dx = np.zeros((cin, ph, pw), dtype=np.float32)
            for ci in range(cin):
                for dy in range(kh):
                    for dxo in range(kw):
                        contrib = np.tensordot(warr[:, ci, dy, dxo], grad, axes=(0, 0)).astype(np.float32)
                        dx[ci, dy : dy + s * (oh - 1) + 1 : s, dxo : dxo + s * (ow - 1) + 1 : s] += contrib
            grad = dx[:, top : top + h, left : left + w].copy()
        elif kind == "maxpool2d":
            xarr = x.array
            windows, oh, ow = _pool_windows(xarr, spec.pool_h, spec.pool_w, spec.stride)
            winners = np.argmax(windows, axis=-1)  # first max = lowest window index
            c = xarr.shape[0]
            dx = np.zeros_like(xarr, dtype=np.float32)
            ci_idx, oy_idx, ox_idx = np.meshgrid(
                np.arange(c), np.arange(oh), np.arange(ow), indexing="ij"
            )
            flat_win = winners.reshape(-1)
            dy_win = flat_win // spec.pool_w
            dx_win = flat_win % spec.pool_w
            iy = (oy_idx.reshape(-1) * spec.stride + dy_win)
            ix = (ox_idx.reshape(-1) * spec.stride + dx_win)
            np.add.at(dx, (ci_idx.reshape(-1), iy, ix), grad.reshape(-1))
            grad = dx
        elif kind == "flatten":
            grad = grad.reshape(x.shape)
    return Tensor(np.asarray(grad, dtype=np.float32), _unchecked=True)


def saliency(model: Model, input: Tensor, label: int) -> SaliencyMap:
    """|input gradient| reduced over channels by max; left unnormalized."""
    grad = input_gradient(model, input, label)
    mag = np.abs(grad.array)
    if mag.ndim == 3:
        mag = mag.max(axis=0)
    return SaliencyMap(values=Tensor(mag, _unchecked=True))
