"""Shared builders: hand-made micro models and a seeded random model generator.

Random weights are scaled by 1/sqrt(fan_in) so activations stay O(1); that
keeps float32 truncation well inside the oracle tolerances and mirrors how
trained checkpoints actually look.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from nvis.format import serialize_model
from nvis.model import (
    Activation,
    Conv2DSpec,
    DenseSpec,
    FlattenSpec,
    MaxPool2DSpec,
    Model,
    Padding,
    infer_shapes,
)
from nvis.tensor import Tensor


def fill_weights(name: str, input_shape, specs, rng: np.random.Generator) -> Model:
    """Attach random weights of the inferred shapes to a spec chain."""
    skeleton = Model(name=name, input_shape=tuple(input_shape), layers=tuple(specs), weights={})
    shapes = infer_shapes(skeleton)
    input_shapes = [tuple(input_shape)] + shapes[:-1]
    weights = {}
    for i, spec in enumerate(specs):
        if isinstance(spec, Conv2DSpec):
            cin = input_shapes[i][0]
            fan_in = cin * spec.kernel_h * spec.kernel_w
            wshape = (spec.out_channels, cin, spec.kernel_h, spec.kernel_w)
        elif isinstance(spec, DenseSpec):
            fan_in = input_shapes[i][0]
            wshape = (spec.out_features, input_shapes[i][0])
        else:
            continue
        scale = 1.0 / np.sqrt(fan_in)
        wt = (rng.uniform(-1.0, 1.0, size=wshape) * scale).astype(np.float32)
        bias = rng.uniform(-0.2, 0.2, size=wshape[0]).astype(np.float32)
        weights[i] = (Tensor(wt), Tensor(bias))
    return Model(name=name, input_shape=tuple(input_shape), layers=tuple(specs), weights=weights)


def random_model(
    rng: np.random.Generator,
    *,
    conv_pair: bool = False,
    softmax_head: bool = True,
    max_convs: int = 3,
) -> Model:
    """A random tiny CNN: <=3 conv layers, <=8 channels, inputs <=16x16."""
    cin = int(rng.integers(1, 4))
    size = int(rng.integers(8 if conv_pair else 6, 13))
    input_shape = (cin, size, size)
    specs: list = []
    shape = input_shape

    n_convs = int(rng.integers(2 if conv_pair else 1, max_convs + 1))
    for ci in range(n_convs):
        if len(shape) != 3 or shape[1] < 3 or shape[2] < 3:
            break
        out = int(rng.integers(2, 9))
        k = int(rng.choice([2, 3]))
        use_same = (not conv_pair) and rng.random() < 0.2
        stride = 1 if use_same or rng.random() < 0.7 else 2
        if conv_pair and ci == 0:
            stride = 1  # keep room for the second conv of the pair
        if (shape[1] - k) // stride + 1 < 1:
            stride = 1
        activation = Activation.RELU if rng.random() < 0.7 else Activation.NONE
        specs.append(
            Conv2DSpec(
                out_channels=out,
                kernel_h=k,
                kernel_w=k,
                stride=stride,
                padding=Padding.SAME if use_same else Padding.VALID,
                activation=activation,
            )
        )
        shape = _out_shape(specs[-1], shape)
        want_pool = rng.random() < 0.4 and shape[1] >= 4 and shape[2] >= 4
        if want_pool and not (conv_pair and ci == 0):
            pool_stride = int(rng.choice([1, 2]))
            specs.append(MaxPool2DSpec(pool_h=2, pool_w=2, stride=pool_stride))
            shape = _out_shape(specs[-1], shape)

    specs.append(FlattenSpec())
    shape = (int(np.prod(shape)),)
    if rng.random() < 0.4:
        hidden = int(rng.integers(4, 13))
        specs.append(DenseSpec(out_features=hidden, activation=Activation.RELU))
        shape = (hidden,)
    classes = int(rng.integers(2, 6))
    specs.append(
        DenseSpec(
            out_features=classes,
            activation=Activation.SOFTMAX if softmax_head else Activation.NONE,
        )
    )
    return fill_weights(f"random-{rng.integers(0, 1 << 30)}", input_shape, specs, rng)


def _out_shape(spec, shape):
    if isinstance(spec, Conv2DSpec):
        if spec.padding is Padding.SAME:
            return (spec.out_channels, shape[1], shape[2])
        return (
            spec.out_channels,
            (shape[1] - spec.kernel_h) // spec.stride + 1,
            (shape[2] - spec.kernel_w) // spec.stride + 1,
        )
    if isinstance(spec, MaxPool2DSpec):
        return (
            shape[0],
            (shape[1] - spec.pool_h) // spec.stride + 1,
            (shape[2] - spec.pool_w) // spec.stride + 1,
        )
    raise AssertionError


def gradient_check_model(rng: np.random.Generator) -> Model:
    """Narrow random CNN for finite-difference checks.

    Kept slim on purpose: with probe step h = 1e-2, wide/deep stacks put too
    many relu pre-activations near zero and most elements would have to be
    excluded as kink crossings.
    """
    cin = int(rng.integers(1, 3))
    size = int(rng.integers(5, 9))
    specs: list = []
    shape = (cin, size, size)
    n_convs = int(rng.integers(1, 3))
    for _ in range(n_convs):
        if shape[1] < 4:
            break
        out = int(rng.integers(2, 5))
        k = int(rng.choice([2, 3]))
        activation = Activation.RELU if rng.random() < 0.7 else Activation.NONE
        specs.append(Conv2DSpec(out_channels=out, kernel_h=k, kernel_w=k, stride=1, activation=activation))
        shape = (out, shape[1] - k + 1, shape[2] - k + 1)
        if rng.random() < 0.3 and shape[1] >= 3:
            specs.append(MaxPool2DSpec(pool_h=2, pool_w=2, stride=2))
            shape = (out, (shape[1] - 2) // 2 + 1, (shape[2] - 2) // 2 + 1)
    specs.append(FlattenSpec())
    if rng.random() < 0.3:
        specs.append(DenseSpec(out_features=int(rng.integers(4, 9)), activation=Activation.RELU))
    specs.append(DenseSpec(out_features=int(rng.integers(2, 5)), activation=Activation.SOFTMAX))
    return fill_weights("grad-check", (cin, size, size), specs, rng)


def random_input(rng: np.random.Generator, shape, lo: float = 0.0, hi: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(lo, hi, size=tuple(shape)).astype(np.float32))


def tiny_symmetric_model() -> Model:
    """Flatten + Dense(2, softmax) with one-hot rows and zero bias on a [1,2,2] input."""
    specs = (FlattenSpec(), DenseSpec(out_features=2, activation=Activation.SOFTMAX))
    wt = Tensor.from_flat([2, 4], [1, 0, 0, 0, 0, 1, 0, 0])
    bias = Tensor.zeros([2])
    return Model(name="tiny-sym", input_shape=(1, 2, 2), layers=specs, weights={1: (wt, bias)})


def one_feature_model(bias0: float = 0.0, bias1: float = 0.0) -> Model:
    """Single input feature, two antisymmetric logits: z = [x + b0, -x + b1]."""
    specs = (FlattenSpec(), DenseSpec(out_features=2, activation=Activation.SOFTMAX))
    wt = Tensor.from_flat([2, 1], [1.0, -1.0])
    bias = Tensor.from_flat([2], [bias0, bias1])
    return Model(name="one-feature", input_shape=(1, 1, 1), layers=specs, weights={1: (wt, bias)})


def lenet_shaped_model(rng: np.random.Generator) -> Model:
    """LeNet-sized stack on a 28x28 grayscale input, random weights."""
    specs = (
        Conv2DSpec(out_channels=6, kernel_h=5, kernel_w=5, activation=Activation.RELU),
        MaxPool2DSpec(pool_h=2, pool_w=2, stride=2),
        Conv2DSpec(out_channels=16, kernel_h=5, kernel_w=5, activation=Activation.RELU),
        MaxPool2DSpec(pool_h=2, pool_w=2, stride=2),
        FlattenSpec(),
        DenseSpec(out_features=120, activation=Activation.RELU),
        DenseSpec(out_features=84, activation=Activation.RELU),
        DenseSpec(out_features=10, activation=Activation.SOFTMAX),
    )
    return fill_weights("lenet-shaped", (1, 28, 28), specs, rng)


def write_model_dir(model: Model, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    manifest, blob = serialize_model(model)
    (directory / "model.json").write_bytes(manifest)
    (directory / "weights.bin").write_bytes(blob)
    return directory


def write_tensor_json(tensor: Tensor, path: Path) -> Path:
    path.write_text(json.dumps({"shape": list(tensor.shape), "values": tensor.tolist()}))
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
