"""nvis: instance-based CNN inspection workbench.

Load a trained model, trace every intermediate activation for one input,
mutate the model by freezing convolution filters, generate adversarial
inputs, and compare two inputs' activations at any layer — from Python, the
CLI, or the HTTP service.
"""

from .attacks import Algorithm, AttackSpec, bim, fgsm
from .diff import ChannelDiff, DiffReport, compare_at_layer, rank_channels
from .engine import FreezeConfig, InferenceTrace, forward, inner_output, mutate_output, predict, prepare_input
from .errors import NvisError
from .format import parse_model, serialize_model
from .gradients import SaliencyMap, cross_entropy, input_gradient, saliency
from .model import (
    Activation,
    Conv2DSpec,
    DenseSpec,
    FlattenSpec,
    LayerInfo,
    MaxPool2DSpec,
    Model,
    extract_layers,
    infer_shapes,
    validate,
)
from .render import render_feature_map, render_heatmap
from .tensor import ConvParams, Padding, Tensor, conv2d, cosine, dense, elementwise_sub_abs, l2_norm, max_abs, maxpool2d, relu, softmax

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "ConvParams",
    "Padding",
    "conv2d",
    "maxpool2d",
    "dense",
    "relu",
    "softmax",
    "elementwise_sub_abs",
    "l2_norm",
    "cosine",
    "max_abs",
    "Activation",
    "Conv2DSpec",
    "MaxPool2DSpec",
    "FlattenSpec",
    "DenseSpec",
    "Model",
    "LayerInfo",
    "validate",
    "infer_shapes",
    "extract_layers",
    "parse_model",
    "serialize_model",
    "FreezeConfig",
    "InferenceTrace",
    "forward",
    "mutate_output",
    "inner_output",
    "prepare_input",
    "predict",
    "cross_entropy",
    "input_gradient",
    "saliency",
    "SaliencyMap",
    "Algorithm",
    "AttackSpec",
    "fgsm",
    "bim",
    "ChannelDiff",
    "DiffReport",
    "compare_at_layer",
    "rank_channels",
    "render_feature_map",
    "render_heatmap",
    "NvisError",
    "__version__",
]
