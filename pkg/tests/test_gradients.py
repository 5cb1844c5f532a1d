"""Input gradients against central finite differences, plus loss and saliency."""

import math

import numpy as np
import pytest

import oracles
from conftest import fill_weights, gradient_check_model, one_feature_model, random_input, random_model
from nvis.engine import forward
from nvis.errors import RangeError, UnsupportedModelError
from nvis.gradients import cross_entropy, input_gradient, saliency
from nvis.model import Activation, Conv2DSpec, DenseSpec, FlattenSpec, Model
from nvis.tensor import Tensor


def dead_relu_model():
    """Conv bias so negative that every relu is off: the input gradient must vanish."""
    rng = np.random.default_rng(123)
    specs = (
        Conv2DSpec(out_channels=2, kernel_h=2, kernel_w=2, activation=Activation.RELU),
        FlattenSpec(),
        DenseSpec(out_features=2, activation=Activation.SOFTMAX),
    )
    model = fill_weights("dead", (1, 3, 3), specs, rng)
    wt, _ = model.weights[0]
    weights = dict(model.weights)
    weights[0] = (wt, Tensor.from_flat([2], [-5.0, -5.0]))
    return Model(model.name, model.input_shape, model.layers, weights)


def engine_loss(model, label):
    def loss(arr):
        trace = forward(model, Tensor(np.clip(arr, 0.0, 1.0).astype(np.float32)))
        return -math.log(max(float(trace.final_probs.array[label]), 1e-12))

    return loss


class TestCrossEntropy:
    def test_certainty_is_zero(self):
        assert cross_entropy(Tensor.from_flat([2], [1.0, 0.0]), 0) == 0.0

    def test_even_split_is_ln2(self):
        assert cross_entropy(Tensor.from_flat([2], [0.5, 0.5]), 0) == pytest.approx(math.log(2), abs=1e-5)

    def test_floor_prevents_infinity(self):
        value = cross_entropy(Tensor.from_flat([2], [0.0, 1.0]), 0)
        assert value == pytest.approx(-math.log(1e-12), rel=1e-6)
        assert math.isfinite(value)

    def test_label_out_of_range(self):
        with pytest.raises(RangeError):
            cross_entropy(Tensor.from_flat([2], [0.5, 0.5]), 2)


class TestInputGradient:
    def test_single_feature_analytic_value(self):
        model = one_feature_model()
        grad = input_gradient(model, Tensor.from_flat([1, 1, 1], [0.1]), 0)
        p0 = 1.0 / (1.0 + math.exp(-0.2))  # sigma(0.2)
        expected = (p0 - 1.0) - (1.0 - p0)
        assert grad.shape == (1, 1, 1)
        assert float(grad.array.reshape(-1)[0]) == pytest.approx(expected, abs=1e-5)
        assert float(grad.array.reshape(-1)[0]) == pytest.approx(-0.90033, abs=1e-4)

    def test_single_feature_matches_finite_differences(self):
        model = one_feature_model()
        x = np.array([[[0.1]]], dtype=np.float32)
        fd = oracles.central_difference(engine_loss(model, 0), x.astype(np.float64), 1e-3)
        grad = input_gradient(model, Tensor(x), 0)
        assert float(grad.array[0, 0, 0]) == pytest.approx(float(fd[0, 0, 0]), abs=1e-3)

    def test_antisymmetric_under_label_swap_at_boundary(self):
        model = one_feature_model()
        x = Tensor.from_flat([1, 1, 1], [0.0])  # logits [0, 0]: exactly on the boundary
        g0 = input_gradient(model, x, 0).array
        g1 = input_gradient(model, x, 1).array
        assert np.allclose(g0, -g1, atol=1e-7)

    def test_dead_relu_gives_zero_gradient(self):
        model = dead_relu_model()
        grad = input_gradient(model, Tensor.full([1, 3, 3], 0.5), 0)
        assert np.all(grad.array == 0.0)

    def test_requires_softmax_head(self):
        rng = np.random.default_rng(9)
        model = random_model(rng, softmax_head=False)
        with pytest.raises(UnsupportedModelError):
            input_gradient(model, random_input(rng, model.input_shape), 0)

    def test_label_out_of_range(self):
        model = one_feature_model()
        with pytest.raises(RangeError):
            input_gradient(model, Tensor.from_flat([1, 1, 1], [0.1]), 7)

    def test_matches_finite_differences_on_random_models(self):
        h = 1e-2
        total = excluded = 0
        for seed in range(12):
            rng = np.random.default_rng(6000 + seed)
            model = gradient_check_model(rng)
            label = int(rng.integers(0, model.layers[-1].out_features))
            x = random_input(rng, model.input_shape, lo=0.05, hi=0.95)
            grad = input_gradient(model, x, label).array
            loss = engine_loss(model, label)
            fd = oracles.central_difference(loss, x.array.astype(np.float64), h)

            base_pattern = oracles.decision_pattern(model, x.array)
            flat = x.array.reshape(-1)
            for i in range(flat.size):
                total += 1
                probe = flat.copy()
                probe[i] = flat[i] + h
                hi_pat = oracles.decision_pattern(model, probe.reshape(x.shape))
                probe[i] = flat[i] - h
                lo_pat = oracles.decision_pattern(model, probe.reshape(x.shape))
                if hi_pat != base_pattern or lo_pat != base_pattern:
                    excluded += 1
                    continue
                got = float(grad.reshape(-1)[i])
                want = float(fd.reshape(-1)[i])
                assert abs(got - want) <= max(1e-3, 1e-2 * abs(want)), (
                    f"seed {seed} element {i}: engine {got} vs finite difference {want}"
                )
        assert excluded < 0.05 * total


class TestSaliency:
    def test_dead_relu_map_is_zero(self):
        model = dead_relu_model()
        result = saliency(model, Tensor.full([1, 3, 3], 0.5), 0)
        assert np.all(result.values.array == 0.0)

    def test_single_feature_magnitude(self):
        model = one_feature_model()
        result = saliency(model, Tensor.from_flat([1, 1, 1], [0.1]), 0)
        assert result.values.shape == (1, 1)
        assert float(result.values.array[0, 0]) == pytest.approx(0.90033, abs=1e-4)

    def test_shape_matches_input_spatial_shape(self, rng):
        model = random_model(rng)
        x = random_input(rng, model.input_shape)
        result = saliency(model, x, 0)
        assert result.values.shape == model.input_shape[1:]

    def test_reduces_channels_by_max(self):
        rng = np.random.default_rng(31)
        specs = (FlattenSpec(), DenseSpec(out_features=2, activation=Activation.SOFTMAX))
        model = fill_weights("rgbish", (3, 2, 2), specs, rng)
        x = random_input(rng, (3, 2, 2))
        grad = input_gradient(model, x, 1)
        result = saliency(model, x, 1)
        assert np.allclose(result.values.array, np.abs(grad.array).max(axis=0))
