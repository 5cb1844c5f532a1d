"""Traced forward execution and filter-freezing semantics.

The freeze checks are bitwise: zeroing a filter's output channel must make
the next convolution equal the exclusion sum over the surviving channels
exactly, because zero summands are exact under the engine's fixed
accumulation order.
"""

import numpy as np
import pytest

import oracles
from conftest import fill_weights, random_input, random_model, tiny_symmetric_model
from nvis.engine import FreezeConfig, forward, inner_output, mutate_output, predict, prepare_input
from nvis.errors import InvalidConfigError, InvalidInputError, ParseError, RangeError
from nvis.model import Activation, Conv2DSpec, DenseSpec, FlattenSpec, Model, extract_layers
from nvis.tensor import Tensor


def conv_pair_model(seed):
    """Random model whose first two layers are convolutions (freeze target + observer)."""
    rng = np.random.default_rng(seed)
    return random_model(rng, conv_pair=True), rng


class TestForward:
    def test_symmetric_model_splits_probability(self):
        model = tiny_symmetric_model()
        trace = forward(model, Tensor.zeros([1, 2, 2]))
        assert trace.final_probs.tolist() == [0.5, 0.5]
        assert trace.predicted_class == 0

    def test_trace_shapes_match_inferred_shapes(self):
        for seed in range(10):
            rng = np.random.default_rng(4000 + seed)
            model = random_model(rng)
            trace = forward(model, random_input(rng, model.input_shape))
            infos = extract_layers(model)
            assert [t.shape for t in trace.per_layer] == [i.output_shape for i in infos]

    def test_per_layer_outputs_match_naive_composition(self):
        for seed in range(20):
            rng = np.random.default_rng(4100 + seed)
            model = random_model(rng)
            x = random_input(rng, model.input_shape)
            trace = forward(model, x)
            expected = oracles.forward_layers(model, x.array)
            for got, want in zip(trace.per_layer, expected):
                assert got.shape == want.shape
                assert np.max(np.abs(got.array - want)) < 1e-5

    def test_rejects_wrong_shape(self):
        model = tiny_symmetric_model()
        with pytest.raises(InvalidInputError):
            forward(model, Tensor.zeros([1, 3, 3]))

    def test_rejects_out_of_range_values(self):
        model = tiny_symmetric_model()
        with pytest.raises(InvalidInputError):
            forward(model, Tensor.from_flat([1, 2, 2], [0.0, 0.5, 1.5, 0.0]))
        with pytest.raises(InvalidInputError):
            forward(model, Tensor.from_flat([1, 2, 2], [-0.1, 0.5, 0.5, 0.0]))


class TestInnerOutput:
    def test_flatten_order_is_row_major(self):
        model = tiny_symmetric_model()
        out = inner_output(model, Tensor.from_flat([1, 2, 2], [1, 2, 3, 4]), 0)
        assert out.tolist() == [1, 2, 3, 4]

    def test_conv_layer_matches_kernel_plus_activation(self):
        rng = np.random.default_rng(5)
        specs = (
            Conv2DSpec(out_channels=2, kernel_h=2, kernel_w=2, activation=Activation.RELU),
            FlattenSpec(),
            DenseSpec(out_features=2, activation=Activation.SOFTMAX),
        )
        model = fill_weights("conv", (1, 4, 4), specs, rng)
        x = random_input(rng, (1, 4, 4))
        out = inner_output(model, x, 0)
        wt, bias = model.weights[0]
        want = oracles.relu(oracles.conv2d(x.array, wt.array, bias.array, 1, "valid"))
        assert np.max(np.abs(out.array - want)) < 1e-5

    def test_relu_dense_all_negative_preactivation(self):
        specs = (FlattenSpec(), DenseSpec(out_features=3, activation=Activation.RELU))
        wt = Tensor.from_flat([3, 2], [-1, -1, -2, -1, -1, -3])
        bias = Tensor.from_flat([3], [-0.5, -0.5, -0.5])
        model = Model("neg", (1, 1, 2), (specs[0], specs[1]), {1: (wt, bias)})
        out = inner_output(model, Tensor.from_flat([2], [0.5, 0.5]), 1)
        assert out.tolist() == [0, 0, 0]

    def test_bad_index_is_range_error(self):
        model = tiny_symmetric_model()
        with pytest.raises(RangeError):
            inner_output(model, Tensor.zeros([1, 2, 2]), 5)


class TestPrepareInput:
    def _structure(self, model):
        return extract_layers(model)

    def test_empty_config_returns_same_object(self):
        model, rng = conv_pair_model(60)
        out = random_input(rng, self._structure(model)[0].output_shape)
        result = prepare_input(out, FreezeConfig.empty(), self._structure(model), 0)
        assert result is out

    def test_freeze_all_filters_zeroes_tensor(self):
        model, rng = conv_pair_model(61)
        info = self._structure(model)[0]
        out = random_input(rng, info.output_shape)
        config = FreezeConfig({0: tuple(range(info.filter_count))})
        result = prepare_input(out, config, self._structure(model), 0)
        assert np.all(result.array == 0.0)

    def test_partial_freeze_leaves_other_channels_bitwise(self):
        model, rng = conv_pair_model(62)
        info = self._structure(model)[0]
        out = random_input(rng, info.output_shape)
        config = FreezeConfig({0: (0,)})
        result = prepare_input(out, config, self._structure(model), 0)
        assert np.all(result.array[0] == 0.0)
        assert result.array[1:].tobytes() == out.array[1:].tobytes()

    def test_filter_out_of_range_is_config_error(self):
        model, _ = conv_pair_model(63)
        info = self._structure(model)[0]
        out = Tensor.zeros(info.output_shape)
        with pytest.raises(InvalidConfigError):
            prepare_input(out, FreezeConfig({0: (info.filter_count,)}), self._structure(model), 0)


class TestMutateOutput:
    def test_empty_config_bitwise_equals_forward(self):
        for seed in range(25):
            rng = np.random.default_rng(4200 + seed)
            model = random_model(rng)
            x = random_input(rng, model.input_shape)
            plain = forward(model, x)
            mutated = mutate_output(model, x, FreezeConfig.empty())
            for a, b in zip(plain.per_layer, mutated.per_layer):
                assert a.tobytes() == b.tobytes()
            assert plain.predicted_class == mutated.predicted_class

    def test_exclusion_sum_equivalence_bitwise(self):
        hits = 0
        for seed in range(30):
            model, rng = conv_pair_model(4300 + seed)
            first = model.layers[0]
            assert isinstance(model.layers[1], Conv2DSpec)
            k = int(rng.integers(0, first.out_channels))
            x = random_input(rng, model.input_shape)

            frozen_trace = mutate_output(model, x, FreezeConfig({0: (k,)}))
            plain_trace = forward(model, x)

            wt, bias = model.weights[1]
            spec = model.layers[1]
            want = oracles.conv2d_f32_excluding(
                plain_trace.per_layer[0].array,
                wt.array,
                bias.array,
                spec.stride,
                spec.padding.value,
                skip_channel=k,
            )
            if spec.activation is Activation.RELU:
                want = np.maximum(want, np.float32(0.0))
            got = frozen_trace.per_layer[1]
            assert got.array.tobytes() == want.tobytes()
            hits += 1
        assert hits == 30

    def test_freeze_all_first_layer_zero_bias_propagates_zeros(self):
        rng = np.random.default_rng(77)
        specs = (
            Conv2DSpec(out_channels=3, kernel_h=3, kernel_w=3, activation=Activation.RELU),
            Conv2DSpec(out_channels=2, kernel_h=2, kernel_w=2, activation=Activation.RELU),
            FlattenSpec(),
            DenseSpec(out_features=2, activation=Activation.NONE),
        )
        model = fill_weights("bias-free", (1, 6, 6), specs, rng)
        # Zero every bias so the frozen front layer forces zeros all the way down.
        weights = {
            i: (wt, Tensor.zeros(bias.shape)) for i, (wt, bias) in model.weights.items()
        }
        final_bias = Tensor.from_flat([2], [0.25, -0.75])
        weights[3] = (weights[3][0], final_bias)
        model = Model(model.name, model.input_shape, model.layers, weights)

        x = random_input(rng, model.input_shape)
        trace = mutate_output(model, x, FreezeConfig({0: (0, 1, 2)}))
        assert np.all(trace.per_layer[0].array == 0.0)
        assert np.all(trace.per_layer[1].array == 0.0)
        assert np.all(trace.per_layer[2].array == 0.0)
        assert trace.per_layer[3].tolist() == [0.25, -0.75]

    def test_monotone_freezing_zero_channels_subset(self):
        for seed in range(10):
            model, rng = conv_pair_model(4400 + seed)
            first = model.layers[0]
            all_filters = list(range(first.out_channels))
            small = tuple(sorted(rng.choice(all_filters, size=max(1, first.out_channels // 2), replace=False).tolist()))
            big = tuple(sorted(set(small) | {int(rng.integers(0, first.out_channels))}))
            x = random_input(rng, model.input_shape)
            t_small = mutate_output(model, x, FreezeConfig({0: small}))
            t_big = mutate_output(model, x, FreezeConfig({0: big}))
            zeros_small = {c for c in all_filters if np.all(t_small.per_layer[0].array[c] == 0.0)}
            zeros_big = {c for c in all_filters if np.all(t_big.per_layer[0].array[c] == 0.0)}
            assert zeros_small <= zeros_big

    def test_freeze_locality_upstream_layers_untouched(self):
        for seed in range(10):
            rng = np.random.default_rng(4500 + seed)
            model = random_model(rng, conv_pair=True)
            conv_indices = [i for i, s in enumerate(model.layers) if isinstance(s, Conv2DSpec)]
            target = conv_indices[-1]
            spec = model.layers[target]
            x = random_input(rng, model.input_shape)
            plain = forward(model, x)
            frozen = mutate_output(model, x, FreezeConfig({target: (0,)}))
            for i in range(target):
                assert plain.per_layer[i].tobytes() == frozen.per_layer[i].tobytes()

    def test_freeze_on_non_conv_layer_rejected(self):
        model = tiny_symmetric_model()
        with pytest.raises(InvalidConfigError):
            mutate_output(model, Tensor.zeros([1, 2, 2]), FreezeConfig({1: (0,)}))

    def test_freeze_filter_out_of_range_rejected(self):
        model, _ = conv_pair_model(88)
        first = model.layers[0]
        x = Tensor.zeros(model.input_shape)
        with pytest.raises(InvalidConfigError):
            mutate_output(model, x, FreezeConfig({0: (first.out_channels + 3,)}))


class TestPredict:
    def test_tie_breaks_to_lowest_class(self):
        model = tiny_symmetric_model()
        label, probs = predict(model, Tensor.zeros([1, 2, 2]))
        assert label == 0
        assert probs.tolist() == [0.5, 0.5]

    def test_matches_forward(self, rng):
        model = random_model(rng)
        x = random_input(rng, model.input_shape)
        label, probs = predict(model, x)
        trace = forward(model, x)
        assert label == trace.predicted_class
        assert probs == trace.final_probs


class TestFreezeConfigDocument:
    def test_round_trip(self):
        config = FreezeConfig({2: (0, 3), 0: (1,)})
        doc = config.to_doc()
        assert doc == {"freezes": [{"layer": 0, "filters": [1]}, {"layer": 2, "filters": [0, 3]}]}
        assert FreezeConfig.from_doc(doc) == config

    def test_rejects_unsorted_filters(self):
        with pytest.raises(ParseError):
            FreezeConfig.from_doc({"freezes": [{"layer": 0, "filters": [3, 1]}]})

    def test_rejects_duplicate_layer(self):
        with pytest.raises(ParseError):
            FreezeConfig.from_doc(
                {"freezes": [{"layer": 0, "filters": [0]}, {"layer": 0, "filters": [1]}]}
            )

    def test_empty_doc_is_empty_config(self):
        assert FreezeConfig.from_doc({"freezes": []}).is_empty()
