"""FGSM/BIM behavior: perturbation bounds, clamping, reduction, and efficacy."""

import math

import numpy as np
import pytest

from conftest import fill_weights, one_feature_model, random_input
from nvis.attacks import Algorithm, AttackSpec, bim, fgsm
from nvis.engine import forward, predict
from nvis.errors import RangeError
from nvis.gradients import cross_entropy, input_gradient
from nvis.model import Activation, Conv2DSpec, DenseSpec, FlattenSpec, Model
from nvis.tensor import Tensor


def boundary_model():
    """Two-class affine model whose decision boundary sits at x = 0.5."""
    return one_feature_model(bias0=-0.5, bias1=0.5)


def affine_softmax_model(seed):
    rng = np.random.default_rng(seed)
    specs = (FlattenSpec(), DenseSpec(out_features=3, activation=Activation.SOFTMAX))
    return fill_weights("affine", (1, 3, 3), specs, rng)


def dead_relu_attack_model():
    rng = np.random.default_rng(12)
    specs = (
        Conv2DSpec(out_channels=2, kernel_h=2, kernel_w=2, activation=Activation.RELU),
        FlattenSpec(),
        DenseSpec(out_features=2, activation=Activation.SOFTMAX),
    )
    model = fill_weights("dead", (1, 3, 3), specs, rng)
    weights = dict(model.weights)
    weights[0] = (weights[0][0], Tensor.from_flat([2], [-9.0, -9.0]))
    return Model(model.name, model.input_shape, model.layers, weights)


class TestAttackSpec:
    def test_document_round_trip(self):
        spec = AttackSpec(algorithm=Algorithm.BIM, epsilon=0.1, true_label=3, steps=5, step_size=0.02)
        assert AttackSpec.from_doc(spec.to_doc()) == spec

    def test_fgsm_doc_omits_iteration_fields(self):
        spec = AttackSpec(algorithm=Algorithm.FGSM, epsilon=0.2, true_label=1)
        assert spec.to_doc() == {"algorithm": "fgsm", "epsilon": 0.2, "true_label": 1}

    def test_validate_rejects_zero_epsilon(self):
        with pytest.raises(RangeError):
            AttackSpec(algorithm=Algorithm.FGSM, epsilon=0.0, true_label=0).validate()

    def test_validate_rejects_epsilon_above_one(self):
        with pytest.raises(RangeError):
            AttackSpec(algorithm=Algorithm.FGSM, epsilon=1.5, true_label=0).validate()

    def test_validate_rejects_label_beyond_classes(self):
        with pytest.raises(RangeError):
            AttackSpec(algorithm=Algorithm.FGSM, epsilon=0.1, true_label=4).validate(n_classes=2)

    def test_validate_bim_needs_positive_schedule(self):
        with pytest.raises(RangeError):
            AttackSpec(algorithm=Algorithm.BIM, epsilon=0.1, true_label=0, steps=0, step_size=0.1).validate()
        with pytest.raises(RangeError):
            AttackSpec(algorithm=Algorithm.BIM, epsilon=0.1, true_label=0, steps=2, step_size=0.0).validate()


class TestFGSM:
    def test_preclamp_perturbation_is_exactly_epsilon_or_zero(self):
        model = affine_softmax_model(81)
        rng = np.random.default_rng(82)
        x = random_input(rng, model.input_shape, lo=0.3, hi=0.7)
        eps = 0.05
        spec = AttackSpec(algorithm=Algorithm.FGSM, epsilon=eps, true_label=0)
        adv = fgsm(model, x, spec)
        step = np.float32(eps) * np.sign(input_gradient(model, x, 0).array)
        assert set(np.unique(np.abs(step))) <= {np.float32(0.0), np.float32(eps)}
        want = np.clip(x.array + step, np.float32(0.0), np.float32(1.0))
        assert adv.array.tobytes() == want.tobytes()

    def test_clamped_into_unit_interval(self):
        model = affine_softmax_model(83)
        rng = np.random.default_rng(84)
        for _ in range(5):
            x = random_input(rng, model.input_shape)
            spec = AttackSpec(algorithm=Algorithm.FGSM, epsilon=0.9, true_label=1)
            adv = fgsm(model, x, spec)
            assert float(adv.array.min()) >= 0.0
            assert float(adv.array.max()) <= 1.0

    def test_zero_epsilon_is_identity(self):
        model = boundary_model()
        x = Tensor.from_flat([1, 1, 1], [0.4])
        spec = AttackSpec(algorithm=Algorithm.FGSM, epsilon=0.0, true_label=1)
        assert fgsm(model, x, spec).tobytes() == x.tobytes()

    def test_zero_gradient_is_identity(self):
        model = dead_relu_attack_model()
        x = Tensor.full([1, 3, 3], 0.5)
        spec = AttackSpec(algorithm=Algorithm.FGSM, epsilon=0.2, true_label=0)
        assert fgsm(model, x, spec).tobytes() == x.tobytes()

    def test_flips_prediction_near_boundary(self):
        model = boundary_model()
        spec_eps = 0.3
        for value in np.linspace(0.26, 0.74, 25):
            x = Tensor.from_flat([1, 1, 1], [float(value)])
            label, _ = predict(model, x)
            spec = AttackSpec(algorithm=Algorithm.FGSM, epsilon=spec_eps, true_label=label)
            adv = fgsm(model, x, spec)
            flipped, _ = predict(model, adv)
            assert flipped != label, f"no flip at x={value}"

    def test_loss_never_decreases_on_affine_models(self):
        for seed in range(10):
            model = affine_softmax_model(800 + seed)
            rng = np.random.default_rng(900 + seed)
            x = random_input(rng, model.input_shape, lo=0.1, hi=0.9)
            label = int(rng.integers(0, 3))
            spec = AttackSpec(algorithm=Algorithm.FGSM, epsilon=0.05, true_label=label)
            adv = fgsm(model, x, spec)
            before = cross_entropy(forward(model, x).final_probs, label)
            after = cross_entropy(forward(model, adv).final_probs, label)
            assert after >= before - 1e-7


class TestBIM:
    def test_single_step_equals_fgsm_bitwise(self):
        model = affine_softmax_model(85)
        rng = np.random.default_rng(86)
        x = random_input(rng, model.input_shape)
        eps = 0.12
        adv_fgsm = fgsm(model, x, AttackSpec(algorithm=Algorithm.FGSM, epsilon=eps, true_label=2))
        adv_bim = bim(
            model, x, AttackSpec(algorithm=Algorithm.BIM, epsilon=eps, true_label=2, steps=1, step_size=eps)
        )
        assert adv_bim.tobytes() == adv_fgsm.tobytes()

    def test_respects_linf_ball(self):
        model = affine_softmax_model(87)
        rng = np.random.default_rng(88)
        for _ in range(5):
            x = random_input(rng, model.input_shape)
            eps = 0.1
            spec = AttackSpec(algorithm=Algorithm.BIM, epsilon=eps, true_label=0, steps=7, step_size=0.03)
            adv = bim(model, x, spec)
            assert float(np.max(np.abs(adv.array - x.array))) <= eps + 1e-6
            assert float(adv.array.min()) >= 0.0 and float(adv.array.max()) <= 1.0

    def test_many_steps_at_least_as_damaging_as_fgsm(self):
        model = affine_softmax_model(89)
        rng = np.random.default_rng(90)
        x = random_input(rng, model.input_shape, lo=0.2, hi=0.8)
        label = 1
        eps = 0.08
        adv_fgsm = fgsm(model, x, AttackSpec(algorithm=Algorithm.FGSM, epsilon=eps, true_label=label))
        adv_bim = bim(
            model,
            x,
            AttackSpec(algorithm=Algorithm.BIM, epsilon=eps, true_label=label, steps=8, step_size=eps / 4),
        )
        p_fgsm = float(forward(model, adv_fgsm).final_probs.array[label])
        p_bim = float(forward(model, adv_bim).final_probs.array[label])
        assert p_bim <= p_fgsm + 1e-6
