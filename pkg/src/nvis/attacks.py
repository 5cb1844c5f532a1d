"""Gradient-sign adversarial input generation: FGSM and its iterated form BIM.

Both attacks maximize the cross-entropy of the true label, stay inside the
L-inf ball of radius epsilon around the starting input, and clamp back into
the valid pixel domain [0, 1]. With steps=1 and step_size=epsilon, BIM
reduces to FGSM bitwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, RangeError, UnsupportedConfigurationError
from .gradients import input_gradient
from .model import Model
from .tensor import Tensor

__all__ = ["Algorithm", "AttackSpec", "fgsm", "bim"]


class Algorithm(enum.Enum):
    FGSM = "fgsm"
    BIM = "bim"


@dataclass(frozen=True)
class AttackSpec:
    """Attack request: algorithm, L-inf budget, iteration schedule, true label.

    FGSM ignores steps/step_size. ``validate`` enforces the production ranges
    (epsilon in (0, 1], steps >= 1, step_size > 0); the attack functions
    themselves tolerate epsilon == 0 so degenerate identity cases can be
    exercised directly.
    """

    algorithm: Algorithm
    epsilon: float
    true_label: int
    steps: int = 1
    step_size: float = 0.0

    def validate(self, n_classes: int | None = None) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise RangeError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not 0 <= self.true_label:
            raise RangeError(f"true_label must be >= 0, got {self.true_label}")
        if n_classes is not None and self.true_label >= n_classes:
            raise RangeError(f"true_label {self.true_label} out of range [0, {n_classes})")
        if self.algorithm is Algorithm.BIM:
            if self.steps < 1:
                raise RangeError(f"steps must be >= 1, got {self.steps}")
            if not self.step_size > 0.0:
                raise RangeError(f"step_size must be > 0, got {self.step_size}")

    def to_doc(self) -> dict:
        doc = {
            "algorithm": self.algorithm.value,
            "epsilon": self.epsilon,
            "true_label": self.true_label,
        }
        if self.algorithm is Algorithm.BIM:
            doc["steps"] = self.steps
            doc["step_size"] = self.step_size
        return doc

    @classmethod
    def from_doc(cls, doc) -> "AttackSpec":
        if not isinstance(doc, dict):
            raise ParseError(f"attack spec must be an object, got {doc!r}", "$")
        algorithm = doc.get("algorithm")
        if algorithm not in ("fgsm", "bim"):
            raise ParseError(f"algorithm must be 'fgsm' or 'bim', got {algorithm!r}", "$.algorithm")
        for key in ("epsilon",):
            if key not in doc or not isinstance(doc[key], (int, float)) or isinstance(doc[key], bool):
                raise ParseError(f"'{key}' must be a number", f"$.{key}")
        label = doc.get("true_label")
        if isinstance(label, bool) or not isinstance(label, int):
            raise ParseError("'true_label' must be an integer", "$.true_label")
        steps = doc.get("steps", 1)
        if isinstance(steps, bool) or not isinstance(steps, int):
            raise ParseError("'steps' must be an integer", "$.steps")
        step_size = doc.get("step_size", 0.0)
        if isinstance(step_size, bool) or not isinstance(step_size, (int, float)):
            raise ParseError("'step_size' must be a number", "$.step_size")
        return cls(
            algorithm=Algorithm(algorithm),
            epsilon=float(doc["epsilon"]),
            true_label=label,
            steps=steps,
            step_size=float(step_size),
        )


def _signed_step(model: Model, x: Tensor, label: int, magnitude: float) -> np.ndarray:
    grad = input_gradient(model, x, label)
    return np.float32(magnitude) * np.sign(grad.array)


def fgsm(model: Model, input: Tensor, spec: AttackSpec) -> Tensor:
    """One signed-gradient ascent step of size epsilon, clamped to [0, 1]."""
    if spec.algorithm is not Algorithm.FGSM:
        raise UnsupportedConfigurationError(f"fgsm called with algorithm {spec.algorithm.value}")
    perturbed = input.array + _signed_step(model, input, spec.true_label, spec.epsilon)
    return Tensor(np.clip(perturbed, np.float32(0.0), np.float32(1.0)), _unchecked=True)


def bim(model: Model, input: Tensor, spec: AttackSpec) -> Tensor:
    """Iterated FGSM, re-projected into the epsilon ball around the original input."""
    if spec.algorithm is not Algorithm.BIM:
        raise UnsupportedConfigurationError(f"bim called with algorithm {spec.algorithm.value}")
    x0 = input.array
    lo = x0 - np.float32(spec.epsilon)
    hi = x0 + np.float32(spec.epsilon)
    x = input
    for _ in range(spec.steps):
        stepped = x.array + _signed_step(model, x, spec.true_label, spec.step_size)
        projected = np.clip(stepped, lo, hi)
        x = Tensor(np.clip(projected, np.float32(0.0), np.float32(1.0)), _unchecked=True)
    return x


def run_attack(model: Model, input: Tensor, spec: AttackSpec) -> Tensor:
    if spec.algorithm is Algorithm.FGSM:
        return fgsm(model, input, spec)
    return bim(model, input, spec)
