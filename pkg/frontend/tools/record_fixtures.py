#!/usr/bin/env python3
"""Record a real service session for the UI audit tests.

Drives the scripted workflow (upload model, sketch an input, trace, freeze
two filters, generate an FGSM sample, compare original vs adversarial at a
conv layer, saliency) against an in-process service instance and dumps every
request/response pair to tests/fixtures/session.json. The vitest suite
replays these exchanges through a stubbed fetch, so everything the UI shows
can be checked against what the service actually said.

Usage: python3 tools/record_fixtures.py
"""

import base64
import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from nvis.format import serialize_model
from nvis.model import Activation, Conv2DSpec, DenseSpec, FlattenSpec, MaxPool2DSpec, Model
from nvis.render import render_feature_map, to_png
from nvis.service import create_app
from nvis.tensor import Tensor

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

FROZEN = [[0, 0], [0, 2]]  # the two filters the scripted session freezes


def build_model() -> Model:
    rng = np.random.default_rng(20240819)
    specs = (
        Conv2DSpec(out_channels=3, kernel_h=3, kernel_w=3, activation=Activation.RELU),
        MaxPool2DSpec(pool_h=2, pool_w=2, stride=2),
        Conv2DSpec(out_channels=4, kernel_h=2, kernel_w=2, activation=Activation.RELU),
        FlattenSpec(),
        DenseSpec(out_features=3, activation=Activation.SOFTMAX),
    )
    weights = {}
    shapes = {0: ((3, 1, 3, 3), 9), 2: ((4, 3, 2, 2), 12), 4: ((3, 16), 16)}
    model = Model("ui-session", (1, 8, 8), specs, {})
    from nvis.model import infer_shapes

    inferred = infer_shapes(model)
    input_shapes = [(1, 8, 8)] + inferred[:-1]
    for i, spec in enumerate(specs):
        if isinstance(spec, Conv2DSpec):
            cin = input_shapes[i][0]
            shape = (spec.out_channels, cin, spec.kernel_h, spec.kernel_w)
            fan_in = cin * spec.kernel_h * spec.kernel_w
        elif isinstance(spec, DenseSpec):
            shape = (spec.out_features, input_shapes[i][0])
            fan_in = input_shapes[i][0]
        else:
            continue
        wt = (rng.uniform(-1, 1, size=shape) / np.sqrt(fan_in)).astype(np.float32)
        bias = rng.uniform(-0.2, 0.2, size=shape[0]).astype(np.float32)
        weights[i] = (Tensor(wt), Tensor(bias))
    return Model("ui-session", (1, 8, 8), specs, weights)


def sketch_pixels() -> list[float]:
    """A hand-drawn-looking vertical stroke on the 8x8 pad."""
    grid = np.zeros((8, 8), dtype=np.float32)
    grid[1:7, 4] = 1.0
    grid[1, 3] = 1.0
    grid[6, 3:6] = 1.0
    return [float(v) for v in grid.reshape(-1)]


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    model = build_model()
    manifest, blob = serialize_model(model)
    exchanges = []

    with tempfile.TemporaryDirectory() as data_dir:
        client = TestClient(create_app(data_dir))

        def record(name, method, path, body=None):
            if method == "GET":
                response = client.get(path)
            else:
                response = client.post(path, json=body)
            assert response.status_code == 200, f"{name}: {response.status_code} {response.text}"
            exchanges.append(
                {
                    "name": name,
                    "method": method,
                    "path": path,
                    "request": body,
                    "status": response.status_code,
                    "response": response.json(),
                }
            )
            return response.json()

        upload_body = {
            "manifest": manifest.decode("utf-8"),
            "weights_b64": base64.b64encode(blob).decode("ascii"),
        }
        entry = record("upload_model", "POST", "/models", upload_body)
        model_id = entry["id"]
        record("list_models", "GET", "/models")
        record("get_model", "GET", f"/models/{model_id}")

        pixels = sketch_pixels()
        sketch = record("sketch", "POST", f"/models/{model_id}/sketch", {"pixels": pixels})
        record("list_inputs_after_sketch", "GET", f"/models/{model_id}/inputs")

        plain_trace = record(
            "trace_plain",
            "POST",
            f"/models/{model_id}/trace",
            {"input_id": sketch["id"], "freeze": {"freezes": []}},
        )

        freeze_doc = {"freezes": [{"layer": 0, "filters": [f for _, f in FROZEN]}]}
        frozen_trace = record(
            "trace_frozen",
            "POST",
            f"/models/{model_id}/trace",
            {"input_id": sketch["id"], "freeze": freeze_doc},
        )

        attack_body = {
            "input_id": sketch["id"],
            "spec": {
                "algorithm": "fgsm",
                "epsilon": 0.25,
                "true_label": plain_trace["predicted_class"],
            },
        }
        adversarial = record("attack", "POST", f"/models/{model_id}/attack", attack_body)
        record("list_inputs_after_attack", "GET", f"/models/{model_id}/inputs")

        record(
            "compare",
            "POST",
            f"/models/{model_id}/compare",
            {
                "input_a": sketch["id"],
                "input_b": adversarial["id"],
                "layer_index": 2,
                "freeze": freeze_doc,
            },
        )

        record(
            "saliency",
            "POST",
            f"/models/{model_id}/saliency",
            {"input_id": sketch["id"], "label": plain_trace["predicted_class"]},
        )

        # Frozen filters must render as the degenerate constant-gray map: the
        # same PNG a genuinely all-zero channel produces.
        frozen_renders = {}
        for layer, filt in FROZEN:
            render_id = frozen_trace["layers"][layer]["render_ids"][filt]
            png = client.get(f"/renders/{render_id}")
            assert png.status_code == 200
            frozen_renders[f"{layer}:{filt}"] = base64.b64encode(png.content).decode("ascii")
        layer_shape = tuple(frozen_trace["layers"][FROZEN[0][0]]["output_shape"])
        zero_png = to_png(render_feature_map(Tensor.zeros(layer_shape), 0))

    payload = {
        "frozen_filters": FROZEN,
        "sketch_pixels": pixels,
        "exchanges": exchanges,
        "frozen_render_pngs_b64": frozen_renders,
        "zero_render_png_b64": base64.b64encode(zero_png).decode("ascii"),
    }
    out = FIXTURES / "session.json"
    out.write_text(json.dumps(payload, indent=1))
    print(f"wrote {out} ({len(exchanges)} exchanges)")


if __name__ == "__main__":
    main()
